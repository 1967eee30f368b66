//! Lower and upper entropy-distortion curves for the circle, with the
//! uniform K-arc quantizers that sit on the upper curve.
//!
//! ```text
//! cargo run --release --example circle_bounds
//! ```

use manifold_ed::analytic::{ed_curves, partition_ed, Partition};
use manifold_ed::numeric::log_space;
use manifold_ed::SourceKind;

fn main() -> manifold_ed::Result<()> {
    let grid = log_space(1e-4, 1.0, 13);
    let curves = ed_curves(SourceKind::Circle, &grid)?;
    println!("{:>10}  {:>9}  {:>9}  {:>8}", "D", "lower", "upper", "gap");
    for (lo, up) in curves.lower.points.iter().zip(&curves.upper.points) {
        println!(
            "{:>10.3e}  {:>9.4}  {:>9.4}  {:>8.5}",
            lo.distortion,
            lo.entropy_bits,
            up.entropy_bits,
            up.entropy_bits - lo.entropy_bits
        );
    }
    println!();
    for k in [1, 2, 4, 8, 16, 32, 64] {
        let p = partition_ed(&Partition::uniform(SourceKind::Circle, k)?);
        println!("uniform K={k:<3} H = {:.3} bits  D = {:.6}", p.entropy_bits, p.distortion);
    }
    Ok(())
}
