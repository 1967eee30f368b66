//! Entropy-distortion bounds for the ramp process, next to the high-rate
//! approximation `log2(1 / (6D))` of the uniform phase quantizer.
//!
//! ```text
//! cargo run --release --example ramp_bounds
//! ```

use manifold_ed::analytic::ed_curves;
use manifold_ed::numeric::log_space;
use manifold_ed::SourceKind;

fn main() -> manifold_ed::Result<()> {
    let grid = log_space(1e-5, 1.0 / 12.0, 12);
    let curves = ed_curves(SourceKind::Ramp, &grid)?;
    println!("{:>10}  {:>9}  {:>9}  {:>11}", "D", "lower", "upper", "log2(1/6D)");
    for (lo, up) in curves.lower.points.iter().zip(&curves.upper.points) {
        let d = lo.distortion;
        println!(
            "{:>10.3e}  {:>9.4}  {:>9.4}  {:>11.4}",
            d,
            lo.entropy_bits,
            up.entropy_bits,
            (1.0 / (6.0 * d)).log2().max(0.0)
        );
    }
    Ok(())
}
