//! The hand-built two-dimensional-latent circle compressor: one latent
//! indexes a companded grid of `cos θ`, the other carries the sign of
//! `sin θ`. Its hard-quantized performance matches `2k` uniform arcs, which
//! a one-dimensional continuous encoder cannot reach at high rate.
//!
//! ```text
//! cargo run --release --example overparam_hemisphere
//! ```

use manifold_ed::analytic::{partition_ed, Partition};
use manifold_ed::neural::{eval_hard, hemisphere_model, probe_analysis};
use manifold_ed::SourceKind;

fn main() -> manifold_ed::Result<()> {
    for k in [1, 2, 4, 8, 16, 32] {
        let model = hemisphere_model(k)?;
        let eval = eval_hard(&model, 1_000_000, k as u64)?;
        let oracle = partition_ed(&Partition::uniform(SourceKind::Circle, 2 * k)?);
        let p = &eval.point;
        println!(
            "k={k:<3} model H {:.4} D {:.6} ± {:.6}   uniform {} arcs H {:.4} D {:.6}",
            p.entropy_bits,
            p.distortion,
            p.distortion_stderr(),
            2 * k,
            oracle.entropy_bits,
            oracle.distortion
        );
    }
    let rows = probe_analysis(&hemisphere_model(4)?, 16)?;
    println!("\nangle    symbols (k=4)");
    for r in rows {
        println!("{:>6.3}   {:?}", r.param, r.symbols);
    }
    Ok(())
}
