//! Exact quantizers evaluated in closed form and by Monte Carlo: uniform
//! arcs, biuniform arcs, the hemisphere product code and ramp phase intervals.
//!
//! ```text
//! cargo run --release --example oracle_quantizers
//! ```

use manifold_ed::analytic::Partition;
use manifold_ed::oracle::{
    oracle_ed, ArcQuantizer, HemisphereQuantizer, IntervalQuantizer, OracleMode, OracleQuantizer,
};
use manifold_ed::{EdPoint, SourceKind};

fn show(label: &str, exact: &EdPoint, mc: &EdPoint) {
    println!(
        "{label:<22} exact H {:.4} D {:.6} | MC H {:.4} ± {:.4} D {:.6} ± {:.6}",
        exact.entropy_bits,
        exact.distortion,
        mc.entropy_bits,
        mc.entropy_stderr(),
        mc.distortion,
        mc.distortion_stderr()
    );
}

fn main() -> manifold_ed::Result<()> {
    let mc = OracleMode::MonteCarlo {
        samples: 1_000_000,
        seed: 1,
    };
    let dim = 64;
    for k in [2, 8, 32] {
        let q = OracleQuantizer::Arc(ArcQuantizer::uniform(k, 0.0)?);
        show(&format!("circle uniform K={k}"), &oracle_ed(&q, OracleMode::Exact, dim)?, &oracle_ed(&q, mc, dim)?);
        let q = OracleQuantizer::Hemisphere(HemisphereQuantizer::new(k / 2)?);
        show(&format!("hemisphere k={}", k / 2), &oracle_ed(&q, OracleMode::Exact, dim)?, &oracle_ed(&q, mc, dim)?);
    }
    let p = Partition::biuniform(SourceKind::Circle, 5, 0.1)?;
    let q = OracleQuantizer::Arc(ArcQuantizer::from_partition(&p, 0.3)?);
    show("circle biuniform 5+1", &oracle_ed(&q, OracleMode::Exact, dim)?, &oracle_ed(&q, mc, dim)?);
    // Monte Carlo sees the signal at 64 sample times, the exact value is continuous time.
    for k in [1, 4, 16] {
        let q = OracleQuantizer::Interval(IntervalQuantizer::uniform(k)?);
        show(&format!("ramp uniform K={k}"), &oracle_ed(&q, OracleMode::Exact, dim)?, &oracle_ed(&q, mc, dim)?);
    }
    Ok(())
}
