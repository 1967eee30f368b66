//! Trains a circle compressor with a one-dimensional latent and compares its
//! test-time point with the analytic bounds.
//!
//! ```text
//! cargo run --release --example train_circle -- [lambda] [iterations] [batch]
//! ```

use std::time::Instant;

use manifold_ed::analytic::ed_curves;
use manifold_ed::evaluation::gap_report;
use manifold_ed::neural::{eval_hard, train, TrainConfig};
use manifold_ed::SourceKind;

fn main() -> manifold_ed::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let config = TrainConfig {
        lambda: arg(0, 512.0),
        iterations: arg(1, 5000.0) as usize,
        batch_size: arg(2, 1024.0) as usize,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let out = train(&config, SourceKind::Circle)?;
    let elapsed = start.elapsed();
    for row in out.trace.iter().step_by((out.trace.len() / 10).max(1)) {
        println!(
            "iter {:>6}  {:<6} loss {:>9.4}  rate {:>6.3}  D {:.5}",
            row.iter, row.phase, row.loss, row.rate_bits, row.distortion
        );
    }
    let eval = eval_hard(&out.model, 1_000_000, config.seed)?;
    let p = &eval.point;
    let curves = ed_curves(SourceKind::Circle, &[p.distortion])?;
    let gap = gap_report(p, &curves)?;
    println!(
        "trained {} iterations in {:.1?} ({:.2} ms/iter)",
        config.iterations,
        elapsed,
        elapsed.as_secs_f64() * 1e3 / config.iterations as f64
    );
    println!(
        "hard quantization: H = {:.4} bits (model codelength {:.4}), D = {:.6}, {} symbols",
        p.entropy_bits,
        eval.model_rate_bits,
        p.distortion,
        eval.histogram.distinct()
    );
    println!("gap to lower bound {:.4} bits, to achievable curve {:.4} bits", gap.vs_lower, gap.vs_upper);
    Ok(())
}
