//! Trains a ramp compressor and probes it over the phase: the quantized
//! encoder output (a staircase) and the reconstruction of one sample.
//! The hand-built interval model is shown alongside for reference.
//!
//! ```text
//! cargo run --release --example ramp_probe -- [lambda] [iterations]
//! ```

use manifold_ed::neural::eval::{has_staircase_defect, symbol_runs};
use manifold_ed::neural::{
    eval_hard, probe_analysis, probe_synthesis, ramp_interval_model, ramp_interval_reference, train, TrainConfig,
};
use manifold_ed::SourceKind;

fn main() -> manifold_ed::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let config = TrainConfig {
        lambda: arg(0, 4096.0),
        iterations: arg(1, 3000.0) as usize,
        ..TrainConfig::default()
    };
    let out = train(&config, SourceKind::Ramp)?;
    let eval = eval_hard(&out.model, 200_000, 0)?;
    let rows = probe_analysis(&out.model, 1024)?;
    println!(
        "trained: H {:.3} bits, D {:.6}, {} symbols, {} runs over the phase, staircase defect: {}",
        eval.point.entropy_bits,
        eval.point.distortion,
        eval.histogram.distinct(),
        symbol_runs(&rows),
        has_staircase_defect(&rows)
    );
    for (phase, v) in probe_synthesis(&out.model, 17, 32)? {
        println!("phase {phase:.4}  x̂_17 {v:+.4}");
    }

    let k = 16;
    let reference = ramp_interval_reference(k, config.ramp_dim)?;
    let hand = eval_hard(&ramp_interval_model(k, config.ramp_dim)?, 200_000, 0)?;
    println!(
        "\nhand-built k={k}: H {:.3} D {:.6} (exact {:.6})",
        hand.point.entropy_bits, hand.point.distortion, reference.distortion
    );
    Ok(())
}
