//! Sweeps λ on the circle, keeps the lower convex hull of the evaluated
//! points and reports each point's distance to both analytic curves.
//!
//! ```text
//! cargo run --release --example lambda_sweep -- [iterations]
//! ```

use manifold_ed::harness::curves_covering;
use manifold_ed::evaluation::gap_report;
use manifold_ed::neural::{sweep_lambda, TrainConfig};
use manifold_ed::SourceKind;

fn main() -> manifold_ed::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let base = TrainConfig {
        iterations,
        batch_size: 512,
        ..TrainConfig::default()
    };
    let lambdas = [1.0, 16.0, 256.0, 4096.0];
    let result = sweep_lambda(&base, SourceKind::Circle, &lambdas, &[0], 200_000)?;
    let curves = curves_covering(SourceKind::Circle, &result.points())?;
    println!("{:>7}  {:>7}  {:>9}  {:>9}  {:>9}  hull", "lambda", "H", "D", "vs lower", "vs upper");
    for run in &result.runs {
        let p = &run.point;
        let g = gap_report(p, &curves)?;
        let on_hull = result.hull.points.iter().any(|h| h == p);
        println!(
            "{:>7}  {:>7.3}  {:>9.6}  {:>9.3}  {:>9.3}  {}",
            run.lambda,
            p.entropy_bits,
            p.distortion,
            g.vs_lower,
            g.vs_upper,
            if on_hull { "*" } else { "" }
        );
    }
    for f in &result.failures {
        println!("λ={} failed ({}): {}", f.lambda, f.category, f.message);
    }
    Ok(())
}
