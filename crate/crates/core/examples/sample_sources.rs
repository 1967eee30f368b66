//! Draws from both sources with a seeded stream and checks their energies:
//! `E‖Z‖² = 1` on the circle, mean squared ramp sample near `1/12`.
//!
//! ```text
//! cargo run --release --example sample_sources
//! ```

use manifold_ed::numeric::MeanVar;
use manifold_ed::rng::{stream, Purpose};
use manifold_ed::sources::{phase_of, sample_circle, sample_ramp};

fn main() -> manifold_ed::Result<()> {
    let mut rng = stream(0, Purpose::Test, 0);
    for _ in 0..4 {
        let z = sample_circle(&mut rng);
        println!("circle  θ = {:.4}  z = ({:+.4}, {:+.4})", z.theta, z.z[0], z.z[1]);
    }
    let signal = sample_ramp(&mut rng, 8)?;
    println!(
        "ramp    V = {:.4}  recovered {:.4}  samples {:?}",
        signal.phase,
        phase_of(&signal),
        signal.samples.iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>()
    );

    let mut energy = MeanVar::default();
    for _ in 0..100_000 {
        let s = sample_ramp(&mut rng, 64)?;
        energy.push(s.samples.iter().map(|v| v * v).sum::<f64>() / 64.0);
    }
    println!(
        "mean squared ramp sample {:.6} ± {:.6} (continuous value {:.6})",
        energy.mean(),
        energy.stderr(),
        1.0 / 12.0
    );
    Ok(())
}
