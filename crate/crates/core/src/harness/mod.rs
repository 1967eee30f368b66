//! Experiment harness: configs, command implementations, figure
//! reproduction and the self-test behind the `manifold-ed` binary.
//!
//! Every command writes into one output directory and finishes with a
//! `manifest.json` listing the config snapshot, seeds, timestamps and the
//! SHA-256 of each emitted file. All files are written atomically.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod repro;
pub mod selftest;

use std::path::PathBuf;

use crate::analytic::{ed_curves, EdCurves};
use crate::curve::EdPoint;
use crate::error::Result;
use crate::evaluation::{check_converse, experiment_csv};
use crate::sources::SourceKind;

pub use commands::{cmd_bounds, cmd_oracle, cmd_probe, cmd_sweep, cmd_train};
pub use config::{
    load_config, parse_config, BoundsConfig, GridSpec, OracleConfig, ProbeConfig, ProbeModel, SweepConfig,
    TrainRunConfig, Validate,
};
pub use manifest::{OutputDir, RunManifest};
pub use repro::{cmd_repro, Figure, Scale};
pub use selftest::selftest;

/// Environment variable naming the output root.
pub const OUT_ENV: &str = "MANIFOLD_ED_OUT";

/// `$MANIFOLD_ED_OUT`, or `./out` when unset or empty.
pub fn output_root() -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("out"),
    }
}

/// Lower and upper curves evaluated at every point's distortion, and four
/// standard errors above it, so gaps and the converse check never extrapolate.
pub fn curves_covering(source: SourceKind, points: &[EdPoint]) -> Result<EdCurves> {
    let mut grid: Vec<f64> = points
        .iter()
        .flat_map(|p| [p.distortion, p.distortion + 4.0 * p.distortion_stderr()])
        .filter(|d| *d > 0.0)
        .collect();
    grid.push(source.zero_rate_distortion());
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    ed_curves(source, &grid)
}

/// Experiment CSV for `points`; fails with an anomaly if any point beats the
/// converse bound.
pub fn checked_experiment_csv(source: SourceKind, points: &[EdPoint]) -> Result<String> {
    let curves = curves_covering(source, points)?;
    for p in points {
        check_converse(p, &curves)?;
    }
    experiment_csv(points, &curves)
}
