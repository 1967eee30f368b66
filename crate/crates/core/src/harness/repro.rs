//! Plot-ready CSVs for each figure, at pinned seeds.

use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use super::checked_experiment_csv;
use super::commands::run_labeled_sweep;
use super::manifest::{OutputDir, RunManifest};
use crate::analytic::ed_curves;
use crate::curve::curve_csv;
use crate::error::{invalid, Result};
use crate::neural::eval::{probe_analysis_csv, probe_synthesis_csv};
use crate::neural::train::trace_csv;
use crate::neural::{eval_hard, probe_analysis, probe_synthesis, train, DataRegime, TrainConfig};
use crate::numeric::log_space;
use crate::rng::{stream, Purpose};
use crate::sources::{SourceKind, DEFAULT_RAMP_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    /// Circle: bounds and neural curves (latent 1 and 2, small batch, fixed data).
    Fig1,
    /// Circle analysis staircase, latent 1.
    Fig2a,
    /// Circle analysis staircase, latent 2.
    Fig2b,
    /// Ramp analysis staircase at high rate.
    Fig3a,
    /// Ramp reconstruction of one sample at high rate.
    Fig3b,
    /// Ramp: bounds and neural curves.
    RampRd,
}

impl Figure {
    pub const ALL: [Figure; 6] = [
        Figure::Fig1,
        Figure::Fig2a,
        Figure::Fig2b,
        Figure::Fig3a,
        Figure::Fig3b,
        Figure::RampRd,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2a => "fig2a",
            Figure::Fig2b => "fig2b",
            Figure::Fig3a => "fig3a",
            Figure::Fig3b => "fig3b",
            Figure::RampRd => "ramp_rd",
        }
    }
}

impl FromStr for Figure {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.id() == s)
            .ok_or_else(|| invalid(format!("unknown figure `{s}`; expected one of fig1, fig2a, fig2b, fig3a, fig3b, ramp_rd")))
    }
}

/// Compute budget. `Desk` is the default; `Smoke` is a seconds-scale
/// pipeline check and `Full` the escalated budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Smoke,
    Desk,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleParams {
    pub iterations: usize,
    pub batch_size: usize,
    pub small_batch_size: usize,
    pub fixed_dataset: usize,
    pub eval_samples: usize,
    pub seeds: Vec<u64>,
    pub lambdas: Vec<f64>,
    pub bound_points: usize,
    pub probe_grid: usize,
}

impl Scale {
    pub fn params(self) -> ScaleParams {
        let powers = |step: usize| (0..=12).step_by(step).map(|e| (1u64 << e) as f64).collect();
        match self {
            Scale::Smoke => ScaleParams {
                iterations: 200,
                batch_size: 128,
                small_batch_size: 64,
                fixed_dataset: 1000,
                eval_samples: 10_000,
                seeds: vec![0],
                lambdas: powers(6),
                bound_points: 32,
                probe_grid: 1024,
            },
            Scale::Desk => ScaleParams {
                iterations: 50_000,
                batch_size: 1024,
                small_batch_size: 64,
                fixed_dataset: 1000,
                eval_samples: 1_000_000,
                seeds: vec![0],
                lambdas: powers(2),
                bound_points: 200,
                probe_grid: 1024,
            },
            Scale::Full => ScaleParams {
                iterations: 200_000,
                batch_size: 1024,
                small_batch_size: 64,
                fixed_dataset: 1000,
                eval_samples: 10_000_000,
                seeds: vec![0, 1, 2],
                lambdas: powers(1),
                bound_points: 400,
                probe_grid: 1024,
            },
        }
    }
}

#[derive(Debug, Serialize)]
struct ReproSnapshot<'a> {
    figure: &'static str,
    scale: Scale,
    params: &'a ScaleParams,
}

fn base_config(p: &ScaleParams, latent_dim: usize) -> TrainConfig {
    TrainConfig {
        iterations: p.iterations,
        batch_size: p.batch_size,
        latent_dim,
        ramp_dim: DEFAULT_RAMP_DIM,
        ..TrainConfig::default()
    }
}

fn write_bounds(dir: &mut OutputDir, source: SourceKind, points: usize) -> Result<()> {
    let lo = match source {
        SourceKind::Circle => 1e-4,
        SourceKind::Ramp => 1e-5,
    };
    let grid = log_space(lo, source.zero_rate_distortion(), points);
    let curves = ed_curves(source, &grid)?;
    dir.write("lower.csv", curve_csv(&curves.lower.points).as_bytes())?;
    dir.write("upper.csv", curve_csv(&curves.upper.points).as_bytes())?;
    Ok(())
}

fn write_curve(
    dir: &mut OutputDir,
    file: &str,
    source: SourceKind,
    base: &TrainConfig,
    p: &ScaleParams,
) -> Result<()> {
    let label = file.trim_end_matches(".csv");
    let sweep = run_labeled_sweep(dir, label, source, base, &p.lambdas, &p.seeds, p.eval_samples)?;
    dir.write(file, checked_experiment_csv(source, &sweep.hull)?.as_bytes())?;
    Ok(())
}

/// Trains one model for a probe figure and writes its checkpoint-free
/// artifacts: trace, point and the requested probe.
fn write_probe_run(
    dir: &mut OutputDir,
    source: SourceKind,
    config: &TrainConfig,
    p: &ScaleParams,
    synthesis: bool,
) -> Result<()> {
    dir.add_seeds([config.seed]);
    let out = train(config, source)?;
    dir.write("trace.csv", trace_csv(&out.trace).as_bytes())?;
    let eval = eval_hard(&out.model, p.eval_samples, config.seed)?;
    let point = eval
        .point
        .with_param("lambda", config.lambda)
        .with_param("seed", config.seed);
    dir.write("point.csv", checked_experiment_csv(source, &[point])?.as_bytes())?;
    if synthesis {
        let index = stream(config.seed, Purpose::Probe, 0).random_range(0..out.model.shape.input_dim);
        let rows = probe_synthesis(&out.model, index, p.probe_grid)?;
        dir.write("probe_synthesis.csv", probe_synthesis_csv(&rows).as_bytes())?;
    } else {
        let rows = probe_analysis(&out.model, p.probe_grid)?;
        dir.write("probe_analysis.csv", probe_analysis_csv(&rows).as_bytes())?;
    }
    Ok(())
}

fn run_figure(dir: &mut OutputDir, figure: Figure, p: &ScaleParams) -> Result<()> {
    let circle = SourceKind::Circle;
    let ramp = SourceKind::Ramp;
    match figure {
        Figure::Fig1 => {
            write_bounds(dir, circle, p.bound_points)?;
            write_curve(dir, "neural_d1.csv", circle, &base_config(p, 1), p)?;
            write_curve(dir, "neural_d2.csv", circle, &base_config(p, 2), p)?;
            let small = TrainConfig {
                batch_size: p.small_batch_size,
                ..base_config(p, 1)
            };
            write_curve(dir, "neural_small_batch.csv", circle, &small, p)?;
            let fixed = TrainConfig {
                data_regime: DataRegime::Fixed { size: p.fixed_dataset },
                ..base_config(p, 1)
            };
            write_curve(dir, "neural_fixed_data.csv", circle, &fixed, p)
        }
        Figure::Fig2a | Figure::Fig2b => {
            let latent = if figure == Figure::Fig2a { 1 } else { 2 };
            let config = TrainConfig {
                lambda: 512.0,
                seed: p.seeds[0],
                ..base_config(p, latent)
            };
            write_probe_run(dir, circle, &config, p, false)
        }
        Figure::Fig3a | Figure::Fig3b => {
            let config = TrainConfig {
                lambda: 4096.0,
                seed: p.seeds[0],
                ..base_config(p, 1)
            };
            write_probe_run(dir, ramp, &config, p, figure == Figure::Fig3b)
        }
        Figure::RampRd => {
            write_bounds(dir, ramp, p.bound_points)?;
            write_curve(dir, "neural_d1.csv", ramp, &base_config(p, 1), p)?;
            write_curve(dir, "neural_d2.csv", ramp, &base_config(p, 2), p)
        }
    }
}

/// Runs the whole pipeline of `figure` into `out`. On failure the manifest
/// still records the stage that failed.
pub fn cmd_repro(figure: Figure, scale: Scale, out: &Path) -> Result<RunManifest> {
    let params = scale.params();
    let snapshot = ReproSnapshot {
        figure: figure.id(),
        scale,
        params: &params,
    };
    let mut dir = OutputDir::create(out, "repro", &snapshot)?;
    if let Err(e) = run_figure(&mut dir, figure, &params) {
        dir.record_failure(figure.id(), &e);
        dir.finish()?;
        return Err(e);
    }
    dir.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_ids_round_trip() {
        for f in Figure::ALL {
            assert_eq!(f.id().parse::<Figure>().unwrap(), f);
        }
        assert!("fig4".parse::<Figure>().is_err());
    }

    #[test]
    fn lambda_grids() {
        assert_eq!(Scale::Desk.params().lambdas, vec![1.0, 4.0, 16.0, 64.0, 256.0, 1024.0, 4096.0]);
        assert_eq!(Scale::Desk.params().iterations, 50_000);
        assert_eq!(Scale::Desk.params().eval_samples, 1_000_000);
        assert_eq!(Scale::Smoke.params().lambdas, vec![1.0, 64.0, 4096.0]);
        assert_eq!(Scale::Full.params().lambdas.len(), 13);
    }
}
