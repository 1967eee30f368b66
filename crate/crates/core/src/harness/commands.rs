//! The `bounds`, `oracle`, `train`, `sweep` and `probe` commands.

use std::path::Path;

use super::config::{BoundsConfig, ModeKind, OracleConfig, OracleScheme, ProbeConfig, ProbeModel, SweepConfig, TrainRunConfig};
use super::manifest::{OutputDir, RunManifest};
use super::checked_experiment_csv;
use crate::analytic::{ed_curves, Partition};
use crate::curve::{curve_csv, lower_convex_hull, EdPoint};
use crate::error::{Error, Result};
use crate::neural::eval::{probe_analysis_csv, probe_synthesis_csv};
use crate::neural::sweep::SweepRun;
use crate::neural::train::trace_csv;
use crate::neural::{
    eval_hard, hemisphere_model, probe_analysis, probe_synthesis, ramp_interval_model, sweep_lambda, train,
    CompressorModel, TrainConfig,
};
use crate::oracle::{oracle_ed, ArcQuantizer, HemisphereQuantizer, IntervalQuantizer, OracleMode, OracleQuantizer};
use crate::sources::SourceKind;

/// Writes `lower.csv` and `upper.csv`, one row per grid distortion.
pub fn cmd_bounds(cfg: &BoundsConfig, out: &Path) -> Result<RunManifest> {
    let grid = cfg.grid.values()?;
    let mut dir = OutputDir::create(out, "bounds", cfg)?;
    let curves = ed_curves(cfg.source, &grid)?;
    dir.write("lower.csv", curve_csv(&curves.lower.points).as_bytes())?;
    dir.write("upper.csv", curve_csv(&curves.upper.points).as_bytes())?;
    dir.finish()
}

fn oracle_quantizers(cfg: &OracleConfig) -> Result<Vec<(OracleQuantizer, Vec<(&'static str, String)>)>> {
    let mut out = Vec::new();
    for &k in &cfg.k {
        match (cfg.scheme, cfg.source) {
            (OracleScheme::Uniform, SourceKind::Circle) => out.push((
                OracleQuantizer::Arc(ArcQuantizer::uniform(k, cfg.offset)?),
                vec![("k", k.to_string())],
            )),
            (OracleScheme::Uniform, SourceKind::Ramp) => out.push((
                OracleQuantizer::Interval(IntervalQuantizer::uniform(k)?),
                vec![("k", k.to_string())],
            )),
            (OracleScheme::Biuniform, source) => {
                for &eps in &cfg.eps {
                    let p = Partition::biuniform(source, k, eps)?;
                    let q = match source {
                        SourceKind::Circle => OracleQuantizer::Arc(ArcQuantizer::from_partition(&p, cfg.offset)?),
                        SourceKind::Ramp => OracleQuantizer::Interval(IntervalQuantizer::from_partition(&p)?),
                    };
                    out.push((q, vec![("k", k.to_string()), ("eps", eps.to_string())]));
                }
            }
            (OracleScheme::Hemisphere, _) => out.push((
                OracleQuantizer::Hemisphere(HemisphereQuantizer::new(k)?),
                vec![("k", k.to_string()), ("cells", (2 * k).to_string())],
            )),
        }
    }
    Ok(out)
}

/// Evaluates each configured quantizer and writes `oracle.csv` with gap columns.
pub fn cmd_oracle(cfg: &OracleConfig, out: &Path) -> Result<RunManifest> {
    let mut dir = OutputDir::create(out, "oracle", cfg)?;
    let mode = match cfg.mode {
        ModeKind::Exact => OracleMode::Exact,
        ModeKind::MonteCarlo => {
            dir.add_seeds([cfg.seed]);
            OracleMode::MonteCarlo {
                samples: cfg.samples,
                seed: cfg.seed,
            }
        }
    };
    let mut points = Vec::new();
    for (q, params) in oracle_quantizers(cfg)? {
        let mut p = oracle_ed(&q, mode, cfg.ramp_dim)?;
        for (k, v) in params {
            p = p.with_param(k, v);
        }
        if cfg.source == SourceKind::Ramp && cfg.mode == ModeKind::MonteCarlo {
            p = p.with_param("ramp_dim", cfg.ramp_dim);
        }
        points.push(p);
    }
    dir.write("oracle.csv", checked_experiment_csv(cfg.source, &points)?.as_bytes())?;
    dir.finish()
}

fn checkpoint_bytes(model: &CompressorModel) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    model.write_checkpoint(&mut buf)?;
    Ok(buf)
}

/// Trains one model and writes `model.ckpt`, `trace.csv`, `point.csv` and,
/// if `probe_grid > 0`, `probe_analysis.csv`. A diverged run still writes
/// its partial trace and a manifest recording the failure.
pub fn cmd_train(cfg: &TrainRunConfig, out: &Path) -> Result<RunManifest> {
    let mut dir = OutputDir::create(out, "train", cfg)?;
    dir.add_seeds([cfg.train.seed]);
    let trained = match train(&cfg.train, cfg.source) {
        Ok(t) => t,
        Err(e) => {
            if let Error::Divergence { trace, .. } = &e {
                dir.write("trace.csv", trace_csv(trace).as_bytes())?;
            }
            dir.record_failure("train", &e);
            dir.finish()?;
            return Err(e);
        }
    };
    dir.write("model.ckpt", &checkpoint_bytes(&trained.model)?)?;
    dir.write("trace.csv", trace_csv(&trained.trace).as_bytes())?;
    let eval = eval_hard(&trained.model, cfg.eval_samples, cfg.train.seed)?;
    let point = eval
        .point
        .with_param("lambda", cfg.train.lambda)
        .with_param("seed", cfg.train.seed)
        .with_param("clamped", trained.clamped);
    dir.write("point.csv", checked_experiment_csv(cfg.source, &[point])?.as_bytes())?;
    if cfg.probe_grid > 0 {
        let rows = probe_analysis(&trained.model, cfg.probe_grid)?;
        dir.write("probe_analysis.csv", probe_analysis_csv(&rows).as_bytes())?;
    }
    dir.finish()
}

/// Result of one labeled sweep inside a command.
#[derive(Debug, Clone)]
pub struct LabeledSweep {
    pub label: String,
    pub runs: Vec<SweepRun>,
    pub hull: Vec<EdPoint>,
}

/// Runs a sweep, records failures, writes per-run checkpoints and traces
/// under `runs/<label>/`, and returns the labeled points and hull.
pub(crate) fn run_labeled_sweep(
    dir: &mut OutputDir,
    label: &str,
    source: SourceKind,
    base: &TrainConfig,
    lambdas: &[f64],
    seeds: &[u64],
    eval_samples: usize,
) -> Result<LabeledSweep> {
    dir.add_seeds(seeds.iter().copied());
    let result = sweep_lambda(base, source, lambdas, seeds, eval_samples)?;
    for f in &result.failures {
        dir.record(
            format!("{label} lambda={} seed={}", f.lambda, f.seed),
            f.category,
            f.message.clone(),
        );
    }
    let mut runs = result.runs;
    for r in &mut runs {
        r.point = r.point.clone().with_param("label", label);
        let stem = format!("runs/{label}/lambda_{}_seed_{}", r.lambda, r.seed);
        dir.write(&format!("{stem}/model.ckpt"), &checkpoint_bytes(&r.model)?)?;
        dir.write(&format!("{stem}/trace.csv"), trace_csv(&r.trace).as_bytes())?;
    }
    let points: Vec<EdPoint> = runs.iter().map(|r| r.point.clone()).collect();
    Ok(LabeledSweep {
        label: label.to_string(),
        hull: lower_convex_hull(&points),
        runs,
    })
}

/// Sweeps λ × seeds (per batch size if `batch_sizes` is set) and writes
/// `points.csv` with every evaluated run and `hull.csv` with each label's
/// lower convex hull.
pub fn cmd_sweep(cfg: &SweepConfig, out: &Path) -> Result<RunManifest> {
    let mut dir = OutputDir::create(out, "sweep", cfg)?;
    let base_label = cfg.label.clone().unwrap_or_else(|| "neural".into());
    let variants: Vec<(String, TrainConfig)> = if cfg.batch_sizes.is_empty() {
        vec![(base_label, cfg.train.clone())]
    } else {
        cfg.batch_sizes
            .iter()
            .map(|&b| {
                (
                    format!("{base_label}_batch_{b}"),
                    TrainConfig {
                        batch_size: b,
                        ..cfg.train.clone()
                    },
                )
            })
            .collect()
    };
    let mut points = Vec::new();
    let mut hull = Vec::new();
    for (label, base) in &variants {
        match run_labeled_sweep(&mut dir, label, cfg.source, base, &cfg.lambdas, &cfg.seeds, cfg.eval_samples) {
            Ok(s) => {
                points.extend(s.runs.iter().map(|r| r.point.clone()));
                hull.extend(s.hull);
            }
            Err(e @ Error::SweepFailed(_)) => dir.record_failure(label.clone(), &e),
            Err(e) => return Err(e),
        }
    }
    if points.is_empty() {
        let n = variants.len() * cfg.lambdas.len() * cfg.seeds.len();
        dir.finish()?;
        return Err(Error::SweepFailed(n));
    }
    dir.write("points.csv", checked_experiment_csv(cfg.source, &points)?.as_bytes())?;
    dir.write("hull.csv", checked_experiment_csv(cfg.source, &hull)?.as_bytes())?;
    dir.finish()
}

pub(crate) fn load_probe_model(model: &ProbeModel) -> Result<CompressorModel> {
    match model {
        ProbeModel::Checkpoint { path } => {
            let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            CompressorModel::read_checkpoint(std::io::BufReader::new(f))
        }
        ProbeModel::Hemisphere { k } => hemisphere_model(*k),
        ProbeModel::RampInterval { k, ramp_dim } => ramp_interval_model(*k, *ramp_dim),
    }
}

/// Writes `probe_analysis.csv` (quantized latents over the parameter grid)
/// and, with `synthesis_index`, `probe_synthesis.csv`.
pub fn cmd_probe(cfg: &ProbeConfig, out: &Path) -> Result<RunManifest> {
    let model = load_probe_model(&cfg.model)?;
    let mut dir = OutputDir::create(out, "probe", cfg)?;
    let rows = probe_analysis(&model, cfg.grid)?;
    dir.write("probe_analysis.csv", probe_analysis_csv(&rows).as_bytes())?;
    if let Some(index) = cfg.synthesis_index {
        let rows = probe_synthesis(&model, index, cfg.grid)?;
        dir.write("probe_synthesis.csv", probe_synthesis_csv(&rows).as_bytes())?;
    }
    dir.finish()
}
