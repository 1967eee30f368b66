//! Training one model per `(λ, seed)` and collecting the operational curve.

use rayon::prelude::*;

use super::eval::eval_hard;
use super::model::CompressorModel;
use super::train::{train, TraceRow, TrainConfig};
use crate::curve::{lower_convex_hull, CurveKind, EdCurve, EdPoint};
use crate::error::{invalid, Error, Result};
use crate::sources::SourceKind;

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub lambda: f64,
    pub seed: u64,
    pub point: EdPoint,
    pub model: CompressorModel,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
pub struct SweepFailure {
    pub lambda: f64,
    pub seed: u64,
    pub category: &'static str,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Lower convex hull of all evaluated points.
    pub hull: EdCurve,
    pub runs: Vec<SweepRun>,
    pub failures: Vec<SweepFailure>,
}

impl SweepResult {
    pub fn points(&self) -> Vec<EdPoint> {
        self.runs.iter().map(|r| r.point.clone()).collect()
    }
}

/// Trains and evaluates every `(λ, seed)` pair concurrently. Failed runs are
/// recorded and skipped; the sweep fails only when no run succeeds.
pub fn sweep_lambda(
    base: &TrainConfig,
    source: SourceKind,
    lambdas: &[f64],
    seeds: &[u64],
    eval_samples: usize,
) -> Result<SweepResult> {
    if lambdas.is_empty() || seeds.is_empty() {
        return Err(invalid("sweep needs at least one lambda and one seed"));
    }
    base.validate()?;
    let jobs: Vec<(f64, u64)> = lambdas
        .iter()
        .flat_map(|&l| seeds.iter().map(move |&s| (l, s)))
        .collect();
    let outcomes: Vec<(f64, u64, Result<SweepRun>)> = jobs
        .par_iter()
        .map(|&(lambda, seed)| {
            let config = TrainConfig {
                lambda,
                seed,
                ..base.clone()
            };
            let run = train(&config, source).and_then(|out| {
                let eval = eval_hard(&out.model, eval_samples, seed)?;
                let point = eval
                    .point
                    .with_param("lambda", lambda)
                    .with_param("seed", seed);
                Ok(SweepRun {
                    lambda,
                    seed,
                    point,
                    model: out.model,
                    trace: out.trace,
                })
            });
            (lambda, seed, run)
        })
        .collect();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (lambda, seed, r) in outcomes {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => failures.push(SweepFailure {
                lambda,
                seed,
                category: e.category(),
                message: e.to_string(),
            }),
        }
    }
    if runs.is_empty() {
        return Err(Error::SweepFailed(failures.len()));
    }
    let points: Vec<EdPoint> = runs.iter().map(|r| r.point.clone()).collect();
    Ok(SweepResult {
        hull: EdCurve::new(CurveKind::Neural, lower_convex_hull(&points)),
        runs,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_lambda_gives_at_most_one_point() {
        let base = TrainConfig {
            iterations: 50,
            batch_size: 32,
            ..TrainConfig::default()
        };
        let r = sweep_lambda(&base, SourceKind::Circle, &[16.0], &[1], 10_000).unwrap();
        assert!(r.hull.len() <= 1);
        assert_eq!(r.runs.len(), 1);
        assert!(r.failures.is_empty());
        assert!(sweep_lambda(&base, SourceKind::Circle, &[], &[1], 10_000).is_err());
    }

    #[test]
    fn failures_are_recorded() {
        let base = TrainConfig {
            iterations: 20,
            batch_size: 16,
            ..TrainConfig::default()
        };
        // Too few evaluation samples makes every run fail.
        let e = sweep_lambda(&base, SourceKind::Circle, &[1.0, 2.0], &[0], 10).unwrap_err();
        assert!(matches!(e, Error::SweepFailed(2)));
    }
}
