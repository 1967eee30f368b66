//! TOML experiment configs, one struct per command.
//!
//! Unknown keys are rejected and every numeric range is checked by
//! `validate` before any computation starts.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::TrainConfig;
use crate::numeric::{lin_space, log_space};
use crate::sources::{SourceKind, DEFAULT_RAMP_DIM};

/// Implemented by every command config.
pub trait Validate {
    fn validate(&self) -> Result<()>;
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

/// Parses and validates a config from TOML text.
pub fn parse_config<T: DeserializeOwned + Validate>(text: &str) -> Result<T> {
    let cfg: T = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config<T: DeserializeOwned + Validate>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

/// Distortion grid: explicit `values`, or `points` samples between `min` and `max`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub values: Option<Vec<f64>>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub points: Option<usize>,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn range(min: f64, max: f64, points: usize) -> Self {
        Self {
            min: Some(min),
            max: Some(max),
            points: Some(points),
            ..Self::default()
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        match (&self.values, self.min, self.max, self.points) {
            (Some(v), None, None, None) => Ok(v.clone()),
            (None, Some(lo), Some(hi), Some(n)) => {
                if n == 0 {
                    return bad("grid.points must be positive");
                }
                if !(lo > 0.0 && lo <= hi) {
                    return bad(format!("grid needs 0 < min <= max, got [{lo}, {hi}]"));
                }
                if n == 1 {
                    return Ok(vec![lo]);
                }
                Ok(match self.spacing {
                    Spacing::Log => log_space(lo, hi, n),
                    Spacing::Linear => lin_space(lo, hi, n),
                })
            }
            _ => bad("grid needs either `values` or all of `min`, `max`, `points`"),
        }
    }

    /// Checks every value against `(0, zero-rate distortion]` for `source`.
    pub fn validate_for(&self, source: SourceKind) -> Result<()> {
        let values = self.values()?;
        if values.is_empty() {
            return bad("distortion grid is empty");
        }
        let top = source.zero_rate_distortion();
        if let Some(d) = values.iter().find(|d| !(**d > 0.0 && **d <= top)) {
            return bad(format!("{source} distortion {d} outside (0, {top}]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub source: SourceKind,
    pub grid: GridSpec,
}

impl Validate for BoundsConfig {
    fn validate(&self) -> Result<()> {
        self.grid.validate_for(self.source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleScheme {
    Uniform,
    Biuniform,
    Hemisphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    #[default]
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub source: SourceKind,
    pub scheme: OracleScheme,
    /// Cell counts; for `hemisphere` the number of cells per half circle.
    pub k: Vec<usize>,
    /// Mass fractions of the odd cell, `biuniform` only.
    #[serde(default)]
    pub eps: Vec<f64>,
    /// Rotation of circle arc boundaries, radians.
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub mode: ModeKind,
    #[serde(default = "default_eval_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_ramp_dim")]
    pub ramp_dim: usize,
}

fn default_eval_samples() -> usize {
    1_000_000
}

fn default_ramp_dim() -> usize {
    DEFAULT_RAMP_DIM
}

fn default_probe_grid() -> usize {
    1024
}

impl Validate for OracleConfig {
    fn validate(&self) -> Result<()> {
        if self.k.is_empty() || self.k.contains(&0) {
            return bad("oracle k list must be nonempty and positive");
        }
        match self.scheme {
            OracleScheme::Hemisphere if self.source == SourceKind::Ramp => {
                return bad("hemisphere scheme is defined for the circle only")
            }
            OracleScheme::Biuniform => {
                if self.eps.is_empty() {
                    return bad("biuniform scheme needs an eps list");
                }
                if let Some(e) = self.eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
                    return bad(format!("eps {e} outside (0, 1)"));
                }
            }
            _ if !self.eps.is_empty() => return bad("eps applies to the biuniform scheme only"),
            _ => {}
        }
        if !self.offset.is_finite() {
            return bad("offset must be finite");
        }
        if self.ramp_dim == 0 {
            return bad("ramp_dim must be positive");
        }
        if self.mode == ModeKind::MonteCarlo && self.samples < crate::oracle::MIN_MONTE_CARLO_SAMPLES {
            return bad(format!(
                "monte_carlo mode needs at least {} samples",
                crate::oracle::MIN_MONTE_CARLO_SAMPLES
            ));
        }
        Ok(())
    }
}

fn validate_eval(eval_samples: usize) -> Result<()> {
    if eval_samples < crate::neural::eval::MIN_EVAL_SAMPLES {
        return bad(format!(
            "eval_samples must be at least {}",
            crate::neural::eval::MIN_EVAL_SAMPLES
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRunConfig {
    pub source: SourceKind,
    #[serde(default = "default_eval_samples")]
    pub eval_samples: usize,
    /// Points of the analysis probe written next to the checkpoint; 0 skips it.
    #[serde(default = "default_probe_grid")]
    pub probe_grid: usize,
    #[serde(default)]
    pub train: TrainConfig,
}

impl Validate for TrainRunConfig {
    fn validate(&self) -> Result<()> {
        validate_eval(self.eval_samples)?;
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub source: SourceKind,
    pub lambdas: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_eval_samples")]
    pub eval_samples: usize,
    /// Curve label written into every row's params.
    #[serde(default)]
    pub label: Option<String>,
    /// One labeled curve per batch size instead of `train.batch_size`.
    #[serde(default)]
    pub batch_sizes: Vec<usize>,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl Validate for SweepConfig {
    fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() {
            return bad("lambdas must be nonempty");
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return bad(format!("lambda {l} is not positive"));
        }
        if self.seeds.is_empty() {
            return bad("seeds must be nonempty");
        }
        if self.batch_sizes.contains(&0) {
            return bad("batch sizes must be positive");
        }
        if let Some(l) = &self.label {
            if l.is_empty() || l.contains([',', ';', '=', '\n']) {
                return bad(format!("label `{l}` must be nonempty without , ; ="));
            }
        }
        validate_eval(self.eval_samples)?;
        self.train.validate()
    }
}

/// Model to probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeModel {
    Checkpoint { path: PathBuf },
    Hemisphere { k: usize },
    RampInterval { k: usize, ramp_dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub model: ProbeModel,
    #[serde(default = "default_probe_grid")]
    pub grid: usize,
    /// Reconstruction coordinate for the synthesis probe.
    #[serde(default)]
    pub synthesis_index: Option<usize>,
}

impl Validate for ProbeConfig {
    fn validate(&self) -> Result<()> {
        if self.grid == 0 {
            return bad("probe grid must be positive");
        }
        match self.model {
            ProbeModel::Hemisphere { k } | ProbeModel::RampInterval { k, .. } if k == 0 => {
                bad("hand-built model needs k >= 1")
            }
            ProbeModel::RampInterval { ramp_dim: 0, .. } => bad("ramp_dim must be positive"),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_grid_ranges() {
        let c: BoundsConfig = parse_config(
            "source = \"circle\"\n[grid]\nmin = 0.001\nmax = 0.999\npoints = 100\n",
        )
        .unwrap();
        let v = c.grid.values().unwrap();
        assert_eq!(v.len(), 100);
        assert!((v[0] - 0.001).abs() < 1e-15 && (v[99] - 0.999).abs() < 1e-12);

        let ramp: BoundsConfig =
            parse_config("source = \"ramp\"\n[grid]\nvalues = [0.01, 0.08333333333333333]\n").unwrap();
        assert_eq!(ramp.grid.values().unwrap().len(), 2);

        for text in [
            "source = \"circle\"\n[grid]\nvalues = [0.5, 1.5]\n",
            "source = \"circle\"\n[grid]\nvalues = [0.0]\n",
            "source = \"ramp\"\n[grid]\nvalues = [0.09]\n",
            "source = \"ramp\"\n[grid]\nvalues = [0.01]\nmin = 0.1\n",
            "source = \"circle\"\n[grid]\nvalues = [0.5]\ncolour = 1\n",
            "source = \"square\"\n[grid]\nvalues = [0.5]\n",
        ] {
            assert!(matches!(parse_config::<BoundsConfig>(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn sweep_rejects_bad_lambdas_and_schedules() {
        let ok = "source = \"circle\"\nlambdas = [1.0, 64.0]\n";
        let c: SweepConfig = parse_config(ok).unwrap();
        assert_eq!(c.seeds, vec![0]);
        assert_eq!(c.train, TrainConfig::default());
        for text in [
            "source = \"circle\"\nlambdas = [0.0]\n",
            "source = \"circle\"\nlambdas = [-4.0]\n",
            "source = \"circle\"\nlambdas = []\n",
            "source = \"circle\"\nlambdas = [1.0]\n[train.schedule]\ndither_fraction = 0.5\n",
            "source = \"circle\"\nlambdas = [1.0]\n[train]\nlearning_rat = 0.1\n",
            "source = \"circle\"\nlambdas = [1.0]\neval_samples = 10\n",
        ] {
            assert!(matches!(parse_config::<SweepConfig>(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn oracle_and_probe_configs() {
        let c: OracleConfig =
            parse_config("source = \"circle\"\nscheme = \"uniform\"\nk = [2, 4]\n").unwrap();
        assert_eq!(c.mode, ModeKind::Exact);
        assert!(parse_config::<OracleConfig>("source = \"ramp\"\nscheme = \"hemisphere\"\nk = [2]\n").is_err());
        assert!(parse_config::<OracleConfig>("source = \"ramp\"\nscheme = \"biuniform\"\nk = [2]\n").is_err());
        assert!(parse_config::<OracleConfig>(
            "source = \"circle\"\nscheme = \"uniform\"\nk = [2]\nmode = \"monte_carlo\"\nsamples = 5\n"
        )
        .is_err());

        let p: ProbeConfig = parse_config("[model]\nkind = \"hemisphere\"\nk = 4\n").unwrap();
        assert_eq!(p.grid, 1024);
        assert_eq!(p.model, ProbeModel::Hemisphere { k: 4 });
        let p: ProbeConfig =
            parse_config("grid = 16\nsynthesis_index = 3\n[model]\nkind = \"checkpoint\"\npath = \"m.ckpt\"\n").unwrap();
        assert_eq!(p.synthesis_index, Some(3));
        assert!(parse_config::<ProbeConfig>("[model]\nkind = \"ramp_interval\"\nk = 0\nramp_dim = 8\n").is_err());
    }
}
