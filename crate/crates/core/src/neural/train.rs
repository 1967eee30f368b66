//! Stochastic minimization of `E + λD` with Adam and an annealed quantization proxy.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{backprop, Adam, Batch, ProxyState};
use super::model::{CompressorModel, ModelShape};
use super::proxy::QuantPhase;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::sources::{sample_into, SourceKind, DEFAULT_RAMP_DIM};

/// Iteration budget split between dithered, soft-rounded and hard phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealSchedule {
    pub dither_fraction: f64,
    pub soft_fraction: f64,
    pub hard_fraction: f64,
    /// Soft-rounding temperature at the start and end of the soft phase
    /// (geometric in between).
    pub temperature_start: f64,
    pub temperature_end: f64,
    /// Learning-rate multiplier during the hard phase.
    pub hard_lr_scale: f64,
    /// Extra multiplier for the analysis transform in the hard phase, where
    /// its gradient is the biased pass-through estimate; 0 freezes it.
    pub hard_encoder_lr_scale: f64,
    /// Dither between two soft roundings in the soft phase; without it the
    /// soft phase is a smooth bijection the decoder can invert.
    pub soft_noise: bool,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            dither_fraction: 0.4,
            soft_fraction: 0.5,
            hard_fraction: 0.1,
            temperature_start: 1.0,
            temperature_end: 20.0,
            hard_lr_scale: 0.1,
            hard_encoder_lr_scale: 0.0,
            soft_noise: true,
        }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        let f = [self.dither_fraction, self.soft_fraction, self.hard_fraction];
        if f.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("phase fractions must be nonnegative".into()));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "phase fractions must sum to 1, got {}",
                f.iter().sum::<f64>()
            )));
        }
        if !(self.temperature_start > 0.0) || !(self.temperature_end >= self.temperature_start) || !self.temperature_end.is_finite() {
            return Err(Error::Config(
                "temperatures must be positive and nondecreasing".into(),
            ));
        }
        if !(self.hard_lr_scale > 0.0) || !self.hard_lr_scale.is_finite() {
            return Err(Error::Config("hard_lr_scale must be positive".into()));
        }
        if !(self.hard_encoder_lr_scale >= 0.0) || !self.hard_encoder_lr_scale.is_finite() {
            return Err(Error::Config("hard_encoder_lr_scale must be nonnegative".into()));
        }
        Ok(())
    }

    /// `(phase, temperature, learning-rate multiplier)` at 0-based iteration `i` of `n`.
    pub fn at(&self, i: usize, n: usize) -> (QuantPhase, f64, f64) {
        let n_dither = (self.dither_fraction * n as f64).round() as usize;
        let n_soft = ((self.dither_fraction + self.soft_fraction) * n as f64).round() as usize - n_dither;
        if i < n_dither {
            (QuantPhase::Dither, 0.0, 1.0)
        } else if i < n_dither + n_soft {
            let frac = if n_soft > 1 {
                (i - n_dither) as f64 / (n_soft - 1) as f64
            } else {
                1.0
            };
            let tau = self.temperature_start * (self.temperature_end / self.temperature_start).powf(frac);
            (QuantPhase::Soft, tau, 1.0)
        } else {
            (QuantPhase::Hard, 0.0, self.hard_lr_scale)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataRegime {
    /// New samples every batch.
    Fresh,
    /// `size` samples drawn once; batches resample them with replacement.
    Fixed { size: usize },
}

pub const DEFAULT_FIXED_DATASET: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda: f64,
    pub ramp_dim: usize,
    pub latent_dim: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub schedule: AnnealSchedule,
    pub data_regime: DataRegime,
    pub seed: u64,
    pub trace_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 512.0,
            ramp_dim: DEFAULT_RAMP_DIM,
            latent_dim: 1,
            batch_size: 1024,
            iterations: 50_000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            schedule: AnnealSchedule::default(),
            data_regime: DataRegime::Fresh,
            seed: 0,
            trace_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be finite and nonnegative, got {}", self.lambda));
        }
        if self.ramp_dim == 0 || self.latent_dim == 0 {
            return bad("ramp_dim and latent_dim must be positive".into());
        }
        if self.batch_size == 0 || self.iterations == 0 || self.trace_every == 0 {
            return bad("batch_size, iterations and trace_every must be positive".into());
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)".into());
        }
        if !(self.epsilon > 0.0) {
            return bad("adam epsilon must be positive".into());
        }
        if let DataRegime::Fixed { size } = self.data_regime {
            if size == 0 {
                return bad("fixed dataset size must be positive".into());
            }
        }
        self.schedule.validate()
    }

    pub fn model_shape(&self, source: SourceKind) -> Result<ModelShape> {
        ModelShape::new(source, self.ramp_dim, self.latent_dim)
    }
}

/// One row of the training trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub loss: f64,
    pub rate_bits: f64,
    pub distortion: f64,
    pub temperature: f64,
    pub phase: QuantPhase,
}

pub const TRACE_CSV_HEADER: &str = "iter,loss,rate_bits,distortion,temperature,phase";

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from(TRACE_CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
            r.iter, r.loss, r.rate_bits, r.distortion, r.temperature, r.phase
        ));
    }
    s
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: CompressorModel,
    pub trace: Vec<TraceRow>,
    /// Total bin masses clamped to the floor during training.
    pub clamped: usize,
}

/// Ambient samples for one iteration.
struct DataSource {
    kind: SourceKind,
    dim: usize,
    seed: u64,
    fixed: Option<Array2<f64>>,
}

impl DataSource {
    fn new(config: &TrainConfig, kind: SourceKind, dim: usize) -> Self {
        let fixed = match config.data_regime {
            DataRegime::Fresh => None,
            DataRegime::Fixed { size } => {
                let mut rng = stream(config.seed, Purpose::FixedDataset, 0);
                let mut x = Array2::zeros((size, dim));
                for mut row in x.rows_mut() {
                    sample_into(kind, &mut rng, row.as_slice_mut().expect("row"));
                }
                Some(x)
            }
        };
        Self {
            kind,
            dim,
            seed: config.seed,
            fixed,
        }
    }

    fn batch(&self, iter: usize, n: usize) -> Array2<f64> {
        let mut rng = stream(self.seed, Purpose::TrainingData, iter as u64);
        let mut x = Array2::zeros((n, self.dim));
        match &self.fixed {
            None => {
                for mut row in x.rows_mut() {
                    sample_into(self.kind, &mut rng, row.as_slice_mut().expect("row"));
                }
            }
            Some(data) => {
                for mut row in x.rows_mut() {
                    row.assign(&data.row(rng.random_range(0..data.nrows())));
                }
            }
        }
        x
    }
}

/// Trains a fresh model; deterministic given the config.
pub fn train(config: &TrainConfig, source: SourceKind) -> Result<TrainOutput> {
    config.validate()?;
    let model = CompressorModel::init(config.model_shape(source)?, config.seed);
    train_from(model, config)
}

/// Continues training `model` under `config`.
pub fn train_from(mut model: CompressorModel, config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    let shape = model.shape;
    if shape.latent_dim != config.latent_dim {
        return Err(Error::Shape {
            expected: config.latent_dim,
            got: shape.latent_dim,
        });
    }
    let data = DataSource::new(config, shape.source, shape.input_dim);
    let mut opt = Adam::new(model.params.len(), config.beta1, config.beta2, config.epsilon);
    let mut trace = Vec::new();
    let mut clamped = 0;
    let n = config.iterations;
    for i in 0..n {
        let (phase, tau, lr_scale) = config.schedule.at(i, n);
        let batch = Batch::new(data.batch(i, config.batch_size));
        let noise = || {
            let mut rng = stream(config.seed, Purpose::Dither, i as u64);
            Array2::from_shape_fn((batch.len(), shape.latent_dim), |_| rng.random_range(-0.5..0.5))
        };
        let proxy = match phase {
            QuantPhase::Dither => ProxyState::dither(noise()),
            QuantPhase::Soft if config.schedule.soft_noise => ProxyState::noisy_soft(tau, noise()),
            QuantPhase::Soft => ProxyState::soft(tau),
            QuantPhase::Hard => ProxyState::hard(),
        };
        let out = match backprop(&model, &batch, config.lambda, &proxy) {
            Ok(out) => out,
            Err(Error::Divergence { loss, .. }) => {
                return Err(Error::Divergence {
                    iteration: i + 1,
                    loss,
                    trace,
                })
            }
            Err(e) => return Err(e),
        };
        clamped += out.clamped;
        let encoder_scale = match phase {
            QuantPhase::Hard => config.schedule.hard_encoder_lr_scale,
            _ => 1.0,
        };
        opt.step_scaled(
            &mut model.params,
            &out.grad,
            config.learning_rate * lr_scale,
            shape.analysis_range(),
            encoder_scale,
        );
        let iter = i + 1;
        if iter % config.trace_every == 0 || iter == n {
            trace.push(TraceRow {
                iter,
                loss: out.loss,
                rate_bits: out.rate_bits,
                distortion: out.distortion,
                temperature: tau,
                phase,
            });
        }
        if model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence {
                iteration: iter,
                loss: f64::NAN,
                trace,
            });
        }
    }
    Ok(TrainOutput {
        model,
        trace,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_phases() {
        let s = AnnealSchedule::default();
        assert_eq!(s.at(0, 100).0, QuantPhase::Dither);
        assert_eq!(s.at(39, 100).0, QuantPhase::Dither);
        let (p, t, _) = s.at(40, 100);
        assert_eq!((p, t), (QuantPhase::Soft, 1.0));
        let (p, t, _) = s.at(89, 100);
        assert_eq!(p, QuantPhase::Soft);
        assert!((t - 20.0).abs() < 1e-12);
        let (p, _, lr) = s.at(90, 100);
        assert_eq!((p, lr), (QuantPhase::Hard, 0.1));
        let mut prev = 0.0;
        for i in 40..90 {
            let t = s.at(i, 100).1;
            assert!(t >= prev);
            prev = t;
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let mut c = TrainConfig::default();
        c.schedule.soft_fraction = 0.6;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.schedule.temperature_end = 0.5;
        assert!(c.validate().is_err());
        let c = TrainConfig {
            lambda: -1.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            data_regime: DataRegime::Fixed { size: 0 },
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn short_training_is_deterministic_and_traced() {
        let c = TrainConfig {
            iterations: 250,
            batch_size: 32,
            lambda: 64.0,
            seed: 4,
            ..TrainConfig::default()
        };
        let a = train(&c, SourceKind::Circle).unwrap();
        let b = train(&c, SourceKind::Circle).unwrap();
        assert_eq!(a.model.params, b.model.params);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.trace.iter().map(|r| r.iter).collect::<Vec<_>>(), vec![100, 200, 250]);
        let csv = trace_csv(&a.trace);
        assert!(csv.starts_with(TRACE_CSV_HEADER));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn fixed_regime_trains() {
        let c = TrainConfig {
            iterations: 20,
            batch_size: 16,
            data_regime: DataRegime::Fixed { size: 10 },
            ..TrainConfig::default()
        };
        let out = train(&c, SourceKind::Ramp).unwrap();
        assert_eq!(out.model.shape.input_dim, DEFAULT_RAMP_DIM);
    }
}
