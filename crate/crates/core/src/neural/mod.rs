//! Trainable compressor: analysis network, quantization of the latents,
//! factorized entropy model and synthesis network.

pub mod entropy;
pub mod eval;
pub mod handbuilt;
pub mod loss;
pub mod mlp;
pub mod model;
pub mod proxy;
pub mod sweep;
pub mod train;

pub use entropy::{rate_bits, BinModel, EntropyModelShape, FactorizedEntropyModel};
pub use eval::{eval_hard, probe_analysis, probe_synthesis, HardEval, ProbeRow};
pub use handbuilt::{hemisphere_model, ramp_interval_model, ramp_interval_reference};
pub use loss::{backprop, gradient_check, Adam, Batch, CoordCheck, LossEval, ProxyState};
pub use mlp::{Mlp, MlpShape};
pub use model::{CompressorModel, ModelShape};
pub use proxy::{noisy_soft_round, quant_proxy, soft_round, QuantPhase};
pub use sweep::{sweep_lambda, SweepResult, SweepRun};
pub use train::{train, train_from, AnnealSchedule, DataRegime, TraceRow, TrainConfig, TrainOutput};
