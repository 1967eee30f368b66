//! Entropy-distortion analysis of sources with circular topology.
//!
//! Two sources are covered: the unit circle in the plane, and the "ramp"
//! process `J_t = ((t + V) mod 1) - 1/2` with a uniform phase `V`. For both the
//! crate provides
//!
//! - closed-form cell distortions, weak-duality lower bounds and biuniform
//!   achievable curves ([`analytic`]),
//! - exact quantizers that attain those curves ([`oracle`]),
//! - a small learned compressor (MLP analysis/synthesis transforms, annealed
//!   quantization proxy, factorized entropy model) trained from scratch with
//!   hand-written backpropagation ([`neural`]),
//! - Monte Carlo evaluation and gap reporting ([`evaluation`]),
//! - an experiment harness that writes plot-ready CSVs ([`harness`]).
//!
//! The `examples/` directory has one runnable program per capability:
//!
//! ```bash
//! cargo run --release -p manifold-ed --example circle_bounds
//! cargo run --release -p manifold-ed --example oracle_quantizers
//! cargo run --release -p manifold-ed --example train_circle
//! ```

pub mod analytic;
pub mod curve;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod neural;
pub mod numeric;
pub mod oracle;
pub mod rng;
pub mod sources;

pub use curve::{CurveKind, EdCurve, EdPoint, PointStderr};
pub use error::{Error, Result};
pub use sources::SourceKind;
