//! The two sources: the unit circle in the plane and the discretized ramp process.

use std::f64::consts::TAU;

use rand::Rng;

use crate::error::{invalid, Result};

/// Default number of midpoint samples used to represent a ramp realization.
pub const DEFAULT_RAMP_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Circle,
    Ramp,
}

impl SourceKind {
    /// Distortion of the best zero-rate code (reconstruct the source mean).
    pub fn zero_rate_distortion(self) -> f64 {
        match self {
            SourceKind::Circle => 1.0,
            SourceKind::Ramp => 1.0 / 12.0,
        }
    }

    /// Measure of the latent parameter space: arc length for the circle, phase length for the ramp.
    pub fn total_mass(self) -> f64 {
        match self {
            SourceKind::Circle => TAU,
            SourceKind::Ramp => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Circle => "circle",
            SourceKind::Ramp => "ramp",
        }
    }
}

impl std::fmt::Display for SourceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SourceKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(SourceKind::Circle),
            "ramp" => Ok(SourceKind::Ramp),
            other => Err(invalid(format!("unknown source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirclePoint {
    /// Angle in `[0, 2π)`.
    pub theta: f64,
    pub z: [f64; 2],
}

pub fn circle_from_angle(theta: f64) -> Result<CirclePoint> {
    if !theta.is_finite() {
        return Err(invalid(format!("angle must be finite, got {theta}")));
    }
    let theta = reduce_angle(theta);
    Ok(CirclePoint {
        theta,
        z: [theta.cos(), theta.sin()],
    })
}

/// Reduces an angle into `[0, 2π)`.
pub fn reduce_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

pub fn sample_circle<R: Rng + ?Sized>(rng: &mut R) -> CirclePoint {
    let theta = reduce_angle(rng.random::<f64>() * TAU);
    CirclePoint {
        theta,
        z: [theta.cos(), theta.sin()],
    }
}

/// Midpoint sample time `t_k = (k + 1/2) / d_s`.
#[inline]
pub fn sample_time(k: usize, dim: usize) -> f64 {
    (k as f64 + 0.5) / dim as f64
}

pub fn sample_times(dim: usize) -> Vec<f64> {
    (0..dim).map(|k| sample_time(k, dim)).collect()
}

/// Writes `((t_k + v) mod 1) - 1/2` for every midpoint time into `out`.
pub fn ramp_samples_into(phase: f64, out: &mut [f64]) {
    let dim = out.len();
    for (k, o) in out.iter_mut().enumerate() {
        let mut s = sample_time(k, dim) + phase;
        if s >= 1.0 {
            s -= 1.0;
        }
        *o = s - 0.5;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RampSignal {
    pub phase: f64,
    pub samples: Vec<f64>,
    pub sample_times: Vec<f64>,
}

impl RampSignal {
    pub fn dim(&self) -> usize {
        self.samples.len()
    }

    /// Recovers the phase from the first sample.
    pub fn phase_of(&self) -> f64 {
        phase_from_samples(&self.samples)
    }
}

pub fn ramp_from_phase(phase: f64, dim: usize) -> Result<RampSignal> {
    if !(0.0..1.0).contains(&phase) {
        return Err(invalid(format!("ramp phase must lie in [0, 1), got {phase}")));
    }
    if dim == 0 {
        return Err(invalid("ramp dimension must be positive"));
    }
    let mut samples = vec![0.0; dim];
    ramp_samples_into(phase, &mut samples);
    Ok(RampSignal {
        phase,
        samples,
        sample_times: sample_times(dim),
    })
}

pub fn sample_ramp<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<RampSignal> {
    ramp_from_phase(rng.random::<f64>(), dim)
}

/// Inverts the ramp at its first sample time; the result lies in `[0, 1)`.
pub fn phase_from_samples(samples: &[f64]) -> f64 {
    let t0 = sample_time(0, samples.len());
    let v = (samples[0] + 0.5 - t0).rem_euclid(1.0);
    if v >= 1.0 {
        0.0
    } else {
        v
    }
}

pub fn phase_of(signal: &RampSignal) -> f64 {
    signal.phase_of()
}

/// Ambient dimension of a source's samples (`2` for the circle).
pub fn ambient_dim(kind: SourceKind, ramp_dim: usize) -> usize {
    match kind {
        SourceKind::Circle => 2,
        SourceKind::Ramp => ramp_dim,
    }
}

/// Draws one sample of `kind` into `out`, returning its latent parameter
/// (angle for the circle, phase for the ramp).
pub fn sample_into<R: Rng + ?Sized>(kind: SourceKind, rng: &mut R, out: &mut [f64]) -> f64 {
    match kind {
        SourceKind::Circle => {
            let p = sample_circle(rng);
            out.copy_from_slice(&p.z);
            p.theta
        }
        SourceKind::Ramp => {
            let v = rng.random::<f64>();
            ramp_samples_into(v, out);
            v
        }
    }
}

/// Ambient point for a latent parameter value.
pub fn point_from_param(kind: SourceKind, param: f64, out: &mut [f64]) -> Result<()> {
    match kind {
        SourceKind::Circle => {
            let p = circle_from_angle(param)?;
            out.copy_from_slice(&p.z);
        }
        SourceKind::Ramp => {
            if !(0.0..1.0).contains(&param) {
                return Err(invalid(format!("ramp phase must lie in [0, 1), got {param}")));
            }
            ramp_samples_into(param, out);
        }
    }
    Ok(())
}
