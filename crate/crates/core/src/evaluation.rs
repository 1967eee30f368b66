//! Monte Carlo machinery: plug-in entropy, empirical MSE with standard errors,
//! and gaps between measured points and the analytic curves.
//!
//! The plug-in entropy estimator is biased low by roughly `(K - 1)/(2N ln 2)`
//! bits for `K` occupied symbols (the Miller–Madow correction); it is reported
//! uncorrected.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use crate::analytic::EdCurves;
use crate::curve::{interpolate_log_d, EdPoint};
use crate::error::{invalid, Error, Result};
use crate::numeric::{KahanSum, MeanVar};
use crate::sources::SourceKind;

/// Counts of observed symbol tuples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymbolHistogram {
    counts: BTreeMap<Vec<i64>, u64>,
    total: u64,
}

impl SymbolHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, symbol: &[i64]) {
        self.add_n(symbol, 1);
    }

    pub fn add_n(&mut self, symbol: &[i64], n: u64) {
        if n == 0 {
            return;
        }
        match self.counts.get_mut(symbol) {
            Some(c) => *c += n,
            None => {
                self.counts.insert(symbol.to_vec(), n);
            }
        }
        self.total += n;
    }

    /// Associative, commutative merge.
    pub fn merge(&mut self, other: &SymbolHistogram) {
        for (k, &n) in &other.counts {
            self.add_n(k, n);
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, symbol: &[i64]) -> u64 {
        self.counts.get(symbol).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, u64)> {
        self.counts.iter().map(|(k, &v)| (k, v))
    }

    pub fn entropy_bits(&self) -> Result<f64> {
        entropy_from_counts(self.counts.values().copied(), self.total)
    }

    pub fn entropy_stderr(&self) -> f64 {
        entropy_stderr_from_counts(self.counts.values().copied(), self.total)
    }
}

/// Dense histogram over `0..n` used by the oracle quantizers.
#[derive(Debug, Clone, PartialEq)]
pub struct CountHistogram {
    counts: Vec<u64>,
    total: u64,
}

impl CountHistogram {
    pub fn new(n: usize) -> Self {
        Self {
            counts: vec![0; n],
            total: 0,
        }
    }

    pub fn add(&mut self, s: usize) {
        self.counts[s] += 1;
        self.total += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn entropy_bits(&self) -> Result<f64> {
        entropy_from_counts(self.counts.iter().copied(), self.total)
    }

    pub fn entropy_stderr(&self) -> f64 {
        entropy_stderr_from_counts(self.counts.iter().copied(), self.total)
    }
}

fn entropy_from_counts(counts: impl Iterator<Item = u64>, total: u64) -> Result<f64> {
    if total == 0 {
        return Err(invalid("entropy of an empty histogram"));
    }
    let n = total as f64;
    let mut h = KahanSum::new();
    for c in counts.filter(|&c| c > 0) {
        let p = c as f64 / n;
        h.add(-p * p.log2());
    }
    Ok(h.value().max(0.0))
}

/// Standard error of the plug-in estimate, `sqrt(Var[-log2 p̂(X)] / N)`.
fn entropy_stderr_from_counts(counts: impl Iterator<Item = u64> + Clone, total: u64) -> f64 {
    if total < 2 {
        return 0.0;
    }
    let n = total as f64;
    let (mut m1, mut m2) = (KahanSum::new(), KahanSum::new());
    for c in counts.filter(|&c| c > 0) {
        let p = c as f64 / n;
        let l = -p.log2();
        m1.add(p * l);
        m2.add(p * l * l);
    }
    let var = (m2.value() - m1.value() * m1.value()).max(0.0);
    (var / n).sqrt()
}

pub fn empirical_entropy(h: &SymbolHistogram) -> Result<f64> {
    h.entropy_bits()
}

/// Miller–Madow bias of the plug-in estimator for `k` occupied symbols and `n` samples, in bits.
pub fn plug_in_bias_bits(k: usize, n: u64) -> f64 {
    (k.saturating_sub(1)) as f64 / (2.0 * n as f64 * LN_2)
}

/// How per-sample squared errors are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MseNorm {
    /// Squared Euclidean norm (the circle).
    Sum,
    /// Mean over coordinates, approximating the time integral (the ramp).
    Mean,
}

impl MseNorm {
    pub fn for_source(kind: SourceKind) -> Self {
        match kind {
            SourceKind::Circle => MseNorm::Sum,
            SourceKind::Ramp => MseNorm::Mean,
        }
    }

    pub fn squared_error(self, x: &[f64], x_hat: &[f64]) -> f64 {
        let s: f64 = x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum();
        match self {
            MseNorm::Sum => s,
            MseNorm::Mean => s / x.len() as f64,
        }
    }
}

/// Streaming MSE with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct MseAccumulator {
    norm: MseNorm,
    stats: MeanVar,
}

impl MseAccumulator {
    pub fn new(norm: MseNorm) -> Self {
        Self {
            norm,
            stats: MeanVar::default(),
        }
    }

    pub fn push(&mut self, x: &[f64], x_hat: &[f64]) {
        self.stats.push(self.norm.squared_error(x, x_hat));
    }

    pub fn push_error(&mut self, sq_err: f64) {
        self.stats.push(sq_err);
    }

    pub fn merge(&mut self, other: &MseAccumulator) {
        self.stats.merge(&other.stats);
    }

    pub fn count(&self) -> u64 {
        self.stats.count()
    }

    pub fn mean(&self) -> f64 {
        self.stats.mean()
    }

    pub fn stderr(&self) -> f64 {
        self.stats.stderr()
    }
}

/// `(mean, stderr)` of the squared error over `pairs`.
pub fn empirical_mse<'a>(
    pairs: impl IntoIterator<Item = (&'a [f64], &'a [f64])>,
    norm: MseNorm,
) -> Result<(f64, f64)> {
    let mut acc = MseAccumulator::new(norm);
    for (x, x_hat) in pairs {
        acc.push(x, x_hat);
    }
    if acc.count() < 2 {
        return Err(invalid("empirical MSE needs at least two pairs"));
    }
    Ok((acc.mean(), acc.stderr()))
}

/// Interpolation slack allowed when comparing points against curves, in bits.
pub const INTERPOLATION_TOLERANCE_BITS: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    /// Bits above the lower bound at the point's distortion; negative is a violation.
    pub vs_lower: f64,
    /// Bits above the achievable curve at the point's distortion.
    pub vs_upper: f64,
}

/// Entropy gaps between `point` and both curves at the point's distortion.
pub fn gap_report(point: &EdPoint, curves: &EdCurves) -> Result<GapReport> {
    let d = point.distortion;
    if !(d > 0.0) || !d.is_finite() {
        return Err(invalid(format!("point distortion {d} out of range")));
    }
    let lower = interpolate_log_d(&curves.lower.points, d)?;
    let upper = interpolate_log_d(&curves.upper.points, d)?;
    Ok(GapReport {
        vs_lower: point.entropy_bits - lower,
        vs_upper: point.entropy_bits - upper,
    })
}

/// Fails with [`Error::Anomaly`] if `point` lies below the lower-bound curve
/// by more than four standard errors plus the interpolation tolerance.
pub fn check_converse(point: &EdPoint, curves: &EdCurves) -> Result<()> {
    let d_hi = point.distortion + 4.0 * point.distortion_stderr();
    let lower = interpolate_log_d(&curves.lower.points, d_hi)?;
    let slack = 4.0 * point.entropy_stderr() + INTERPOLATION_TOLERANCE_BITS;
    if point.entropy_bits + slack < lower {
        return Err(Error::Anomaly(format!(
            "{} ({}) at D={} has H={} bits, lower bound {} bits",
            point.scheme,
            point.params_string(),
            point.distortion,
            point.entropy_bits,
            lower
        )));
    }
    Ok(())
}

pub const EXPERIMENT_CSV_HEADER: &str =
    "distortion,entropy_bits,scheme,params,distortion_stderr,entropy_stderr,gap_vs_lower,gap_vs_upper";

/// One experiment CSV row per point, with its gaps against `curves`.
pub fn experiment_csv(points: &[EdPoint], curves: &EdCurves) -> Result<String> {
    let mut s = String::from(EXPERIMENT_CSV_HEADER);
    s.push('\n');
    for p in points {
        let g = gap_report(p, curves)?;
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.distortion,
            p.entropy_bits,
            p.scheme,
            p.params_string(),
            p.distortion_stderr(),
            p.entropy_stderr(),
            g.vs_lower,
            g.vs_upper
        ));
    }
    Ok(s)
}
