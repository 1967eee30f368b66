//! Exact encoder/decoder pairs attaining the analytic tradeoffs.
//!
//! Cells are half-open with left-edge ownership: a point sitting exactly on a
//! boundary belongs to the cell that starts there.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use crate::analytic::{partition_ed, sinc, Partition};
use crate::curve::{EdPoint, PointStderr};
use crate::error::{invalid, Error, Result};
use crate::evaluation::{CountHistogram, MseAccumulator, MseNorm};
use crate::rng::{stream, Purpose};
use crate::sources::{
    phase_from_samples, reduce_angle, sample_into, sample_times, CirclePoint, RampSignal,
    SourceKind,
};

/// Contiguous-arc quantizer of the circle.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcQuantizer {
    /// `b_0 < b_1 < … < b_K = b_0 + 2π`.
    boundaries: Vec<f64>,
}

impl ArcQuantizer {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(invalid("arc quantizer needs at least two boundaries"));
        }
        if boundaries.iter().any(|b| !b.is_finite()) || boundaries.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("arc boundaries must be finite and strictly increasing"));
        }
        let span = boundaries[boundaries.len() - 1] - boundaries[0];
        if (span - TAU).abs() > 1e-9 {
            return Err(invalid(format!("arc boundaries span {span}, expected 2π")));
        }
        Ok(Self { boundaries })
    }

    /// `k` equal arcs starting at angle `offset`.
    pub fn uniform(k: usize, offset: f64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("arc quantizer needs at least one cell"));
        }
        let step = TAU / k as f64;
        let mut b: Vec<f64> = (0..k).map(|i| offset + step * i as f64).collect();
        b.push(offset + TAU);
        Self::new(b)
    }

    /// Arcs laid out consecutively from `offset` with the lengths of `partition`.
    pub fn from_partition(partition: &Partition, offset: f64) -> Result<Self> {
        if partition.kind() != SourceKind::Circle {
            return Err(invalid("arc quantizer needs a circle partition"));
        }
        let mut b = Vec::with_capacity(partition.len() + 1);
        let mut acc = offset;
        b.push(acc);
        for m in &partition.masses()[..partition.len() - 1] {
            acc += m;
            b.push(acc);
        }
        b.push(offset + TAU);
        Self::new(b)
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn cells(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn arc_lengths(&self) -> Vec<f64> {
        self.boundaries.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn partition(&self) -> Result<Partition> {
        Partition::new(SourceKind::Circle, self.arc_lengths())
    }

    pub fn encode_angle(&self, theta: f64) -> usize {
        let b0 = self.boundaries[0];
        let rel = reduce_angle(theta - b0);
        let i = self.boundaries.partition_point(|b| b - b0 <= rel);
        (i - 1).min(self.cells() - 1)
    }

    pub fn encode(&self, z: &CirclePoint) -> usize {
        self.encode_angle(z.theta)
    }

    /// Conditional mean `E[Z | Z ∈ arc]`: the arc midpoint scaled by `sinc(Δ/2)`.
    pub fn decode(&self, index: usize) -> Result<[f64; 2]> {
        if index >= self.cells() {
            return Err(invalid(format!("arc index {index} out of range 0..{}", self.cells())));
        }
        let (l, r) = (self.boundaries[index], self.boundaries[index + 1]);
        Ok(arc_centroid(l, r))
    }

    /// Text form: `kind`, `K`, then one boundary per line with 17 significant digits.
    pub fn to_text(&self) -> String {
        boundaries_text("circle", &self.boundaries)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (kind, b) = parse_boundaries_text(text)?;
        if kind != "circle" {
            return Err(Error::Format {
                what: "quantizer",
                detail: format!("expected circle quantizer, got `{kind}`"),
            });
        }
        Self::new(b)
    }
}

/// Centroid of the arc `[l, r)`.
pub fn arc_centroid(l: f64, r: f64) -> [f64; 2] {
    let mid = 0.5 * (l + r);
    let norm = sinc(0.5 * (r - l));
    [norm * mid.cos(), norm * mid.sin()]
}

/// Interval quantizer of the ramp phase.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalQuantizer {
    /// `0 = c_0 < c_1 < … < c_K = 1`.
    boundaries: Vec<f64>,
}

impl IntervalQuantizer {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 || boundaries[0] != 0.0 || boundaries[boundaries.len() - 1] != 1.0 {
            return Err(invalid("interval boundaries must run from 0 to 1"));
        }
        if boundaries.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("interval boundaries must be strictly increasing"));
        }
        Ok(Self { boundaries })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("interval quantizer needs at least one cell"));
        }
        let mut b: Vec<f64> = (0..k).map(|i| i as f64 / k as f64).collect();
        b.push(1.0);
        Self::new(b)
    }

    pub fn from_partition(partition: &Partition) -> Result<Self> {
        if partition.kind() != SourceKind::Ramp {
            return Err(invalid("interval quantizer needs a ramp partition"));
        }
        let mut b = vec![0.0];
        let mut acc = 0.0;
        for p in &partition.masses()[..partition.len() - 1] {
            acc += p;
            b.push(acc);
        }
        b.push(1.0);
        Self::new(b)
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn cells(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn partition(&self) -> Result<Partition> {
        Partition::new(
            SourceKind::Ramp,
            self.boundaries.windows(2).map(|w| w[1] - w[0]).collect(),
        )
    }

    pub fn encode_phase(&self, v: f64) -> usize {
        let i = self.boundaries.partition_point(|c| *c <= v);
        i.clamp(1, self.cells()) - 1
    }

    pub fn encode(&self, signal: &RampSignal) -> usize {
        self.encode_phase(signal.phase_of())
    }

    pub fn encode_samples(&self, samples: &[f64]) -> usize {
        self.encode_phase(phase_from_samples(samples))
    }

    /// Exact conditional mean `E[J_t | V ∈ cell]` at each time in `t_grid`.
    pub fn decode(&self, index: usize, t_grid: &[f64]) -> Result<Vec<f64>> {
        if index >= self.cells() {
            return Err(invalid(format!("interval index {index} out of range 0..{}", self.cells())));
        }
        let cell = [(self.boundaries[index], self.boundaries[index + 1])];
        Ok(t_grid.iter().map(|&t| ramp_conditional_mean(&cell, t)).collect())
    }

    pub fn to_text(&self) -> String {
        boundaries_text("ramp", &self.boundaries)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (kind, b) = parse_boundaries_text(text)?;
        if kind != "ramp" {
            return Err(Error::Format {
                what: "quantizer",
                detail: format!("expected ramp quantizer, got `{kind}`"),
            });
        }
        Self::new(b)
    }
}

/// `E[J_t | V ∈ S]` for `S` a disjoint union of intervals `[a, b) ⊂ [0, 1)`:
/// `t + E[V|S] - µ(S ∩ [1-t, 1])/µ(S) - 1/2`.
pub fn ramp_conditional_mean(cells: &[(f64, f64)], t: f64) -> f64 {
    let mu: f64 = cells.iter().map(|(a, b)| b - a).sum();
    let first_moment: f64 = cells.iter().map(|(a, b)| 0.5 * (b * b - a * a)).sum();
    let wrapped: f64 = cells
        .iter()
        .map(|&(a, b)| (b - a.max(1.0 - t)).max(0.0))
        .sum();
    t + first_moment / mu - wrapped / mu - 0.5
}

/// `E[J_t² | V ∈ [a, b)]`.
fn ramp_conditional_second_moment(a: f64, b: f64, t: f64) -> f64 {
    // J = t + v - 1/2 before the wrap at v = 1 - t, t + v - 3/2 after it.
    let cube = |x: f64| x * x * x / 3.0;
    let piece = |lo: f64, hi: f64, shift: f64| {
        if hi > lo {
            cube(t + hi - shift) - cube(t + lo - shift)
        } else {
            0.0
        }
    };
    let split = (1.0 - t).clamp(a, b);
    (piece(a, split, 0.5) + piece(split, b, 1.5)) / (b - a)
}

/// Expected distortion of a ramp interval quantizer when the signal is
/// observed at the `dim` midpoint times and the error is averaged over them.
pub fn ramp_discrete_distortion(q: &IntervalQuantizer, dim: usize) -> f64 {
    ramp_discrete_distortion_at(q, &sample_times(dim))
}

/// Expected distortion of a ramp interval quantizer observed at `times`.
pub fn ramp_discrete_distortion_at(q: &IntervalQuantizer, times: &[f64]) -> f64 {
    let dim = times.len();
    let mut total = 0.0;
    for w in q.boundaries.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut per_cell = 0.0;
        for &t in times {
            let m = ramp_conditional_mean(&[(a, b)], t);
            per_cell += ramp_conditional_second_moment(a, b, t) - m * m;
        }
        total += (b - a) * per_cell / dim as f64;
    }
    total
}

/// Product code for a two-dimensional latent: one bit for the
/// hemisphere (sign of `sin θ`) and a `k`-level index of `cos θ` on the
/// companded grid `cos(jπ/k)`. Each pair is a contiguous arc of length `π/k`,
/// so the code is equivalent to `2k` uniform arcs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HemisphereQuantizer {
    k: usize,
}

impl HemisphereQuantizer {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("hemisphere quantizer needs k ≥ 1"));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `(bit, index)`: bit is 1 when `sin θ ≥ 0`; index grows with `cos θ`.
    pub fn encode(&self, z: &CirclePoint) -> (usize, usize) {
        self.encode_xy(z.z)
    }

    pub fn encode_xy(&self, z: [f64; 2]) -> (usize, usize) {
        let bit = usize::from(z[1] >= 0.0);
        let folded = z[0].clamp(-1.0, 1.0).acos();
        let j = ((folded * self.k as f64 / PI).floor() as usize).min(self.k - 1);
        (bit, self.k - 1 - j)
    }

    /// Angular extent `[l, r)` of the arc coded by `(bit, index)`.
    pub fn arc(&self, bit: usize, index: usize) -> Result<(f64, f64)> {
        if bit > 1 || index >= self.k {
            return Err(invalid(format!("bad hemisphere code ({bit}, {index})")));
        }
        let w = PI / self.k as f64;
        let j = (self.k - 1 - index) as f64;
        Ok(if bit == 1 {
            (j * w, (j + 1.0) * w)
        } else {
            (TAU - (j + 1.0) * w, TAU - j * w)
        })
    }

    pub fn decode(&self, bit: usize, index: usize) -> Result<[f64; 2]> {
        let (l, r) = self.arc(bit, index)?;
        Ok(arc_centroid(l, r))
    }

    pub fn partition(&self) -> Result<Partition> {
        Partition::uniform(SourceKind::Circle, 2 * self.k)
    }
}

/// Any of the exact quantizers, behind one interface for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleQuantizer {
    Arc(ArcQuantizer),
    Interval(IntervalQuantizer),
    Hemisphere(HemisphereQuantizer),
}

impl OracleQuantizer {
    pub fn source(&self) -> SourceKind {
        match self {
            OracleQuantizer::Interval(_) => SourceKind::Ramp,
            _ => SourceKind::Circle,
        }
    }

    pub fn partition(&self) -> Result<Partition> {
        match self {
            OracleQuantizer::Arc(q) => q.partition(),
            OracleQuantizer::Interval(q) => q.partition(),
            OracleQuantizer::Hemisphere(q) => q.partition(),
        }
    }

    pub fn cells(&self) -> usize {
        match self {
            OracleQuantizer::Arc(q) => q.cells(),
            OracleQuantizer::Interval(q) => q.cells(),
            OracleQuantizer::Hemisphere(q) => 2 * q.k(),
        }
    }

    /// Flat symbol index for an ambient sample `x`.
    pub fn encode_ambient(&self, x: &[f64]) -> usize {
        match self {
            OracleQuantizer::Arc(q) => q.encode_angle(x[1].atan2(x[0])),
            OracleQuantizer::Interval(q) => q.encode_samples(x),
            OracleQuantizer::Hemisphere(q) => {
                let (bit, idx) = q.encode_xy([x[0], x[1]]);
                bit * q.k() + idx
            }
        }
    }

    /// Reconstruction of symbol `s` at the ambient dimension of `out`.
    pub fn decode_ambient(&self, s: usize, out: &mut [f64]) -> Result<()> {
        match self {
            OracleQuantizer::Arc(q) => out.copy_from_slice(&q.decode(s)?),
            OracleQuantizer::Interval(q) => out.copy_from_slice(&q.decode(s, &sample_times(out.len()))?),
            OracleQuantizer::Hemisphere(q) => out.copy_from_slice(&q.decode(s / q.k(), s % q.k())?),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

pub const MIN_MONTE_CARLO_SAMPLES: usize = 1000;

/// Entropy and distortion of an oracle quantizer, either from its cell masses
/// or by encoding/decoding `samples` draws of the source (ramp signals at `ramp_dim` samples).
pub fn oracle_ed(q: &OracleQuantizer, mode: OracleMode, ramp_dim: usize) -> Result<EdPoint> {
    let label = match q {
        OracleQuantizer::Arc(_) => "arc",
        OracleQuantizer::Interval(_) => "interval",
        OracleQuantizer::Hemisphere(_) => "hemisphere",
    };
    match mode {
        OracleMode::Exact => {
            let mut p = partition_ed(&q.partition()?);
            p.scheme = format!("oracle_{label}");
            p.params.push(("mode".into(), "exact".into()));
            Ok(p)
        }
        OracleMode::MonteCarlo { samples, seed } => {
            if samples < MIN_MONTE_CARLO_SAMPLES {
                return Err(invalid(format!(
                    "Monte Carlo evaluation needs at least {MIN_MONTE_CARLO_SAMPLES} samples, got {samples}"
                )));
            }
            let kind = q.source();
            let dim = crate::sources::ambient_dim(kind, ramp_dim);
            let cells = q.cells();
            let decoded: Vec<Vec<f64>> = (0..cells)
                .map(|s| {
                    let mut out = vec![0.0; dim];
                    q.decode_ambient(s, &mut out).map(|_| out)
                })
                .collect::<Result<_>>()?;
            let mut hist = CountHistogram::new(cells);
            let mut mse = MseAccumulator::new(MseNorm::for_source(kind));
            let mut x = vec![0.0; dim];
            const BLOCK: usize = 1 << 14;
            let mut done = 0;
            let mut block = 0;
            while done < samples {
                let mut rng = stream(seed, Purpose::Oracle, block);
                for _ in 0..BLOCK.min(samples - done) {
                    sample_into(kind, &mut rng, &mut x);
                    let s = q.encode_ambient(&x);
                    hist.add(s);
                    mse.push(&x, &decoded[s]);
                }
                done += BLOCK.min(samples - done);
                block += 1;
            }
            let h = hist.entropy_bits()?;
            Ok(EdPoint::new(h, mse.mean(), format!("oracle_{label}"))
                .with_param("mode", "monte_carlo")
                .with_param("N", samples)
                .with_stderr(PointStderr {
                    entropy_bits: hist.entropy_stderr(),
                    distortion: mse.stderr(),
                }))
        }
    }
}

fn boundaries_text(kind: &str, b: &[f64]) -> String {
    let mut s = format!("kind {kind}\nK {}\nboundaries\n", b.len() - 1);
    for x in b {
        let _ = writeln!(s, "{x:.16e}");
    }
    s
}

fn parse_boundaries_text(text: &str) -> Result<(String, Vec<f64>)> {
    let err = |detail: String| Error::Format {
        what: "quantizer",
        detail,
    };
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let kind = lines
        .next()
        .and_then(|l| l.strip_prefix("kind "))
        .ok_or_else(|| err("missing `kind` line".into()))?
        .trim()
        .to_string();
    let k: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("K "))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| err("missing or bad `K` line".into()))?;
    if lines.next() != Some("boundaries") {
        return Err(err("missing `boundaries` line".into()));
    }
    let b = lines
        .map(|l| l.parse::<f64>().map_err(|e| err(format!("`{l}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if b.len() != k + 1 {
        return Err(err(format!("expected {} boundaries, found {}", k + 1, b.len())));
    }
    Ok((kind, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::{circle_from_angle, ramp_from_phase};

    #[test]
    fn arc_encode_examples() {
        let q = ArcQuantizer::uniform(4, 0.0).unwrap();
        assert_eq!(q.boundaries()[..4], [0.0, PI / 2.0, PI, 1.5 * PI]);
        assert_eq!(q.encode(&circle_from_angle(0.0).unwrap()), 0);
        assert_eq!(q.encode(&circle_from_angle(PI).unwrap()), 2);
        assert_eq!(q.encode(&circle_from_angle(TAU - 1e-9).unwrap()), 3);
    }

    #[test]
    fn arc_decode_examples() {
        let full = ArcQuantizer::uniform(1, 0.0).unwrap();
        let c = full.decode(0).unwrap();
        assert!(c[0].abs() < 1e-16 && c[1].abs() < 1e-16);
        let half = ArcQuantizer::uniform(2, -PI / 2.0).unwrap();
        let c = half.decode(0).unwrap();
        assert!((c[0] - 2.0 / PI).abs() < 1e-15 && c[1].abs() < 1e-15);
        let thin = ArcQuantizer::new(vec![1.0, 1.0 + 1e-7, 1.0 + TAU]).unwrap();
        let c = thin.decode(0).unwrap();
        assert!((c[0].hypot(c[1]) - 1.0).abs() < 1e-14);
        assert!((c[1].atan2(c[0]) - 1.0).abs() < 1e-7);
        assert!(thin.decode(2).is_err());
    }

    #[test]
    fn hemisphere_examples() {
        let q = HemisphereQuantizer::new(2).unwrap();
        assert_eq!(q.encode(&circle_from_angle(PI / 4.0).unwrap()), (1, 1));
        let q1 = HemisphereQuantizer::new(1).unwrap();
        assert_eq!(q1.encode(&circle_from_angle(1.5 * PI).unwrap()), (0, 0));
        // Each code is the arc it claims to be.
        for k in [1, 2, 3, 8] {
            let q = HemisphereQuantizer::new(k).unwrap();
            for i in 0..4000 {
                let theta = (i as f64 + 0.5) * TAU / 4000.0;
                let (bit, idx) = q.encode(&circle_from_angle(theta).unwrap());
                let (l, r) = q.arc(bit, idx).unwrap();
                assert!(l <= theta && theta <= r, "k={k} θ={theta} in ({l},{r})");
            }
        }
    }

    #[test]
    fn interval_examples() {
        let q2 = IntervalQuantizer::uniform(2).unwrap();
        assert_eq!(q2.encode(&ramp_from_phase(0.25, 16).unwrap()), 0);
        assert_eq!(q2.encode(&ramp_from_phase(0.5, 16).unwrap()), 1);
        let q4 = IntervalQuantizer::uniform(4).unwrap();
        assert_eq!(q4.encode(&ramp_from_phase(0.999, 16).unwrap()), 3);

        let q1 = IntervalQuantizer::uniform(1).unwrap();
        let y = q1.decode(0, &sample_times(32)).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn interval_decode_matches_piecewise_formula() {
        for s in [0.1, 0.25, 0.5, 0.9] {
            let q = IntervalQuantizer::new(vec![0.0, s, 1.0]).unwrap();
            let ts: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
            let y = q.decode(0, &ts).unwrap();
            for (t, yt) in ts.iter().zip(&y) {
                let expect = if *t > 1.0 - s {
                    t * (1.0 - 1.0 / s) + s / 2.0 - 1.5 + 1.0 / s
                } else {
                    t - (1.0 - s) / 2.0
                };
                assert!((yt - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn discrete_distortion_approaches_continuous() {
        for k in [1usize, 3, 8] {
            let q = IntervalQuantizer::uniform(k).unwrap();
            let exact = partition_ed(&q.partition().unwrap()).distortion;
            let kf = k as f64;
            assert!((exact - (2.0 - 1.0 / kf) / (12.0 * kf)).abs() < 1e-15);
            let coarse = ramp_discrete_distortion(&q, 64);
            let fine = ramp_discrete_distortion(&q, 4096);
            assert!((fine - exact).abs() < (coarse - exact).abs().max(1e-12));
            assert!((fine - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn text_round_trip() {
        let q = ArcQuantizer::uniform(5, 0.3).unwrap();
        assert_eq!(ArcQuantizer::from_text(&q.to_text()).unwrap(), q);
        let q = IntervalQuantizer::new(vec![0.0, 0.1, 0.7, 1.0]).unwrap();
        let text = q.to_text();
        assert!(text.starts_with("kind ramp\nK 3\nboundaries\n"));
        assert_eq!(IntervalQuantizer::from_text(&text).unwrap(), q);
        assert!(ArcQuantizer::from_text(&text).is_err());
    }

    #[test]
    fn monte_carlo_needs_enough_samples() {
        let q = OracleQuantizer::Arc(ArcQuantizer::uniform(4, 0.0).unwrap());
        assert!(oracle_ed(&q, OracleMode::MonteCarlo { samples: 999, seed: 1 }, 64).is_err());
    }
}
