//! Closed-form per-cell distortions, partition entropy/distortion, weak-duality
//! lower bounds and biuniform achievable curves for both sources.

use std::f64::consts::{LN_2, PI, TAU};

use rayon::prelude::*;

use crate::curve::{interpolate_linear_d, lower_convex_hull, CurveKind, EdCurve, EdPoint};
use crate::error::{invalid, Result};
use crate::numeric::{golden_section_max, golden_section_min};
use crate::sources::SourceKind;

/// `sin(x)/x`, with value 1 at the origin.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `1 - sinc²(x)`, accurate for small `x`.
pub fn one_minus_sinc_sq(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        x2 / 3.0 - 2.0 * x2 * x2 / 45.0 + x2 * x2 * x2 / 315.0
    } else {
        let s = sinc(x);
        1.0 - s * s
    }
}

/// Conditional MSE of a contiguous arc of length `arc_len` about its centroid.
pub fn circle_cell_distortion(arc_len: f64) -> Result<f64> {
    if !(arc_len > 0.0 && arc_len <= TAU) {
        return Err(invalid(format!("arc length must lie in (0, 2π], got {arc_len}")));
    }
    Ok(one_minus_sinc_sq(arc_len / 2.0))
}

/// Distortion contribution `p²(2 - p)/12` of a ramp phase interval of probability `p`.
pub fn ramp_cell_distortion(p: f64) -> Result<f64> {
    check_prob(p)?;
    Ok(p * p * (2.0 - p) / 12.0)
}

/// Conditional MSE `p(2 - p)/12` of a ramp phase interval of probability `p`.
pub fn ramp_cell_conditional_mse(p: f64) -> Result<f64> {
    check_prob(p)?;
    Ok(p * (2.0 - p) / 12.0)
}

fn check_prob(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("cell probability must lie in (0, 1], got {p}")));
    }
    Ok(())
}

/// Conditional MSE of a contiguous cell holding fraction `q` of the latent measure.
fn cell_mse(kind: SourceKind, q: f64) -> f64 {
    match kind {
        SourceKind::Circle => one_minus_sinc_sq(PI * q),
        SourceKind::Ramp => q * (2.0 - q) / 12.0,
    }
}

/// Cell masses of a contiguous partition of the latent space.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    masses: Vec<f64>,
    kind: SourceKind,
}

impl Partition {
    /// Validates and stores `masses`; masses below `1e-12 · total` are dropped.
    pub fn new(kind: SourceKind, masses: Vec<f64>) -> Result<Self> {
        let total = kind.total_mass();
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(invalid("partition masses must be finite and nonnegative"));
        }
        let sum: f64 = masses.iter().sum();
        if (sum - total).abs() > 1e-9 {
            return Err(invalid(format!("partition masses sum to {sum}, expected {total}")));
        }
        if masses.iter().any(|&m| m > total + 1e-9) {
            return Err(invalid("partition cell exceeds total measure"));
        }
        let masses: Vec<f64> = masses
            .into_iter()
            .filter(|&m| m > 1e-12 * total)
            .map(|m| m.min(total))
            .collect();
        if masses.is_empty() {
            return Err(invalid("partition has no cells"));
        }
        Ok(Self { masses, kind })
    }

    /// `k` equal cells.
    pub fn uniform(kind: SourceKind, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("uniform partition needs at least one cell"));
        }
        let m = kind.total_mass() / k as f64;
        Self::new(kind, vec![m; k])
    }

    /// One cell holding fraction `eps` plus `k` equal cells sharing the rest.
    pub fn biuniform(kind: SourceKind, k: usize, eps: f64) -> Result<Self> {
        if k == 0 || !(0.0..1.0).contains(&eps) {
            return Err(invalid(format!("bad biuniform parameters k={k}, eps={eps}")));
        }
        let total = kind.total_mass();
        let mut masses = vec![(1.0 - eps) * total / k as f64; k];
        masses.push(eps * total);
        Self::new(kind, masses)
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Normalized cell probabilities.
    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        let total = self.kind.total_mass();
        self.masses.iter().map(move |m| m / total)
    }
}

/// Entropy (bits) and distortion of the contiguous-cell code with conditional-mean decoding.
pub fn partition_ed(partition: &Partition) -> EdPoint {
    let kind = partition.kind();
    let (mut h, mut d) = (0.0, 0.0);
    for q in partition.probabilities() {
        h -= q * q.log2();
        d += q * cell_mse(kind, q);
    }
    EdPoint::new(h.max(0.0), d, "partition")
        .with_param("source", kind)
        .with_param("K", partition.len())
}

/// Weak-duality lower bound on the entropy-distortion function.
///
/// For a distortion target `D` the bound is
/// `sup_{λ≥0} inf_q [-log2 q + λ·mse(q)] - λD`, where `q` ranges over cell
/// probabilities and `mse(q)` is the conditional MSE of a contiguous cell of that
/// size. The inner infimum is evaluated on a logarithmic grid and refined by
/// golden-section search around every grid-local minimum; the outer supremum
/// is found by golden-section search on `log2 λ` (the dual is concave in λ).
#[derive(Debug, Clone)]
pub struct DualSolver {
    kind: SourceKind,
    log_q: Vec<f64>,
    neg_log2_q: Vec<f64>,
    mse: Vec<f64>,
}

/// Grid resolution of the inner minimization.
pub const DUAL_GRID_POINTS: usize = 4096;
const LOG2_Q_MIN: f64 = -60.0;
const LOG2_LAMBDA_LO: f64 = -10.0;
const LOG2_LAMBDA_HI: f64 = 20.0;

impl DualSolver {
    pub fn new(kind: SourceKind) -> Self {
        let n = DUAL_GRID_POINTS;
        let log_q: Vec<f64> = (0..n)
            .map(|i| LOG2_Q_MIN * LN_2 * (1.0 - i as f64 / (n - 1) as f64))
            .collect();
        let neg_log2_q = log_q.iter().map(|l| -l / LN_2).collect();
        let mse = log_q.iter().map(|l| cell_mse(kind, l.exp())).collect();
        Self {
            kind,
            log_q,
            neg_log2_q,
            mse,
        }
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    fn inner(&self, ln_q: f64, lambda: f64) -> f64 {
        let q = ln_q.exp().min(1.0);
        -ln_q / LN_2 + lambda * cell_mse(self.kind, q)
    }

    /// `inf_q [-log2 q + λ·mse(q)]`.
    pub fn inner_min(&self, lambda: f64) -> f64 {
        let vals: Vec<f64> = self
            .neg_log2_q
            .iter()
            .zip(&self.mse)
            .map(|(a, b)| a + lambda * b)
            .collect();
        let n = vals.len();
        let mut best = vals.iter().copied().fold(f64::INFINITY, f64::min);
        for i in 0..n {
            let left = if i == 0 { f64::INFINITY } else { vals[i - 1] };
            let right = if i + 1 == n { f64::INFINITY } else { vals[i + 1] };
            if vals[i] <= left && vals[i] <= right {
                let lo = self.log_q[i.saturating_sub(1)];
                let hi = self.log_q[(i + 1).min(n - 1)];
                let (_, v) = golden_section_min(|l| self.inner(l, lambda), lo, hi, 1e-13, 200);
                best = best.min(v);
            }
        }
        best
    }

    /// Dual objective at a fixed multiplier.
    pub fn dual_objective(&self, lambda: f64, distortion: f64) -> f64 {
        self.inner_min(lambda) - lambda * distortion
    }

    /// Lower bound in bits; 0 at and beyond the zero-rate distortion.
    pub fn lower_bound(&self, distortion: f64) -> Result<f64> {
        if !(distortion > 0.0) || distortion.is_nan() {
            return Err(invalid(format!("distortion must be positive, got {distortion}")));
        }
        if distortion >= self.kind.zero_rate_distortion() {
            return Ok(0.0);
        }
        let mut hi = LOG2_LAMBDA_HI;
        loop {
            let (x, v) = golden_section_max(
                |l| self.dual_objective(l.exp2(), distortion),
                LOG2_LAMBDA_LO,
                hi,
                1e-10,
                300,
            );
            // The optimal multiplier grows like 1/D; widen the bracket if we hit its edge.
            if x > hi - 0.5 && hi < 60.0 {
                hi += 20.0;
                continue;
            }
            return Ok(v.max(0.0));
        }
    }
}

pub fn circle_dual_lower_bound(distortion: f64) -> Result<f64> {
    DualSolver::new(SourceKind::Circle).lower_bound(distortion)
}

pub fn ramp_dual_lower_bound(distortion: f64) -> Result<f64> {
    DualSolver::new(SourceKind::Ramp).lower_bound(distortion)
}

/// Number of steps of the biuniform `eps` grid on `[0, 1)`.
pub const DEFAULT_EPS_STEPS: usize = 512;
pub const DEFAULT_K_MAX: usize = 4096;

/// Entropy and distortion of the biuniform partition without materializing it.
pub fn biuniform_ed(kind: SourceKind, k: usize, eps: f64) -> (f64, f64) {
    let kf = k as f64;
    let rest = (1.0 - eps) / kf;
    let mut h = -(1.0 - eps) * rest.log2();
    let mut d = (1.0 - eps) * cell_mse(kind, rest);
    if eps > 1e-12 {
        h -= eps * eps.log2();
        d += eps * cell_mse(kind, eps);
    }
    (h.max(0.0), d)
}

/// Lower convex hull of all biuniform partitions with `1..=k_max` equal cells
/// and `eps` on a uniform grid of `eps_steps` points in `[0, 1)`.
pub fn biuniform_upper_curve(kind: SourceKind, k_max: usize, eps_steps: usize) -> Result<EdCurve> {
    if k_max == 0 || eps_steps == 0 {
        return Err(invalid("biuniform curve needs k_max ≥ 1 and a nonempty eps grid"));
    }
    let points: Vec<EdPoint> = (1..=k_max)
        .into_par_iter()
        .flat_map_iter(|k| {
            let per_k: Vec<EdPoint> = (0..eps_steps)
                .map(|i| {
                    let eps = i as f64 / eps_steps as f64;
                    let (h, d) = biuniform_ed(kind, k, eps);
                    EdPoint::new(h, d, "biuniform")
                        .with_param("K", k)
                        .with_param("eps", eps)
                })
                .collect();
            // Each K contributes only its own hull, which keeps the global hull input small.
            lower_convex_hull(&per_k)
        })
        .collect();
    Ok(EdCurve::new(CurveKind::UpperBound, lower_convex_hull(&points)))
}

/// Number of equal cells needed so the uniform code reaches `distortion`.
fn cells_for(kind: SourceKind, distortion: f64) -> usize {
    let k = match kind {
        SourceKind::Circle => TAU / (12.0 * distortion).sqrt(),
        SourceKind::Ramp => 1.0 / (6.0 * distortion),
    };
    (k.ceil() as usize).saturating_add(2)
}

#[derive(Debug, Clone)]
pub struct EdCurves {
    pub lower: EdCurve,
    pub upper: EdCurve,
}

/// Lower (dual) and upper (biuniform) curves evaluated on `d_grid`.
pub fn ed_curves(kind: SourceKind, d_grid: &[f64]) -> Result<EdCurves> {
    if d_grid.is_empty() {
        return Err(invalid("empty distortion grid"));
    }
    if let Some(bad) = d_grid.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
        return Err(invalid(format!("distortion grid value {bad} is not positive")));
    }
    let d_min = d_grid.iter().copied().fold(f64::INFINITY, f64::min);
    // Twice the cells needed to reach the smallest grid distortion, so every
    // hull edge used for interpolation is final.
    let k_max = (2 * cells_for(kind, d_min.min(kind.zero_rate_distortion()))).min(1 << 22);
    let eps_steps = if k_max > DEFAULT_K_MAX { 64 } else { DEFAULT_EPS_STEPS };
    let hull = biuniform_upper_curve(kind, k_max, eps_steps)?;
    let solver = DualSolver::new(kind);

    let rows: Vec<(EdPoint, EdPoint)> = d_grid
        .par_iter()
        .map(|&d| {
            let lower = solver.lower_bound(d)?;
            let upper = if d >= kind.zero_rate_distortion() {
                0.0
            } else {
                interpolate_linear_d(&hull.points, d)?
            };
            if lower > upper + 1e-6 {
                return Err(crate::Error::Anomaly(format!(
                    "dual bound {lower} exceeds achievable {upper} at D={d}"
                )));
            }
            Ok((
                EdPoint::new(lower, d, "lower_bound").with_param("source", kind),
                EdPoint::new(upper.max(lower), d, "biuniform").with_param("source", kind),
            ))
        })
        .collect::<Result<_>>()?;
    let (lower, upper): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok(EdCurves {
        lower: EdCurve::new(CurveKind::LowerBound, lower),
        upper: EdCurve::new(CurveKind::UpperBound, upper),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    #[test]
    fn sinc_values() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(PI).abs() < 1e-16);
        assert!((sinc(PI / 2.0) - 2.0 / PI).abs() < 1e-15);
        let x: f64 = 1e-4;
        let direct = x.sin() / x;
        assert!((sinc(x * (1.0 - 1e-12)) - direct).abs() < 1e-12);
        assert!((sinc(x) - direct).abs() < 1e-12);
        for x in [0.3, 1.7, 9.0, 1e-5] {
            assert_eq!(sinc(x), sinc(-x));
            assert!(sinc(x).abs() < 1.0);
        }
    }

    #[test]
    fn one_minus_sinc_sq_branches_agree() {
        let x: f64 = 1e-2;
        let s = x.sin() / x;
        assert!((one_minus_sinc_sq(x) - (1.0 - s * s)).abs() < 1e-14);
    }

    #[test]
    fn circle_cell_distortion_examples() {
        assert!((circle_cell_distortion(TAU).unwrap() - 1.0).abs() < 1e-15);
        let tiny = circle_cell_distortion(1e-4).unwrap();
        assert!(tiny > 0.0 && tiny < 1e-8);
        assert!((circle_cell_distortion(PI).unwrap() - (1.0 - 4.0 / (PI * PI))).abs() < 1e-15);
        assert!(circle_cell_distortion(0.0).is_err());
        assert!(circle_cell_distortion(7.0).is_err());
    }

    #[test]
    fn ramp_cell_distortion_examples() {
        assert!((ramp_cell_distortion(1.0).unwrap() - 1.0 / 12.0).abs() < 1e-17);
        assert!(ramp_cell_distortion(1e-9).unwrap() < 1e-18);
        assert_eq!(ramp_cell_distortion(0.5).unwrap(), 0.03125);
        let p = 0.3;
        let a = ramp_cell_conditional_mse(p).unwrap();
        let b = 1.0 / 12.0 - ((1.0 - p) / 2.0).powi(2) / 3.0;
        assert!((a - b).abs() < 1e-16);
        assert!(ramp_cell_distortion(0.0).is_err());
        assert!(ramp_cell_distortion(1.5).is_err());
    }

    #[test]
    fn monotone_cell_distortions() {
        let mut prev_c = 0.0;
        let mut prev_r = 0.0;
        for i in 1..=2000 {
            let c = circle_cell_distortion(TAU * i as f64 / 2000.0).unwrap();
            let r = ramp_cell_conditional_mse(i as f64 / 2000.0).unwrap();
            assert!(c > prev_c && r > prev_r);
            prev_c = c;
            prev_r = r;
        }
    }

    #[test]
    fn partition_examples() {
        let p = partition_ed(&Partition::uniform(SourceKind::Circle, 4).unwrap());
        assert!((p.entropy_bits - 2.0).abs() < 1e-15);
        let s = sinc(PI / 4.0);
        assert!((p.distortion - (1.0 - s * s)).abs() < 1e-15);
        assert!((p.distortion - 0.189431).abs() < 1e-6);

        let p = partition_ed(&Partition::uniform(SourceKind::Ramp, 2).unwrap());
        assert_eq!(p.entropy_bits, 1.0);
        assert!((p.distortion - 0.0625).abs() < 1e-17);

        let p = partition_ed(&Partition::new(SourceKind::Circle, vec![TAU]).unwrap());
        assert_eq!(p.entropy_bits, 0.0);
        assert!((p.distortion - 1.0).abs() < 1e-15);

        assert!(Partition::new(SourceKind::Ramp, vec![0.5, 0.4]).is_err());
        assert!(Partition::new(SourceKind::Ramp, vec![1.5, -0.5]).is_err());
        // Degenerate cells are dropped rather than contributing 0·log 0.
        let p = Partition::new(SourceKind::Ramp, vec![0.5, 0.5, 1e-14]).unwrap();
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn biuniform_matches_partition_ed() {
        for kind in [SourceKind::Circle, SourceKind::Ramp] {
            for (k, eps) in [(1, 0.0), (3, 0.2), (7, 0.9), (64, 0.01)] {
                let (h, d) = biuniform_ed(kind, k, eps);
                let p = partition_ed(&Partition::biuniform(kind, k, eps).unwrap());
                assert!((h - p.entropy_bits).abs() < 1e-12);
                assert!((d - p.distortion).abs() < 1e-12);
            }
        }
        let (h, d) = biuniform_ed(SourceKind::Circle, 2, 0.0);
        assert!((h - 1.0).abs() < 1e-15 && (d - (1.0 - 4.0 / (PI * PI))).abs() < 1e-15);
        let (h, d) = biuniform_ed(SourceKind::Ramp, 1, 0.0);
        assert!(h == 0.0 && (d - 1.0 / 12.0).abs() < 1e-17);
    }

    #[test]
    fn biuniform_curve_is_nonincreasing() {
        let c = biuniform_upper_curve(SourceKind::Circle, 64, 64).unwrap();
        assert!(c.is_nonincreasing(0.0));
        let last = c.points.last().unwrap();
        assert_eq!(last.entropy_bits, 0.0);
        assert!((last.distortion - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dual_zero_rate_and_weak_duality() {
        let c = DualSolver::new(SourceKind::Circle);
        let r = DualSolver::new(SourceKind::Ramp);
        assert_eq!(c.lower_bound(1.0).unwrap(), 0.0);
        assert_eq!(c.lower_bound(3.0).unwrap(), 0.0);
        assert_eq!(r.lower_bound(1.0 / 12.0).unwrap(), 0.0);
        assert!(c.lower_bound(0.0).is_err());
        let s = sinc(PI / 4.0);
        assert!(c.lower_bound(1.0 - s * s).unwrap() <= 2.0 + 1e-9);
        assert!(r.lower_bound(0.0625).unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn dual_is_unimodal_in_lambda() {
        for (kind, d) in [(SourceKind::Circle, 0.01), (SourceKind::Ramp, 0.004)] {
            let s = DualSolver::new(kind);
            let vals: Vec<f64> = (0..=120)
                .map(|i| s.dual_objective((-10.0 + 0.25 * i as f64).exp2(), d))
                .collect();
            let peak = vals
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert!(vals[..=peak].windows(2).all(|w| w[1] >= w[0] - 1e-12));
            assert!(vals[peak..].windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }

    #[test]
    fn duality_against_random_partitions() {
        let mut rng = stream(17, Purpose::Test, 0);
        for kind in [SourceKind::Circle, SourceKind::Ramp] {
            let solver = DualSolver::new(kind);
            for _ in 0..100 {
                let k = rng.random_range(1..40);
                let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>().powi(3) + 1e-6).collect();
                let sum: f64 = w.iter().sum();
                let masses = w.iter().map(|x| x / sum * kind.total_mass()).collect();
                let p = partition_ed(&Partition::new(kind, masses).unwrap());
                let lb = solver.lower_bound(p.distortion).unwrap();
                assert!(lb <= p.entropy_bits + 1e-9, "{kind}: {lb} > {}", p.entropy_bits);
            }
        }
    }

    #[test]
    fn curves_meet_at_zero_rate_and_are_ordered() {
        let grid = vec![0.5, 0.99, 1.0];
        let c = ed_curves(SourceKind::Circle, &grid).unwrap();
        for (l, u) in c.lower.points.iter().zip(&c.upper.points) {
            assert!(l.entropy_bits <= u.entropy_bits);
        }
        assert!(c.upper.points[1].entropy_bits < 0.1);
        assert_eq!(c.lower.points[2].entropy_bits, 0.0);
        assert_eq!(c.upper.points[2].entropy_bits, 0.0);
        let r = ed_curves(SourceKind::Ramp, &[0.01, 1.0 / 12.0]).unwrap();
        assert_eq!(r.upper.points[1].entropy_bits, 0.0);
        assert_eq!(r.lower.points[1].entropy_bits, 0.0);
    }
}
