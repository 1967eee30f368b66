//! Entropy-distortion points and curves, convex hulls, CSV serialization.

use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};

/// Standard errors attached to Monte Carlo points.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PointStderr {
    pub entropy_bits: f64,
    pub distortion: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EdPoint {
    pub entropy_bits: f64,
    pub distortion: f64,
    pub scheme: String,
    /// Ordered key/value metadata, serialized as `k=v;k=v`.
    pub params: Vec<(String, String)>,
    pub stderr: Option<PointStderr>,
}

impl EdPoint {
    pub fn new(entropy_bits: f64, distortion: f64, scheme: impl Into<String>) -> Self {
        Self {
            entropy_bits,
            distortion,
            scheme: scheme.into(),
            params: Vec::new(),
            stderr: None,
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    pub fn with_stderr(mut self, stderr: PointStderr) -> Self {
        self.stderr = Some(stderr);
        self
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn params_string(&self) -> String {
        self.params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn distortion_stderr(&self) -> f64 {
        self.stderr.map_or(0.0, |s| s.distortion)
    }

    pub fn entropy_stderr(&self) -> f64 {
        self.stderr.map_or(0.0, |s| s.entropy_bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    LowerBound,
    UpperBound,
    Oracle,
    Neural,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdCurve {
    /// Sorted by increasing distortion.
    pub points: Vec<EdPoint>,
    pub kind: CurveKind,
}

impl EdCurve {
    pub fn new(kind: CurveKind, mut points: Vec<EdPoint>) -> Self {
        points.sort_by(|a, b| a.distortion.total_cmp(&b.distortion));
        Self { points, kind }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// True when entropy never increases as distortion grows.
    pub fn is_nonincreasing(&self, tol: f64) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].entropy_bits <= w[0].entropy_bits + tol)
    }

    /// Linear interpolation of entropy in `(log D, H)`.
    ///
    /// Distortions above the last point return the last entropy; below the
    /// first point is an error.
    pub fn entropy_at(&self, distortion: f64) -> Result<f64> {
        interpolate_log_d(&self.points, distortion)
    }

    pub fn to_csv(&self) -> String {
        curve_csv(&self.points)
    }
}

pub const CURVE_CSV_HEADER: &str = "distortion,entropy_bits,scheme,params";

pub fn curve_csv(points: &[EdPoint]) -> String {
    let mut s = String::from(CURVE_CSV_HEADER);
    s.push('\n');
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            p.distortion,
            p.entropy_bits,
            p.scheme,
            p.params_string()
        );
    }
    s
}

pub fn parse_curve_csv(text: &str) -> Result<Vec<EdPoint>> {
    let fmt_err = |detail: String| Error::Format {
        what: "curve csv",
        detail,
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.starts_with(CURVE_CSV_HEADER) => {}
        other => return Err(fmt_err(format!("bad header {other:?}"))),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let cols: Vec<&str> = line.splitn(5, ',').collect();
            if cols.len() < 4 {
                return Err(fmt_err(format!("short row `{line}`")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| fmt_err(format!("`{s}`: {e}")))
            };
            let mut p = EdPoint::new(num(cols[1])?, num(cols[0])?, cols[2]);
            for kv in cols[3].split(';').filter(|s| !s.is_empty()) {
                let (k, v) = kv.split_once('=').unwrap_or((kv, ""));
                p.params.push((k.to_string(), v.to_string()));
            }
            Ok(p)
        })
        .collect()
}

/// Lower convex hull in the `(D, H)` plane, keeping only the nonincreasing
/// branch (from the smallest distortion down to the smallest entropy).
pub fn lower_convex_hull(points: &[EdPoint]) -> Vec<EdPoint> {
    let mut pts: Vec<&EdPoint> = points
        .iter()
        .filter(|p| p.distortion.is_finite() && p.entropy_bits.is_finite())
        .collect();
    pts.sort_by(|a, b| {
        a.distortion
            .total_cmp(&b.distortion)
            .then(a.entropy_bits.total_cmp(&b.entropy_bits))
    });
    pts.dedup_by(|b, a| a.distortion == b.distortion);

    let cross = |o: &EdPoint, a: &EdPoint, b: &EdPoint| {
        (a.distortion - o.distortion) * (b.entropy_bits - o.entropy_bits)
            - (a.entropy_bits - o.entropy_bits) * (b.distortion - o.distortion)
    };
    let mut hull: Vec<&EdPoint> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    // Cut at the minimum entropy.
    let min_h = hull.iter().map(|p| p.entropy_bits).fold(f64::INFINITY, f64::min);
    if let Some(i) = hull.iter().position(|p| p.entropy_bits <= min_h) {
        hull.truncate(i + 1);
    }
    hull.into_iter().cloned().collect()
}

/// Piecewise-linear interpolation in the `(D, H)` plane over a hull sorted by distortion.
pub fn interpolate_linear_d(points: &[EdPoint], distortion: f64) -> Result<f64> {
    interpolate_with(points, distortion, |d| d)
}

/// Piecewise-linear interpolation in `(log D, H)` over points sorted by distortion.
pub fn interpolate_log_d(points: &[EdPoint], distortion: f64) -> Result<f64> {
    if distortion <= 0.0 {
        return Err(invalid(format!("distortion must be positive, got {distortion}")));
    }
    interpolate_with(points, distortion, f64::ln)
}

fn interpolate_with(points: &[EdPoint], distortion: f64, map: impl Fn(f64) -> f64) -> Result<f64> {
    let (first, last) = match (points.first(), points.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(invalid("cannot interpolate an empty curve")),
    };
    if distortion < first.distortion {
        return Err(invalid(format!(
            "distortion {distortion} below curve range starting at {}",
            first.distortion
        )));
    }
    if distortion >= last.distortion {
        return Ok(last.entropy_bits);
    }
    let i = points.partition_point(|p| p.distortion <= distortion);
    let (a, b) = (&points[i - 1], &points[i]);
    let (xa, xb, x) = (map(a.distortion), map(b.distortion), map(distortion));
    if xb == xa {
        return Ok(a.entropy_bits.min(b.entropy_bits));
    }
    let t = (x - xa) / (xb - xa);
    Ok(a.entropy_bits + t * (b.entropy_bits - a.entropy_bits))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(d: f64, h: f64) -> EdPoint {
        EdPoint::new(h, d, "t")
    }

    #[test]
    fn hull_drops_dominated_and_rising_points() {
        let pts = vec![p(0.1, 3.0), p(0.2, 2.5), p(0.3, 1.0), p(0.5, 0.0), p(0.6, 0.5), p(0.25, 2.9)];
        let h = lower_convex_hull(&pts);
        let ds: Vec<f64> = h.iter().map(|p| p.distortion).collect();
        assert_eq!(ds, vec![0.1, 0.3, 0.5]);
        assert!(EdCurve::new(CurveKind::Oracle, h).is_nonincreasing(0.0));
    }

    #[test]
    fn single_point_hull() {
        assert_eq!(lower_convex_hull(&[p(0.2, 1.0)]).len(), 1);
        assert!(lower_convex_hull(&[]).is_empty());
    }

    #[test]
    fn interpolation() {
        let pts = vec![p(0.1, 2.0), p(1.0, 0.0)];
        let mid = interpolate_log_d(&pts, 0.1f64.sqrt()).unwrap();
        assert!((mid - 1.0).abs() < 1e-12);
        assert_eq!(interpolate_log_d(&pts, 2.0).unwrap(), 0.0);
        assert!(interpolate_log_d(&pts, 0.05).is_err());
        assert!((interpolate_linear_d(&pts, 0.55).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let pts = vec![p(0.25, 1.5).with_param("K", 4).with_param("eps", 0.125)];
        let text = curve_csv(&pts);
        assert!(text.starts_with("distortion,entropy_bits,scheme,params\n0.25,1.5,t,K=4;eps=0.125"));
        assert_eq!(parse_curve_csv(&text).unwrap(), pts);
    }
}
