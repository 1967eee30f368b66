//! Small numerical helpers shared across modules.

/// Neumaier-compensated running sum. Merging two sums is exact up to the
/// compensation terms, so block-wise accumulation is order-independent in practice.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &KahanSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Running mean and variance (Welford), mergeable with Chan's pairwise update.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanVar {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    pub fn merge(&mut self, other: &MeanVar) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = (self.n + other.n) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n;
        self.m2 += other.m2 + delta * delta * self.n as f64 * other.n as f64 / n;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64).max(0.0)
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the minimum of a unimodal `f` on `[a, b]`.
///
/// Stops once the bracket is narrower than `tol` or after `max_iter` shrinks.
/// Returns `(x_min, f_min)`.
pub fn golden_section_min(
    f: impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
pub fn golden_section_max(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    let (x, v) = golden_section_min(|x| -f(x), a, b, tol, max_iter);
    (x, -v)
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn lin_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive_on_cancellation() {
        let mut k = KahanSum::new();
        let mut naive = 0.0;
        for v in [1.0, 1e100, 1.0, -1e100] {
            k.add(v);
            naive += v;
        }
        assert_eq!(k.value(), 2.0);
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn mean_var_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1 + 1e6).collect();
        let mut mv = MeanVar::default();
        xs.iter().for_each(|&x| mv.push(x));
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((mv.mean() - m).abs() < 1e-9);
        assert!((mv.variance() - v).abs() / v < 1e-6);
        let (mut a, mut b) = (MeanVar::default(), MeanVar::default());
        xs[..300].iter().for_each(|&x| a.push(x));
        xs[300..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean() - m).abs() < 1e-9);
        assert!((a.variance() - v).abs() / v < 1e-6);
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, fx) = golden_section_min(|x| (x - 0.3).powi(2) + 2.0, -1.0, 4.0, 1e-12, 200);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((fx - 2.0).abs() < 1e-12);
        let (x, _) = golden_section_max(|x| -(x + 2.0).abs(), -5.0, 5.0, 1e-10, 200);
        assert!((x + 2.0).abs() < 1e-8);
    }
}
