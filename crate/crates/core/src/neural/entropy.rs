//! Factorized learned density over quantized latents.
//!
//! Each latent dimension owns a scalar monotone map `v -> f(v)`; the cumulative
//! density is `sigmoid(f)`. Layers: `1 -> r -> r -> 1` with weights
//! `softplus(H)` and, after the first two layers, the mixing
//! `z + tanh(a) * tanh(z)`, which stays nondecreasing because
//! `softplus > 0` and `|tanh(a)| < 1`.
//!
//! Per-dimension layout: `H1[r], b1[r], a1[r], H2[r*r] (out-major), b2[r], a2[r], H3[r], b3`.

use crate::error::{Error, Result};

/// Bin masses are clamped to this floor (with zero gradient) so a training
/// transient cannot produce an infinite loss.
pub const MIN_BIN_MASS: f64 = 5.421010862427522e-20; // 2^-64

const INIT_SCALE: f64 = 10.0;

#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EntropyModelShape {
    pub dims: usize,
    pub hidden: usize,
}

impl EntropyModelShape {
    pub fn new(dims: usize, hidden: usize) -> Self {
        Self { dims, hidden }
    }

    pub fn params_per_dim(&self) -> usize {
        let r = self.hidden;
        r * r + 6 * r + 1
    }

    pub fn param_count(&self) -> usize {
        self.dims * self.params_per_dim()
    }

    /// Initialization making the density roughly flat over `[-scale, scale]`.
    pub fn init<R: rand::Rng + ?Sized>(&self, rng: &mut R, params: &mut [f64]) {
        let r = self.hidden;
        let filters = [1usize, r, r, 1];
        let scale = INIT_SCALE.powf(1.0 / 3.0);
        for d in 0..self.dims {
            let p = &mut params[d * self.params_per_dim()..(d + 1) * self.params_per_dim()];
            let o = Offsets::new(r);
            let h_init = |i: usize| (1.0 / scale / filters[i + 1] as f64).exp_m1().ln();
            p[o.h1..o.h1 + r].fill(h_init(0));
            p[o.h2..o.h2 + r * r].fill(h_init(1));
            p[o.h3..o.h3 + r].fill(h_init(2));
            for v in p[o.b1..o.b1 + r].iter_mut() {
                *v = rng.random_range(-0.5..0.5);
            }
            for v in p[o.b2..o.b2 + r].iter_mut() {
                *v = rng.random_range(-0.5..0.5);
            }
            p[o.b3] = rng.random_range(-0.5..0.5);
            p[o.a1..o.a1 + r].fill(0.0);
            p[o.a2..o.a2 + r].fill(0.0);
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Offsets {
    h1: usize,
    b1: usize,
    a1: usize,
    h2: usize,
    b2: usize,
    a2: usize,
    h3: usize,
    b3: usize,
}

impl Offsets {
    fn new(r: usize) -> Self {
        let h1 = 0;
        let b1 = h1 + r;
        let a1 = b1 + r;
        let h2 = a1 + r;
        let b2 = h2 + r * r;
        let a2 = b2 + r;
        let h3 = a2 + r;
        let b3 = h3 + r;
        Self { h1, b1, a1, h2, b2, a2, h3, b3 }
    }
}

/// Transformed parameters of one dimension, computed once per batch.
#[derive(Debug, Clone)]
struct DimView<'a> {
    r: usize,
    raw: &'a [f64],
    o: Offsets,
    w1: Vec<f64>,
    t1: Vec<f64>,
    w2: Vec<f64>,
    t2: Vec<f64>,
    w3: Vec<f64>,
    /// `softplus'(H) = sigmoid(H)` for each weight block.
    g1: Vec<f64>,
    g2: Vec<f64>,
    g3: Vec<f64>,
}

impl<'a> DimView<'a> {
    fn new(raw: &'a [f64], r: usize) -> Self {
        let o = Offsets::new(r);
        let sp = |s: &[f64]| s.iter().map(|&h| softplus(h)).collect::<Vec<_>>();
        let th = |s: &[f64]| s.iter().map(|&a| a.tanh()).collect::<Vec<_>>();
        let sg = |s: &[f64]| s.iter().map(|&h| sigmoid(h)).collect::<Vec<_>>();
        Self {
            g1: sg(&raw[o.h1..o.h1 + r]),
            g2: sg(&raw[o.h2..o.h2 + r * r]),
            g3: sg(&raw[o.h3..o.h3 + r]),
            r,
            w1: sp(&raw[o.h1..o.h1 + r]),
            t1: th(&raw[o.a1..o.a1 + r]),
            w2: sp(&raw[o.h2..o.h2 + r * r]),
            t2: th(&raw[o.a2..o.a2 + r]),
            w3: sp(&raw[o.h3..o.h3 + r]),
            raw,
            o,
        }
    }

    /// Logit `f(v)`; fills `scratch` (`z1, u1, z2, u2`, each `r` long) when
    /// gradients are needed.
    fn logit(&self, v: f64, scratch: &mut [f64]) -> f64 {
        let r = self.r;
        let (z1, rest) = scratch.split_at_mut(r);
        let (u1, rest) = rest.split_at_mut(r);
        let (z2, u2) = rest.split_at_mut(r);
        for i in 0..r {
            z1[i] = self.w1[i] * v + self.raw[self.o.b1 + i];
            u1[i] = z1[i] + self.t1[i] * z1[i].tanh();
        }
        for i in 0..r {
            let row = &self.w2[i * r..(i + 1) * r];
            let mut s = self.raw[self.o.b2 + i];
            for k in 0..r {
                s += row[k] * u1[k];
            }
            z2[i] = s;
            u2[i] = s + self.t2[i] * s.tanh();
        }
        let mut f = self.raw[self.o.b3];
        for k in 0..r {
            f += self.w3[k] * u2[k];
        }
        f
    }

    /// Accumulates `df * d f / d params` into `grad` (raw-parameter space) and
    /// returns `d f / d v * df`. `scratch` must hold the values from `logit`.
    fn backward(&self, v: f64, df: f64, scratch: &[f64], grad: &mut [f64], tmp: &mut [f64]) -> f64 {
        let r = self.r;
        let o = self.o;
        let (z1, rest) = scratch.split_at(r);
        let (u1, rest) = rest.split_at(r);
        let (z2, u2) = rest.split_at(r);
        let (dz2, du1) = tmp.split_at_mut(r);
        grad[o.b3] += df;
        for k in 0..r {
            grad[o.h3 + k] += df * u2[k] * self.g3[k];
            let du2 = df * self.w3[k];
            let th = z2[k].tanh();
            dz2[k] = du2 * (1.0 + self.t2[k] * (1.0 - th * th));
            grad[o.a2 + k] += du2 * th * (1.0 - self.t2[k] * self.t2[k]);
            grad[o.b2 + k] += dz2[k];
        }
        du1.fill(0.0);
        for i in 0..r {
            let g = dz2[i];
            for k in 0..r {
                let idx = i * r + k;
                grad[o.h2 + idx] += g * u1[k] * self.g2[idx];
                du1[k] += g * self.w2[idx];
            }
        }
        let mut dv = 0.0;
        for i in 0..r {
            let th = z1[i].tanh();
            let dz1 = du1[i] * (1.0 + self.t1[i] * (1.0 - th * th));
            grad[o.a1 + i] += du1[i] * th * (1.0 - self.t1[i] * self.t1[i]);
            grad[o.b1 + i] += dz1;
            grad[o.h1 + i] += dz1 * v * self.g1[i];
            dv += dz1 * self.w1[i];
        }
        dv
    }
}

/// Anything that assigns probability mass to unit bins around a latent value.
pub trait BinModel {
    fn dims(&self) -> usize;
    /// Mass of `[y - 1/2, y + 1/2)` in dimension `dim`.
    fn bin_mass(&self, dim: usize, y: f64) -> f64;
}

/// Borrowed view of a factorized entropy model.
#[derive(Debug, Clone, Copy)]
pub struct FactorizedEntropyModel<'a> {
    pub shape: EntropyModelShape,
    pub params: &'a [f64],
}

/// Rate terms and their gradient for one batch.
#[derive(Debug, Clone)]
pub struct RateGrad {
    /// Bits per sample (summed over dimensions).
    pub bits: Vec<f64>,
    /// `w_b * d bits_b / d yhat_{b,j}`, row-major `batch x dims`.
    pub d_yhat: Vec<f64>,
    pub clamped: usize,
}

/// Numerically stable `c(u) - c(l)` using the reflection `c(x) = 1 - c(-x)`.
#[inline]
fn bin_mass_from_logits(l: f64, u: f64) -> (f64, f64) {
    let s = if l + u > 0.0 { -1.0 } else { 1.0 };
    (s * (sigmoid(s * u) - sigmoid(s * l)), s)
}

impl<'a> FactorizedEntropyModel<'a> {
    pub fn new(shape: EntropyModelShape, params: &'a [f64]) -> Result<Self> {
        if params.len() != shape.param_count() {
            return Err(Error::Shape {
                expected: shape.param_count(),
                got: params.len(),
            });
        }
        Ok(Self { shape, params })
    }

    fn dim_params(&self, d: usize) -> &'a [f64] {
        let n = self.shape.params_per_dim();
        &self.params[d * n..(d + 1) * n]
    }

    /// Logit of the cumulative density in dimension `dim`.
    pub fn logit(&self, dim: usize, v: f64) -> f64 {
        let view = DimView::new(self.dim_params(dim), self.shape.hidden);
        let mut scratch = vec![0.0; 4 * self.shape.hidden];
        view.logit(v, &mut scratch)
    }

    pub fn cdf(&self, dim: usize, v: f64) -> f64 {
        sigmoid(self.logit(dim, v))
    }

    /// Rate in bits of every row of `yhat` (row-major `batch x dims`) with
    /// gradients. Parameter gradients, scaled per sample by `weights`, are
    /// accumulated into `grad` (this model's slice only).
    pub fn rate_and_grad(&self, yhat: &[f64], weights: &[f64], grad: &mut [f64]) -> RateGrad {
        let dims = self.shape.dims;
        let batch = yhat.len() / dims;
        let r = self.shape.hidden;
        let n = self.shape.params_per_dim();
        let mut bits = vec![0.0; batch];
        let mut d_yhat = vec![0.0; yhat.len()];
        let mut clamped = 0;
        let mut s_lo = vec![0.0; 4 * r];
        let mut s_hi = vec![0.0; 4 * r];
        let mut tmp = vec![0.0; 2 * r];
        for d in 0..dims {
            let view = DimView::new(self.dim_params(d), r);
            let g = &mut grad[d * n..(d + 1) * n];
            for b in 0..batch {
                let y = yhat[b * dims + d];
                let l = view.logit(y - 0.5, &mut s_lo);
                let u = view.logit(y + 0.5, &mut s_hi);
                let (p, _) = bin_mass_from_logits(l, u);
                if p.is_nan() || p < MIN_BIN_MASS {
                    bits[b] += -MIN_BIN_MASS.log2();
                    clamped += 1;
                    continue;
                }
                bits[b] += -p.log2();
                let k = std::f64::consts::LN_2 * p;
                let dr_du = -sigmoid(u) * sigmoid(-u) / k;
                let dr_dl = sigmoid(l) * sigmoid(-l) / k;
                let w = weights[b];
                let dv_hi = view.backward(y + 0.5, w * dr_du, &s_hi, g, &mut tmp);
                let dv_lo = view.backward(y - 0.5, w * dr_dl, &s_lo, g, &mut tmp);
                d_yhat[b * dims + d] = dv_hi + dv_lo;
            }
        }
        RateGrad {
            bits,
            d_yhat,
            clamped,
        }
    }

    /// Rate in bits of one latent vector (no gradients).
    pub fn rate_bits(&self, yhat: &[f64]) -> Result<f64> {
        rate_bits(yhat, self)
    }
}

impl BinModel for FactorizedEntropyModel<'_> {
    fn dims(&self) -> usize {
        self.shape.dims
    }

    fn bin_mass(&self, dim: usize, y: f64) -> f64 {
        let view = DimView::new(self.dim_params(dim), self.shape.hidden);
        let mut scratch = vec![0.0; 4 * self.shape.hidden];
        let l = view.logit(y - 0.5, &mut scratch);
        let u = view.logit(y + 0.5, &mut scratch);
        bin_mass_from_logits(l, u).0
    }
}

/// `sum_j -log2 mass_j(yhat_j)`, with masses clamped at [`MIN_BIN_MASS`].
pub fn rate_bits<M: BinModel + ?Sized>(yhat: &[f64], model: &M) -> Result<f64> {
    if yhat.len() != model.dims() {
        return Err(Error::Shape {
            expected: model.dims(),
            got: yhat.len(),
        });
    }
    if yhat.iter().any(|v| !v.is_finite()) {
        return Err(crate::error::invalid("latent must be finite"));
    }
    Ok(yhat
        .iter()
        .enumerate()
        .map(|(j, &y)| -model.bin_mass(j, y).max(MIN_BIN_MASS).log2())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    /// Piecewise-linear CDF through (-1.5, 0), (-0.5, 1/4), (0.5, 3/4), (1.5, 1).
    struct ThreeBins;

    impl BinModel for ThreeBins {
        fn dims(&self) -> usize {
            1
        }
        fn bin_mass(&self, _: usize, y: f64) -> f64 {
            let c = |v: f64| {
                let knots = [(-1.5, 0.0), (-0.5, 0.25), (0.5, 0.75), (1.5, 1.0)];
                if v <= -1.5 {
                    return 0.0;
                }
                if v >= 1.5 {
                    return 1.0;
                }
                let i = knots.iter().rposition(|k| k.0 <= v).unwrap();
                let (x0, c0) = knots[i];
                let (x1, c1) = knots[i + 1];
                c0 + (v - x0) / (x1 - x0) * (c1 - c0)
            };
            c(y + 0.5) - c(y - 0.5)
        }
    }

    #[test]
    fn hand_set_cdf_rates() {
        assert!((rate_bits(&[0.0], &ThreeBins).unwrap() - 1.0).abs() < 1e-12);
        assert!((rate_bits(&[-1.0], &ThreeBins).unwrap() - 2.0).abs() < 1e-12);
        assert!((rate_bits(&[5.0], &ThreeBins).unwrap() - 64.0).abs() < 1e-12);
        assert!(rate_bits(&[0.0, 1.0], &ThreeBins).is_err());
    }

    fn random_model(seed: u64, dims: usize) -> Vec<f64> {
        let shape = EntropyModelShape::new(dims, 8);
        let mut rng = stream(seed, Purpose::Test, 0);
        let mut p = vec![0.0; shape.param_count()];
        shape.init(&mut rng, &mut p);
        for v in p.iter_mut() {
            *v += rng.random_range(-0.5..0.5);
        }
        p
    }

    #[test]
    fn parameter_count() {
        assert_eq!(EntropyModelShape::new(2, 8).param_count(), 2 * 113);
    }

    #[test]
    fn logit_strictly_increasing_and_mass_positive() {
        let shape = EntropyModelShape::new(2, 8);
        for seed in 0..4 {
            let p = random_model(seed, 2);
            let m = FactorizedEntropyModel::new(shape, &p).unwrap();
            for d in 0..2 {
                let mut prev = f64::NEG_INFINITY;
                for i in 0..10_000 {
                    let v = -64.0 + 128.0 * i as f64 / 9_999.0;
                    let f = m.logit(d, v);
                    assert!(f > prev, "seed {seed} dim {d} v {v}");
                    prev = f;
                }
                assert!(m.cdf(d, -1e6) < 1e-6 && m.cdf(d, 1e6) > 1.0 - 1e-6);
                for y in -20..=20 {
                    assert!(m.bin_mass(d, y as f64) > 0.0);
                }
            }
        }
    }

    #[test]
    fn init_mass_near_zero() {
        let shape = EntropyModelShape::new(1, 8);
        let mut p = vec![0.0; shape.param_count()];
        shape.init(&mut stream(3, Purpose::Test, 0), &mut p);
        let m = FactorizedEntropyModel::new(shape, &p).unwrap();
        assert!(m.bin_mass(0, 0.0) > 0.01);
        let total: f64 = (-200..=200).map(|y| m.bin_mass(0, y as f64)).sum();
        assert!(total <= 1.0 + 1e-12 && total > 0.99);
    }

    #[test]
    fn rate_gradient_matches_finite_differences() {
        let shape = EntropyModelShape::new(2, 8);
        let p = random_model(9, 2);
        let mut rng = stream(9, Purpose::Test, 1);
        let yhat: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
        let w = vec![1.0, 0.5, 2.0];
        let total = |p: &[f64], y: &[f64]| {
            let m = FactorizedEntropyModel::new(shape, p).unwrap();
            let mut g = vec![0.0; p.len()];
            let rg = m.rate_and_grad(y, &w, &mut g);
            rg.bits.iter().zip(&w).map(|(b, w)| b * w).sum::<f64>()
        };
        let m = FactorizedEntropyModel::new(shape, &p).unwrap();
        let mut g = vec![0.0; p.len()];
        let rg = m.rate_and_grad(&yhat, &w, &mut g);
        let h = 1e-5;
        for i in (0..p.len()).step_by(3) {
            let mut q = p.clone();
            q[i] += h;
            let up = total(&q, &yhat);
            q[i] -= 2.0 * h;
            let down = total(&q, &yhat);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", g[i]);
        }
        for i in 0..yhat.len() {
            let mut y = yhat.clone();
            y[i] += h;
            let up = total(&p, &y);
            y[i] -= 2.0 * h;
            let down = total(&p, &y);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - rg.d_yhat[i]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }
}
