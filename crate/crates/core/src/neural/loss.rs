//! Monte Carlo Lagrangian `E + λD` on a batch and its gradient by reverse
//! accumulation through analysis, proxy, entropy model and synthesis.

use ndarray::{Array2, Zip};

use super::model::CompressorModel;
use super::proxy::{noisy_soft_round, soft_round, QuantPhase};
use crate::error::{invalid, Error, Result};
use crate::sources::SourceKind;

/// Ambient rows with optional per-sample weights.
#[derive(Debug, Clone)]
pub struct Batch {
    pub x: Array2<f64>,
    pub weights: Vec<f64>,
}

impl Batch {
    pub fn new(x: Array2<f64>) -> Self {
        let weights = vec![1.0; x.nrows()];
        Self { x, weights }
    }

    pub fn weighted(x: Array2<f64>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != x.nrows() {
            return Err(Error::Shape {
                expected: x.nrows(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(invalid("batch weights must be nonnegative with positive sum"));
        }
        Ok(Self { x, weights })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }
}

/// Quantization proxy in effect for one evaluation of the loss.
#[derive(Debug, Clone)]
pub struct ProxyState {
    pub phase: QuantPhase,
    pub temperature: f64,
    /// `batch x d_c` noise on `(-1/2, 1/2)`. Required in the dither phase;
    /// in the soft phase it selects [`noisy_soft_round`] over bare soft rounding.
    pub noise: Option<Array2<f64>>,
}

impl ProxyState {
    pub fn hard() -> Self {
        Self {
            phase: QuantPhase::Hard,
            temperature: 0.0,
            noise: None,
        }
    }

    pub fn soft(temperature: f64) -> Self {
        Self {
            phase: QuantPhase::Soft,
            temperature,
            noise: None,
        }
    }

    pub fn noisy_soft(temperature: f64, noise: Array2<f64>) -> Self {
        Self {
            phase: QuantPhase::Soft,
            temperature,
            noise: Some(noise),
        }
    }

    pub fn dither(noise: Array2<f64>) -> Self {
        Self {
            phase: QuantPhase::Dither,
            temperature: 0.0,
            noise: Some(noise),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LossEval {
    pub loss: f64,
    /// Weighted mean rate in bits per sample.
    pub rate_bits: f64,
    /// Weighted mean distortion per sample.
    pub distortion: f64,
    /// `d loss / d params`, same layout as the model.
    pub grad: Vec<f64>,
    /// Bin masses that hit the clamp floor.
    pub clamped: usize,
    /// Changes whenever a parameter perturbation crosses a non-smooth point
    /// (activation kink or rounding step).
    pub signature: u64,
}

/// Rows processed together; keeps hidden activations cache-resident.
const CHUNK: usize = 256;

/// Loss and gradient of the weighted batch Lagrangian.
pub fn backprop(model: &CompressorModel, batch: &Batch, lambda: f64, proxy: &ProxyState) -> Result<LossEval> {
    let b = batch.len();
    if b == 0 {
        return Err(invalid("batch must be nonempty"));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    let dc = model.shape.latent_dim;
    match (proxy.phase, &proxy.noise) {
        (_, Some(u)) if u.dim() != (b, dc) => {
            return Err(Error::Shape {
                expected: b * dc,
                got: u.len(),
            })
        }
        (QuantPhase::Dither, None) => return Err(invalid("dither phase needs a noise sample")),
        (QuantPhase::Soft, _) if !(proxy.temperature > 0.0) || !proxy.temperature.is_finite() => {
            return Err(invalid(format!("soft rounding needs tau > 0, got {}", proxy.temperature)))
        }
        _ => {}
    }
    let total_w: f64 = batch.weights.iter().sum();
    let mut acc = LossEval {
        loss: 0.0,
        rate_bits: 0.0,
        distortion: 0.0,
        grad: vec![0.0; model.params.len()],
        clamped: 0,
        signature: 0,
    };
    let mut start = 0;
    while start < b {
        let end = (start + CHUNK).min(b);
        chunk(model, batch, start..end, total_w, lambda, proxy, &mut acc)?;
        start = end;
    }
    acc.loss = acc.rate_bits + lambda * acc.distortion;
    if !acc.loss.is_finite() {
        return Err(Error::Divergence {
            iteration: 0,
            loss: acc.loss,
            trace: Vec::new(),
        });
    }
    Ok(acc)
}

fn chunk(
    model: &CompressorModel,
    batch: &Batch,
    rows: std::ops::Range<usize>,
    total_w: f64,
    lambda: f64,
    proxy: &ProxyState,
    acc: &mut LossEval,
) -> Result<()> {
    let shape = model.shape;
    let dc = shape.latent_dim;
    let n = rows.len();
    let x = batch.x.slice(ndarray::s![rows.clone(), ..]);
    let wn: Vec<f64> = batch.weights[rows.clone()].iter().map(|w| w / total_w).collect();

    let cache_a = shape.analysis().forward(model.analysis_params(), x)?;
    let y = &cache_a.output;
    // Entropy-model input `z` and decoder input `yhat`, with derivatives in `y`.
    let mut z = Array2::zeros((n, dc));
    let mut dz_dy = Array2::ones((n, dc));
    let mut yhat = Array2::zeros((n, dc));
    let mut dyhat_dy = Array2::ones((n, dc));
    let mut sig = cache_a.activation_signature();
    let noise = proxy.noise.as_ref().map(|u| u.slice(ndarray::s![rows.clone(), ..]));
    match (proxy.phase, noise) {
        (QuantPhase::Dither, Some(u)) => {
            Zip::from(&mut z).and(y).and(&u).for_each(|h, &y, &u| *h = y + u);
            yhat.assign(&z);
        }
        (QuantPhase::Dither, None) => unreachable!("checked by caller"),
        (QuantPhase::Soft, Some(u)) => {
            let tau = proxy.temperature;
            Zip::from(&mut z)
                .and(&mut dz_dy)
                .and(&mut yhat)
                .and(&mut dyhat_dy)
                .and(y)
                .and(&u)
                .for_each(|z, dz, h, dh, &y, &u| (*z, *dz, *h, *dh) = noisy_soft_round(y, u, tau));
        }
        (QuantPhase::Soft, None) => {
            Zip::from(&mut yhat)
                .and(&mut dyhat_dy)
                .and(y)
                .for_each(|h, d, &y| (*h, *d) = soft_round(y, proxy.temperature));
            z.assign(&yhat);
            dz_dy.assign(&dyhat_dy);
        }
        (QuantPhase::Hard, _) => {
            yhat.assign(&y.mapv(f64::round));
            for v in yhat.iter() {
                sig = sig.rotate_left(7) ^ (*v as i64 as u64);
            }
            z.assign(&yhat);
        }
    }

    let (ga, rest) = acc.grad.split_at_mut(shape.analysis_range().end);
    let (gs, ge) = rest.split_at_mut(shape.synthesis_range().len());

    let rate = model
        .entropy_model()
        .rate_and_grad(z.as_slice().expect("standard layout"), &wn, ge);

    let cache_s = shape.synthesis().forward(model.synthesis_params(), yhat.view())?;
    sig ^= cache_s.activation_signature().rotate_left(17);
    let coord_scale = match shape.source {
        SourceKind::Circle => 1.0,
        SourceKind::Ramp => 1.0 / shape.input_dim as f64,
    };
    let mut d_xhat = &cache_s.output - &x;
    let mut distortion = 0.0;
    for (mut row, w) in d_xhat.rows_mut().into_iter().zip(&wn) {
        distortion += w * coord_scale * row.iter().map(|e| e * e).sum::<f64>();
        row *= 2.0 * coord_scale * lambda * w;
    }
    let mut d_y = shape.synthesis().backward(model.synthesis_params(), &cache_s, &d_xhat, gs);
    Zip::from(&mut d_y)
        .and(&ndarray::ArrayView2::from_shape((n, dc), &rate.d_yhat).expect("shape"))
        .and(&dyhat_dy)
        .and(&dz_dy)
        .for_each(|g, &r, &dh, &dz| *g = *g * dh + r * dz);
    shape.analysis().backward(model.analysis_params(), &cache_a, &d_y, ga);

    acc.rate_bits += rate.bits.iter().zip(&wn).map(|(r, w)| r * w).sum::<f64>();
    acc.distortion += distortion;
    acc.clamped += rate.clamped;
    acc.signature = acc.signature.rotate_left(5) ^ sig ^ rate.clamped as u64;
    Ok(())
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            beta1,
            beta2,
            epsilon,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.step_scaled(params, grad, lr, 0..0, 1.0);
    }

    /// Update with the learning rate multiplied by `scale` on `range`;
    /// a zero scale leaves those parameters and their moments untouched.
    pub fn step_scaled(&mut self, params: &mut [f64], grad: &[f64], lr: f64, range: std::ops::Range<usize>, scale: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (i, (((p, g), m), v)) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v).enumerate() {
            let rate = if range.contains(&i) { lr * scale } else { lr };
            if rate == 0.0 {
                continue;
            }
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= rate * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
        }
    }
}

/// One coordinate of a finite-difference gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordCheck {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// `|a - n| / max(|a|, |n|, 1e-6)`.
    pub relative_error: f64,
}

/// Compares [`backprop`] with central differences of step `h` on `coords`
/// randomly chosen parameters. Coordinates whose perturbation crosses a
/// non-smooth point of the loss are redrawn.
pub fn gradient_check(
    model: &CompressorModel,
    batch: &Batch,
    lambda: f64,
    proxy: &ProxyState,
    coords: usize,
    h: f64,
    seed: u64,
) -> Result<Vec<CoordCheck>> {
    use rand::Rng;
    let base = backprop(model, batch, lambda, proxy)?;
    let mut rng = crate::rng::stream(seed, crate::rng::Purpose::Test, 0x6c);
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(coords);
    let mut attempts = 0;
    while out.len() < coords {
        attempts += 1;
        if attempts > 100 * coords {
            return Err(invalid("gradient check could not find smooth coordinates"));
        }
        let i = rng.random_range(0..model.params.len());
        if out.iter().any(|c: &CoordCheck| c.index == i) {
            continue;
        }
        probe.params[i] = model.params[i] + h;
        let up = backprop(&probe, batch, lambda, proxy)?;
        probe.params[i] = model.params[i] - h;
        let down = backprop(&probe, batch, lambda, proxy)?;
        probe.params[i] = model.params[i];
        if up.signature != base.signature || down.signature != base.signature {
            continue;
        }
        let numeric = (up.loss - down.loss) / (2.0 * h);
        let analytic = base.grad[i];
        out.push(CoordCheck {
            index: i,
            analytic,
            numeric,
            relative_error: (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::model::ModelShape;
    use crate::rng::{stream, Purpose};
    use crate::sources::sample_into;
    use rand::Rng;

    fn circle_batch(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = stream(seed, Purpose::Test, 0);
        let mut x = Array2::zeros((n, 2));
        for mut row in x.rows_mut() {
            sample_into(SourceKind::Circle, &mut rng, row.as_slice_mut().unwrap());
        }
        x
    }

    #[test]
    fn zero_lambda_leaves_synthesis_untouched() {
        let shape = ModelShape::new(SourceKind::Circle, 0, 1).unwrap();
        let m = CompressorModel::init(shape, 1);
        let batch = Batch::new(circle_batch(32, 1));
        let out = backprop(&m, &batch, 0.0, &ProxyState::soft(2.0)).unwrap();
        assert!(out.grad[shape.synthesis_range()].iter().all(|g| *g == 0.0));
        assert!(out.grad[shape.analysis_range()].iter().any(|g| *g != 0.0));
    }

    #[test]
    fn duplicate_equals_double_weight() {
        let shape = ModelShape::new(SourceKind::Circle, 0, 2).unwrap();
        let m = CompressorModel::init(shape, 2);
        let x = circle_batch(3, 2);
        let mut dup = Array2::zeros((4, 2));
        for (i, src) in [0, 1, 2, 0].into_iter().enumerate() {
            dup.row_mut(i).assign(&x.row(src));
        }
        let a = backprop(&m, &Batch::new(dup), 64.0, &ProxyState::soft(3.0)).unwrap();
        let b = backprop(
            &m,
            &Batch::weighted(x, vec![2.0, 1.0, 1.0]).unwrap(),
            64.0,
            &ProxyState::soft(3.0),
        )
        .unwrap();
        assert!((a.loss - b.loss).abs() < 1e-12);
        for (p, q) in a.grad.iter().zip(&b.grad) {
            assert!((p - q).abs() < 1e-12 * (1.0 + p.abs()));
        }
    }

    #[test]
    fn rejects_bad_input() {
        let shape = ModelShape::new(SourceKind::Circle, 0, 1).unwrap();
        let m = CompressorModel::init(shape, 1);
        let empty = Batch::new(Array2::zeros((0, 2)));
        assert!(backprop(&m, &empty, 1.0, &ProxyState::hard()).is_err());
        let batch = Batch::new(circle_batch(4, 1));
        assert!(backprop(&m, &batch, -1.0, &ProxyState::hard()).is_err());
        assert!(backprop(&m, &batch, 1.0, &ProxyState::soft(0.0)).is_err());
        let dither = ProxyState {
            phase: QuantPhase::Dither,
            temperature: 0.0,
            noise: None,
        };
        assert!(backprop(&m, &batch, 1.0, &dither).is_err());
    }

    #[test]
    fn gradient_check_circle_all_smooth_proxies() {
        let shape = ModelShape::new(SourceKind::Circle, 0, 2).unwrap();
        let m = CompressorModel::init(shape, 8);
        let batch = Batch::new(circle_batch(32, 8));
        let mut rng = stream(8, Purpose::Dither, 0);
        let noise = Array2::from_shape_fn((32, 2), |_| rng.random_range(-0.5..0.5));
        for proxy in [
            ProxyState::soft(4.0),
            ProxyState::noisy_soft(4.0, noise.clone()),
            ProxyState::dither(noise),
        ] {
            let checks = gradient_check(&m, &batch, 256.0, &proxy, 64, 1e-4, 1).unwrap();
            assert_eq!(checks.len(), 64);
            for c in checks {
                assert!(c.relative_error < 1e-4, "{:?}: {c:?}", proxy.phase);
            }
        }
    }

    #[test]
    fn hard_phase_gradient_skips_rounding() {
        // Pass-through: the analysis gradient under hard rounding equals the
        // one obtained by feeding the rounded latent as a dither offset.
        let shape = ModelShape::new(SourceKind::Circle, 0, 1).unwrap();
        let m = CompressorModel::init(shape, 3);
        let batch = Batch::new(circle_batch(16, 3));
        let y = m.analyze(batch.x.view()).unwrap();
        let offset = y.mapv(f64::round) - &y;
        let hard = backprop(&m, &batch, 32.0, &ProxyState::hard()).unwrap();
        let dith = backprop(&m, &batch, 32.0, &ProxyState::dither(offset)).unwrap();
        assert!((hard.loss - dith.loss).abs() < 1e-9);
        for (a, b) in hard.grad.iter().zip(&dith.grad) {
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut p = vec![3.0, -2.0];
        let mut opt = Adam::new(2, 0.9, 0.999, 1e-8);
        for _ in 0..5000 {
            let g: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
            opt.step(&mut p, &g, 0.01);
        }
        assert!(p.iter().all(|v| v.abs() < 1e-3));
    }
}
