//! Fully connected network with two leaky-rectifier hidden layers and a linear
//! output, operating on row-major batches over a borrowed flat parameter slice.
//!
//! Parameter layout: `W1 (in×h1), b1, W2 (h1×h2), b2, W3 (h2×out), b3`, each
//! weight matrix row-major with inputs along rows.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};

use crate::error::{Error, Result};

/// Negative-side slope of the hidden activations.
pub const LEAKY_SLOPE: f64 = 0.01;

#[inline]
fn leaky(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

#[inline]
fn leaky_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MlpShape {
    pub input: usize,
    pub hidden: [usize; 2],
    pub output: usize,
}

impl MlpShape {
    pub fn new(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            input,
            hidden: [hidden, hidden],
            output,
        }
    }

    fn dims(&self) -> [usize; 4] {
        [self.input, self.hidden[0], self.hidden[1], self.output]
    }

    pub fn param_count(&self) -> usize {
        let d = self.dims();
        (0..3).map(|l| d[l] * d[l + 1] + d[l + 1]).sum()
    }

    /// `(weight offset, bias offset)` of layer `l` in the flat vector.
    fn offsets(&self, l: usize) -> (usize, usize) {
        let d = self.dims();
        let mut o = 0;
        for i in 0..l {
            o += d[i] * d[i + 1] + d[i + 1];
        }
        (o, o + d[l] * d[l + 1])
    }

    fn weight<'a>(&self, params: &'a [f64], l: usize) -> ArrayView2<'a, f64> {
        let d = self.dims();
        let (w, b) = self.offsets(l);
        ArrayView2::from_shape((d[l], d[l + 1]), &params[w..b]).expect("layer shape")
    }

    fn bias<'a>(&self, params: &'a [f64], l: usize) -> ArrayView1<'a, f64> {
        let d = self.dims();
        let (_, b) = self.offsets(l);
        ArrayView1::from(&params[b..b + d[l + 1]])
    }

    fn split_grad_mut<'a>(
        &self,
        grad: &'a mut [f64],
        l: usize,
    ) -> (ArrayViewMut2<'a, f64>, ArrayViewMut1<'a, f64>) {
        let d = self.dims();
        let (w, b) = self.offsets(l);
        let (wg, rest) = grad[w..b + d[l + 1]].split_at_mut(b - w);
        (
            ArrayViewMut2::from_shape((d[l], d[l + 1]), wg).expect("layer shape"),
            ArrayViewMut1::from(rest),
        )
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: rand::Rng + ?Sized>(&self, rng: &mut R, params: &mut [f64]) {
        let d = self.dims();
        for l in 0..3 {
            let (w, b) = self.offsets(l);
            let limit = (6.0 / (d[l] + d[l + 1]) as f64).sqrt();
            for p in &mut params[w..b] {
                *p = rng.random_range(-limit..limit);
            }
            params[b..b + d[l + 1]].fill(0.0);
        }
    }

    fn check(&self, params: &[f64], x: &ArrayView2<f64>) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        if x.ncols() != self.input {
            return Err(Error::Shape {
                expected: self.input,
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Batched forward pass keeping the activations needed for backprop.
    pub fn forward(&self, params: &[f64], x: ArrayView2<f64>) -> Result<MlpCache> {
        self.check(params, &x)?;
        let mut acts = Vec::with_capacity(2);
        let mut h = x.to_owned();
        for l in 0..3 {
            let mut z = h.dot(&self.weight(params, l));
            z += &self.bias(params, l);
            if l < 2 {
                // Leaky units preserve sign, so activations also tell the kink side.
                z.mapv_inplace(leaky);
            }
            acts.push(std::mem::replace(&mut h, z));
        }
        let input = acts.remove(0);
        Ok(MlpCache {
            input,
            acts,
            output: h,
        })
    }

    pub fn predict(&self, params: &[f64], x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(params, x)?.output)
    }

    /// Accumulates parameter gradients into `grad` and returns the input gradient.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &MlpCache,
        d_out: &Array2<f64>,
        grad: &mut [f64],
    ) -> Array2<f64> {
        let mut delta = d_out.clone();
        for l in (0..3).rev() {
            let input = if l == 0 { &cache.input } else { &cache.acts[l - 1] };
            {
                let (mut gw, mut gb) = self.split_grad_mut(grad, l);
                general_mat_mul(1.0, &input.t(), &delta, 1.0, &mut gw);
                gb += &delta.sum_axis(Axis(0));
            }
            let mut d_in = delta.dot(&self.weight(params, l).t());
            if l > 0 {
                d_in.zip_mut_with(&cache.acts[l - 1], |g, &a| *g *= leaky_grad(a));
            }
            delta = d_in;
        }
        delta
    }
}

/// Intermediate values of a forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    input: Array2<f64>,
    acts: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

impl MlpCache {
    /// Hash of the sign pattern of every hidden pre-activation; changes exactly
    /// when a perturbation crosses a kink of the activation.
    pub fn activation_signature(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for z in self.acts.iter().flat_map(|p| p.iter()) {
            h ^= u64::from(*z > 0.0);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }
}

/// Owned network: a shape plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub shape: MlpShape,
    pub params: Vec<f64>,
}

impl Mlp {
    pub fn zeros(shape: MlpShape) -> Self {
        Self {
            params: vec![0.0; shape.param_count()],
            shape,
        }
    }

    pub fn random<R: rand::Rng + ?Sized>(shape: MlpShape, rng: &mut R) -> Self {
        let mut m = Self::zeros(shape);
        shape.init(rng, &mut m.params);
        m
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let xv = ArrayView2::from_shape((1, x.len()), x).map_err(|_| Error::Shape {
            expected: self.shape.input,
            got: x.len(),
        })?;
        Ok(self.shape.predict(&self.params, xv)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.shape.predict(&self.params, x)
    }

    pub fn weights_mut(&mut self, layer: usize) -> ArrayViewMut2<'_, f64> {
        let shape = self.shape;
        shape.split_grad_mut(&mut self.params, layer).0
    }

    pub fn bias_mut(&mut self, layer: usize) -> ArrayViewMut1<'_, f64> {
        let shape = self.shape;
        shape.split_grad_mut(&mut self.params, layer).1
    }
}
