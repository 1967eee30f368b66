//! Exact quantizers written directly into the network weights.
//!
//! Both hidden layers use the same two identities of the leaky unit `σ`:
//! `σ(v) - σ(-v) = (1 + α) v` carries a linear value through a layer, and
//! `relu(v) = (σ(v) - α v) / (1 - α)` gives a hinge for piecewise-linear maps.

use super::mlp::{MlpShape, LEAKY_SLOPE as ALPHA};
use super::model::{CompressorModel, ModelShape};
use crate::curve::EdPoint;
use crate::error::{invalid, Result};
use crate::oracle::{ramp_conditional_mean, ramp_discrete_distortion_at, HemisphereQuantizer, IntervalQuantizer};
use crate::sources::SourceKind;

/// Affine combination of the units of one layer.
#[derive(Debug, Clone, Default)]
struct Form {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl Form {
    fn scaled(&self, c: f64) -> Form {
        Form {
            terms: self.terms.iter().map(|&(u, w)| (u, w * c)).collect(),
            constant: self.constant * c,
        }
    }

    fn plus(&self, other: &Form) -> Form {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Form {
            terms,
            constant: self.constant + other.constant,
        }
    }

    fn shift(&self, c: f64) -> Form {
        Form {
            terms: self.terms.clone(),
            constant: self.constant + c,
        }
    }
}

/// Writes weights of one network unit by unit.
struct Builder {
    shape: MlpShape,
    params: Vec<f64>,
    used: [usize; 2],
}

impl Builder {
    fn new(shape: MlpShape) -> Self {
        Self {
            shape,
            params: vec![0.0; shape.param_count()],
            used: [0, 0],
        }
    }

    fn dims(&self) -> [usize; 4] {
        [self.shape.input, self.shape.hidden[0], self.shape.hidden[1], self.shape.output]
    }

    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let d = self.dims();
        let mut o = 0;
        for i in 0..l {
            o += d[i] * d[i + 1] + d[i + 1];
        }
        (o, o + d[l] * d[l + 1])
    }

    /// New unit in hidden layer `l` (0 or 1) computing `σ(form)` over the previous layer.
    fn unit(&mut self, l: usize, form: &Form) -> Result<usize> {
        let d = self.dims();
        let u = self.used[l];
        if u >= d[l + 1] {
            return Err(invalid(format!("construction needs more than {} hidden units", d[l + 1])));
        }
        self.used[l] += 1;
        self.set(l, form, u);
        Ok(u)
    }

    fn set(&mut self, l: usize, form: &Form, out: usize) {
        let d = self.dims();
        let (w, b) = self.layer_offsets(l);
        for &(i, c) in &form.terms {
            self.params[w + i * d[l + 1] + out] += c;
        }
        self.params[b + out] += form.constant;
    }

    /// Linear value `form` (over layer `l-1`) as a form over layer `l`.
    fn pass(&mut self, l: usize, form: &Form) -> Result<Form> {
        let a = self.unit(l, form)?;
        let b = self.unit(l, &form.scaled(-1.0))?;
        let c = 1.0 / (1.0 + ALPHA);
        Ok(Form {
            terms: vec![(a, c), (b, -c)],
            constant: 0.0,
        })
    }

    /// Piecewise-linear interpolation of `points` (ascending in x) applied to
    /// the linear value `x` of the previous layer, as a form over layer `l`.
    fn piecewise(&mut self, l: usize, x: &Form, x_here: &Form, points: &[(f64, f64)]) -> Result<Form> {
        let (x0, y0) = points[0];
        if points.len() == 1 {
            return Ok(Form {
                terms: vec![],
                constant: y0,
            });
        }
        let slope = |i: usize| (points[i + 1].1 - points[i].1) / (points[i + 1].0 - points[i].0);
        let mut f = x_here.scaled(slope(0)).shift(y0 - slope(0) * x0);
        for i in 1..points.len() - 1 {
            let delta = slope(i) - slope(i - 1);
            let xi = points[i].0;
            let q = self.unit(l, &x.shift(-xi))?;
            // relu(x - xi) = (σ(x - xi) - α (x - xi)) / (1 - α)
            let hinge = Form {
                terms: vec![(q, 1.0)],
                constant: 0.0,
            }
            .plus(&x_here.shift(-xi).scaled(-ALPHA))
            .scaled(1.0 / (1.0 - ALPHA));
            f = f.plus(&hinge.scaled(delta));
        }
        Ok(f)
    }

    fn output(&mut self, o: usize, form: &Form) {
        self.set(2, form, o);
    }

    fn input(i: usize) -> Form {
        Form {
            terms: vec![(i, 1.0)],
            constant: 0.0,
        }
    }
}

/// Circle model with a two-dimensional latent implementing the hemisphere
/// product code: one latent coordinate indexes `cos θ` on the companded grid
/// `cos(jπ/k)`, the other is the sign bit of `sin θ`. Equivalent to `2k`
/// uniform arcs.
pub fn hemisphere_model(k: usize) -> Result<CompressorModel> {
    let q = HemisphereQuantizer::new(k)?;
    let shape = ModelShape::new(SourceKind::Circle, 0, 2)?;
    let mut model = CompressorModel::init(shape, 0);

    // Analysis: y1 = companding(z1), y2 = z2 / 2 + 1/2.
    let mut a = Builder::new(shape.analysis());
    let z1 = Builder::input(0);
    let z2 = Builder::input(1);
    let z1_here = a.pass(0, &z1)?;
    let z2_here = a.pass(0, &z2)?;
    let mut knots = vec![(-1.0, 0.0)];
    for j in (1..k).rev() {
        knots.push(((j as f64 * std::f64::consts::PI / k as f64).cos(), k as f64 - j as f64 - 0.5));
    }
    knots.push((1.0, (k - 1) as f64));
    let y1 = a.piecewise(0, &z1, &z1_here, &knots)?;
    let y2 = z2_here.scaled(0.5).shift(0.5);
    let y1_out = a.pass(1, &y1)?;
    let y2_out = a.pass(1, &y2)?;
    a.output(0, &y1_out);
    a.output(1, &y2_out);

    // Synthesis: arc centroids; the sign of the second coordinate follows the bit.
    let mut s = Builder::new(shape.synthesis());
    let s1 = Builder::input(0);
    let s2 = Builder::input(1);
    let s1_here = s.pass(0, &s1)?;
    let s2_here = s.pass(0, &s2)?;
    let centroids: Vec<[f64; 2]> = (0..k).map(|i| q.decode(1, i)).collect::<Result<_>>()?;
    let cx_points: Vec<(f64, f64)> = centroids.iter().enumerate().map(|(i, c)| (i as f64, c[0])).collect();
    let cy_points: Vec<(f64, f64)> = centroids.iter().enumerate().map(|(i, c)| (i as f64, c[1])).collect();
    let cx = s.piecewise(0, &s1, &s1_here, &cx_points)?;
    let cy = s.piecewise(0, &s1, &s1_here, &cy_points)?;
    // (2 s2 - 1) g for 0 ≤ g < m via σ(g + m(s2 - 1)) - σ(g - m s2).
    let m = 2.0;
    let pos = s.unit(1, &cy.plus(&s2_here.scaled(m)).shift(-m))?;
    let neg = s.unit(1, &cy.plus(&s2_here.scaled(-m)))?;
    let bit = s.pass(1, &s2_here)?;
    let cx_out = s.pass(1, &cx)?;
    let c = 1.0 / (1.0 - ALPHA);
    let y = Form {
        terms: vec![(pos, c), (neg, -c)],
        constant: 0.0,
    }
    .plus(&bit.scaled(-2.0 * ALPHA * m * c))
    .shift(ALPHA * m * c);
    s.output(0, &cx_out);
    s.output(1, &y);

    model.params[shape.analysis_range()].copy_from_slice(&a.params);
    model.params[shape.synthesis_range()].copy_from_slice(&s.params);
    Ok(model)
}

/// Ramp model with a scalar latent implementing `k` equal phase intervals.
///
/// The analysis reads the first sample only: `y = k (x_0 + 1/2) - 1/2`, so
/// the cells are uniform in `(t_0 + V) mod 1`. The synthesis interpolates the
/// exact conditional means between integer symbols.
pub fn ramp_interval_model(k: usize, ramp_dim: usize) -> Result<CompressorModel> {
    if k == 0 {
        return Err(invalid("interval model needs k ≥ 1"));
    }
    let shape = ModelShape::new(SourceKind::Ramp, ramp_dim, 1)?;
    let mut model = CompressorModel::init(shape, 0);

    let mut a = Builder::new(shape.analysis());
    let x0_here = a.pass(0, &Builder::input(0))?;
    let y = x0_here.scaled(k as f64).shift(0.5 * k as f64 - 0.5);
    let y_out = a.pass(1, &y)?;
    a.output(0, &y_out);

    let mut s = Builder::new(shape.synthesis());
    let sym = Builder::input(0);
    let sym_here = s.pass(0, &sym)?;
    // Hinges at the interior integers, shared by all output coordinates.
    let hinges: Vec<usize> = (1..k.saturating_sub(1))
        .map(|i| s.unit(0, &sym.shift(-(i as f64))))
        .collect::<Result<_>>()?;
    let layer1_units: Vec<usize> = sym_here
        .terms
        .iter()
        .map(|t| t.0)
        .chain(hinges.iter().copied())
        .collect();
    let mut carried = std::collections::HashMap::new();
    for &u in &layer1_units {
        carried.insert(u, s.pass(1, &Form { terms: vec![(u, 1.0)], constant: 0.0 })?);
    }
    let lift = |f: &Form| -> Form {
        f.terms
            .iter()
            .fold(Form { terms: vec![], constant: f.constant }, |acc, &(u, c)| acc.plus(&carried[&u].scaled(c)))
    };
    let cells: Vec<(f64, f64)> = (0..k).map(|i| (i as f64 / k as f64, (i + 1) as f64 / k as f64)).collect();
    for (o, t) in observation_times(ramp_dim).into_iter().enumerate() {
        let means: Vec<f64> = cells.iter().map(|&c| ramp_conditional_mean(&[c], t)).collect();
        // Same construction as `Builder::piecewise`, reusing the shared hinges.
        let mut f = Form {
            terms: vec![],
            constant: means[0],
        };
        if k > 1 {
            let slope = |i: usize| means[i + 1] - means[i];
            f = sym_here.scaled(slope(0)).shift(means[0]);
            for (i, &q) in (1..k - 1).zip(&hinges) {
                let delta = slope(i) - slope(i - 1);
                let hinge = Form {
                    terms: vec![(q, 1.0)],
                    constant: 0.0,
                }
                .plus(&sym_here.shift(-(i as f64)).scaled(-ALPHA))
                .scaled(1.0 / (1.0 - ALPHA));
                f = f.plus(&hinge.scaled(delta));
            }
        }
        s.output(o, &lift(&f));
    }

    model.params[shape.analysis_range()].copy_from_slice(&a.params);
    model.params[shape.synthesis_range()].copy_from_slice(&s.params);
    Ok(model)
}

/// Sample times as seen from the first sample's phase: `t_k - t_0 = k / d`.
fn observation_times(ramp_dim: usize) -> Vec<f64> {
    (0..ramp_dim).map(|i| i as f64 / ramp_dim as f64).collect()
}

/// Exact entropy and distortion of [`ramp_interval_model`].
pub fn ramp_interval_reference(k: usize, ramp_dim: usize) -> Result<EdPoint> {
    let q = IntervalQuantizer::uniform(k)?;
    let d = ramp_discrete_distortion_at(&q, &observation_times(ramp_dim));
    Ok(EdPoint::new((k as f64).log2(), d, "oracle_interval")
        .with_param("k", k)
        .with_param("ramp_dim", ramp_dim))
}
