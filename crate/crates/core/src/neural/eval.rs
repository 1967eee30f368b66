//! Test-time behaviour of a model under hard rounding.

use std::collections::HashMap;
use std::f64::consts::TAU;

use ndarray::Array2;
use rayon::prelude::*;

use super::entropy::{BinModel, MIN_BIN_MASS};
use super::model::CompressorModel;
use crate::curve::{EdPoint, PointStderr};
use crate::error::{invalid, Result};
use crate::evaluation::{MseAccumulator, MseNorm, SymbolHistogram};
use crate::numeric::MeanVar;
use crate::rng::{stream, Purpose};
use crate::sources::{point_from_param, sample_into, SourceKind};

pub const MIN_EVAL_SAMPLES: usize = 10_000;
const EVAL_BLOCK: usize = 4096;

#[derive(Debug, Clone)]
pub struct HardEval {
    /// Plug-in joint entropy of the symbol tuples and the reconstruction MSE.
    pub point: EdPoint,
    /// Mean entropy-model codelength of the observed symbols, in bits.
    pub model_rate_bits: f64,
    pub model_rate_stderr: f64,
    pub histogram: SymbolHistogram,
}

struct BlockStats {
    hist: SymbolHistogram,
    mse: MseAccumulator,
    rate: MeanVar,
}

/// Encodes `n` fresh source samples with `round(g_a(x))`, decodes with `g_s`,
/// and measures entropy and distortion. Blocks are evaluated in parallel and
/// merged in block order, so the result depends only on `(model, n, seed)`.
pub fn eval_hard(model: &CompressorModel, n: usize, seed: u64) -> Result<HardEval> {
    if n < MIN_EVAL_SAMPLES {
        return Err(invalid(format!(
            "hard evaluation needs at least {MIN_EVAL_SAMPLES} samples, got {n}"
        )));
    }
    let shape = model.shape;
    let blocks = n.div_ceil(EVAL_BLOCK);
    let em = model.entropy_model();
    let stats: Vec<BlockStats> = (0..blocks)
        .into_par_iter()
        .map(|b| -> Result<BlockStats> {
            let rows = EVAL_BLOCK.min(n - b * EVAL_BLOCK);
            let mut rng = stream(seed, Purpose::Evaluation, b as u64);
            let mut x = Array2::zeros((rows, shape.input_dim));
            for mut row in x.rows_mut() {
                sample_into(shape.source, &mut rng, row.as_slice_mut().expect("row"));
            }
            let symbols = model.encode(x.view())?;
            let xhat = model.decode(symbols.view())?;
            let mut st = BlockStats {
                hist: SymbolHistogram::new(),
                mse: MseAccumulator::new(MseNorm::for_source(shape.source)),
                rate: MeanVar::default(),
            };
            let mut mass_cache: HashMap<(usize, i64), f64> = HashMap::new();
            let mut tuple = vec![0i64; shape.latent_dim];
            for i in 0..rows {
                let mut bits = 0.0;
                for (j, t) in tuple.iter_mut().enumerate() {
                    *t = symbols[[i, j]] as i64;
                    let m = *mass_cache
                        .entry((j, *t))
                        .or_insert_with(|| em.bin_mass(j, *t as f64).max(MIN_BIN_MASS));
                    bits -= m.log2();
                }
                st.hist.add(&tuple);
                st.rate.push(bits);
                let xr = x.row(i);
                let hr = xhat.row(i);
                st.mse.push(xr.as_slice().expect("row"), hr.as_slice().expect("row"));
            }
            Ok(st)
        })
        .collect::<Result<_>>()?;
    let mut hist = SymbolHistogram::new();
    let mut mse = MseAccumulator::new(MseNorm::for_source(shape.source));
    let mut rate = MeanVar::default();
    for s in &stats {
        hist.merge(&s.hist);
        mse.merge(&s.mse);
        rate.merge(&s.rate);
    }
    let entropy = hist.entropy_bits()?;
    let point = EdPoint::new(entropy, mse.mean(), "neural")
        .with_param("latent_dim", shape.latent_dim)
        .with_param("samples", n)
        .with_param("model_rate_bits", format!("{:.6}", rate.mean()))
        .with_stderr(PointStderr {
            entropy_bits: hist.entropy_stderr(),
            distortion: mse.stderr(),
        });
    Ok(HardEval {
        point,
        model_rate_bits: rate.mean(),
        model_rate_stderr: rate.stderr(),
        histogram: hist,
    })
}

/// Grid of latent parameters: angles `2πi/G` for the circle, phases `i/G` for the ramp.
pub fn probe_grid(source: SourceKind, grid: usize) -> Vec<f64> {
    let span = match source {
        SourceKind::Circle => TAU,
        SourceKind::Ramp => 1.0,
    };
    (0..grid).map(|i| span * i as f64 / grid as f64).collect()
}

fn grid_inputs(model: &CompressorModel, grid: usize) -> Result<(Vec<f64>, Array2<f64>)> {
    if grid == 0 {
        return Err(invalid("probe grid must be nonempty"));
    }
    let params = probe_grid(model.shape.source, grid);
    let mut x = Array2::zeros((grid, model.shape.input_dim));
    for (p, mut row) in params.iter().zip(x.rows_mut()) {
        point_from_param(model.shape.source, *p, row.as_slice_mut().expect("row"))?;
    }
    Ok((params, x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    /// Angle (circle) or phase (ramp).
    pub param: f64,
    pub symbols: Vec<i64>,
}

/// Quantized encoder output over a uniform grid of the latent parameter.
pub fn probe_analysis(model: &CompressorModel, grid: usize) -> Result<Vec<ProbeRow>> {
    let (params, x) = grid_inputs(model, grid)?;
    let s = model.encode(x.view())?;
    Ok(params
        .into_iter()
        .zip(s.rows())
        .map(|(param, row)| ProbeRow {
            param,
            symbols: row.iter().map(|v| *v as i64).collect(),
        })
        .collect())
}

/// `g_s(round(g_a(x)))[index]` over a uniform grid of the latent parameter.
pub fn probe_synthesis(model: &CompressorModel, index: usize, grid: usize) -> Result<Vec<(f64, f64)>> {
    if index >= model.shape.input_dim {
        return Err(invalid(format!(
            "coordinate {index} out of range 0..{}",
            model.shape.input_dim
        )));
    }
    let (params, x) = grid_inputs(model, grid)?;
    let xhat = model.decode(model.encode(x.view())?.view())?;
    Ok(params.into_iter().zip(xhat.column(index).iter().copied()).collect())
}

pub fn probe_analysis_csv(rows: &[ProbeRow]) -> String {
    let dims = rows.first().map_or(0, |r| r.symbols.len());
    let mut s = String::from("param");
    for j in 0..dims {
        s.push_str(&format!(",symbol_{j}"));
    }
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{:.17e}", r.param));
        for v in &r.symbols {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}

pub fn probe_synthesis_csv(rows: &[(f64, f64)]) -> String {
    let mut s = String::from("param,value\n");
    for (p, v) in rows {
        s.push_str(&format!("{p:.17e},{v:.17e}\n"));
    }
    s
}

/// Number of maximal runs of equal consecutive symbols, treating the grid as cyclic.
pub fn symbol_runs(rows: &[ProbeRow]) -> usize {
    let n = rows.len();
    if n == 0 {
        return 0;
    }
    let changes = (0..n).filter(|&i| rows[i].symbols != rows[(i + 1) % n].symbols).count();
    changes.max(1)
}

/// Whether the staircase shows the continuity defect: a jump of more than one
/// level between adjacent grid points, or a symbol that recurs after the
/// sequence moved away from it (non-cyclic scan).
pub fn has_staircase_defect(rows: &[ProbeRow]) -> bool {
    let mut seen: Vec<&Vec<i64>> = Vec::new();
    for w in rows.windows(2) {
        let jump = w[0]
            .symbols
            .iter()
            .zip(&w[1].symbols)
            .any(|(a, b)| (a - b).abs() > 1);
        if jump {
            return true;
        }
    }
    for r in rows {
        if seen.last() != Some(&&r.symbols) {
            if seen.contains(&&r.symbols) {
                return true;
            }
            seen.push(&r.symbols);
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::model::ModelShape;

    #[test]
    fn zero_model_gives_zero_rate_and_source_variance() {
        let shape = ModelShape::new(SourceKind::Circle, 0, 1).unwrap();
        let m = CompressorModel::constant(shape, &[0.0, 0.0]).unwrap();
        let e = eval_hard(&m, 100_000, 1).unwrap();
        assert_eq!(e.point.entropy_bits, 0.0);
        assert!((e.point.distortion - 1.0).abs() < 1e-12);
        let shape = ModelShape::new(SourceKind::Ramp, 64, 1).unwrap();
        let m = CompressorModel::constant(shape, &[0.0; 64]).unwrap();
        let e = eval_hard(&m, 100_000, 1).unwrap();
        assert_eq!(e.point.entropy_bits, 0.0);
        let exact = 1.0 / 12.0;
        assert!((e.point.distortion - exact).abs() < 4.0 * e.point.distortion_stderr() + 1.0 / (6.0 * 64.0 * 64.0));
        assert!(eval_hard(&m, 9_999, 1).is_err());
    }

    #[test]
    fn eval_is_deterministic() {
        let shape = ModelShape::new(SourceKind::Circle, 0, 2).unwrap();
        let m = CompressorModel::init(shape, 3);
        let a = eval_hard(&m, 20_000, 5).unwrap();
        let b = eval_hard(&m, 20_000, 5).unwrap();
        assert_eq!(a.point, b.point);
        assert_eq!(a.histogram, b.histogram);
    }

    #[test]
    fn probe_row_counts() {
        let shape = ModelShape::new(SourceKind::Ramp, 16, 2).unwrap();
        let m = CompressorModel::init(shape, 3);
        assert_eq!(probe_analysis(&m, 37).unwrap().len(), 37);
        assert_eq!(probe_synthesis(&m, 15, 1024).unwrap().len(), 1024);
        assert!(probe_synthesis(&m, 16, 10).is_err());
        assert!(probe_analysis(&m, 0).is_err());
        let csv = probe_analysis_csv(&probe_analysis(&m, 5).unwrap());
        assert!(csv.starts_with("param,symbol_0,symbol_1\n"));
    }

    #[test]
    fn staircase_diagnostics() {
        let rows = |v: &[i64]| {
            v.iter()
                .enumerate()
                .map(|(i, s)| ProbeRow {
                    param: i as f64,
                    symbols: vec![*s],
                })
                .collect::<Vec<_>>()
        };
        assert!(!has_staircase_defect(&rows(&[0, 0, 1, 1, 2])));
        assert!(has_staircase_defect(&rows(&[0, 0, 2])));
        assert!(has_staircase_defect(&rows(&[0, 1, 0])));
        assert_eq!(symbol_runs(&rows(&[0, 0, 1, 1, 2])), 3);
        assert_eq!(symbol_runs(&rows(&[0, 1, 1, 0])), 2);
        assert_eq!(symbol_runs(&rows(&[3, 3])), 1);
    }
}
