//! A few seconds of internal consistency checks, run by `manifold-ed selftest`.

use ndarray::Array2;
use rand::Rng;

use crate::analytic::{circle_dual_lower_bound, ed_curves, one_minus_sinc_sq, ramp_dual_lower_bound};
use crate::error::{Error, Result};
use crate::neural::{
    eval_hard, gradient_check, hemisphere_model, soft_round, Batch, CompressorModel, ModelShape, ProxyState,
};
use crate::oracle::{oracle_ed, ArcQuantizer, OracleMode, OracleQuantizer};
use crate::rng::{stream, Purpose};
use crate::sources::{sample_into, SourceKind};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn ensure(cond: bool, detail: String) -> Result<String> {
    if cond {
        Ok(detail)
    } else {
        Err(Error::Check(detail))
    }
}

fn zero_rate() -> Result<String> {
    let c = circle_dual_lower_bound(1.0)? + circle_dual_lower_bound(2.0)?;
    let r = ramp_dual_lower_bound(1.0 / 12.0)? + ramp_dual_lower_bound(0.5)?;
    ensure(c == 0.0 && r == 0.0, format!("circle {c}, ramp {r}"))
}

fn oracle_closed_form() -> Result<String> {
    let q = OracleQuantizer::Arc(ArcQuantizer::uniform(4, 0.0)?);
    let p = oracle_ed(&q, OracleMode::Exact, 0)?;
    let d = one_minus_sinc_sq(std::f64::consts::PI / 4.0);
    ensure(
        (p.entropy_bits - 2.0).abs() < 1e-12 && (p.distortion - d).abs() < 1e-12,
        format!("H {} D {}", p.entropy_bits, p.distortion),
    )
}

fn duality_gap() -> Result<String> {
    let mut worst: f64 = 0.0;
    for source in [SourceKind::Circle, SourceKind::Ramp] {
        let curves = ed_curves(source, &[1e-2, 1e-3])?;
        for (lo, up) in curves.lower.points.iter().zip(&curves.upper.points) {
            if lo.entropy_bits > up.entropy_bits {
                return Err(Error::Check(format!("{source}: lower above upper at D={}", lo.distortion)));
            }
            worst = worst.max(up.entropy_bits - lo.entropy_bits);
        }
    }
    ensure(worst < 0.1, format!("largest gap {worst:.4} bits"))
}

fn soft_rounding() -> Result<String> {
    let (mid, _) = soft_round(0.5, 20.0);
    let (near, _) = soft_round(1.1, 20.0);
    ensure(
        (mid - 0.5).abs() < 1e-12 && (near - 1.0).abs() < 0.01,
        format!("s(0.5) = {mid}, s(1.1) = {near}"),
    )
}

fn gradients() -> Result<String> {
    let shape = ModelShape::new(SourceKind::Circle, 0, 1)?;
    let model = CompressorModel::init(shape, 11);
    let mut rng = stream(11, Purpose::Test, 0);
    let mut x = Array2::zeros((16, 2));
    for mut row in x.rows_mut() {
        sample_into(SourceKind::Circle, &mut rng, row.as_slice_mut().expect("row"));
    }
    let noise = Array2::from_shape_fn((16, 1), |_| rng.random_range(-0.5..0.5));
    let checks = gradient_check(&model, &Batch::new(x), 64.0, &ProxyState::dither(noise), 16, 1e-4, 11)?;
    let worst = checks.iter().map(|c| c.relative_error).fold(0.0, f64::max);
    ensure(worst < 1e-4, format!("largest relative error {worst:.2e}"))
}

fn hemisphere() -> Result<String> {
    let eval = eval_hard(&hemisphere_model(2)?, 20_000, 0)?;
    let p = &eval.point;
    let d = one_minus_sinc_sq(std::f64::consts::PI / 4.0);
    ensure(
        (p.entropy_bits - 2.0).abs() < 0.01 && (p.distortion - d).abs() < 5.0 * p.distortion_stderr(),
        format!("H {:.4} D {:.5} (uniform 4 arcs: D {d:.5})", p.entropy_bits, p.distortion),
    )
}

fn checkpoint() -> Result<String> {
    let model = CompressorModel::init(ModelShape::new(SourceKind::Ramp, 8, 2)?, 5);
    let mut buf = Vec::new();
    model.write_checkpoint(&mut buf)?;
    let back = CompressorModel::read_checkpoint(buf.as_slice())?;
    ensure(back.params == model.params, format!("{} bytes", buf.len()))
}

/// Runs every check; never stops early.
pub fn selftest() -> Vec<CheckOutcome> {
    let checks: [(&'static str, fn() -> Result<String>); 7] = [
        ("zero_rate_endpoints", zero_rate),
        ("oracle_closed_form", oracle_closed_form),
        ("duality_gap", duality_gap),
        ("soft_rounding", soft_rounding),
        ("gradients", gradients),
        ("hemisphere_model", hemisphere),
        ("checkpoint_round_trip", checkpoint),
    ];
    checks
        .into_iter()
        .map(|(name, f)| match f() {
            Ok(detail) => CheckOutcome {
                name,
                passed: true,
                detail,
            },
            Err(e) => CheckOutcome {
                name,
                passed: false,
                detail: e.to_string(),
            },
        })
        .collect()
}
