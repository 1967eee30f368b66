//! Differentiable stand-ins for rounding used during training.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantPhase {
    /// `y + u` with `u` uniform on `(-1/2, 1/2)`.
    Dither,
    /// Smooth soft rounding at temperature `tau`.
    Soft,
    /// `round(y)` forward, derivative 1 backward.
    Hard,
}

impl QuantPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            QuantPhase::Dither => "dither",
            QuantPhase::Soft => "soft",
            QuantPhase::Hard => "hard",
        }
    }
}

impl fmt::Display for QuantPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuantPhase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dither" => Ok(QuantPhase::Dither),
            "soft" => Ok(QuantPhase::Soft),
            "hard" => Ok(QuantPhase::Hard),
            _ => Err(invalid(format!("unknown quantization phase {s:?}"))),
        }
    }
}

/// Soft rounding `s_tau(y)` and its derivative.
///
/// Fixed points at integers, `s_tau(y + 1) = s_tau(y) + 1`, and strictly
/// increasing for every `tau > 0`; approaches `round` as `tau` grows.
#[inline]
pub fn soft_round(y: f64, tau: f64) -> (f64, f64) {
    let fl = y.floor();
    let r = y - fl - 0.5;
    let denom = 2.0 * (0.5 * tau).tanh();
    let t = (tau * r).tanh();
    (fl + 0.5 + t / denom, tau * (1.0 - t * t) / denom)
}

/// Applies the proxy to a scalar latent; returns `(yhat, d yhat / d y)`.
pub fn quant_proxy(y: f64, u: f64, tau: f64, phase: QuantPhase) -> Result<(f64, f64)> {
    match phase {
        QuantPhase::Dither => Ok((y + u, 1.0)),
        QuantPhase::Soft => {
            if !(tau > 0.0) || !tau.is_finite() {
                return Err(invalid(format!("soft rounding needs tau > 0, got {tau}")));
            }
            Ok(soft_round(y, tau))
        }
        QuantPhase::Hard => Ok((y.round(), 1.0)),
    }
}

/// Soft rounding with dither in between: the entropy model sees
/// `z = s_tau(y) + u` and the decoder sees `s_tau(z)`. Returns
/// `(z, dz/dy, yhat, dyhat/dy)`. Interpolates between dithering (small `tau`)
/// and hard rounding (large `tau`), and unlike bare soft rounding is not
/// invertible, so no continuous side information reaches the decoder.
#[inline]
pub fn noisy_soft_round(y: f64, u: f64, tau: f64) -> (f64, f64, f64, f64) {
    let (s, ds) = soft_round(y, tau);
    let z = s + u;
    let (yhat, dz) = soft_round(z, tau);
    (z, ds, yhat, dz * ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn integers_are_fixed_points() {
        for tau in [0.1, 1.0, 5.0, 20.0] {
            for k in -5..=5 {
                let (v, _) = soft_round(k as f64, tau);
                assert!((v - k as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sharp_soft_round_close_to_round() {
        // Away from the half-integers, where every soft rounding is pinned
        // to the midpoint by symmetry.
        let mut worst: f64 = 0.0;
        for i in 0..=7000 {
            let x = -0.35 + 0.7 * i as f64 / 7000.0;
            worst = worst.max((soft_round(x, 20.0).0 - x.round()).abs());
        }
        assert!(worst < 0.01, "{worst}");
        assert_eq!(soft_round(0.5, 20.0).0, 0.5);
        assert!((soft_round(0.05, 20.0).0 - 0.0).abs() < 1e-6);
        assert!((soft_round(0.95, 20.0).0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn phases() {
        assert_eq!(quant_proxy(0.3, 0.4, 1.0, QuantPhase::Dither).unwrap(), (0.7, 1.0));
        assert_eq!(quant_proxy(0.6, 0.0, 1.0, QuantPhase::Hard).unwrap(), (1.0, 1.0));
        assert!(quant_proxy(0.6, 0.0, 0.0, QuantPhase::Soft).is_err());
        assert!(quant_proxy(0.6, 0.0, -1.0, QuantPhase::Soft).is_err());
        assert_eq!("soft".parse::<QuantPhase>().unwrap(), QuantPhase::Soft);
    }

    #[test]
    fn noisy_soft_round_limits() {
        let (z, _, yhat, _) = noisy_soft_round(2.1, 0.3, 1e-3);
        assert!((z - 2.4).abs() < 1e-6 && (yhat - 2.4).abs() < 1e-6);
        let (_, _, yhat, _) = noisy_soft_round(2.1, 0.3, 30.0);
        assert!((yhat - 2.0).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn soft_round_equivariant(x in -50.0f64..50.0, tau in 0.01f64..40.0) {
            let a = soft_round(x, tau).0 + 1.0;
            let b = soft_round(x + 1.0, tau).0;
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn soft_round_increasing(x in -50.0f64..50.0, dx in 1e-6f64..1.0, tau in 0.01f64..30.0) {
            let (a, da) = soft_round(x, tau);
            let (b, _) = soft_round(x + dx, tau);
            prop_assert!(b >= a);
            prop_assert!(da > 0.0);
        }

        #[test]
        fn soft_round_derivative(x in -5.0f64..5.0, tau in 0.1f64..10.0) {
            let h = 1e-6;
            let fd = (soft_round(x + h, tau).0 - soft_round(x - h, tau).0) / (2.0 * h);
            let d = soft_round(x, tau).1;
            // Skip the integer seams where the floor jumps.
            if (x - x.round()).abs() > 1e-5 {
                prop_assert!((fd - d).abs() < 1e-5 * (1.0 + d.abs()));
            }
        }
    }
}
