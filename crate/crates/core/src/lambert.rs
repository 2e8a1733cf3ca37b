//! Real-valued Lambert W on the secondary branch W₋₁.

use std::f64::consts::E;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 60;
const RESIDUAL_TOL: f64 = 1e-13;

/// W₋₁(x) for x ∈ [-1/e, 0): the solution w ≤ -1 of `w e^w = x`.
///
/// Halley iteration from an asymptotic seed (`ln(-x) - ln(-ln(-x))` away
/// from the branch point, a √-series near it), converged to residual
/// `|w e^w - x| ≤ 1e-12`.
pub fn lambert_w_minus1(x: f64) -> Result<f64> {
    if !(-1.0 / E..0.0).contains(&x) {
        // allow the branch point itself despite rounding of 1/e
        if (x + 1.0 / E).abs() < f64::EPSILON {
            return Ok(-1.0);
        }
        return Err(Error::Domain(format!(
            "lambert_w_minus1 requires x in [-1/e, 0) (got {x})"
        )));
    }

    let p_sq = 2.0 * (1.0 + E * x);
    if p_sq <= 0.0 {
        return Ok(-1.0);
    }
    let mut w = if p_sq < 0.4 {
        // branch-point series W_{-1} = -1 - p - p²/3 - 11p³/72, p = sqrt(2(1+ex))
        let p = p_sq.sqrt();
        -1.0 - p - p_sq / 3.0 - 11.0 * p * p_sq / 72.0
    } else {
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        l1 - l2
    };

    for _ in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - x;
        if f.abs() <= RESIDUAL_TOL {
            return Ok(w);
        }
        let fp = ew * (w + 1.0);
        // Halley step: f'' = e^w (w + 2)
        let denom = fp - f * (w + 2.0) / (2.0 * (w + 1.0));
        let step = f / denom;
        w -= step;
        if step.abs() < 1e-16 * w.abs() {
            break;
        }
    }
    let residual = (w * w.exp() - x).abs();
    if residual <= 1e-12 {
        Ok(w)
    } else {
        Err(Error::Internal(format!(
            "lambert_w_minus1 failed to converge at x = {x} (residual {residual:e})"
        )))
    }
}
