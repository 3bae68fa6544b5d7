//! Principal branch of the Lambert W function on `x >= 0`.

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 50;

/// `W_0(x)`: the `w >= 0` with `w e^w = x`.
///
/// Halley iteration from a series guess near zero, a `ln(1 + x)` based guess
/// up to `e`, and the asymptotic `L1 - L2 + L2/L1` guess above. For `x > e`
/// the iteration runs on `w + ln w = ln x`, which avoids overflow in `e^w`.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::DomainError(x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if x <= std::f64::consts::E {
        Ok(halley_direct(x, initial_guess_small(x)))
    } else {
        Ok(halley_log(x.ln(), initial_guess_large(x)))
    }
}

fn initial_guess_small(x: f64) -> f64 {
    if x < 0.25 {
        x * (1.0 - x * (1.0 - 1.5 * x))
    } else {
        let l = x.ln_1p();
        l * (1.0 - (1.0 + l).ln() / (2.0 + l))
    }
}

fn initial_guess_large(x: f64) -> f64 {
    let l1 = x.ln();
    let l2 = l1.ln();
    l1 - l2 + l2 / l1
}

fn converged(step: f64, w: f64) -> bool {
    step.abs() <= 1e-15 * (1.0 + w.abs())
}

// f(w) = w e^w - x
fn halley_direct(x: f64, mut w: f64) -> f64 {
    for _ in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if converged(step, w) {
            break;
        }
    }
    w
}

// g(w) = w + ln w - ln x, g' = 1 + 1/w, g'' = -1/w^2
fn halley_log(ln_x: f64, mut w: f64) -> f64 {
    for _ in 0..MAX_ITERATIONS {
        let g = w + w.ln() - ln_x;
        if g == 0.0 {
            break;
        }
        let d1 = 1.0 + 1.0 / w;
        let d2 = -1.0 / (w * w);
        let step = g / (d1 - 0.5 * g * d2 / d1);
        w -= step;
        if converged(step, w) {
            break;
        }
    }
    w
}
