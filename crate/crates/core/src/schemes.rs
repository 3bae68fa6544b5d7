//! Interpolation schemes between two weight vectors, and the two-step optimal
//! intermediate they approximate.
//!
//! For a single intermediate point the reserve-maximizing `w̃_i` solves
//! `1 - ln(w0_i / w̃_i) = wf_i / w̃_i`, i.e. `w̃_i = wf_i / W_0(e wf_i / w0_i)`,
//! and is bracketed by the geometric and arithmetic means of `w0_i, wf_i`.
//! The approximately-optimal trajectory averages the linear and geometric
//! interpolants and renormalizes every step onto the simplex.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lambert::lambert_w0;
use crate::reserves::log_two_step_ratio_raw;
use crate::types::{Scheme, Trajectory, WeightVector};

/// Start weights, end weights and the number of weight changes `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationRequest {
    pub w_start: WeightVector,
    pub w_end: WeightVector,
    pub num_steps: usize,
}

impl InterpolationRequest {
    pub fn new(w_start: WeightVector, w_end: WeightVector, num_steps: usize) -> Result<Self> {
        if w_start.len() != w_end.len() {
            return Err(Error::DimensionMismatch {
                expected: w_start.len(),
                found: w_end.len(),
            });
        }
        if num_steps < 1 {
            return Err(Error::InvalidConfig("num_steps must be at least 1".into()));
        }
        Ok(InterpolationRequest {
            w_start,
            w_end,
            num_steps,
        })
    }

    pub fn num_tokens(&self) -> usize {
        self.w_start.len()
    }

    fn epsilon(&self) -> f64 {
        self.w_start.epsilon_bound().min(self.w_end.epsilon_bound())
    }

    fn fraction(&self, k: usize) -> f64 {
        k as f64 / self.num_steps as f64
    }
}

/// `wf_i / W_0(e wf_i / w0_i)` per component, not renormalized.
pub fn optimal_intermediate(w0: &WeightVector, wf: &WeightVector) -> Result<Vec<f64>> {
    if w0.len() != wf.len() {
        return Err(Error::DimensionMismatch {
            expected: w0.len(),
            found: wf.len(),
        });
    }
    w0.as_slice()
        .iter()
        .zip(wf.as_slice())
        .map(|(&a, &b)| Ok(b / lambert_w0(std::f64::consts::E * b / a)?))
        .collect()
}

/// `∂r/∂w̃_i = r (wf_i / w̃_i + ln(w0_i / w̃_i) - 1)` for the two-step ratio `r`.
pub fn d_r_d_wtilde(w0: &[f64], w_mid: &[f64], wf: &[f64]) -> Result<Vec<f64>> {
    if w0.len() != w_mid.len() || w0.len() != wf.len() {
        return Err(Error::DimensionMismatch {
            expected: w0.len(),
            found: w_mid.len().min(wf.len()),
        });
    }
    if let Some((index, &value)) = w_mid
        .iter()
        .enumerate()
        .find(|(_, &m)| !(m > 0.0 && m < 1.0))
    {
        return Err(Error::OutOfBounds {
            index,
            value,
            epsilon: 0.0,
        });
    }
    let r = log_two_step_ratio_raw(w0, w_mid, wf).exp();
    Ok(w0
        .iter()
        .zip(w_mid)
        .zip(wf)
        // wf/m + ln(w0/m) - 1 = (wf - m)/m + ln(1 + (w0 - m)/m)
        .map(|((&a, &m), &b)| r * ((b - m) / m + ((a - m) / m).ln_1p()))
        .collect())
}

/// `(1 - k/f) w0 + (k/f) wf`.
pub fn linear_trajectory(req: &InterpolationRequest) -> Result<Trajectory> {
    let rows = linear_curve(req);
    finish(req, rows, Scheme::Linear, false)
}

fn linear_curve(req: &InterpolationRequest) -> Vec<Vec<f64>> {
    let (a, b) = (req.w_start.as_slice(), req.w_end.as_slice());
    (0..=req.num_steps)
        .map(|k| {
            let t = req.fraction(k);
            a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
        })
        .collect()
}

/// Raw geometric interpolants `w0^{1-k/f} wf^{k/f}`; these do not sum to 1.
pub fn geometric_curve(req: &InterpolationRequest) -> Vec<Vec<f64>> {
    let (a, b) = (req.w_start.as_slice(), req.w_end.as_slice());
    (0..=req.num_steps)
        .map(|k| {
            let t = req.fraction(k);
            a.iter()
                .zip(b)
                .map(|(x, y)| x.powf(1.0 - t) * y.powf(t))
                .collect()
        })
        .collect()
}

/// Geometric interpolation renormalized onto the simplex at every step.
pub fn geometric_trajectory(req: &InterpolationRequest) -> Result<Trajectory> {
    finish(req, geometric_curve(req), Scheme::Geometric, true)
}

/// Average of the linear and geometric interpolants, normalized per step.
pub fn approx_optimal_trajectory(req: &InterpolationRequest) -> Result<Trajectory> {
    let rows = linear_curve(req)
        .into_iter()
        .zip(geometric_curve(req))
        .map(|(am, gm)| am.iter().zip(&gm).map(|(a, g)| a + g).collect())
        .collect();
    finish(req, rows, Scheme::ApproxOptimal, true)
}

/// Jump straight to the end weights at `k = 1` and hold them.
pub fn one_step_trajectory(req: &InterpolationRequest) -> Result<Trajectory> {
    let mut steps = Vec::with_capacity(req.num_steps + 1);
    steps.push(req.w_start.clone());
    steps.extend(std::iter::repeat_n(req.w_end.clone(), req.num_steps));
    Trajectory::new(steps, Scheme::OneStep)
}

/// Trajectory for every scheme that has a closed form.
pub fn closed_form_trajectory(scheme: Scheme, req: &InterpolationRequest) -> Result<Trajectory> {
    match scheme {
        Scheme::OneStep => one_step_trajectory(req),
        Scheme::Linear => linear_trajectory(req),
        Scheme::Geometric => geometric_trajectory(req),
        Scheme::ApproxOptimal => approx_optimal_trajectory(req),
        Scheme::NumericalOptimal => Err(Error::InvalidConfig(
            "the numerically optimal trajectory has no closed form; use the optimizer".into(),
        )),
    }
}

fn finish(
    req: &InterpolationRequest,
    rows: Vec<Vec<f64>>,
    scheme: Scheme,
    normalize: bool,
) -> Result<Trajectory> {
    let eps = req.epsilon();
    let last = rows.len() - 1;
    let steps = rows
        .into_iter()
        .enumerate()
        .map(|(k, row)| {
            if k == 0 || req.w_start.as_slice() == req.w_end.as_slice() {
                Ok(req.w_start.clone())
            } else if k == last {
                Ok(req.w_end.clone())
            } else if normalize {
                WeightVector::normalized(&row, eps)
            } else {
                crate::types::validate_weights(&row, eps)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(steps, scheme)
}
