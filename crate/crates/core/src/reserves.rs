//! Reserve dynamics of a G3M pool whose weights change while market prices
//! stay fixed, assuming a zero-fee arbitrageur restores equilibrium after
//! every weight change.
//!
//! A single change `w -> w'` moves reserves to
//!
//! ```text
//! R'_i = R_i (w'_i / w_i) Π_j (w_j / w'_j)^{w'_j}
//! ```
//!
//! and a whole trajectory composes these factors. The product
//! `Π_j (w_j / w'_j)^{w'_j}` equals `exp(-KL(w' || w))`, which is how it is
//! evaluated here: the KL form sums non-negative second-order terms and keeps
//! full relative precision when consecutive weights are close.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{PoolState, PriceVector, Trajectory, WeightVector};

/// Relative tolerance on quoted-vs-market prices accepted as "at equilibrium".
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReserveUpdate {
    pub new_reserves: Vec<f64>,
    pub value_before: f64,
    pub value_after: f64,
    /// `value_before - value_after`: what the pool paid arbitrageurs.
    pub arb_cost: f64,
}

impl ReserveUpdate {
    /// Pool state holding the updated reserves under `weights`.
    pub fn pool_after(&self, weights: WeightVector, block_index: u64) -> Result<PoolState> {
        PoolState::new(self.new_reserves.clone(), weights, block_index)
    }
}

/// `u - ln(1 + u)`, accurate for small `|u|`.
pub(crate) fn u_minus_ln1p(u: f64) -> f64 {
    if u.abs() < 1e-2 {
        // u^2/2 - u^3/3 + u^4/4 - ... ; |u|^11 / 11 < 1e-22 here
        let mut term = u * u;
        let mut acc = 0.0;
        for n in 2..=12 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * term / n as f64;
            term *= u;
        }
        acc
    } else {
        u - u.ln_1p()
    }
}

/// `ln Π_j (prev_j / next_j)^{next_j}` for one weight change.
///
/// Written as `Σ_j (prev_j - next_j) - Σ_j next_j φ(prev_j / next_j)` with
/// `φ(x) = x - 1 - ln x`, an identity valid for any positive vectors.
pub fn log_step_factor(prev: &[f64], next: &[f64]) -> f64 {
    let mut linear = 0.0;
    let mut curvature = 0.0;
    for (&p, &n) in prev.iter().zip(next) {
        let diff = p - n;
        linear += diff;
        curvature += n * u_minus_ln1p(diff / n);
    }
    linear - curvature
}

/// `ln` of the scalar reserve multiplier `Π_k Π_j (w_j(t_{k-1}) / w_j(t_k))^{w_j(t_k)}`
/// accumulated along a sequence of weight vectors.
pub fn log_value_factor<'a, I>(steps: I) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut iter = steps.into_iter();
    let Some(mut prev) = iter.next() else {
        return 0.0;
    };
    let mut total = 0.0;
    for next in iter {
        total += log_step_factor(prev, next);
        prev = next;
    }
    total
}

fn check_equilibrium(pool: &PoolState, prices: &PriceVector) -> Result<()> {
    let (token, relative_error) = pool.equilibrium_error(prices)?;
    if relative_error > EQUILIBRIUM_TOLERANCE {
        return Err(Error::NotAtEquilibrium {
            token,
            relative_error,
        });
    }
    Ok(())
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn update_reserves(reserves: &[f64], old: &[f64], new: &[f64]) -> Vec<f64> {
    let common = log_step_factor(old, new).exp();
    reserves
        .iter()
        .zip(old.iter().zip(new))
        .map(|(r, (wo, wn))| r * (wn / wo) * common)
        .collect()
}

/// Reserves after the weights change to `new_weights` and a zero-fee
/// arbitrageur trades the pool back to market prices.
pub fn reserve_update(
    pool: &PoolState,
    new_weights: &WeightVector,
    prices: &PriceVector,
) -> Result<ReserveUpdate> {
    check_len(pool.len(), new_weights.len())?;
    check_len(pool.len(), prices.len())?;
    check_equilibrium(pool, prices)?;

    let new_reserves = update_reserves(
        pool.reserves(),
        pool.weights().as_slice(),
        new_weights.as_slice(),
    );
    finish(pool, new_reserves, prices)
}

fn finish(pool: &PoolState, new_reserves: Vec<f64>, prices: &PriceVector) -> Result<ReserveUpdate> {
    let value_before = pool.value(prices)?;
    let value_after: f64 = new_reserves
        .iter()
        .zip(prices.as_slice())
        .map(|(r, p)| r * p)
        .sum();
    Ok(ReserveUpdate {
        new_reserves,
        value_before,
        value_after,
        arb_cost: value_before - value_after,
    })
}

fn check_start(pool: &PoolState, traj: &Trajectory) -> Result<()> {
    check_len(pool.len(), traj.num_tokens())?;
    for (index, (&expected, &found)) in pool
        .weights()
        .as_slice()
        .iter()
        .zip(traj.start().as_slice())
        .enumerate()
    {
        if (expected - found).abs() > 1e-10 {
            return Err(Error::StartMismatch {
                index,
                expected,
                found,
            });
        }
    }
    Ok(())
}

/// Folds [`reserve_update`] over every consecutive pair of trajectory steps.
pub fn apply_trajectory(
    pool: &PoolState,
    traj: &Trajectory,
    prices: &PriceVector,
) -> Result<ReserveUpdate> {
    check_len(pool.len(), prices.len())?;
    check_start(pool, traj)?;
    check_equilibrium(pool, prices)?;

    let mut reserves = pool.reserves().to_vec();
    for pair in traj.steps().windows(2) {
        reserves = update_reserves(&reserves, pair[0].as_slice(), pair[1].as_slice());
    }
    finish(pool, reserves, prices)
}

/// Final reserves from the closed-form product
/// `R(t_f) = R(t_0) (w(t_f) / w(t_0)) Π_k Π_j (w_j(t_{k-1}) / w_j(t_k))^{w_j(t_k)}`.
pub fn closed_form_reserves(reserves: &[f64], traj: &Trajectory) -> Vec<f64> {
    let factor = log_value_factor(traj.steps().iter().map(|w| w.as_slice())).exp();
    let start = traj.start().as_slice();
    let end = traj.end().as_slice();
    reserves
        .iter()
        .zip(start.iter().zip(end))
        .map(|(r, (w0, wf))| r * (wf / w0) * factor)
        .collect()
}

/// Ratio of final reserves between the two-step change `w0 -> w_mid -> wf`
/// and the direct change `w0 -> wf`.
///
/// `r = Π_j w0_j^{w̃_j - wf_j} w̃_j^{wf_j - w̃_j} = exp(Σ_j (wf_j - w̃_j) ln(w̃_j / w0_j))`.
/// Every term is non-negative when `w̃_j` lies between `w0_j` and `wf_j`.
pub fn two_step_ratio(w0: &WeightVector, w_mid: &WeightVector, wf: &WeightVector) -> Result<f64> {
    check_len(w0.len(), w_mid.len())?;
    check_len(w0.len(), wf.len())?;
    for (index, ((&a, &m), &b)) in w0
        .as_slice()
        .iter()
        .zip(w_mid.as_slice())
        .zip(wf.as_slice())
        .enumerate()
    {
        let (low, high) = (a.min(b), a.max(b));
        if m < low || m > high {
            return Err(Error::MidpointOutOfRange {
                index,
                value: m,
                low,
                high,
            });
        }
    }
    Ok(two_step_ratio_raw(
        w0.as_slice(),
        w_mid.as_slice(),
        wf.as_slice(),
    ))
}

/// Unvalidated [`two_step_ratio`]; `w_mid` need not lie on the simplex.
pub fn two_step_ratio_raw(w0: &[f64], w_mid: &[f64], wf: &[f64]) -> f64 {
    log_two_step_ratio_raw(w0, w_mid, wf).exp()
}

pub(crate) fn log_two_step_ratio_raw(w0: &[f64], w_mid: &[f64], wf: &[f64]) -> f64 {
    w0.iter()
        .zip(w_mid)
        .zip(wf)
        .map(|((&a, &m), &b)| (b - m) * ((m - a) / a).ln_1p())
        .sum()
}

/// Gain from splitting `w0 -> w0 + Δw` into two equal linear halves:
/// `Π_j (1 + Δw_j / (2 w0_j))^{Δw_j / 2}`.
pub fn linear_bisection_ratio(w0: &WeightVector, delta_w: &[f64]) -> Result<f64> {
    check_len(w0.len(), delta_w.len())?;
    let sum: f64 = delta_w.iter().sum();
    if sum.abs() > crate::types::INPUT_SUM_TOLERANCE {
        return Err(Error::InvalidDelta(format!(
            "components must sum to 0, got {sum:e}"
        )));
    }
    let target: Vec<f64> = w0
        .as_slice()
        .iter()
        .zip(delta_w)
        .map(|(w, d)| w + d)
        .collect();
    if let Err(e) = crate::types::validate_weights(&target, w0.epsilon_bound()) {
        return Err(Error::InvalidDelta(format!(
            "w0 + delta is not a valid weight vector: {e}"
        )));
    }
    let log_ratio: f64 = w0
        .as_slice()
        .iter()
        .zip(delta_w)
        .map(|(w, d)| 0.5 * d * (d / (2.0 * w)).ln_1p())
        .sum();
    Ok(log_ratio.exp())
}
