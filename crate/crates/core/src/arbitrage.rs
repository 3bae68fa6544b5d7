//! Profit-maximizing arbitrage against a G3M pool with a proportional fee on
//! input amounts.
//!
//! The arbitrageur chooses signed token flows `Δ` (positive = into the pool)
//! to maximize `-p · Δ` subject to
//! `Σ_i w_i ln(R_i + γ Δ_i⁺ - Δ_i⁻) >= ln k`. The constraint set is convex, so
//! the optimum is characterized by a single multiplier `λ`: each token's
//! fee-adjusted reserve is
//!
//! ```text
//! R̃_i(λ) = max(γ λ w_i / p_i, min(R_i, λ w_i / p_i))
//! ```
//!
//! (input above the band, output below it, untouched inside), and `λ` is the
//! root of the monotone function `Σ_i w_i ln R̃_i(λ) - ln k`, found here by
//! bisection in `ln λ`. The pool is inside the no-arbitrage band exactly when
//! the spread of `ln(p_i R_i / w_i)` is at most `ln(1/γ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{PoolState, PriceVector};

/// Trades smaller than this fraction of pool value are treated as noise.
pub const PROFIT_THRESHOLD: f64 = 1e-12;
const BISECTION_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeeParams {
    fee_rate: f64,
    gamma: f64,
}

impl FeeParams {
    pub fn new(fee_rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&fee_rate) {
            return Err(Error::InvalidConfig(format!(
                "fee rate {fee_rate} must lie in [0, 1)"
            )));
        }
        Ok(FeeParams {
            fee_rate,
            gamma: 1.0 - fee_rate,
        })
    }

    pub fn zero() -> Self {
        FeeParams {
            fee_rate: 0.0,
            gamma: 1.0,
        }
    }

    pub fn fee_rate(&self) -> f64 {
        self.fee_rate
    }

    /// Retention factor `1 - fee_rate`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl<'de> Deserialize<'de> for FeeParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            fee_rate: f64,
        }
        FeeParams::new(Raw::deserialize(d)?.fee_rate).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArbOutcome {
    pub traded: bool,
    /// Signed token flows; positive amounts enter the pool.
    pub trade_deltas: Vec<f64>,
    pub pool_after: PoolState,
    /// `-p · Δ` in numéraire units.
    pub arb_profit: f64,
    /// Numéraire value of the fees retained by the pool.
    pub fees_accrued: f64,
}

impl ArbOutcome {
    fn no_trade(pool: &PoolState) -> Self {
        ArbOutcome {
            traded: false,
            trade_deltas: vec![0.0; pool.len()],
            pool_after: pool.clone(),
            arb_profit: 0.0,
            fees_accrued: 0.0,
        }
    }
}

/// `ln(p_i R_i / w_i)`: equal across tokens exactly when the pool quotes the
/// market.
fn log_value_shares(pool: &PoolState, prices: &PriceVector) -> Vec<f64> {
    pool.reserves()
        .iter()
        .zip(pool.weights().as_slice())
        .zip(prices.as_slice())
        .map(|((r, w), p)| (p * r / w).ln())
        .collect()
}

/// True when fees make every trade against `pool` unprofitable.
pub fn inside_no_arb_band(pool: &PoolState, prices: &PriceVector, fees: &FeeParams) -> Result<bool> {
    check_dims(pool, prices)?;
    let shares = log_value_shares(pool, prices);
    let (lo, hi) = min_max(&shares);
    Ok(hi - lo <= -fees.gamma().ln())
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

fn check_dims(pool: &PoolState, prices: &PriceVector) -> Result<()> {
    if pool.len() != prices.len() {
        return Err(Error::DimensionMismatch {
            expected: pool.len(),
            found: prices.len(),
        });
    }
    Ok(())
}

/// Executes the single profit-maximizing trade, or none inside the band.
pub fn arb_to_equilibrium(pool: &PoolState, prices: &PriceVector, fees: &FeeParams) -> Result<ArbOutcome> {
    check_dims(pool, prices)?;
    let gamma = fees.gamma();
    let ln_gamma = gamma.ln();
    let shares = log_value_shares(pool, prices);
    let (lo, hi) = min_max(&shares);
    if hi - lo <= -ln_gamma {
        return Ok(ArbOutcome::no_trade(pool));
    }

    let w = pool.weights().as_slice();
    let r = pool.reserves();
    let ln_r: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let ln_k = pool.log_invariant();

    // ln R̃_i(μ) with μ = ln λ; shares_i = ln(p_i R_i / w_i) is where token i
    // stops being an output, shares_i - ln γ where it starts being an input.
    let ln_effective = |mu: f64, i: usize| -> f64 {
        let ln_target = mu - shares[i] + ln_r[i];
        if ln_target + ln_gamma > ln_r[i] {
            ln_target + ln_gamma
        } else if ln_target < ln_r[i] {
            ln_target
        } else {
            ln_r[i]
        }
    };
    let residual = |mu: f64| -> f64 {
        (0..w.len()).map(|i| w[i] * ln_effective(mu, i)).sum::<f64>() - ln_k
    };

    let (mut a, mut b) = (lo, hi - ln_gamma);
    for _ in 0..BISECTION_ITERATIONS {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if residual(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let mu = 0.5 * (a + b);

    let mut deltas = Vec::with_capacity(w.len());
    let mut fees_accrued = 0.0;
    for i in 0..w.len() {
        let effective = ln_effective(mu, i).exp();
        let delta = if effective > r[i] {
            let paid = (effective - r[i]) / gamma;
            fees_accrued += prices.as_slice()[i] * (1.0 - gamma) * paid;
            paid
        } else {
            effective - r[i]
        };
        deltas.push(delta);
    }
    let profit: f64 = -deltas
        .iter()
        .zip(prices.as_slice())
        .map(|(d, p)| d * p)
        .sum::<f64>();
    let value = pool.value(prices)?;
    if !(profit > PROFIT_THRESHOLD * value) {
        return Ok(ArbOutcome::no_trade(pool));
    }

    let reserves_after: Vec<f64> = r.iter().zip(&deltas).map(|(x, d)| x + d).collect();
    let pool_after = PoolState::new(reserves_after, pool.weights().clone(), pool.block_index())?;
    Ok(ArbOutcome {
        traded: true,
        trade_deltas: deltas,
        pool_after,
        arb_profit: profit,
        fees_accrued,
    })
}
