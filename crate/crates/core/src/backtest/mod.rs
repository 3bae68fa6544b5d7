//! Block-level simulation of a dynamic-weight pool.
//!
//! Every block the pool (1) advances its active interpolation trajectory by
//! one step, (2) sees the block's market prices and (3) is arbitraged with
//! fees. New targets are computed at blocks `t` with `t >= lookback - 1` and
//! `t % cadence == 0`, from rows `t + 1 - lookback ..= t`, and are reached by
//! a trajectory of `cadence` steps starting from the current weights. The
//! last step of one window therefore lands on the block that computes the
//! next target.

mod series;
mod strategy;

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

pub use series::{PriceSeries, SplitMix64, SyntheticConfig};
pub use strategy::{
    channel_targets, momentum_targets, project_capped_simplex, targets, StrategyConfig,
    StrategyKind,
};

use crate::arbitrage::{arb_to_equilibrium, FeeParams};
use crate::error::{Error, Result};
use crate::optimizer::{build_trajectory, OptimizerConfig};
use crate::schemes::InterpolationRequest;
use crate::types::{PoolState, Scheme, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestReport {
    pub timestamps: Vec<i64>,
    /// `p(t) · R(t)` after the block's arbitrage.
    pub per_block_value: Vec<f64>,
    pub fees_cum: Vec<f64>,
    pub arb_cost_cum: Vec<f64>,
    pub final_return: f64,
    pub fees_total: f64,
    pub arb_cost_total: f64,
    pub scheme: Scheme,
    pub strategy_label: String,
    pub fee_rate: f64,
    /// Number of target updates that started a new trajectory.
    pub rebalances: usize,
    pub final_pool: PoolState,
}

impl BacktestReport {
    pub fn final_value(&self) -> f64 {
        *self.per_block_value.last().expect("reports cover at least one block")
    }

    /// One row per block: `timestamp,value,fees_cum,arb_cost_cum`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::InvalidConfig(format!("writing report: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", "value", "fees_cum", "arb_cost_cum"])
            .map_err(io)?;
        for t in 0..self.timestamps.len() {
            w.write_record([
                self.timestamps[t].to_string(),
                self.per_block_value[t].to_string(),
                self.fees_cum[t].to_string(),
                self.arb_cost_cum[t].to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidConfig(format!("writing report: {e}")))
    }
}

/// First block that computes targets, and the series length needed to
/// complete the window it starts.
fn required_length(strategy: &StrategyConfig) -> (usize, usize) {
    let cadence = strategy.rebalance_cadence_blocks;
    let first = (strategy.lookback_blocks - 1).div_ceil(cadence) * cadence;
    (first, first + cadence + 1)
}

pub fn run_backtest(
    series: &PriceSeries,
    strategy: &StrategyConfig,
    scheme: Scheme,
    fees: &FeeParams,
    initial_pool: &PoolState,
) -> Result<BacktestReport> {
    let n = series.num_tokens();
    if initial_pool.len() != n {
        return Err(Error::ConfigMismatch(format!(
            "pool has {} tokens but the price series has {n}",
            initial_pool.len()
        )));
    }
    strategy.validate(n)?;
    let (first_target, needed) = required_length(strategy);
    if series.len() < needed {
        return Err(Error::InsufficientHistory {
            needed,
            available: series.len(),
        });
    }
    let cadence = strategy.rebalance_cadence_blocks;
    let optimizer = OptimizerConfig::default();

    let len = series.len();
    let mut per_block_value = Vec::with_capacity(len);
    let mut fees_cum = Vec::with_capacity(len);
    let mut arb_cost_cum = Vec::with_capacity(len);
    let (mut fees_total, mut arb_cost_total) = (0.0, 0.0);
    let mut rebalances = 0;

    let mut pool = initial_pool.clone().with_block_index(0);
    let mut active: Option<(Trajectory, usize)> = None;

    for t in 0..len {
        if let Some((traj, k)) = active.as_mut() {
            *k += 1;
            let weights = traj.steps()[*k].clone();
            if *k == traj.num_steps() {
                active = None;
            }
            pool = PoolState::new(pool.reserves().to_vec(), weights, t as u64)?;
        } else {
            pool = pool.with_block_index(t as u64);
        }

        let prices = series.prices_at(t);
        let outcome = arb_to_equilibrium(&pool, &prices, fees)?;
        pool = outcome.pool_after;
        fees_total += outcome.fees_accrued;
        arb_cost_total += outcome.arb_profit;
        per_block_value.push(pool.value(&prices)?);
        fees_cum.push(fees_total);
        arb_cost_cum.push(arb_cost_total);

        if t >= first_target && t % cadence == 0 && t + 1 < len {
            let window = series.window(t, strategy.lookback_blocks)?;
            let target = targets(window, strategy)?;
            if target.as_slice() != pool.weights().as_slice() {
                let req = InterpolationRequest::new(pool.weights().clone(), target, cadence)?;
                active = Some((build_trajectory(scheme, &req, &optimizer)?, 0));
                rebalances += 1;
            }
        }
    }

    let final_return = per_block_value[len - 1] / per_block_value[0] - 1.0;
    Ok(BacktestReport {
        timestamps: series.timestamps().to_vec(),
        per_block_value,
        fees_cum,
        arb_cost_cum,
        final_return,
        fees_total,
        arb_cost_total,
        scheme,
        strategy_label: strategy.label(),
        fee_rate: fees.fee_rate(),
        rebalances,
        final_pool: pool,
    })
}

/// Every `(scheme, fee)` cell run on the same series, in scheme-major order.
pub fn compare_schemes(
    series: &PriceSeries,
    strategy: &StrategyConfig,
    fees_grid: &[FeeParams],
    schemes: &[Scheme],
    initial_pool: &PoolState,
) -> Result<Vec<BacktestReport>> {
    let cells: Vec<(Scheme, FeeParams)> = schemes
        .iter()
        .flat_map(|&s| fees_grid.iter().map(move |&f| (s, f)))
        .collect();
    cells
        .par_iter()
        .map(|(scheme, fees)| run_backtest(series, strategy, *scheme, fees, initial_pool))
        .collect()
}
