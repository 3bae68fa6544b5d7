//! Fixed-parameter target-weight strategies.
//!
//! Both strategies score each token, centre the scores, tilt the uniform
//! portfolio by `aggressiveness * score` and project the result onto
//! `{w : Σ w = 1, floor <= w_i <= cap}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{validate_weights, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    /// EWMA of per-block log returns.
    Momentum,
    /// Position of the log price inside its rolling min/max channel.
    Channel,
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StrategyKind::Momentum => "momentum",
            StrategyKind::Channel => "channel",
        })
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "momentum" => Ok(StrategyKind::Momentum),
            "channel" => Ok(StrategyKind::Channel),
            other => Err(Error::InvalidConfig(format!("unknown strategy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub lookback_blocks: usize,
    pub aggressiveness: f64,
    pub rebalance_cadence_blocks: usize,
    pub weight_floor: f64,
    pub weight_cap: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            kind: StrategyKind::Momentum,
            lookback_blocks: 24,
            aggressiveness: 20.0,
            rebalance_cadence_blocks: 24,
            weight_floor: 0.05,
            weight_cap: 0.9,
        }
    }
}

impl StrategyConfig {
    pub fn label(&self) -> String {
        self.kind.to_string()
    }

    pub fn validate(&self, num_tokens: usize) -> Result<()> {
        let uniform = 1.0 / num_tokens as f64;
        if self.lookback_blocks < 1 || self.rebalance_cadence_blocks < 1 {
            return Err(Error::InvalidConfig(
                "lookback and cadence must be at least 1 block".into(),
            ));
        }
        if !self.aggressiveness.is_finite() {
            return Err(Error::InvalidConfig("aggressiveness must be finite".into()));
        }
        if !(self.weight_floor > 0.0
            && self.weight_floor < uniform
            && uniform <= self.weight_cap
            && self.weight_cap < 1.0)
        {
            return Err(Error::InvalidConfig(format!(
                "need 0 < weight_floor < 1/N <= weight_cap < 1 (N = {num_tokens})"
            )));
        }
        Ok(())
    }
}

fn check_window(window: &[Vec<f64>], cfg: &StrategyConfig) -> Result<usize> {
    if window.len() < cfg.lookback_blocks || window.is_empty() {
        return Err(Error::InsufficientHistory {
            needed: cfg.lookback_blocks,
            available: window.len(),
        });
    }
    let n = window[0].len();
    cfg.validate(n)?;
    Ok(n)
}

/// Targets tilted toward tokens with a rising EWMA of log returns over the
/// last `lookback_blocks` rows (smoothing `α = 2 / (lookback + 1)`).
pub fn momentum_targets(window: &[Vec<f64>], cfg: &StrategyConfig) -> Result<WeightVector> {
    let n = check_window(window, cfg)?;
    let rows = &window[window.len() - cfg.lookback_blocks..];
    let alpha = 2.0 / (cfg.lookback_blocks as f64 + 1.0);
    let mut ewma = vec![0.0; n];
    for (t, pair) in rows.windows(2).enumerate() {
        for i in 0..n {
            let ret = (pair[1][i] / pair[0][i]).ln();
            ewma[i] = if t == 0 {
                ret
            } else {
                alpha * ret + (1.0 - alpha) * ewma[i]
            };
        }
    }
    tilt(&ewma, cfg)
}

/// Targets tilted toward tokens trading near the top of their rolling
/// log-price channel; a flat channel scores as its midpoint.
pub fn channel_targets(window: &[Vec<f64>], cfg: &StrategyConfig) -> Result<WeightVector> {
    let n = check_window(window, cfg)?;
    let rows = &window[window.len() - cfg.lookback_blocks..];
    let scores: Vec<f64> = (0..n)
        .map(|i| {
            let logs = rows.iter().map(|r| r[i].ln());
            let (lo, hi) = logs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
                (a.min(x), b.max(x))
            });
            let last = rows[rows.len() - 1][i].ln();
            if hi > lo {
                (last - lo) / (hi - lo) - 0.5
            } else {
                0.0
            }
        })
        .collect();
    tilt(&scores, cfg)
}

pub fn targets(window: &[Vec<f64>], cfg: &StrategyConfig) -> Result<WeightVector> {
    match cfg.kind {
        StrategyKind::Momentum => momentum_targets(window, cfg),
        StrategyKind::Channel => channel_targets(window, cfg),
    }
}

fn tilt(scores: &[f64], cfg: &StrategyConfig) -> Result<WeightVector> {
    let n = scores.len();
    let mean = scores.iter().sum::<f64>() / n as f64;
    let raw: Vec<f64> = scores
        .iter()
        .map(|s| 1.0 / n as f64 + cfg.aggressiveness * (s - mean))
        .collect();
    let projected = project_capped_simplex(&raw, cfg.weight_floor, cfg.weight_cap);
    validate_weights(&projected, cfg.weight_floor.min(crate::types::DEFAULT_EPSILON))
}

/// Euclidean projection onto `{Σ w = 1, lo <= w_i <= hi}`: `clamp(x_i + τ)`
/// with the shift `τ` found by bisection.
pub fn project_capped_simplex(x: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    if x.iter().all(|v| (lo..=hi).contains(v))
        && (x.iter().sum::<f64>() - 1.0).abs() <= crate::types::NORMALIZED_SUM_TOLERANCE
    {
        return x.to_vec();
    }
    let total = |tau: f64| -> f64 { x.iter().map(|v| (v + tau).clamp(lo, hi)).sum() };
    let (min, max) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (mut a, mut b) = (lo - max, hi - min);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if total(mid) < 1.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let tau = 0.5 * (a + b);
    let mut w: Vec<f64> = x.iter().map(|v| (v + tau).clamp(lo, hi)).collect();
    // put the residual rounding error on the largest free component
    let residual = 1.0 - w.iter().sum::<f64>();
    if let Some(j) = (0..w.len())
        .filter(|&j| w[j] + residual > lo && w[j] + residual < hi)
        .max_by(|&p, &q| w[p].total_cmp(&w[q]))
    {
        w[j] += residual;
    }
    w
}
