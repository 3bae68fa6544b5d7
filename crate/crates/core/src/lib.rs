//! Weight-interpolation trajectories for dynamic-weight geometric-mean market
//! makers: closed-form reserve dynamics, Lambert-W optimal intermediates,
//! interpolation schemes, a numerical trajectory optimizer, fee-aware
//! arbitrage and block-level backtests.

pub mod arbitrage;
pub mod backtest;
pub mod error;
pub mod lambert;
pub mod optimizer;
pub mod reserves;
pub mod schemes;
pub mod types;

pub use arbitrage::{arb_to_equilibrium, inside_no_arb_band, ArbOutcome, FeeParams};
pub use backtest::{
    compare_schemes, run_backtest, BacktestReport, PriceSeries, StrategyConfig, StrategyKind,
    SyntheticConfig,
};
pub use error::{Error, Result};
pub use lambert::lambert_w0;
pub use optimizer::{build_trajectory, optimize_trajectory, optimize_weights, OptimizerConfig, OptimizerResult};
pub use reserves::{apply_trajectory, reserve_update, two_step_ratio, ReserveUpdate};
pub use schemes::{closed_form_trajectory, optimal_intermediate, InterpolationRequest};
pub use types::{PoolState, PriceVector, Scheme, Trajectory, WeightVector};
