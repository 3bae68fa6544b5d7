//! The run configuration: defaults, overlaid by an optional TOML file,
//! overlaid by command-line flags. The effective result is written next to
//! the outputs so a run can be repeated from it.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};
use tfmm_core::{OptimizerConfig, Scheme, StrategyConfig, StrategyKind, SyntheticConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub interpolation: InterpolationConfig,
    /// Schemes to run; each command has its own default when empty.
    pub schemes: Vec<Scheme>,
    /// Proportional fee rates for backtests.
    pub fees: Vec<f64>,
    pub optimizer: OptimizerConfig,
    pub strategy: StrategyConfig,
    pub prices: PriceSource,
    pub pool: PoolConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            interpolation: InterpolationConfig::default(),
            schemes: Vec::new(),
            fees: vec![0.0],
            optimizer: OptimizerConfig::default(),
            strategy: StrategyConfig::default(),
            prices: PriceSource::default(),
            pool: PoolConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpolationConfig {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub steps: usize,
}

impl Default for InterpolationConfig {
    fn default() -> Self {
        InterpolationConfig {
            start: vec![0.05, 0.55, 0.4],
            end: vec![0.4, 0.5, 0.1],
            steps: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriceSource {
    /// Price CSV; ignored when `synthetic` is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    pub numeraire: String,
    pub synthetic: bool,
    pub generator: SyntheticConfig,
}

impl Default for PriceSource {
    fn default() -> Self {
        PriceSource {
            csv: None,
            numeraire: "NUM".into(),
            synthetic: false,
            generator: SyntheticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolConfig {
    /// Starting weights; uniform when empty.
    pub initial_weights: Vec<f64>,
    /// Starting pool value in numéraire units.
    pub initial_value: f64,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            initial_weights: Vec::new(),
            initial_value: 1000.0,
        }
    }
}

/// Flags shared by every command. Each one, when given, overrides the
/// corresponding config-file value.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of weight changes f
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Start weights, comma separated
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub start: Option<Vec<f64>>,
    /// End weights, comma separated
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub end: Option<Vec<f64>>,
    /// Fee rates, comma separated
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub fees: Option<Vec<f64>>,
    /// Schemes, comma separated: one-step, linear, geometric, approx, optimal
    #[arg(long, global = true, value_delimiter = ',')]
    pub schemes: Option<Vec<Scheme>>,
    /// Price CSV (header `timestamp,<symbol>,...`)
    #[arg(long, global = true, conflicts_with = "synthetic")]
    pub prices: Option<PathBuf>,
    /// Use the seeded random-walk generator instead of a price file
    #[arg(long, global = true)]
    pub synthetic: bool,
    #[arg(long, global = true)]
    pub numeraire: Option<String>,
    #[arg(long, global = true)]
    pub strategy: Option<StrategyKind>,
    #[arg(long, global = true)]
    pub lookback: Option<usize>,
    #[arg(long, global = true)]
    pub cadence: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub aggressiveness: Option<f64>,
    #[arg(long, global = true)]
    pub weight_floor: Option<f64>,
    #[arg(long, global = true)]
    pub weight_cap: Option<f64>,
    /// Synthetic series length in blocks
    #[arg(long, global = true)]
    pub blocks: Option<usize>,
    /// Synthetic token count, numéraire included
    #[arg(long, global = true)]
    pub tokens: Option<usize>,
    /// Synthetic per-block log volatility
    #[arg(long, global = true)]
    pub volatility: Option<f64>,
    /// Synthetic per-block log drift
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub drift: Option<f64>,
    /// Synthetic prices move every this many blocks
    #[arg(long, global = true)]
    pub hold_blocks: Option<usize>,
    #[arg(long, global = true)]
    pub max_iterations: Option<usize>,
    #[arg(long, global = true)]
    pub gradient_tolerance: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn resolve(flags: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = match &flags.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        cfg.apply(flags);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, f: &Overrides) {
        fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
            if let Some(v) = value {
                *slot = v.clone();
            }
        }
        set(&mut self.out_dir, &f.out_dir);
        set(&mut self.seed, &f.seed);
        set(&mut self.interpolation.steps, &f.steps);
        set(&mut self.interpolation.start, &f.start);
        set(&mut self.interpolation.end, &f.end);
        set(&mut self.fees, &f.fees);
        set(&mut self.schemes, &f.schemes);
        if let Some(path) = &f.prices {
            self.prices.csv = Some(path.clone());
            self.prices.synthetic = false;
        }
        if f.synthetic {
            self.prices.synthetic = true;
        }
        set(&mut self.prices.numeraire, &f.numeraire);
        set(&mut self.strategy.kind, &f.strategy);
        set(&mut self.strategy.lookback_blocks, &f.lookback);
        set(&mut self.strategy.rebalance_cadence_blocks, &f.cadence);
        set(&mut self.strategy.aggressiveness, &f.aggressiveness);
        set(&mut self.strategy.weight_floor, &f.weight_floor);
        set(&mut self.strategy.weight_cap, &f.weight_cap);
        set(&mut self.prices.generator.blocks, &f.blocks);
        set(&mut self.prices.generator.num_tokens, &f.tokens);
        set(&mut self.prices.generator.volatility, &f.volatility);
        set(&mut self.prices.generator.drift, &f.drift);
        set(&mut self.prices.generator.hold_blocks, &f.hold_blocks);
        set(&mut self.optimizer.max_iterations, &f.max_iterations);
        set(&mut self.optimizer.gradient_tolerance, &f.gradient_tolerance);
    }

    fn validate(&self) -> anyhow::Result<()> {
        self.optimizer.validate()?;
        if self.seed > i64::MAX as u64 {
            bail!("seed must be at most {} so the effective config can be saved", i64::MAX);
        }
        if self.fees.is_empty() {
            bail!("at least one fee rate is required");
        }
        if !(self.pool.initial_value > 0.0 && self.pool.initial_value.is_finite()) {
            bail!("pool.initial_value must be a positive number");
        }
        Ok(())
    }

    pub fn schemes_or(&self, default: &[Scheme]) -> Vec<Scheme> {
        if self.schemes.is_empty() {
            default.to_vec()
        } else {
            self.schemes.clone()
        }
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }
}
