//! Simplex weights, pool state, market prices and weight trajectories.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lower margin keeping every weight strictly inside (0, 1).
pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Tolerance on the weight sum for caller-supplied vectors.
pub const INPUT_SUM_TOLERANCE: f64 = 1e-9;
/// Tolerance on the weight sum after internal renormalization.
pub const NORMALIZED_SUM_TOLERANCE: f64 = 1e-12;

/// A point on the open probability simplex: the pool's exposure weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    weights: Vec<f64>,
    epsilon_bound: f64,
}

/// Validates a raw weight vector without renormalizing it.
pub fn validate_weights(w: &[f64], epsilon_bound: f64) -> Result<WeightVector> {
    check_weights(w, epsilon_bound, INPUT_SUM_TOLERANCE)?;
    Ok(WeightVector {
        weights: w.to_vec(),
        epsilon_bound,
    })
}

fn check_weights(w: &[f64], epsilon_bound: f64, sum_tolerance: f64) -> Result<()> {
    if !(epsilon_bound > 0.0 && epsilon_bound < 0.5) {
        return Err(Error::InvalidConfig(format!(
            "epsilon bound {epsilon_bound} must lie in (0, 0.5)"
        )));
    }
    if w.len() < 2 {
        return Err(Error::BadLength { len: w.len() });
    }
    for (index, &value) in w.iter().enumerate() {
        if !(value > epsilon_bound && value < 1.0 - epsilon_bound) {
            return Err(Error::OutOfBounds {
                index,
                value,
                epsilon: epsilon_bound,
            });
        }
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > sum_tolerance {
        return Err(Error::SumNotOne {
            sum,
            tolerance: sum_tolerance,
        });
    }
    Ok(())
}

impl WeightVector {
    /// Validates with the default epsilon bound.
    pub fn new(w: &[f64]) -> Result<Self> {
        validate_weights(w, DEFAULT_EPSILON)
    }

    /// Divides a positive vector by its sum, then validates it against the
    /// tighter post-normalization tolerance.
    pub fn normalized(raw: &[f64], epsilon_bound: f64) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::SumNotOne {
                sum,
                tolerance: NORMALIZED_SUM_TOLERANCE,
            });
        }
        let weights: Vec<f64> = raw.iter().map(|x| x / sum).collect();
        check_weights(&weights, epsilon_bound, NORMALIZED_SUM_TOLERANCE)?;
        Ok(WeightVector {
            weights,
            epsilon_bound,
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn epsilon_bound(&self) -> f64 {
        self.epsilon_bound
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.weights
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &WeightVector) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(&vec![1.0 / n as f64; n])
    }
}

impl<'de> Deserialize<'de> for WeightVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            weights: Vec<f64>,
            #[serde(default = "default_eps")]
            epsilon_bound: f64,
        }
        fn default_eps() -> f64 {
            DEFAULT_EPSILON
        }
        let raw = Raw::deserialize(d)?;
        validate_weights(&raw.weights, raw.epsilon_bound).map_err(serde::de::Error::custom)
    }
}

/// Market prices in units of a numéraire token, whose own price is exactly 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceVector {
    prices: Vec<f64>,
    numeraire_index: usize,
}

impl PriceVector {
    /// Accepts prices already expressed in numéraire units.
    pub fn new(prices: Vec<f64>, numeraire_index: usize) -> Result<Self> {
        if numeraire_index >= prices.len() {
            return Err(Error::IndexOutOfRange {
                index: numeraire_index,
                len: prices.len(),
            });
        }
        for (index, &value) in prices.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidPrice {
                    index,
                    value,
                    reason: "prices must be strictly positive and finite",
                });
            }
        }
        if prices[numeraire_index] != 1.0 {
            return Err(Error::InvalidPrice {
                index: numeraire_index,
                value: prices[numeraire_index],
                reason: "numeraire price must be exactly 1",
            });
        }
        Ok(PriceVector {
            prices,
            numeraire_index,
        })
    }

    /// Re-expresses arbitrary positive prices in units of the numéraire.
    pub fn normalized(raw: &[f64], numeraire_index: usize) -> Result<Self> {
        let base = *raw.get(numeraire_index).ok_or(Error::IndexOutOfRange {
            index: numeraire_index,
            len: raw.len(),
        })?;
        let mut prices: Vec<f64> = raw.iter().map(|p| p / base).collect();
        prices[numeraire_index] = 1.0;
        Self::new(prices, numeraire_index)
    }

    pub fn ones(n: usize) -> Self {
        PriceVector {
            prices: vec![1.0; n],
            numeraire_index: 0,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn numeraire_index(&self) -> usize {
        self.numeraire_index
    }
}

/// Reserves and weights of a G3M pool at a given block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolState {
    reserves: Vec<f64>,
    weights: WeightVector,
    block_index: u64,
}

impl PoolState {
    pub fn new(reserves: Vec<f64>, weights: WeightVector, block_index: u64) -> Result<Self> {
        if reserves.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.len(),
                found: reserves.len(),
            });
        }
        for (index, &value) in reserves.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveReserve { index, value });
            }
        }
        Ok(PoolState {
            reserves,
            weights,
            block_index,
        })
    }

    /// Builds the pool holding `value` (numéraire) whose quoted prices equal
    /// `prices`: each token carries a `w_i` share of the value.
    pub fn at_equilibrium(weights: WeightVector, prices: &PriceVector, value: f64) -> Result<Self> {
        if prices.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.len(),
                found: prices.len(),
            });
        }
        let reserves = weights
            .as_slice()
            .iter()
            .zip(prices.as_slice())
            .map(|(w, p)| w * value / p)
            .collect();
        Self::new(reserves, weights, 0)
    }

    pub fn reserves(&self) -> &[f64] {
        &self.reserves
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn block_index(&self) -> u64 {
        self.block_index
    }

    pub fn len(&self) -> usize {
        self.reserves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reserves.is_empty()
    }

    pub fn with_block_index(mut self, block_index: u64) -> Self {
        self.block_index = block_index;
        self
    }

    /// `ln k = Σ w_i ln R_i` at the current weights.
    pub fn log_invariant(&self) -> f64 {
        log_invariant_at(&self.reserves, self.weights.as_slice())
    }

    /// `k = Π R_i^{w_i}`.
    pub fn invariant(&self) -> f64 {
        self.log_invariant().exp()
    }

    /// Pool-quoted price of token `i` in units of token `numeraire`:
    /// `(w_i / R_i) / (w_n / R_n)`.
    pub fn quoted_price(&self, i: usize, numeraire: usize) -> Result<f64> {
        let len = self.len();
        for index in [i, numeraire] {
            if index >= len {
                return Err(Error::IndexOutOfRange { index, len });
            }
        }
        if i == numeraire {
            return Ok(1.0);
        }
        let w = self.weights.as_slice();
        let r = &self.reserves;
        Ok((w[i] / r[i]) / (w[numeraire] / r[numeraire]))
    }

    /// All quoted prices against `numeraire`.
    pub fn quoted_prices(&self, numeraire: usize) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|i| self.quoted_price(i, numeraire))
            .collect()
    }

    /// `p · R` in numéraire units.
    pub fn value(&self, prices: &PriceVector) -> Result<f64> {
        if prices.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: prices.len(),
            });
        }
        Ok(self
            .reserves
            .iter()
            .zip(prices.as_slice())
            .map(|(r, p)| r * p)
            .sum())
    }

    /// Largest relative gap between quoted and market prices.
    pub fn equilibrium_error(&self, prices: &PriceVector) -> Result<(usize, f64)> {
        if prices.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: prices.len(),
            });
        }
        let numeraire = prices.numeraire_index();
        let mut worst = (numeraire, 0.0);
        for (i, &market) in prices.as_slice().iter().enumerate() {
            let quoted = self.quoted_price(i, numeraire)?;
            let rel = (quoted - market).abs() / market;
            if rel > worst.1 {
                worst = (i, rel);
            }
        }
        Ok(worst)
    }
}

/// Free-function form of [`PoolState::value`].
pub fn pool_value(pool: &PoolState, prices: &PriceVector) -> Result<f64> {
    pool.value(prices)
}

/// Free-function form of [`PoolState::quoted_price`].
pub fn quoted_price(pool: &PoolState, i: usize, numeraire: usize) -> Result<f64> {
    pool.quoted_price(i, numeraire)
}

pub(crate) fn log_invariant_at(reserves: &[f64], weights: &[f64]) -> f64 {
    reserves
        .iter()
        .zip(weights)
        .map(|(r, w)| w * r.ln())
        .sum()
}

/// How a trajectory between two weight vectors was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    OneStep,
    Linear,
    Geometric,
    #[serde(rename = "approx")]
    ApproxOptimal,
    #[serde(rename = "optimal")]
    NumericalOptimal,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::OneStep,
        Scheme::Linear,
        Scheme::Geometric,
        Scheme::ApproxOptimal,
        Scheme::NumericalOptimal,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::OneStep => "one-step",
            Scheme::Linear => "linear",
            Scheme::Geometric => "geometric",
            Scheme::ApproxOptimal => "approx",
            Scheme::NumericalOptimal => "optimal",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "one-step" | "onestep" | "one_step" => Ok(Scheme::OneStep),
            "linear" => Ok(Scheme::Linear),
            "geometric" => Ok(Scheme::Geometric),
            "approx" | "approx-optimal" | "approxoptimal" => Ok(Scheme::ApproxOptimal),
            "optimal" | "numerical-optimal" | "numericaloptimal" => Ok(Scheme::NumericalOptimal),
            other => Err(Error::InvalidConfig(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Ordered weights `w(t_0), ..., w(t_f)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    steps: Vec<WeightVector>,
    scheme: Scheme,
}

impl Trajectory {
    pub fn new(steps: Vec<WeightVector>, scheme: Scheme) -> Result<Self> {
        if steps.len() < 2 {
            return Err(Error::InvalidTrajectory(format!(
                "need at least 2 steps, got {}",
                steps.len()
            )));
        }
        let n = steps[0].len();
        if let Some(bad) = steps.iter().find(|s| s.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        Ok(Trajectory { steps, scheme })
    }

    pub fn steps(&self) -> &[WeightVector] {
        &self.steps
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Number of weight changes `f`.
    pub fn num_steps(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn num_tokens(&self) -> usize {
        self.steps[0].len()
    }

    pub fn start(&self) -> &WeightVector {
        &self.steps[0]
    }

    pub fn end(&self) -> &WeightVector {
        &self.steps[self.steps.len() - 1]
    }

    /// Block-to-block changes `w(t_{k+1}) - w(t_k)`.
    pub fn deltas(&self) -> Vec<Vec<f64>> {
        self.steps
            .windows(2)
            .map(|pair| {
                pair[1]
                    .as_slice()
                    .iter()
                    .zip(pair[0].as_slice())
                    .map(|(b, a)| b - a)
                    .collect()
            })
            .collect()
    }

    /// Largest absolute weight discrepancy against another trajectory of the
    /// same shape.
    pub fn max_abs_deviation(&self, other: &Trajectory) -> Result<f64> {
        if self.steps.len() != other.steps.len() || self.num_tokens() != other.num_tokens() {
            return Err(Error::DimensionMismatch {
                expected: self.steps.len(),
                found: other.steps.len(),
            });
        }
        Ok(self
            .steps
            .iter()
            .zip(&other.steps)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_symmetric_and_figure_weights() {
        assert!(validate_weights(&[0.5, 0.5], 1e-6).is_ok());
        assert!(validate_weights(&[0.05, 0.55, 0.4], 1e-6).is_ok());
    }

    #[test]
    fn rejects_bad_sum_length_and_bounds() {
        assert!(matches!(
            validate_weights(&[0.7, 0.2], 1e-6),
            Err(Error::SumNotOne { .. })
        ));
        assert!(matches!(
            validate_weights(&[1.0], 1e-6),
            Err(Error::BadLength { len: 1 })
        ));
        assert!(matches!(
            validate_weights(&[1.0, 0.0], 1e-6),
            Err(Error::OutOfBounds { index: 0, .. })
        ));
        assert!(matches!(
            validate_weights(&[0.5 + 5e-7, 0.5 - 5e-7, 0.0], 1e-6),
            Err(Error::OutOfBounds { index: 2, .. })
        ));
    }

    #[test]
    fn no_silent_renormalization() {
        let w = validate_weights(&[0.3, 0.7 + 5e-10], 1e-6).unwrap();
        assert_eq!(w.as_slice(), &[0.3, 0.7 + 5e-10]);
    }

    #[test]
    fn quoted_prices() {
        let w = WeightVector::new(&[0.5, 0.5]).unwrap();
        let pool = PoolState::new(vec![100.0, 100.0], w.clone(), 0).unwrap();
        assert_eq!(pool.quoted_price(1, 0).unwrap(), 1.0);
        let pool = PoolState::new(vec![100.0, 50.0], w, 0).unwrap();
        assert_eq!(pool.quoted_price(1, 0).unwrap(), 2.0);
        assert_eq!(pool.quoted_price(1, 1).unwrap(), 1.0);
        assert!(matches!(
            pool.quoted_price(2, 0),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn pool_values() {
        let w = WeightVector::new(&[0.5, 0.5]).unwrap();
        let cases = [
            (vec![100.0, 100.0], vec![1.0, 1.0], 200.0),
            (vec![3.0, 2.0], vec![1.0, 4.0], 11.0),
            (vec![0.0001, 5.0], vec![1.0, 0.5], 2.5001),
        ];
        for (r, p, expected) in cases {
            let pool = PoolState::new(r, w.clone(), 0).unwrap();
            let prices = PriceVector::new(p, 0).unwrap();
            assert!((pool_value(&pool, &prices).unwrap() - expected).abs() < 1e-12);
        }
        let pool = PoolState::new(vec![1.0, 1.0], w, 0).unwrap();
        assert!(matches!(
            pool.value(&PriceVector::ones(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn price_vector_requires_unit_numeraire() {
        assert!(PriceVector::new(vec![2.0, 1.0], 0).is_err());
        let p = PriceVector::normalized(&[2.0, 1.0, 4.0], 0).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 0.5, 2.0]);
    }

    #[test]
    fn equilibrium_constructor_quotes_market() {
        let w = WeightVector::new(&[0.2, 0.3, 0.5]).unwrap();
        let p = PriceVector::new(vec![1.0, 3.5, 0.02], 0).unwrap();
        let pool = PoolState::at_equilibrium(w, &p, 1000.0).unwrap();
        assert!(pool.equilibrium_error(&p).unwrap().1 < 1e-14);
        assert!((pool.value(&p).unwrap() - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn scheme_labels_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.label().parse::<Scheme>().unwrap(), s);
        }
    }
}
