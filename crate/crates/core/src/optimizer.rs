//! Numerical solution of the constant-price trajectory problem: choose the
//! interior weights `w(t_1), ..., w(t_{f-1})` maximizing `p · R(t_f)` with
//! every step on the simplex.
//!
//! At equilibrium `p · R(t_f) = p · R(t_0) · exp(-Σ_k KL(w(t_k) || w(t_{k-1})))`,
//! so the log-objective is concave in the weights and its Hessian is
//! block-tridiagonal in `k` (diagonal in the token index within a block).
//!
//! Each interior step is parametrized by unconstrained logits through
//! `w = ε + (1 - Nε) softmax(θ)`, which keeps every iterate feasible with
//! components above the floor `ε`. Search directions are Newton steps of the
//! log-objective on the simplex tangent space, solved block-tridiagonally and
//! mapped to logit space, with a halving Armijo line search. Near the optimum,
//! where the gain of a step is below the rounding floor of the objective, a
//! step is accepted when it reduces the projected gradient instead.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reserves::{closed_form_reserves, log_value_factor, EQUILIBRIUM_TOLERANCE};
use crate::schemes::{approx_optimal_trajectory, closed_form_trajectory, InterpolationRequest};
use crate::types::{PoolState, PriceVector, Scheme, Trajectory, WeightVector};

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Stationarity threshold on the projected gradient norm of `p · R(t_f)`,
    /// relative to the initial pool value `p · R(t_0)`.
    pub gradient_tolerance: f64,
    /// First trial step of each line search (1.0 is the full Newton step).
    pub step_size: f64,
    /// Backtracking factor.
    pub step_decay: f64,
    /// Floor on every interior weight.
    pub epsilon_bound: f64,
    /// Reserved for randomized restarts; the Newton path itself is deterministic.
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iterations: 5000,
            gradient_tolerance: 1e-10,
            step_size: 1.0,
            step_decay: 0.5,
            epsilon_bound: crate::types::DEFAULT_EPSILON,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("optimizer: {what}")));
        if self.max_iterations < 1 {
            return bad("max_iterations must be >= 1");
        }
        if !(self.gradient_tolerance > 0.0) {
            return bad("gradient_tolerance must be > 0");
        }
        if !(self.step_size > 0.0) {
            return bad("step_size must be > 0");
        }
        if !(self.step_decay > 0.0 && self.step_decay <= 1.0) {
            return bad("step_decay must lie in (0, 1]");
        }
        if !(self.epsilon_bound > 0.0 && self.epsilon_bound < 0.5) {
            return bad("epsilon_bound must lie in (0, 0.5)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerResult {
    pub trajectory: Trajectory,
    /// `p · R(t_f)` of the returned trajectory.
    pub final_value: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// `p · R(t_f)` at every accepted iterate, starting with the initialization.
    pub objective_history: Vec<f64>,
    pub projected_gradient_norm: f64,
}

/// Closed-form `p · R(t_f)` for a trajectory applied to `pool`.
pub fn trajectory_objective(traj: &Trajectory, pool: &PoolState, prices: &PriceVector) -> Result<f64> {
    check_inputs(traj, pool, prices)?;
    Ok(closed_form_reserves(pool.reserves(), traj)
        .iter()
        .zip(prices.as_slice())
        .map(|(r, p)| r * p)
        .sum())
}

/// `∂(p · R(t_f)) / ∂w_i(t_k)` for every interior step `k = 1..f-1`, treating
/// each component as an independent variable.
pub fn trajectory_objective_gradient(
    traj: &Trajectory,
    pool: &PoolState,
    prices: &PriceVector,
) -> Result<Vec<Vec<f64>>> {
    let value = trajectory_objective(traj, pool, prices)?;
    let steps = traj.steps();
    Ok((1..traj.num_steps())
        .map(|k| {
            log_gradient_row(
                steps[k - 1].as_slice(),
                steps[k].as_slice(),
                steps[k + 1].as_slice(),
            )
            .into_iter()
            .map(|g| value * g)
            .collect()
        })
        .collect())
}

/// Euclidean norm of a per-step gradient after removing each step's mean,
/// i.e. its projection onto the simplex tangent space.
pub fn projected_gradient_norm(gradient: &[Vec<f64>]) -> f64 {
    gradient
        .iter()
        .map(|row| {
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            row.iter().map(|g| (g - mean).powi(2)).sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

// ∂/∂w_j(k) of Σ_k Σ_j w_j(k) ln(w_j(k-1)/w_j(k)):
// ln(prev/cur) - 1 + next/cur
fn log_gradient_row(prev: &[f64], cur: &[f64], next: &[f64]) -> Vec<f64> {
    prev.iter()
        .zip(cur)
        .zip(next)
        .map(|((&p, &c), &n)| ((p - c) / c).ln_1p() + (n - c) / c)
        .collect()
}

fn check_inputs(traj: &Trajectory, pool: &PoolState, prices: &PriceVector) -> Result<()> {
    if traj.num_tokens() != pool.len() || prices.len() != pool.len() {
        return Err(Error::DimensionMismatch {
            expected: pool.len(),
            found: traj.num_tokens().max(prices.len()),
        });
    }
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

/// Maximizes `p · R(t_f)` over the interior steps of `req`, starting from the
/// approximately-optimal trajectory.
///
/// Running out of iterations is not an error: the best iterate is returned
/// with `converged = false`.
pub fn optimize_trajectory(
    req: &InterpolationRequest,
    pool: &PoolState,
    prices: &PriceVector,
    cfg: &OptimizerConfig,
) -> Result<OptimizerResult> {
    cfg.validate()?;
    let (token, relative_error) = pool.equilibrium_error(prices)?;
    if relative_error > EQUILIBRIUM_TOLERANCE {
        return Err(Error::NotAtEquilibrium {
            token,
            relative_error,
        });
    }
    let init = approx_optimal_trajectory(req)?;
    check_inputs(&init, pool, prices)?;

    let base = trajectory_objective(&init, pool, prices)?
        / log_value_factor(init.steps().iter().map(|w| w.as_slice())).exp();
    let tolerance = cfg.gradient_tolerance * pool.value(prices)?;
    run(req, &init, base, tolerance, cfg)
}

/// Optimal interior weights for a pool of unit value; the optimum does not
/// depend on prices or on the size of the pool.
pub fn optimize_weights(req: &InterpolationRequest, cfg: &OptimizerConfig) -> Result<OptimizerResult> {
    cfg.validate()?;
    let init = approx_optimal_trajectory(req)?;
    run(req, &init, 1.0, cfg.gradient_tolerance, cfg)
}

/// Builds the trajectory of any scheme, running the optimizer for
/// [`Scheme::NumericalOptimal`].
pub fn build_trajectory(
    scheme: Scheme,
    req: &InterpolationRequest,
    cfg: &OptimizerConfig,
) -> Result<Trajectory> {
    match scheme {
        Scheme::NumericalOptimal => Ok(optimize_weights(req, cfg)?.trajectory),
        other => closed_form_trajectory(other, req),
    }
}

/// Interior logits plus the fixed endpoints.
struct Problem<'a> {
    n: usize,
    f: usize,
    start: &'a [f64],
    end: &'a [f64],
    floor: f64,
}

impl Problem<'_> {
    fn scale(&self) -> f64 {
        1.0 - self.n as f64 * self.floor
    }

    /// Full weight matrix, `(f + 1) x n`, row-major.
    fn weights(&self, theta: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut w = Vec::with_capacity((self.f + 1) * n);
        w.extend_from_slice(self.start);
        for logits in theta.chunks(n) {
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|t| (t - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            w.extend(exps.iter().map(|e| self.floor + self.scale() * e / total));
        }
        w.extend_from_slice(self.end);
        w
    }

    fn logits(&self, interior: &[&[f64]]) -> Vec<f64> {
        interior
            .iter()
            .flat_map(|row| {
                row.iter()
                    .map(|w| ((w - self.floor) / self.scale()).max(f64::MIN_POSITIVE).ln())
            })
            .collect()
    }

    fn log_objective(&self, w: &[f64]) -> f64 {
        log_value_factor(w.chunks(self.n))
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n;
        (1..self.f)
            .flat_map(|k| {
                log_gradient_row(
                    &w[(k - 1) * n..k * n],
                    &w[k * n..(k + 1) * n],
                    &w[(k + 1) * n..(k + 2) * n],
                )
            })
            .collect()
    }

    /// Newton direction on the tangent space, in full weight coordinates.
    fn newton_direction(&self, w: &[f64], grad: &[f64]) -> Vec<f64> {
        let n = self.n;
        let m = n - 1;
        let interior = self.f - 1;
        let reduce = |vals: &[f64]| {
            let last = vals[m];
            DMatrix::from_fn(m, m, |r, c| if r == c { vals[r] + last } else { last })
        };

        let mut diag = Vec::with_capacity(interior);
        let mut off = Vec::with_capacity(interior.saturating_sub(1));
        let mut rhs = Vec::with_capacity(interior);
        for k in 1..self.f {
            let cur = &w[k * n..(k + 1) * n];
            let next = &w[(k + 1) * n..(k + 2) * n];
            let curvature: Vec<f64> = cur
                .iter()
                .zip(next)
                .map(|(c, nx)| 1.0 / c + nx / (c * c))
                .collect();
            diag.push(reduce(&curvature));
            if k + 1 < self.f {
                let coupling: Vec<f64> = cur.iter().map(|c| -1.0 / c).collect();
                off.push(reduce(&coupling));
            }
            let g = &grad[(k - 1) * n..k * n];
            rhs.push(DVector::from_fn(m, |j, _| g[j] - g[m]));
        }

        let mut shift = 0.0;
        let reduced = loop {
            if let Some(x) = solve_block_tridiagonal(&diag, &off, &rhs, shift) {
                break x;
            }
            let scale = diag.iter().map(|d| d.max()).fold(0.0, f64::max);
            shift = if shift == 0.0 { 1e-10 * scale } else { shift * 10.0 };
        };

        reduced
            .iter()
            .flat_map(|y| {
                let last = -y.sum();
                y.iter().copied().chain(std::iter::once(last)).collect::<Vec<_>>()
            })
            .collect()
    }
}

/// Solves `A x = b` for symmetric positive-definite block-tridiagonal `A`
/// (`diag[k]` on the diagonal, `off[k] = A_{k,k+1}`), with `shift * I` added.
fn solve_block_tridiagonal(
    diag: &[DMatrix<f64>],
    off: &[DMatrix<f64>],
    rhs: &[DVector<f64>],
    shift: f64,
) -> Option<Vec<DVector<f64>>> {
    let k_max = diag.len();
    let mut chols = Vec::with_capacity(k_max);
    let mut ys: Vec<DVector<f64>> = Vec::with_capacity(k_max);
    for k in 0..k_max {
        let mut s = diag[k].clone();
        for i in 0..s.nrows() {
            s[(i, i)] += shift;
        }
        let mut y = rhs[k].clone();
        if k > 0 {
            let b: &DMatrix<f64> = &off[k - 1];
            let prev: &nalgebra::linalg::Cholesky<f64, nalgebra::Dyn> = &chols[k - 1];
            s -= b.transpose() * prev.solve(b);
            y -= b.transpose() * prev.solve(&ys[k - 1]);
        }
        chols.push(s.cholesky()?);
        ys.push(y);
    }
    let mut xs = vec![DVector::zeros(0); k_max];
    for k in (0..k_max).rev() {
        let mut y = ys[k].clone();
        if k + 1 < k_max {
            y -= &off[k] * &xs[k + 1];
        }
        xs[k] = chols[k].solve(&y);
    }
    Some(xs)
}

fn run(
    req: &InterpolationRequest,
    init: &Trajectory,
    base: f64,
    tolerance: f64,
    cfg: &OptimizerConfig,
) -> Result<OptimizerResult> {
    let n = req.num_tokens();
    let f = req.num_steps;
    if n as f64 * cfg.epsilon_bound >= 1.0 {
        return Err(Error::InvalidConfig(
            "epsilon_bound too large for the number of tokens".into(),
        ));
    }
    // nothing to optimize: a single change, or a no-op that is already optimal
    if f == 1 || req.w_start.as_slice() == req.w_end.as_slice() {
        return Ok(OptimizerResult {
            final_value: base * log_value_factor(init.steps().iter().map(|w| w.as_slice())).exp(),
            objective_history: vec![
                base * log_value_factor(init.steps().iter().map(|w| w.as_slice())).exp(),
            ],
            trajectory: Trajectory::new(init.steps().to_vec(), Scheme::NumericalOptimal)?,
            iterations_used: 0,
            converged: true,
            projected_gradient_norm: 0.0,
        });
    }

    let problem = Problem {
        n,
        f,
        start: req.w_start.as_slice(),
        end: req.w_end.as_slice(),
        floor: cfg.epsilon_bound,
    };
    let interior: Vec<&[f64]> = init.steps()[1..f].iter().map(|w| w.as_slice()).collect();
    let mut theta = problem.logits(&interior);
    let mut w = problem.weights(&theta);
    let mut objective = problem.log_objective(&w);
    let mut history = vec![base * objective.exp()];
    let mut converged = false;
    let mut iterations = 0;
    let mut grad_norm;

    loop {
        let grad = problem.gradient(&w);
        let value = base * objective.exp();
        grad_norm = value * tangent_norm(&grad, n);
        if grad_norm <= tolerance {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iterations {
            break;
        }

        let direction = problem.newton_direction(&w, &grad);
        let slope: f64 = grad.iter().zip(&direction).map(|(g, d)| g * d).sum();
        let d_theta: Vec<f64> = direction
            .iter()
            .zip(&w[n..f * n])
            .map(|(d, wk)| d / (wk - problem.floor))
            .collect();

        // Once the predicted gain drops below the rounding floor of the
        // objective, comparisons of objective values carry no information and
        // steps are judged by the stationarity measure instead.
        let noise = 64.0 * f64::EPSILON * objective.abs().max(f64::MIN_POSITIVE);
        let unresolved = 0.5 * cfg.step_size * slope <= noise;
        let current_norm = tangent_norm(&grad, n);
        let mut step = cfg.step_size;
        let mut accepted = None;
        while step >= MIN_STEP {
            let trial: Vec<f64> = theta
                .iter()
                .zip(&d_theta)
                .map(|(t, d)| t + step * d)
                .collect();
            let trial_w = problem.weights(&trial);
            let trial_obj = problem.log_objective(&trial_w);
            let ok = if unresolved {
                trial_obj >= objective - noise
                    && tangent_norm(&problem.gradient(&trial_w), n) < current_norm
            } else {
                trial_obj >= objective + ARMIJO * step * slope
            };
            if ok {
                accepted = Some((trial, trial_w, trial_obj));
                break;
            }
            if cfg.step_decay >= 1.0 {
                break;
            }
            step *= cfg.step_decay;
        }
        let Some((trial, trial_w, trial_obj)) = accepted else {
            break;
        };
        theta = trial;
        w = trial_w;
        objective = trial_obj;
        history.push(base * objective.exp());
        iterations += 1;
    }

    let eps = cfg.epsilon_bound;
    let mut steps = Vec::with_capacity(f + 1);
    steps.push(req.w_start.clone());
    for row in w[n..f * n].chunks(n) {
        steps.push(WeightVector::normalized(row, eps)?);
    }
    steps.push(req.w_end.clone());
    let trajectory = Trajectory::new(steps, Scheme::NumericalOptimal)?;
    let final_value =
        base * log_value_factor(trajectory.steps().iter().map(|w| w.as_slice())).exp();

    Ok(OptimizerResult {
        trajectory,
        final_value,
        iterations_used: iterations,
        converged,
        objective_history: history,
        projected_gradient_norm: grad_norm,
    })
}

fn tangent_norm(grad: &[f64], n: usize) -> f64 {
    grad.chunks(n)
        .map(|row| {
            let mean = row.iter().sum::<f64>() / n as f64;
            row.iter().map(|g| (g - mean).powi(2)).sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}
