//! The four commands. Each returns the full set of files it would write, so
//! nothing touches the disk unless the whole command succeeds.

use std::fs::File;

use anyhow::{anyhow, Context};
use serde::Serialize;
use tfmm_core::reserves::log_value_factor;
use tfmm_core::{
    closed_form_trajectory, compare_schemes, optimize_weights, FeeParams, InterpolationRequest,
    OptimizerResult, PoolState, PriceSeries, Scheme, Trajectory, WeightVector,
};

use crate::config::RunConfig;
use crate::output::{csv_table, Outputs};

/// Why a command failed, which decides the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Invalid configuration or input data (exit 2).
    Input(anyhow::Error),
    /// The optimizer stopped before reaching its tolerance (exit 3).
    NotConverged(String),
    /// Anything else, such as a failed write (exit 1).
    Other(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::NotConverged(_) => 3,
            Failure::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Input(e) => write!(f, "invalid input: {e:#}"),
            Failure::NotConverged(msg) => write!(f, "optimizer did not converge: {msg}"),
            Failure::Other(e) => write!(f, "{e:#}"),
        }
    }
}

type CmdResult<T> = std::result::Result<T, Failure>;

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Input(e.into())
}

fn other<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Other(e.into())
}

const TRAJECTORY_SCHEMES: [Scheme; 3] = [Scheme::Linear, Scheme::Geometric, Scheme::ApproxOptimal];
const BACKTEST_SCHEMES: [Scheme; 2] = [Scheme::Linear, Scheme::ApproxOptimal];

fn request(cfg: &RunConfig) -> CmdResult<InterpolationRequest> {
    let i = &cfg.interpolation;
    let start = WeightVector::new(&i.start)
        .context("start weights")
        .map_err(input)?;
    let end = WeightVector::new(&i.end).context("end weights").map_err(input)?;
    InterpolationRequest::new(start, end, i.steps).map_err(input)
}

fn optimize(cfg: &RunConfig, req: &InterpolationRequest, allow: bool) -> CmdResult<OptimizerResult> {
    let res = optimize_weights(req, &cfg.optimizer).map_err(input)?;
    log::info!(
        "optimizer: {} iterations, converged = {}, projected gradient {:e}",
        res.iterations_used,
        res.converged,
        res.projected_gradient_norm
    );
    if !res.converged && !allow {
        return Err(Failure::NotConverged(format!(
            "projected gradient {:e} after {} iterations (use --allow-nonconverged to keep the result)",
            res.projected_gradient_norm, res.iterations_used
        )));
    }
    Ok(res)
}

fn trajectory_for(
    cfg: &RunConfig,
    scheme: Scheme,
    req: &InterpolationRequest,
    allow: bool,
) -> CmdResult<Trajectory> {
    match scheme {
        Scheme::NumericalOptimal => Ok(optimize(cfg, req, allow)?.trajectory),
        other => closed_form_trajectory(other, req).map_err(input),
    }
}

fn weight_header(n: usize, prefix: &str) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

fn rows(traj: &Trajectory) -> Vec<Vec<f64>> {
    traj.steps().iter().map(|w| w.as_slice().to_vec()).collect()
}

fn add_trajectory(out: &mut Outputs, dir: &str, traj: &Trajectory) {
    let n = traj.num_tokens();
    out.add(
        format!("{dir}/trajectory.csv"),
        csv_table(&weight_header(n, "w"), "k", 0, &rows(traj)),
    );
    // row k holds w(k) - w(k-1)
    out.add(
        format!("{dir}/deltas.csv"),
        csv_table(&weight_header(n, "dw"), "k", 1, &traj.deltas()),
    );
}

fn add_config(out: &mut Outputs, cfg: &RunConfig) -> CmdResult<()> {
    out.add("config.toml", cfg.to_toml().map_err(other)?.into_bytes());
    Ok(())
}

/// Value factor `p · R(t_f) / p · R(t_0)` of a trajectory at constant prices.
fn value_factor(traj: &Trajectory) -> f64 {
    log_value_factor(traj.steps().iter().map(|w| w.as_slice())).exp()
}

pub fn trajectory(cfg: &RunConfig, allow_nonconverged: bool) -> CmdResult<Outputs> {
    let req = request(cfg)?;
    let mut out = Outputs::default();
    for scheme in cfg.schemes_or(&TRAJECTORY_SCHEMES) {
        let traj = trajectory_for(cfg, scheme, &req, allow_nonconverged)?;
        add_trajectory(&mut out, scheme.label(), &traj);
    }
    add_config(&mut out, cfg)?;
    Ok(out)
}

#[derive(Debug, Serialize)]
struct Diagnostics {
    iterations: usize,
    converged: bool,
    /// Optimal pool value for a unit starting value.
    final_value: f64,
    projected_gradient_norm: f64,
    value_one_step: f64,
    value_linear: f64,
    value_approx: f64,
    /// `(V_approx - V_linear) / (V_opt - V_linear)`; absent when the optimum
    /// does not improve on linear interpolation.
    value_capture: Option<f64>,
    max_deviation_linear: f64,
    max_deviation_approx: f64,
}

fn deviation_rows(a: &Trajectory, b: &Trajectory) -> Vec<Vec<f64>> {
    a.steps()
        .iter()
        .zip(b.steps())
        .map(|(x, y)| {
            x.as_slice()
                .iter()
                .zip(y.as_slice())
                .map(|(p, q)| p - q)
                .collect()
        })
        .collect()
}

pub fn optimize_cmd(cfg: &RunConfig, allow_nonconverged: bool) -> CmdResult<Outputs> {
    let req = request(cfg)?;
    let res = optimize(cfg, &req, allow_nonconverged)?;
    let linear = closed_form_trajectory(Scheme::Linear, &req).map_err(input)?;
    let approx = closed_form_trajectory(Scheme::ApproxOptimal, &req).map_err(input)?;
    let one_step = closed_form_trajectory(Scheme::OneStep, &req).map_err(input)?;

    let (v_lin, v_approx) = (value_factor(&linear), value_factor(&approx));
    let gain = res.final_value - v_lin;
    let diagnostics = Diagnostics {
        iterations: res.iterations_used,
        converged: res.converged,
        final_value: res.final_value,
        projected_gradient_norm: res.projected_gradient_norm,
        value_one_step: value_factor(&one_step),
        value_linear: v_lin,
        value_approx: v_approx,
        value_capture: (gain > 0.0).then(|| (v_approx - v_lin) / gain),
        max_deviation_linear: res.trajectory.max_abs_deviation(&linear).map_err(other)?,
        max_deviation_approx: res.trajectory.max_abs_deviation(&approx).map_err(other)?,
    };

    let n = req.num_tokens();
    let mut out = Outputs::default();
    add_trajectory(&mut out, Scheme::NumericalOptimal.label(), &res.trajectory);
    add_trajectory(&mut out, Scheme::Linear.label(), &linear);
    add_trajectory(&mut out, Scheme::ApproxOptimal.label(), &approx);
    out.add(
        "deviation_linear.csv",
        csv_table(&weight_header(n, "d"), "k", 0, &deviation_rows(&res.trajectory, &linear)),
    );
    out.add(
        "deviation_approx.csv",
        csv_table(&weight_header(n, "d"), "k", 0, &deviation_rows(&res.trajectory, &approx)),
    );
    out.add_json("diagnostics.json", &diagnostics).map_err(other)?;
    add_config(&mut out, cfg)?;
    Ok(out)
}

fn load_series(cfg: &RunConfig) -> CmdResult<PriceSeries> {
    let src = &cfg.prices;
    if src.synthetic {
        return src.generator.generate(cfg.seed).map_err(input);
    }
    let path = src
        .csv
        .as_ref()
        .ok_or_else(|| input(anyhow!("either --prices <csv> or --synthetic is required")))?;
    let file = File::open(path)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(input)?;
    PriceSeries::from_csv(file, &src.numeraire)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(input)
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    scheme: Scheme,
    strategy: String,
    fee_rate: f64,
    seed: u64,
    final_return: f64,
    final_value: f64,
    fees_total: f64,
    arb_cost_total: f64,
    rebalances: usize,
    /// Final value over the linear scheme's at the same fee, when linear ran.
    ratio_to_linear: Option<f64>,
    report: String,
}

#[derive(Debug, Serialize)]
struct Summary {
    seed: u64,
    source: String,
    blocks: usize,
    tokens: Vec<String>,
    rows: Vec<SummaryRow>,
}

pub fn backtest(cfg: &RunConfig) -> CmdResult<Outputs> {
    let series = load_series(cfg)?;
    let n = series.num_tokens();
    let weights = if cfg.pool.initial_weights.is_empty() {
        WeightVector::uniform(n).map_err(input)?
    } else {
        WeightVector::new(&cfg.pool.initial_weights)
            .context("pool.initial_weights")
            .map_err(input)?
    };
    let pool = PoolState::at_equilibrium(weights, &series.prices_at(0), cfg.pool.initial_value)
        .map_err(input)?;
    let fees = cfg
        .fees
        .iter()
        .map(|&f| FeeParams::new(f))
        .collect::<Result<Vec<_>, _>>()
        .map_err(input)?;
    let schemes = cfg.schemes_or(&BACKTEST_SCHEMES);
    let reports = compare_schemes(&series, &cfg.strategy, &fees, &schemes, &pool).map_err(input)?;

    let mut out = Outputs::default();
    let mut rows = Vec::with_capacity(reports.len());
    for r in &reports {
        let name = format!("reports/{}_fee{}.csv", r.scheme.label(), r.fee_rate);
        let mut bytes = Vec::new();
        r.write_csv(&mut bytes).map_err(other)?;
        out.add(&name, bytes);
        let linear = reports
            .iter()
            .find(|x| x.scheme == Scheme::Linear && x.fee_rate == r.fee_rate);
        rows.push(SummaryRow {
            scheme: r.scheme,
            strategy: r.strategy_label.clone(),
            fee_rate: r.fee_rate,
            seed: cfg.seed,
            final_return: r.final_return,
            final_value: r.final_value(),
            fees_total: r.fees_total,
            arb_cost_total: r.arb_cost_total,
            rebalances: r.rebalances,
            ratio_to_linear: linear.map(|l| r.final_value() / l.final_value()),
            report: name,
        });
        log::info!(
            "{} fee {}: final return {:.6}",
            r.scheme,
            r.fee_rate,
            r.final_return
        );
    }
    let source = if cfg.prices.synthetic {
        "synthetic".to_string()
    } else {
        cfg.prices
            .csv
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default()
    };
    let summary = Summary {
        seed: cfg.seed,
        source,
        blocks: series.len(),
        tokens: series.symbols().to_vec(),
        rows,
    };
    out.add_json("summary.json", &summary).map_err(other)?;
    add_config(&mut out, cfg)?;
    Ok(out)
}

pub fn compare(cfg: &RunConfig, allow_nonconverged: bool) -> CmdResult<Outputs> {
    let req = request(cfg)?;
    let linear = value_factor(&closed_form_trajectory(Scheme::Linear, &req).map_err(input)?);
    let mut text = String::from("scheme,final_value,rebalancing_cost,relative_to_linear\n");
    for scheme in cfg.schemes_or(&Scheme::ALL) {
        let v = value_factor(&trajectory_for(cfg, scheme, &req, allow_nonconverged)?);
        text.push_str(&format!("{},{},{},{}\n", scheme.label(), v, 1.0 - v, v / linear));
    }
    let mut out = Outputs::default();
    out.add("compare.csv", text.into_bytes());
    add_config(&mut out, cfg)?;
    Ok(out)
}
