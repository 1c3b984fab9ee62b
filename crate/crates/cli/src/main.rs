mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cookie_walk::branch_chain::{
    closed_form_gamma, closed_form_speed, gamma_bounds, mean_closed_form, speed_from_mu, stationary, ChainError, Speed,
};
use cookie_walk::coupling::{coupled_run, verify_inclusion, CouplingError, CouplingParams};
use cookie_walk::environment::{classify, default_boundary_tol};
use cookie_walk::estimators::{
    conjecture_probe, linear_grid, phase_scan, wilson_interval, EstimatorError, PhaseCsvRow, ScanConfig,
};
use cookie_walk::scalar::parse_rational;
use cookie_walk::verify::{run_suite, Suite};
use cookie_walk::walk_sim::{run_batch, Outcome, SimError, StopRule, DEFAULT_MAX_STEPS};
use cookie_walk::{BigRational, Env, Scalar};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use output::{Format, Sink};

#[derive(Debug, Parser)]
#[command(name = "cookie-walk", version, about = "Random walks in once-excited cookie environments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Serialize)]
struct Common {
    /// Environment: homogeneous:<p>, periodic:<p1,p2,...>, iid:<p1:w1,...>, symmetric
    #[arg(long, global = true, default_value = "symmetric")]
    env: String,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file; standard output when absent
    #[arg(long, global = true)]
    out: Option<String>,
    /// Worker threads; all available cores when absent
    #[arg(long, global = true)]
    #[serde(skip)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo trials of one walk with absorbing levels
    Simulate(SimulateArgs),
    /// Stationary law of the leftward-jump chain and closed forms
    Exact(ExactArgs),
    /// Phase table over a grid of homogeneous strengths
    Scan(ScanArgs),
    /// Coupled runs of two walks in ordered environments
    Couple(CoupleArgs),
    /// Side-by-side report on the escape-probability conjecture
    Probe(ProbeArgs),
    /// Run an invariant suite
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    start: i64,
    #[arg(long, allow_negative_numbers = true)]
    lower: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    upper: Option<i64>,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: u64,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    /// Emit only the summary, not one row per trial
    #[arg(long)]
    summary_only: bool,
}

#[derive(Debug, Args, Serialize)]
struct ExactArgs {
    /// Cookie strength; fractions such as 10/11 are exact
    #[arg(long)]
    p: String,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 1 << 14)]
    max_states: usize,
}

#[derive(Debug, Args, Serialize)]
struct ScanArgs {
    #[arg(long, default_value = "0.6")]
    p_min: String,
    #[arg(long, default_value = "0.95")]
    p_max: String,
    #[arg(long, default_value = "0.05")]
    step: String,
    /// Explicit comma-separated grid; overrides --p-min/--p-max/--step
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<String>>,
    #[arg(long, default_value_t = 10_000)]
    gamma_level: i64,
    /// Escape-probability trials per row; 0 skips the simulation
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 100_000)]
    speed_steps: u64,
    /// Speed trials per row; 0 skips the simulation
    #[arg(long, default_value_t = 50)]
    speed_trials: u64,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 1 << 14)]
    max_states: usize,
}

#[derive(Debug, Args, Serialize)]
struct CoupleArgs {
    #[arg(long, default_value = "symmetric")]
    env_low: String,
    #[arg(long, default_value = "homogeneous:0.8")]
    env_high: String,
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    y: i64,
    #[arg(long, default_value_t = -5, allow_negative_numbers = true)]
    x: i64,
    #[arg(long, default_value_t = 5, allow_negative_numbers = true)]
    z: i64,
    #[arg(long, default_value_t = 10_000)]
    horizon: u64,
    #[arg(long, default_value_t = 1)]
    runs: u64,
}

#[derive(Debug, Args, Serialize)]
struct ProbeArgs {
    #[arg(long)]
    p: String,
    #[arg(long, default_value_t = 10_000)]
    gamma_level: i64,
    /// Escape-probability trials; 0 skips the simulation
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 1 << 14)]
    max_states: usize,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    #[arg(value_parser = parse_suite, default_value = "all")]
    #[serde(serialize_with = "output::display")]
    suite: Suite,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse()
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Invariant(String),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Output(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

impl From<ChainError> for CliError {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::InvalidP(_) | ChainError::InvalidArgument(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::Chain(c) => c.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<CouplingError> for CliError {
    fn from(e: CouplingError) -> Self {
        match e {
            CouplingError::InvariantViolation(_) => CliError::Invariant(e.to_string()),
            CouplingError::DrawCap { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn parse_env(s: &str) -> Result<Env, CliError> {
    s.parse().map_err(|e: cookie_walk::environment::EnvError| CliError::Usage(e.to_string()))
}

fn parse_p(s: &str) -> Result<(BigRational, f64), CliError> {
    let exact = parse_rational(s).ok_or_else(|| CliError::Usage(format!("cannot parse probability `{s}`")))?;
    let value = exact.to_f64_lossy();
    if !(value > 0.5 && value < 1.0) {
        return Err(CliError::Usage(format!("p = {s} must lie in (1/2, 1)")));
    }
    Ok((exact, value))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let c = &cli.common;
    match &cli.command {
        Command::Simulate(a) => simulate(c, a),
        Command::Exact(a) => exact(c, a),
        Command::Scan(a) => scan(c, a),
        Command::Couple(a) => couple(c, a),
        Command::Probe(a) => probe(c, a),
        Command::Verify(a) => verify(c, a),
    }
}

#[derive(Serialize)]
struct TrialRow {
    trial: u64,
    outcome: &'static str,
    steps: u64,
    u0: u64,
    k: u64,
    final_position: i64,
}

fn simulate(c: &Common, a: &SimulateArgs) -> Result<(), CliError> {
    let env = parse_env(&c.env)?;
    let rule = StopRule::new(a.lower, a.upper, a.max_steps);
    if a.trials == 0 {
        return Err(CliError::Usage("need at least one trial".into()));
    }
    let rows = run_batch(&env, a.start, &rule, c.seed, a.trials, |t, rec| TrialRow {
        trial: t,
        outcome: rec.outcome.as_str(),
        steps: rec.steps_taken,
        u0: rec.u(0),
        k: rec.k_count,
        final_position: rec.final_position,
    })?;
    let count = |o: Outcome| rows.iter().filter(|r| r.outcome == o.as_str()).count() as u64;
    let (upper, lower, capped) = (count(Outcome::HitUpper), count(Outcome::HitLower), count(Outcome::StepCapReached));
    let resolved = upper + lower;
    let (ci_low, ci_high) = wilson_interval(upper, resolved);
    let summary = json!({
        "classification": classify(&env, default_boundary_tol()),
        "trials": a.trials,
        "hit_upper": upper,
        "hit_lower": lower,
        "step_cap_reached": capped,
        "hit_upper_fraction": if resolved > 0 { upper as f64 / resolved as f64 } else { f64::NAN },
        "hit_upper_ci95": [ci_low, ci_high],
        "mean_steps": rows.iter().map(|r| r.steps as f64).sum::<f64>() / a.trials as f64,
    });
    let mut sink = Sink::open(c, "simulate", a)?;
    match c.format {
        Format::Json => {
            let mut result = json!({ "summary": summary });
            if !a.summary_only {
                result["trials"] = serde_json::to_value(&rows).map_err(|e| CliError::Output(e.to_string()))?;
            }
            sink.json(result)?;
        }
        Format::Csv => {
            sink.comment(&format!("summary: {summary}"))?;
            if !a.summary_only {
                sink.csv_rows(&rows)?;
            }
        }
    }
    sink.finish()
}

fn speed_json(s: &Speed<f64>) -> serde_json::Value {
    match s {
        Speed::Ballistic(v) => json!(v),
        Speed::Divergent => json!("divergent"),
    }
}

fn exact(c: &Common, a: &ExactArgs) -> Result<(), CliError> {
    let (p_exact, p) = parse_p(&a.p)?;
    let est = stationary(p, a.tol, a.max_states)?;
    let to_f = |v: &BigRational| v.to_f64_lossy();
    let gamma = closed_form_gamma(&p_exact)?;
    let (b_low, b_high) = gamma_bounds(&p_exact)?;
    let speed_closed = closed_form_speed(&p_exact)?;
    let mean_closed = mean_closed_form(&p_exact).ok();
    let speed = speed_from_mu(&est);
    let borderline = p_exact == BigRational::new(3.into(), 4.into());
    let summary = json!({
        "p": p,
        "K": est.truncation,
        "mu0": est.mu0,
        "escape_sum": est.escape_sum(),
        "gamma_closed_form": { "value": to_f(&gamma.value), "status": gamma.status },
        "gamma_bounds": [to_f(&b_low), to_f(&b_high)],
        "mean": est.mean,
        "mean_closed_form": mean_closed.map(|m| json!({ "value": to_f(&m.value), "status": m.status })),
        "second_moment": est.second_moment,
        "speed": speed_json(&speed),
        "speed_closed_form": { "value": to_f(&speed_closed.value), "status": speed_closed.status, "open": speed_closed.open },
        "tail_mass": est.tail_mass,
        "tail_exponent": est.tail_exponent,
        "residual": est.residual,
        "max_row_tail": est.max_row_tail,
        "history": est.history,
        "flags": {
            "mean_divergent": est.mean.divergent,
            "second_moment_divergent": est.second_moment.divergent,
            "ballisticity_open": borderline,
        },
    });
    let mut sink = Sink::open(c, "exact", a)?;
    match c.format {
        Format::Json => sink.json(summary)?,
        Format::Csv => {
            sink.comment(&format!("summary: {summary}"))?;
            #[derive(Serialize)]
            struct MassRow {
                index: usize,
                mass: f64,
            }
            let rows: Vec<MassRow> = est.mu.iter().enumerate().map(|(index, &mass)| MassRow { index, mass }).collect();
            sink.csv_rows(&rows)?;
        }
    }
    sink.finish()
}

fn scan(c: &Common, a: &ScanArgs) -> Result<(), CliError> {
    let grid: Vec<f64> = match &a.grid {
        Some(values) => values
            .iter()
            .map(|s| {
                parse_rational(s)
                    .map(|r| r.to_f64_lossy())
                    .ok_or_else(|| CliError::Usage(format!("cannot parse grid value `{s}`")))
            })
            .collect::<Result<_, _>>()?,
        None => {
            let num = |s: &str| {
                parse_rational(s)
                    .map(|r| r.to_f64_lossy())
                    .ok_or_else(|| CliError::Usage(format!("cannot parse `{s}`")))
            };
            linear_grid(num(&a.p_min)?, num(&a.p_max)?, num(&a.step)?)?
        }
    };
    let cfg = ScanConfig {
        gamma_level: a.gamma_level,
        gamma_trials: a.trials,
        speed_steps: a.speed_steps,
        speed_trials: a.speed_trials,
        seed: c.seed,
        tol: a.tol,
        max_states: a.max_states,
    };
    let rows = phase_scan(&grid, &cfg);
    for r in &rows {
        for e in &r.errors {
            eprintln!("warning: p = {}: {e}", r.p);
        }
    }
    let mut sink = Sink::open(c, "scan", a)?;
    match c.format {
        Format::Json => sink.json(json!({ "rows": rows }))?,
        Format::Csv => {
            let flat: Vec<PhaseCsvRow> = rows.iter().map(PhaseCsvRow::from).collect();
            sink.csv_rows(&flat)?;
        }
    }
    sink.finish()
}

#[derive(Serialize)]
struct CoupleRow {
    run: u64,
    low_outcome: &'static str,
    high_outcome: &'static str,
    low_steps: u64,
    high_steps: u64,
    shared_draws: u64,
    splits: u64,
    recouplings: u64,
    inclusion: bool,
}

fn couple(c: &Common, a: &CoupleArgs) -> Result<(), CliError> {
    let (low, high) = (parse_env(&a.env_low)?, parse_env(&a.env_high)?);
    let params = CouplingParams::new(a.y, a.x, a.z, a.horizon);
    if a.runs == 0 {
        return Err(CliError::Usage("need at least one run".into()));
    }
    use rayon::prelude::*;
    let runs: Vec<_> =
        (0..a.runs).into_par_iter().map(|r| coupled_run(&low, &high, params, c.seed, r)).collect::<Result<_, _>>()?;
    let rows: Vec<CoupleRow> = runs
        .iter()
        .enumerate()
        .map(|(i, run)| CoupleRow {
            run: i as u64,
            low_outcome: run.rec_low.outcome.as_str(),
            high_outcome: run.rec_high.outcome.as_str(),
            low_steps: run.rec_low.steps_taken,
            high_steps: run.rec_high.steps_taken,
            shared_draws: run.shared_draws_used,
            splits: run.splits,
            recouplings: run.recouplings,
            inclusion: verify_inclusion(run),
        })
        .collect();
    let failures = rows.iter().filter(|r| !r.inclusion).count();
    let hits = |f: fn(&CoupleRow) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / rows.len() as f64;
    let summary = json!({
        "runs": a.runs,
        "inclusion_failures": failures,
        "low_hit_upper_fraction": hits(|r| r.low_outcome == "hit_upper"),
        "high_hit_upper_fraction": hits(|r| r.high_outcome == "hit_upper"),
    });
    let mut sink = Sink::open(c, "couple", a)?;
    match c.format {
        Format::Json if a.runs == 1 => sink.json(json!({ "summary": summary, "run": runs[0], "inclusion": rows[0].inclusion }))?,
        Format::Json => sink.json(json!({ "summary": summary, "runs": rows }))?,
        Format::Csv => {
            sink.comment(&format!("summary: {summary}"))?;
            sink.csv_rows(&rows)?;
        }
    }
    sink.finish()?;
    if failures > 0 {
        return Err(CliError::Invariant(format!("event inclusion failed on {failures} run(s)")));
    }
    Ok(())
}

fn probe(c: &Common, a: &ProbeArgs) -> Result<(), CliError> {
    let (_, p) = parse_p(&a.p)?;
    let cfg = ScanConfig {
        gamma_level: a.gamma_level,
        gamma_trials: a.trials,
        seed: c.seed,
        tol: a.tol,
        max_states: a.max_states,
        ..ScanConfig::default()
    };
    let report = conjecture_probe(p, &cfg)?;
    let mut sink = Sink::open(c, "probe", a)?;
    match c.format {
        Format::Json => sink.json(serde_json::to_value(&report).map_err(|e| CliError::Output(e.to_string()))?)?,
        Format::Csv => {
            #[derive(Serialize)]
            struct KeyValue {
                key: &'static str,
                value: Option<f64>,
            }
            let rows = [
                KeyValue { key: "p", value: Some(report.p) },
                KeyValue { key: "gamma_mc", value: report.gamma_mc.as_ref().map(|e| e.value) },
                KeyValue { key: "gamma_mc_stderr", value: report.gamma_mc.as_ref().map(|e| e.stderr) },
                KeyValue { key: "mu0_numeric", value: report.mu0_numeric },
                KeyValue { key: "closed_form", value: Some(report.closed_form.value) },
                KeyValue { key: "bound_low", value: Some(report.bound_low) },
                KeyValue { key: "bound_high", value: Some(report.bound_high) },
                KeyValue { key: "tail_exponent", value: report.tail_exponent },
            ];
            sink.comment("label: PROBE (report only, no verdict)")?;
            sink.csv_rows(&rows)?;
        }
    }
    sink.finish()
}

fn verify(c: &Common, a: &VerifyArgs) -> Result<(), CliError> {
    let checks = run_suite(a.suite, c.seed);
    for ch in &checks {
        eprintln!("{:<5} {:<11} {:<58} {}", if ch.passed { "PASS" } else { "FAIL" }, ch.suite, ch.name, ch.detail);
    }
    let mut sink = Sink::open(c, "verify", a)?;
    match c.format {
        Format::Json => sink.json(json!({ "checks": checks }))?,
        Format::Csv => sink.csv_rows(&checks)?,
    }
    sink.finish()?;
    match checks.iter().find(|ch| !ch.passed) {
        Some(first) => Err(CliError::Invariant(format!("{} / {}: {}", first.suite, first.name, first.detail))),
        None => Ok(()),
    }
}
