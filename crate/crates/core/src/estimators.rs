//! Monte Carlo estimates with error bars, phase scans and conjecture probes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branch_chain::{
    closed_form_gamma, closed_form_speed, gamma_bounds, stationary, ChainError, ClosedForm, Status,
};
use crate::environment::{classify, default_boundary_tol, Classification, EnvError, EnvironmentSpec};
use crate::scalar::Real;
use crate::walk_sim::{run, run_light, Outcome, SimError, StopRule, DEFAULT_MAX_STEPS};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Fraction of capped trials above which an estimate is flagged unreliable.
pub const CAP_FRACTION_LIMIT: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("{0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    /// `P_start(T_upper < T_lower)`.
    HitProbability,
    /// Mean of `X_n / n` from `start` with no absorption.
    Speed,
}

/// Everything needed to re-execute an estimate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub kind: EstimateKind,
    pub env: String,
    pub start: i64,
    pub lower: Option<i64>,
    pub upper: Option<i64>,
    pub max_steps: u64,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Trials that entered the estimate.
    pub trials: u64,
    /// Trials stopped by the step cap; excluded from `trials`.
    pub capped_trials: u64,
    pub unreliable: bool,
    pub config: EstimateConfig,
}

/// Wilson 95% interval for `successes / n`.
pub fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let phat = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0).min(phat), (center + half).min(1.0).max(phat))
}

fn proportion(successes: u64, kept: u64, capped: u64, config: EstimateConfig) -> Estimate {
    let value = if kept == 0 { f64::NAN } else { successes as f64 / kept as f64 };
    let stderr = if kept == 0 { f64::NAN } else { (value * (1.0 - value) / kept as f64).sqrt() };
    let (ci_low, ci_high) = wilson_interval(successes, kept);
    let total = kept + capped;
    Estimate {
        value,
        stderr,
        ci_low,
        ci_high,
        trials: kept,
        capped_trials: capped,
        unreliable: kept == 0 || capped as f64 > CAP_FRACTION_LIMIT * total as f64,
        config,
    }
}

fn sample_mean(samples: &[f64], config: EstimateConfig) -> Estimate {
    let n = samples.len() as f64;
    let value = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 { samples.iter().map(|x| (x - value).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let stderr = (var / n).sqrt();
    Estimate {
        value,
        stderr,
        ci_low: value - Z95 * stderr,
        ci_high: value + Z95 * stderr,
        trials: samples.len() as u64,
        capped_trials: 0,
        unreliable: samples.len() < 2,
        config,
    }
}

/// `P_start(T_upper < T_lower)` over `trials` independent walks; capped
/// trials are counted separately.
pub fn estimate_hit_probability<T: Real>(
    env: &EnvironmentSpec<T>,
    start: i64,
    rule: &StopRule,
    trials: u64,
    seed: u64,
) -> Result<Estimate, EstimatorError> {
    if trials == 0 {
        return Err(EstimatorError::InvalidArgument("need at least one trial".into()));
    }
    if rule.upper.is_none() {
        return Err(EstimatorError::InvalidArgument("hit probability needs an upper level".into()));
    }
    rule.validate(start)?;
    let outcomes: Vec<Outcome> = (0..trials)
        .into_par_iter()
        .map(|t| run_light(env, start, rule, seed, t).map(|r| r.outcome))
        .collect::<Result<_, _>>()?;
    let hits = outcomes.iter().filter(|o| **o == Outcome::HitUpper).count() as u64;
    let capped = outcomes.iter().filter(|o| **o == Outcome::StepCapReached).count() as u64;
    let config = EstimateConfig {
        kind: EstimateKind::HitProbability,
        env: env.to_string(),
        start,
        lower: rule.lower,
        upper: rule.upper,
        max_steps: rule.max_steps,
        trials,
        seed,
    };
    Ok(proportion(hits, trials - capped, capped, config))
}

/// Escape-probability proxy `P_1(T_n < T_0)`. It decreases to
/// `P_1(T_0 = ∞)` as `n` grows, so it overestimates the limit.
pub fn estimate_gamma<T: Real>(
    env: &EnvironmentSpec<T>,
    n: i64,
    trials: u64,
    seed: u64,
) -> Result<Estimate, EstimatorError> {
    if n < 2 {
        return Err(EstimatorError::InvalidArgument("escape level must be at least 2".into()));
    }
    estimate_hit_probability(env, 1, &StopRule::between(0, n), trials, seed)
}

/// Mean of `X_n / n` from 0 with no absorbing levels.
pub fn estimate_speed<T: Real>(env: &EnvironmentSpec<T>, n: u64, trials: u64, seed: u64) -> Result<Estimate, EstimatorError> {
    if n == 0 || trials == 0 {
        return Err(EstimatorError::InvalidArgument("need n >= 1 and at least one trial".into()));
    }
    let rule = StopRule::new(None, None, n);
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| run_light(env, 0, &rule, seed, t).map(|r| r.final_position as f64 / n as f64))
        .collect::<Result<_, _>>()?;
    let config = EstimateConfig {
        kind: EstimateKind::Speed,
        env: env.to_string(),
        start: 0,
        lower: None,
        upper: None,
        max_steps: n,
        trials,
        seed,
    };
    Ok(sample_mean(&samples, config))
}

/// Re-executes the estimate described by `config`.
pub fn rerun(config: &EstimateConfig) -> Result<Estimate, EstimatorError> {
    let env: EnvironmentSpec<f64> = config.env.parse()?;
    match config.kind {
        EstimateKind::HitProbability => {
            let rule = StopRule::new(config.lower, config.upper, config.max_steps);
            estimate_hit_probability(&env, config.start, &rule, config.trials, config.seed)
        }
        EstimateKind::Speed => {
            if config.start != 0 || config.lower.is_some() || config.upper.is_some() {
                return Err(EstimatorError::InvalidArgument("speed estimates start at 0 without bounds".into()));
            }
            estimate_speed(&env, config.max_steps, config.trials, config.seed)
        }
    }
}

/// Empirical law of `U_site^n` (leftward jumps from `site` before `T_n`) for
/// walks from 0; index `k` holds the frequency of `k`. Returns the law and
/// the number of capped trials, which are excluded.
pub fn empirical_u_law<T: Real>(
    env: &EnvironmentSpec<T>,
    n: i64,
    site: i64,
    trials: u64,
    seed: u64,
) -> Result<(Vec<f64>, u64), EstimatorError> {
    if n < 1 || trials == 0 {
        return Err(EstimatorError::InvalidArgument("need n >= 1 and at least one trial".into()));
    }
    let rule = StopRule::new(None, Some(n), DEFAULT_MAX_STEPS);
    let counts: Vec<Option<u64>> = (0..trials)
        .into_par_iter()
        .map(|t| run(env, 0, &rule, seed, t).map(|r| (r.outcome == Outcome::HitUpper).then(|| r.u(site))))
        .collect::<Result<_, _>>()?;
    let kept: Vec<u64> = counts.iter().flatten().copied().collect();
    let len = kept.iter().max().map_or(1, |m| *m as usize + 1);
    let mut law = vec![0.0; len];
    for &c in &kept {
        law[c as usize] += 1.0;
    }
    let total = kept.len() as f64;
    law.iter_mut().for_each(|v| *v /= total);
    Ok((law, trials - kept.len() as u64))
}

/// `½ Σ |a_k - b_k|`, padding the shorter vector with zeros.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().max(b.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..len).map(|i| (at(a, i) - at(b, i)).abs()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub gamma_level: i64,
    /// Zero skips the escape-probability simulation.
    pub gamma_trials: u64,
    pub speed_steps: u64,
    /// Zero skips the speed simulation.
    pub speed_trials: u64,
    pub seed: u64,
    pub tol: f64,
    pub max_states: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            gamma_level: 10_000,
            gamma_trials: 10_000,
            speed_steps: 100_000,
            speed_trials: 50,
            seed: 0,
            tol: 1e-7,
            max_states: 1 << 14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRow {
    pub p: f64,
    /// `None` when `p` is not a valid cookie strength.
    pub classification: Option<Classification<f64>>,
    pub gamma_mc: Option<Estimate>,
    pub gamma_exact: Option<ClosedForm<f64>>,
    pub speed_mc: Option<Estimate>,
    pub speed_exact: Option<ClosedForm<f64>>,
    pub mu0_numeric: Option<f64>,
    /// Failures of individual parts of the row; the scan carries on.
    pub errors: Vec<String>,
}

/// Flat CSV form of a [`PhaseRow`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCsvRow {
    pub p: f64,
    pub gamma_mc: Option<f64>,
    pub gamma_mc_stderr: Option<f64>,
    pub gamma_exact: Option<f64>,
    pub gamma_status: Option<Status>,
    pub speed_mc: Option<f64>,
    pub speed_mc_stderr: Option<f64>,
    pub speed_exact: Option<f64>,
    pub speed_status: Option<Status>,
    pub verdict: Option<&'static str>,
    pub mu0_numeric: Option<f64>,
    pub criterion_value: Option<f64>,
}

impl From<&PhaseRow> for PhaseCsvRow {
    fn from(r: &PhaseRow) -> Self {
        Self {
            p: r.p,
            gamma_mc: r.gamma_mc.as_ref().map(|e| e.value),
            gamma_mc_stderr: r.gamma_mc.as_ref().map(|e| e.stderr),
            gamma_exact: r.gamma_exact.as_ref().map(|c| c.value),
            gamma_status: r.gamma_exact.as_ref().map(|c| c.status),
            speed_mc: r.speed_mc.as_ref().map(|e| e.value),
            speed_mc_stderr: r.speed_mc.as_ref().map(|e| e.stderr),
            speed_exact: r.speed_exact.as_ref().map(|c| c.value),
            speed_status: r.speed_exact.as_ref().map(|c| c.status),
            verdict: r.classification.as_ref().map(|c| c.verdict.as_str()),
            mu0_numeric: r.mu0_numeric,
            criterion_value: r.classification.as_ref().map(|c| c.criterion_value),
        }
    }
}

fn phase_row(p: f64, cfg: &ScanConfig) -> PhaseRow {
    let mut errors = Vec::new();
    let env = match EnvironmentSpec::homogeneous(p) {
        Ok(env) => env,
        Err(e) => {
            return PhaseRow {
                p,
                classification: None,
                gamma_mc: None,
                gamma_exact: None,
                speed_mc: None,
                speed_exact: None,
                mu0_numeric: None,
                errors: vec![e.to_string()],
            };
        }
    };
    let classification = classify(&env, default_boundary_tol());
    let mut note = |r: Result<Estimate, EstimatorError>| r.map_err(|e| errors.push(e.to_string())).ok();
    let gamma_mc = (cfg.gamma_trials > 0).then(|| note(estimate_gamma(&env, cfg.gamma_level, cfg.gamma_trials, cfg.seed))).flatten();
    let speed_mc = (cfg.speed_trials > 0).then(|| note(estimate_speed(&env, cfg.speed_steps, cfg.speed_trials, cfg.seed))).flatten();
    let (gamma_exact, mu0_numeric) = if classification.is_recurrent() {
        (Some(ClosedForm { value: 0.0, status: Status::Zero, open: false }), None)
    } else {
        let gamma = closed_form_gamma(&p).map_err(|e| errors.push(e.to_string())).ok();
        let mu0 = stationary(p, cfg.tol, cfg.max_states).map(|est| est.mu0).map_err(|e| errors.push(e.to_string())).ok();
        (gamma, mu0)
    };
    let speed_exact = closed_form_speed(&p).map_err(|e| errors.push(e.to_string())).ok();
    PhaseRow { p, classification: Some(classification), gamma_mc, gamma_exact, speed_mc, speed_exact, mu0_numeric, errors }
}

/// One row per grid value of `p` for the homogeneous environment. Rows are
/// computed in parallel and returned in grid order.
pub fn phase_scan(grid: &[f64], cfg: &ScanConfig) -> Vec<PhaseRow> {
    grid.par_iter().map(|&p| phase_row(p, cfg)).collect()
}

/// Grid `p_min, p_min + step, …` up to `p_max` inclusive (with a 1e-9 slack
/// on the last point).
pub fn linear_grid(p_min: f64, p_max: f64, step: f64) -> Result<Vec<f64>, EstimatorError> {
    if !(step > 0.0) || !(p_min <= p_max) {
        return Err(EstimatorError::InvalidArgument("need step > 0 and p_min <= p_max".into()));
    }
    let count = ((p_max - p_min) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| p_min + i as f64 * step).collect())
}

/// Side-by-side numbers for the conjecture that the escape probability
/// equals `(3p-2)/(2p-1)` on `(2/3, 3/4)`. Report only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub label: &'static str,
    pub p: f64,
    pub gamma_mc: Option<Estimate>,
    pub mu0_numeric: Option<f64>,
    pub truncation: Option<usize>,
    pub tail_exponent: Option<f64>,
    pub closed_form: ClosedForm<f64>,
    pub bound_low: f64,
    pub bound_high: f64,
    pub errors: Vec<String>,
}

pub fn conjecture_probe(p: f64, cfg: &ScanConfig) -> Result<ProbeReport, EstimatorError> {
    if !(p > 2.0 / 3.0 && p < 0.75) {
        return Err(EstimatorError::InvalidArgument(format!("probe needs p strictly inside (2/3, 3/4), got {p}")));
    }
    let env = EnvironmentSpec::homogeneous(p)?;
    let mut errors = Vec::new();
    let gamma_mc = if cfg.gamma_trials > 0 {
        estimate_gamma(&env, cfg.gamma_level, cfg.gamma_trials, cfg.seed).map_err(|e| errors.push(e.to_string())).ok()
    } else {
        None
    };
    let (mu0_numeric, truncation, tail_exponent) = match stationary(p, cfg.tol, cfg.max_states) {
        Ok(est) => (Some(est.mu0), Some(est.truncation), est.tail_exponent),
        Err(e) => {
            errors.push(e.to_string());
            (None, None, None)
        }
    };
    let (bound_low, bound_high) = gamma_bounds(&p)?;
    Ok(ProbeReport {
        label: "PROBE",
        p,
        gamma_mc,
        mu0_numeric,
        truncation,
        tail_exponent,
        closed_form: closed_form_gamma(&p)?,
        bound_low,
        bound_high,
        errors,
    })
}
