//! Trajectory simulation with the full set of pathwise counters.
//!
//! For a walk stopped at time `T`:
//! * `u_counts[m]`: jumps m → m-1 before `T`,
//! * `d_counts[x]`: times `m < T` with `X_m = x` while the cookie at `x` is
//!   still uneaten (the visit that eats it is counted),
//! * `sigma[x]`: time of the first jump x → x-1,
//! * `k_count`: time indices `0 ≤ k ≤ T` with `X_k < 0`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{omega_at, CookieState, EnvironmentSpec, SiteVec};
use crate::rng::trial_stream;
use crate::scalar::Real;

/// Default per-trial step cap.
pub const DEFAULT_MAX_STEPS: u64 = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid stop rule: {0}")]
    InvalidStopRule(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRule {
    pub lower: Option<i64>,
    pub upper: Option<i64>,
    pub max_steps: u64,
}

impl StopRule {
    pub fn new(lower: Option<i64>, upper: Option<i64>, max_steps: u64) -> Self {
        Self { lower, upper, max_steps }
    }

    /// Absorb at `lower` and `upper` with the default cap.
    pub fn between(lower: i64, upper: i64) -> Self {
        Self::new(Some(lower), Some(upper), DEFAULT_MAX_STEPS)
    }

    pub fn validate(&self, start: i64) -> Result<(), SimError> {
        if self.max_steps == 0 {
            return Err(SimError::InvalidStopRule("max_steps must be positive".into()));
        }
        if let Some(l) = self.lower {
            if l >= start {
                return Err(SimError::InvalidStopRule(format!("lower {l} must be below start {start}")));
            }
        }
        if let Some(u) = self.upper {
            if u <= start {
                return Err(SimError::InvalidStopRule(format!("upper {u} must be above start {start}")));
            }
        }
        Ok(())
    }

    #[inline]
    fn absorbed(&self, pos: i64) -> Option<Outcome> {
        if self.upper == Some(pos) {
            Some(Outcome::HitUpper)
        } else if self.lower == Some(pos) {
            Some(Outcome::HitLower)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    HitLower,
    HitUpper,
    StepCapReached,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::HitLower => "hit_lower",
            Outcome::HitUpper => "hit_upper",
            Outcome::StepCapReached => "step_cap_reached",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimRecord {
    pub start: i64,
    pub outcome: Outcome,
    pub steps_taken: u64,
    pub u_counts: BTreeMap<i64, u64>,
    pub k_count: u64,
    pub d_counts: BTreeMap<i64, u64>,
    pub sigma: BTreeMap<i64, u64>,
    pub final_position: i64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub path: Option<Vec<i64>>,
}

impl SimRecord {
    pub fn u(&self, site: i64) -> u64 {
        self.u_counts.get(&site).copied().unwrap_or(0)
    }

    pub fn d(&self, site: i64) -> u64 {
        self.d_counts.get(&site).copied().unwrap_or(0)
    }
}

/// One nearest-neighbour move driven by the uniform `u`: right iff `u < ω`,
/// otherwise left, eating the cookie at `pos`.
#[inline]
pub fn step_with_uniform<T: Real>(env: &EnvironmentSpec<T>, state: &mut CookieState<T>, pos: i64, u: f64) -> i64 {
    let w = omega_at(env, state, pos).to_f64_lossy();
    if u < w {
        pos + 1
    } else {
        state.consume(pos);
        pos - 1
    }
}

/// [`step_with_uniform`] with a fresh draw from `rng`.
#[inline]
pub fn step<T: Real, R: Rng>(env: &EnvironmentSpec<T>, state: &mut CookieState<T>, pos: i64, rng: &mut R) -> i64 {
    step_with_uniform(env, state, pos, rng.gen::<f64>())
}

/// Counter bookkeeping for one walk; shared with the coupling.
#[derive(Debug, Clone)]
pub(crate) struct Tracker {
    start: i64,
    pos: i64,
    time: u64,
    k: u64,
    u: SiteVec<u64>,
    d: SiteVec<u64>,
    sigma: SiteVec<u64>,
    path: Option<Vec<i64>>,
}

impl Tracker {
    pub(crate) fn new(start: i64, keep_path: bool) -> Self {
        Self {
            start,
            pos: start,
            time: 0,
            k: 0,
            u: SiteVec::new(),
            d: SiteVec::new(),
            sigma: SiteVec::new(),
            path: keep_path.then(|| vec![start]),
        }
    }

    #[inline]
    pub(crate) fn pos(&self) -> i64 {
        self.pos
    }

    #[inline]
    pub(crate) fn time(&self) -> u64 {
        self.time
    }

    /// Records the move from the current position to `to`; `uneaten` is the
    /// cookie state at the current position before the move.
    #[inline]
    pub(crate) fn record(&mut self, to: i64, uneaten: bool) {
        let from = self.pos;
        if from < 0 {
            self.k += 1;
        }
        if uneaten {
            *self.d.get_mut(from) += 1;
        }
        if to == from - 1 {
            *self.u.get_mut(from) += 1;
            let s = self.sigma.get_mut(from);
            if *s == 0 {
                *s = self.time + 1;
            }
        }
        self.time += 1;
        self.pos = to;
        if let Some(path) = self.path.as_mut() {
            path.push(to);
        }
    }

    pub(crate) fn finish(self, outcome: Outcome) -> SimRecord {
        let collect = |v: &SiteVec<u64>| -> BTreeMap<i64, u64> {
            v.iter().filter(|(_, c)| **c > 0).map(|(s, c)| (s, *c)).collect()
        };
        SimRecord {
            start: self.start,
            outcome,
            steps_taken: self.time,
            u_counts: collect(&self.u),
            k_count: self.k + u64::from(self.pos < 0),
            d_counts: collect(&self.d),
            sigma: collect(&self.sigma),
            final_position: self.pos,
            path: self.path,
        }
    }
}

/// Advances `tracker` one step using `u` and reports absorption.
#[inline]
pub(crate) fn tracked_step<T: Real>(
    env: &EnvironmentSpec<T>,
    state: &mut CookieState<T>,
    tracker: &mut Tracker,
    u: f64,
) {
    let pos = tracker.pos();
    let uneaten = !state.is_consumed(pos);
    let to = step_with_uniform(env, state, pos, u);
    tracker.record(to, uneaten);
}

/// Outcome of `rule` for a walk at `pos` having taken `steps` steps.
#[inline]
pub(crate) fn stop_status(rule: &StopRule, pos: i64, steps: u64) -> Option<Outcome> {
    rule.absorbed(pos).or_else(|| (steps >= rule.max_steps).then_some(Outcome::StepCapReached))
}

fn run_inner<T: Real>(
    env: &EnvironmentSpec<T>,
    start: i64,
    rule: &StopRule,
    seed: u64,
    trial: u64,
    keep_path: bool,
) -> Result<SimRecord, SimError> {
    rule.validate(start)?;
    let mut rng = trial_stream(seed, trial);
    let mut state = CookieState::new(seed);
    let mut tracker = Tracker::new(start, keep_path);
    loop {
        if let Some(outcome) = stop_status(rule, tracker.pos(), tracker.time()) {
            return Ok(tracker.finish(outcome));
        }
        tracked_step(env, &mut state, &mut tracker, rng.gen::<f64>());
    }
}

/// Simulates one trial. The trial stream is derived from `(seed, trial)`;
/// i.i.d. environments are realized from `seed` alone, so all trials of a
/// batch see the same environment.
pub fn run<T: Real>(
    env: &EnvironmentSpec<T>,
    start: i64,
    rule: &StopRule,
    seed: u64,
    trial: u64,
) -> Result<SimRecord, SimError> {
    run_inner(env, start, rule, seed, trial, false)
}

/// [`run`] that also keeps the full path (debugging aid).
pub fn run_traced<T: Real>(
    env: &EnvironmentSpec<T>,
    start: i64,
    rule: &StopRule,
    seed: u64,
    trial: u64,
) -> Result<SimRecord, SimError> {
    run_inner(env, start, rule, seed, trial, true)
}

/// Runs trials `0..trials` in parallel and maps each record through `f`.
/// Results are in trial order and independent of the thread count.
pub fn run_batch<T, R, F>(
    env: &EnvironmentSpec<T>,
    start: i64,
    rule: &StopRule,
    seed: u64,
    trials: u64,
    f: F,
) -> Result<Vec<R>, SimError>
where
    T: Real,
    R: Send,
    F: Fn(u64, SimRecord) -> R + Sync,
{
    rule.validate(start)?;
    (0..trials)
        .into_par_iter()
        .map(|t| run(env, start, rule, seed, t).map(|rec| f(t, rec)))
        .collect()
}

/// Counter-free trajectory result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LightRecord {
    pub outcome: Outcome,
    pub steps_taken: u64,
    pub final_position: i64,
}

/// Same trajectory as [`run`] for the same `(seed, trial)`, without counters.
pub fn run_light<T: Real>(
    env: &EnvironmentSpec<T>,
    start: i64,
    rule: &StopRule,
    seed: u64,
    trial: u64,
) -> Result<LightRecord, SimError> {
    rule.validate(start)?;
    let mut rng: ChaCha8Rng = trial_stream(seed, trial);
    let mut state = CookieState::new(seed);
    let mut pos = start;
    let mut steps = 0u64;
    loop {
        if let Some(outcome) = stop_status(rule, pos, steps) {
            return Ok(LightRecord { outcome, steps_taken: steps, final_position: pos });
        }
        pos = step(env, &mut state, pos, &mut rng);
        steps += 1;
    }
}

/// Checks `T_n = K_n - U_0 + n + 2 Σ_{m=0}^{n} U_m` in integer arithmetic.
/// The record must come from a walk started at 0 that stopped on reaching `n`.
pub fn verify_time_identity(rec: &SimRecord, n: i64) -> Result<bool, SimError> {
    if rec.start != 0 || rec.outcome != Outcome::HitUpper || rec.final_position != n || n < 1 {
        return Err(SimError::Precondition(format!(
            "need a walk from 0 stopped on hitting {n}; got start {} outcome {:?} at {}",
            rec.start, rec.outcome, rec.final_position
        )));
    }
    let sum_u: i128 = (0..=n).map(|m| rec.u(m) as i128).sum();
    let rhs = rec.k_count as i128 - rec.u(0) as i128 + n as i128 + 2 * sum_u;
    Ok(rec.steps_taken as i128 == rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MartingaleCheck {
    /// `n · P̂_1(T_n < T_0)`.
    pub lhs: f64,
    /// `1 + Σ_x (2ω(x) - 1) Ê[D^x]` at the stopping time.
    pub rhs: f64,
    /// Standard error of `lhs - rhs` over the paired trials.
    pub stderr: f64,
    pub trials: u64,
    pub capped_trials: u64,
}

/// Monte Carlo check of the optional-stopping identity
/// `n P_1(T_n < T_0) = 1 + E_1 D_{T_0 ∧ T_n}` for a deterministic environment.
pub fn martingale_check<T: Real>(
    env: &EnvironmentSpec<T>,
    n: i64,
    trials: u64,
    seed: u64,
) -> Result<MartingaleCheck, SimError> {
    if env.is_random() {
        return Err(SimError::Precondition("martingale check needs a deterministic environment".into()));
    }
    if n < 2 || trials < 2 {
        return Err(SimError::Precondition("need n >= 2 and at least two trials".into()));
    }
    let rule = StopRule::between(0, n);
    let pairs = run_batch(env, 1, &rule, seed, trials, |_, rec| {
        if rec.outcome == Outcome::StepCapReached {
            return None;
        }
        let hit = if rec.outcome == Outcome::HitUpper { n as f64 } else { 0.0 };
        let drift: f64 = rec
            .d_counts
            .iter()
            .map(|(&x, &c)| {
                let w = env.deterministic_omega(x).expect("deterministic").to_f64_lossy();
                (2.0 * w - 1.0) * c as f64
            })
            .sum();
        Some((hit, drift))
    })?;
    let kept: Vec<(f64, f64)> = pairs.iter().flatten().copied().collect();
    let m = kept.len() as f64;
    let lhs = kept.iter().map(|p| p.0).sum::<f64>() / m;
    let drift = kept.iter().map(|p| p.1).sum::<f64>() / m;
    let mean_diff = lhs - drift;
    let var = kept.iter().map(|p| (p.0 - p.1 - mean_diff).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(MartingaleCheck {
        lhs,
        rhs: 1.0 + drift,
        stderr: (var / m).sqrt(),
        trials,
        capped_trials: trials - kept.len() as u64,
    })
}

/// `true` when `sigma[x]` is defined exactly where `u_counts[x] ≥ 1`, and
/// every eaten site was visited uneaten at least once, and a walk stopped on
/// reaching its upper level never jumped left from there.
pub fn counters_consistent(rec: &SimRecord) -> bool {
    let u_sites: Vec<i64> = rec.u_counts.keys().copied().collect();
    let s_sites: Vec<i64> = rec.sigma.keys().copied().collect();
    u_sites == s_sites
        && rec.sigma.keys().all(|x| rec.d(*x) >= 1)
        && (rec.outcome != Outcome::HitUpper || rec.u(rec.final_position) == 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IdentityReport {
    /// `HitUpper` paths on which the time identity was checked.
    pub paths: u64,
    pub failures: u64,
    /// Trials run to collect them, including capped ones.
    pub trials_run: u64,
    pub capped: u64,
}

/// Checks the time identity on the first `paths` walks from 0 (in trial
/// order) that reach `n` within `max_steps`.
pub fn time_identity_batch<T: Real>(
    env: &EnvironmentSpec<T>,
    n: i64,
    paths: u64,
    max_steps: u64,
    seed: u64,
) -> Result<IdentityReport, SimError> {
    let rule = StopRule::new(None, Some(n), max_steps);
    rule.validate(0)?;
    let mut report = IdentityReport { paths: 0, failures: 0, trials_run: 0, capped: 0 };
    while report.paths < paths {
        let need = paths - report.paths;
        let first = report.trials_run;
        let verdicts: Vec<Option<bool>> = (first..first + need)
            .into_par_iter()
            .map(|t| {
                let rec = run(env, 0, &rule, seed, t)?;
                match rec.outcome {
                    Outcome::HitUpper => Ok(Some(verify_time_identity(&rec, n)? && counters_consistent(&rec))),
                    _ => Ok(None),
                }
            })
            .collect::<Result<_, SimError>>()?;
        report.trials_run += need;
        for v in verdicts {
            match v {
                Some(ok) => {
                    report.paths += 1;
                    report.failures += u64::from(!ok);
                }
                None => report.capped += 1,
            }
        }
    }
    Ok(report)
}
