//! Space-only coupling of two walks in ordered environments.
//!
//! Both walks read one shared sequence of uniforms. While they sit on the
//! same site they move on the same draw. When the low walk steps left and the
//! high walk steps right they are two apart; the high walk is then frozen and
//! the low walk runs alone on the following draws until it climbs back to the
//! frozen level, after which joint moves resume on the first unused draw.
//!
//! Each walk has its own cookie state and its own stop rule `(x, z, N)`
//! measured on its own step clock. Once the low walk is resolved, the high
//! walk continues alone on fresh draws. The high walk can only resolve first
//! by reaching `z` on a split, in which case the low walk finishes its
//! frozen phase alone.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::environment::{CookieState, EnvError, EnvironmentSpec};
use crate::rng::coupling_stream;
use crate::scalar::{Real, Scalar};
use crate::walk_sim::{stop_status, tracked_step, Outcome, SimRecord, StopRule, Tracker};

/// Abort threshold on shared draws for a single coupled run.
pub const DRAW_CAP: u64 = 1_000_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("environments are not ordered: {0}")]
    Order(#[from] EnvError),
    #[error("invalid coupling parameters: {0}")]
    InvalidArgument(String),
    #[error("coupling invariant violated: {0}")]
    InvariantViolation(String),
    #[error("draw cap of {cap} reached (low at {low_position}, high at {high_position})")]
    DrawCap { cap: u64, low_position: i64, high_position: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    /// Both walks move on each draw.
    Coupled,
    /// Only the low walk moves; the high walk waits two levels up.
    Frozen,
    /// The low walk is resolved; the high walk runs alone.
    HighSolo,
}

/// A maximal run of draws `[first_draw, end_draw)` of one kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Phase {
    pub kind: PhaseKind,
    pub first_draw: u64,
    pub end_draw: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CouplingParams {
    pub start: i64,
    pub lower: i64,
    pub upper: i64,
    pub horizon: u64,
}

impl CouplingParams {
    pub fn new(start: i64, lower: i64, upper: i64, horizon: u64) -> Self {
        Self { start, lower, upper, horizon }
    }

    pub fn validate(&self) -> Result<(), CouplingError> {
        if !(self.lower < self.start && self.start < self.upper) {
            return Err(CouplingError::InvalidArgument(format!(
                "need x < y < z, got x={} y={} z={}",
                self.lower, self.start, self.upper
            )));
        }
        if self.horizon == 0 {
            return Err(CouplingError::InvalidArgument("horizon must be positive".into()));
        }
        Ok(())
    }

    fn rule(&self) -> StopRule {
        StopRule::new(Some(self.lower), Some(self.upper), self.horizon)
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct CoupledRun<T> {
    pub env_low: EnvironmentSpec<T>,
    pub env_high: EnvironmentSpec<T>,
    pub params: CouplingParams,
    pub shared_draws_used: u64,
    pub rec_low: SimRecord,
    pub rec_high: SimRecord,
    pub phases: Vec<Phase>,
    pub splits: u64,
    pub recouplings: u64,
}

impl<T> CoupledRun<T> {
    pub fn low_hit_upper(&self) -> bool {
        self.rec_low.outcome == Outcome::HitUpper
    }

    pub fn high_hit_upper(&self) -> bool {
        self.rec_high.outcome == Outcome::HitUpper
    }
}

/// `{low reaches z before x and within N}` ⊆ `{high reaches z before x and
/// within N}` on this run. Each record stops at the first of the three
/// events, so `HitUpper` is exactly the event in question.
pub fn verify_inclusion<T>(run: &CoupledRun<T>) -> bool {
    !run.low_hit_upper() || run.high_hit_upper()
}

struct Walker<T> {
    state: CookieState<T>,
    tracker: Tracker,
    outcome: Option<Outcome>,
}

impl<T: Real> Walker<T> {
    fn new(start: i64, env_seed: u64) -> Self {
        Self { state: CookieState::new(env_seed), tracker: Tracker::new(start, false), outcome: None }
    }

    fn step(&mut self, env: &EnvironmentSpec<T>, rule: &StopRule, u: f64) {
        tracked_step(env, &mut self.state, &mut self.tracker, u);
        self.outcome = stop_status(rule, self.tracker.pos(), self.tracker.time());
    }

    fn pos(&self) -> i64 {
        self.tracker.pos()
    }

    fn finish(self) -> (SimRecord, CookieState<T>) {
        let outcome = self.outcome.expect("walker resolved");
        (self.tracker.finish(outcome), self.state)
    }
}

fn push_phase(phases: &mut Vec<Phase>, kind: PhaseKind, draw: u64) {
    match phases.last_mut() {
        Some(last) if last.kind == kind && last.end_draw == draw => last.end_draw = draw + 1,
        _ => phases.push(Phase { kind, first_draw: draw, end_draw: draw + 1 }),
    }
}

fn violation(msg: String) -> CouplingError {
    CouplingError::InvariantViolation(msg)
}

/// Runs the coupling for one run index. Draws come from
/// `coupling_stream(seed, run)`; random environments are realized from
/// `seed`, identically for both walks, so ordered laws give ordered sites.
pub fn coupled_run<T: Real>(
    env_low: &EnvironmentSpec<T>,
    env_high: &EnvironmentSpec<T>,
    params: CouplingParams,
    seed: u64,
    run: u64,
) -> Result<CoupledRun<T>, CouplingError> {
    params.validate()?;
    env_low.check_dominated_by(env_high)?;
    let rule = params.rule();
    let mut rng = coupling_stream(seed, run);
    let mut low = Walker::new(params.start, seed);
    let mut high = Walker::new(params.start, seed);
    let mut phases = Vec::new();
    let (mut draws, mut splits, mut recouplings) = (0u64, 0u64, 0u64);
    let mut frozen = false;

    while low.outcome.is_none() || high.outcome.is_none() {
        if draws >= DRAW_CAP {
            return Err(CouplingError::DrawCap { cap: DRAW_CAP, low_position: low.pos(), high_position: high.pos() });
        }
        let u: f64 = rng.gen();
        if low.outcome.is_some() {
            push_phase(&mut phases, PhaseKind::HighSolo, draws);
            high.step(env_high, &rule, u);
        } else if frozen {
            push_phase(&mut phases, PhaseKind::Frozen, draws);
            low.step(env_low, &rule, u);
            if low.pos() > high.pos() {
                return Err(violation(format!("low walk passed the frozen level {} at draw {draws}", high.pos())));
            }
            if low.pos() == high.pos() {
                frozen = false;
                recouplings += 1;
            }
        } else {
            push_phase(&mut phases, PhaseKind::Coupled, draws);
            if low.pos() != high.pos() {
                return Err(violation(format!("joint step from unequal positions at draw {draws}")));
            }
            low.step(env_low, &rule, u);
            high.step(env_high, &rule, u);
            match high.pos() - low.pos() {
                0 => {}
                2 => {
                    frozen = true;
                    splits += 1;
                }
                gap => return Err(violation(format!("split with gap {gap} at draw {draws}"))),
            }
        }
        draws += 1;
        if high.outcome.is_some() && low.outcome.is_none() && !(frozen && high.pos() == params.upper) {
            return Err(violation(format!("high walk resolved before the low walk at draw {draws}")));
        }
    }

    let (rec_low, state_low) = low.finish();
    let (rec_high, state_high) = high.finish();
    check_realized_order(&state_low, &state_high)?;
    Ok(CoupledRun {
        env_low: env_low.clone(),
        env_high: env_high.clone(),
        params,
        shared_draws_used: draws,
        rec_low,
        rec_high,
        phases,
        splits,
        recouplings,
    })
}

fn check_realized_order<T: Real>(low: &CookieState<T>, high: &CookieState<T>) -> Result<(), CouplingError> {
    let high_sites = high.realized_sites();
    for (site, w_low) in low.realized_sites() {
        if let Ok(i) = high_sites.binary_search_by_key(&site, |(s, _)| *s) {
            let w_high = high_sites[i].1;
            if w_low > w_high {
                return Err(CouplingError::Order(EnvError::OrderViolation {
                    site: Some(site),
                    low: w_low.to_f64_lossy(),
                    high: w_high.to_f64_lossy(),
                }));
            }
        }
    }
    Ok(())
}

/// Aggregate over coupled runs `0..runs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingSummary {
    pub runs: u64,
    pub inclusion_failures: u64,
    pub low_hits: u64,
    pub high_hits: u64,
    pub low_capped: u64,
    pub high_capped: u64,
    pub splits: u64,
    pub recouplings: u64,
    pub shared_draws: u64,
}

impl CouplingSummary {
    pub fn low_fraction(&self) -> f64 {
        self.low_hits as f64 / self.runs as f64
    }

    pub fn high_fraction(&self) -> f64 {
        self.high_hits as f64 / self.runs as f64
    }
}

/// Runs `0..runs` in parallel; any run error aborts the batch.
pub fn coupled_batch<T: Real>(
    env_low: &EnvironmentSpec<T>,
    env_high: &EnvironmentSpec<T>,
    params: CouplingParams,
    seed: u64,
    runs: u64,
) -> Result<CouplingSummary, CouplingError> {
    params.validate()?;
    env_low.check_dominated_by(env_high)?;
    let zero = CouplingSummary {
        runs: 0,
        inclusion_failures: 0,
        low_hits: 0,
        high_hits: 0,
        low_capped: 0,
        high_capped: 0,
        splits: 0,
        recouplings: 0,
        shared_draws: 0,
    };
    let rows: Vec<CouplingSummary> = (0..runs)
        .into_par_iter()
        .map(|r| {
            coupled_run(env_low, env_high, params, seed, r).map(|run| CouplingSummary {
                runs: 1,
                inclusion_failures: u64::from(!verify_inclusion(&run)),
                low_hits: u64::from(run.low_hit_upper()),
                high_hits: u64::from(run.high_hit_upper()),
                low_capped: u64::from(run.rec_low.outcome == Outcome::StepCapReached),
                high_capped: u64::from(run.rec_high.outcome == Outcome::StepCapReached),
                splits: run.splits,
                recouplings: run.recouplings,
                shared_draws: run.shared_draws_used,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(rows.iter().fold(zero, |a, b| CouplingSummary {
        runs: a.runs + b.runs,
        inclusion_failures: a.inclusion_failures + b.inclusion_failures,
        low_hits: a.low_hits + b.low_hits,
        high_hits: a.high_hits + b.high_hits,
        low_capped: a.low_capped + b.low_capped,
        high_capped: a.high_capped + b.high_capped,
        splits: a.splits + b.splits,
        recouplings: a.recouplings + b.recouplings,
        shared_draws: a.shared_draws + b.shared_draws,
    }))
}
