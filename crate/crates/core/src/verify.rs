//! Desk-scale invariant suites behind `cookie-walk verify`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::branch_chain::{
    build_kernel, closed_form_gamma, gf_identity_residual, kernel_entry, negbin_pmf, stationary, KernelOptions,
};
use crate::coupling::{coupled_batch, coupled_run, CouplingParams};
use crate::environment::EnvironmentSpec;
use crate::estimators::estimate_hit_probability;
use crate::walk_sim::{martingale_check, run, time_identity_batch, StopRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Identities,
    Coupling,
    Kernel,
    All,
}

impl Suite {
    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Coupling => "coupling",
            Suite::Kernel => "kernel",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identities" => Ok(Suite::Identities),
            "coupling" => Ok(Suite::Coupling),
            "kernel" => Ok(Suite::Kernel),
            "all" => Ok(Suite::All),
            other => Err(format!("unknown suite `{other}` (expected identities, coupling, kernel or all)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

struct Recorder {
    suite: &'static str,
    checks: Vec<Check>,
}

impl Recorder {
    fn new(suite: &'static str) -> Self {
        Self { suite, checks: Vec::new() }
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { suite: self.suite, name: name.into(), passed, detail: detail.into() });
    }

    fn fail(&mut self, name: impl Into<String>, err: impl fmt::Display) {
        self.push(name, false, format!("error: {err}"));
    }
}

fn env(s: &str) -> EnvironmentSpec<f64> {
    s.parse().expect("built-in environment")
}

/// Runs `suite` and returns one row per check.
pub fn run_suite(suite: Suite, seed: u64) -> Vec<Check> {
    match suite {
        Suite::Identities => identities(seed),
        Suite::Coupling => coupling(seed),
        Suite::Kernel => kernel(),
        Suite::All => {
            let mut all = identities(seed);
            all.extend(coupling(seed));
            all.extend(kernel());
            all
        }
    }
}

fn identities(seed: u64) -> Vec<Check> {
    let mut r = Recorder::new("identities");
    for p in ["0.6", "0.8", "0.95"] {
        let e = env(&format!("homogeneous:{p}"));
        for n in [10i64, 100] {
            let name = format!("time identity p={p} n={n}");
            match time_identity_batch(&e, n, 2_000, 1_000_000, seed) {
                Ok(rep) => r.push(
                    name,
                    rep.failures == 0 && rep.paths == 2_000,
                    format!("{} paths, {} failures, {} capped", rep.paths, rep.failures, rep.capped),
                ),
                Err(err) => r.fail(name, err),
            }
        }
    }
    for (spec, n) in [("homogeneous:0.8", 50i64), ("periodic:0.6,0.9", 40)] {
        let name = format!("optional stopping {spec} n={n}");
        match martingale_check(&env(spec), n, 20_000, seed) {
            Ok(m) => r.push(
                name,
                (m.lhs - m.rhs).abs() <= 4.0 * m.stderr && m.capped_trials == 0,
                format!("lhs {:.5} rhs {:.5} stderr {:.5}", m.lhs, m.rhs, m.stderr),
            ),
            Err(err) => r.fail(name, err),
        }
    }
    let name = "gambler's ruin P_0(T_15 < T_-5) = 1/4";
    match estimate_hit_probability(&env("symmetric"), 0, &StopRule::between(-5, 15), 20_000, seed) {
        Ok(est) => r.push(
            name,
            (est.value - 0.25).abs() <= 4.0 * est.stderr,
            format!("{:.5} ± {:.5}", est.value, est.stderr),
        ),
        Err(err) => r.fail(name, err),
    }
    let name = "reproducible records";
    let e = env("iid:0.5:0.3,0.85:0.7");
    let rule = StopRule::between(-20, 20);
    match (run(&e, 0, &rule, seed, 7), run(&e, 0, &rule, seed, 7)) {
        (Ok(a), Ok(b)) => r.push(name, a == b, format!("{} steps", a.steps_taken)),
        (Err(err), _) | (_, Err(err)) => r.fail(name, err),
    }
    r.checks
}

fn coupling(seed: u64) -> Vec<Check> {
    let mut r = Recorder::new("coupling");
    let params = CouplingParams::new(0, -5, 5, 10_000);
    let runs = 10_000u64;
    for (lo, hi) in [("symmetric", "homogeneous:0.8"), ("homogeneous:0.7", "homogeneous:0.9")] {
        let (el, eh) = (env(lo), env(hi));
        let name = format!("inclusion {lo} <= {hi}");
        let summary = match coupled_batch(&el, &eh, params, seed, runs) {
            Ok(s) => s,
            Err(err) => {
                r.fail(name, err);
                continue;
            }
        };
        r.push(
            name,
            summary.inclusion_failures == 0,
            format!("{} runs, {} failures, {} splits", summary.runs, summary.inclusion_failures, summary.splits),
        );
        let rule = StopRule::new(Some(params.lower), Some(params.upper), params.horizon);
        for (label, spec, frac) in [("low", &el, summary.low_fraction()), ("high", &eh, summary.high_fraction())] {
            let name = format!("marginal law of {label} walk ({spec})");
            match estimate_hit_probability(spec, params.start, &rule, runs, seed ^ 0x5eed) {
                Ok(est) => {
                    let se = (frac * (1.0 - frac) / runs as f64 + est.stderr * est.stderr).sqrt();
                    r.push(
                        name,
                        (frac - est.value).abs() <= 4.0 * se,
                        format!("coupled {frac:.4} uncoupled {:.4} se {se:.4}", est.value),
                    );
                }
                Err(err) => r.fail(name, err),
            }
        }
    }
    let name = "identical environments stay together";
    let e = env("periodic:0.55,0.9");
    let same = (0..500u64).all(|i| {
        coupled_run(&e, &e, params, seed, i).map(|run| run.splits == 0 && run.rec_low == run.rec_high).unwrap_or(false)
    });
    r.push(name, same, "500 runs");
    let name = "monotone in the environment";
    let chain = ["symmetric", "homogeneous:0.7", "homogeneous:0.9"];
    let rule = StopRule::new(Some(params.lower), Some(params.upper), params.horizon);
    let est: Result<Vec<_>, _> =
        chain.iter().map(|s| estimate_hit_probability(&env(s), params.start, &rule, runs, seed)).collect();
    match est {
        Ok(est) => {
            let ok = est.windows(2).all(|w| w[0].value <= w[1].value + 2.0 * w[1].stderr.max(w[0].stderr));
            let values: Vec<String> = est.iter().map(|e| format!("{:.4}", e.value)).collect();
            r.push(name, ok, values.join(" <= "));
        }
        Err(err) => r.fail(name, err),
    }
    r.checks
}

fn convolution_oracle(n: usize, len: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..len).map(|m| 0.5f64.powi(m as i32 + 1)).collect();
    let mut acc = g.clone();
    for _ in 1..n {
        let mut next = vec![0.0; len];
        for (a, &x) in acc.iter().enumerate() {
            for (b, &y) in g.iter().enumerate().take(len - a) {
                next[a + b] += x * y;
            }
        }
        acc = next;
    }
    acc
}

fn kernel() -> Vec<Check> {
    let mut r = Recorder::new("kernel");
    for p in [0.7f64, 0.8, 0.9] {
        let name = format!("row sums p={p}");
        match build_kernel(p, 600, &KernelOptions::default()) {
            Ok(k) => {
                let worst = (0..=200).map(|j| (k.row_sum(j) - 1.0).abs()).fold(0.0, f64::max);
                r.push(name, worst < 1e-12, format!("max |row sum - 1| = {worst:.2e} for j <= 200"));
            }
            Err(err) => r.fail(name, err),
        }
    }
    let mut worst = 0.0f64;
    for n in 1..=10usize {
        for (m, want) in convolution_oracle(n, 61).iter().enumerate() {
            worst = worst.max((negbin_pmf::<f64>(n as u32, m as u32) - want).abs());
        }
    }
    r.push("negbin vs convolution", worst < 1e-13, format!("max error {worst:.2e} for n <= 10, m <= 60"));
    let name = "incremental kernel vs direct formula";
    match build_kernel(0.8f64, 60, &KernelOptions { drop_below: 0.0, max_row_tail: None }) {
        Ok(k) => {
            let mut worst = 0.0f64;
            for j in 0..=60usize {
                let norm = 1.0 - k.row_tail(j);
                for c in 0..=60usize {
                    worst = worst.max((k.entry(j, c) * norm - kernel_entry(0.8, j as u32, c as u32)).abs());
                }
            }
            r.push(name, worst < 1e-13, format!("max error {worst:.2e}"));
        }
        Err(err) => r.fail(name, err),
    }
    let tol = 1e-9;
    for p in [0.75f64, 0.8, 0.9] {
        let name = format!("stationary law p={p}");
        match stationary(p, tol, 1 << 14) {
            Ok(est) => {
                let gap = (est.mu0 - est.escape_sum()).abs();
                let closed = closed_form_gamma(&p).map(|c| c.value).unwrap_or(f64::NAN);
                let err = (est.mu0 - closed).abs();
                r.push(
                    format!("{name}: mu0 = sum p^(j+1) mu_j"),
                    gap < 10.0 * tol,
                    format!("gap {gap:.2e} (K = {})", est.truncation),
                );
                r.push(format!("{name}: mu0 = (3p-2)/(2p-1)"), err < 1e-6, format!("mu0 {:.10} error {err:.2e}", est.mu0));
                if p != 0.75 {
                    for gamma in [0.25f64, 0.5, 1.0] {
                        match gf_identity_residual(&est, p, gamma) {
                            Ok(res) => r.push(
                                format!("{name}: generating-function identity at {gamma}"),
                                res < 1e-8,
                                format!("residual {res:.2e}"),
                            ),
                            Err(err) => r.fail(format!("{name}: generating-function identity"), err),
                        }
                    }
                }
            }
            Err(err) => r.fail(name, err),
        }
    }
    r.checks
}
