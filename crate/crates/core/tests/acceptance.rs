//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Pass criterion numbers as arguments to
//! run a subset, e.g. `cargo test --test acceptance -- 4 5`.

use std::process::ExitCode;
use std::time::Instant;

use cookie_walk::branch_chain::{
    build_kernel, chain_marginal, closed_form_speed, gf_identity_residual, negbin_pmf, speed_from_mu, stationary,
    KernelOptions, Status,
};
use cookie_walk::coupling::{coupled_batch, CouplingParams};
use cookie_walk::environment::{classify, default_boundary_tol, Verdict};
use cookie_walk::estimators::{
    empirical_u_law, estimate_gamma, estimate_hit_probability, estimate_speed, phase_scan, total_variation, ScanConfig,
};
use cookie_walk::walk_sim::{martingale_check, run, Outcome, StopRule};
use cookie_walk::{BigRational, Env};
use rayon::prelude::*;

type Check = Result<String, String>;

fn env(s: &str) -> Env {
    s.parse().expect("valid environment")
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn all(parts: Vec<Check>) -> Check {
    let failed = parts.iter().any(|p| p.is_err());
    let text: Vec<String> = parts.into_iter().map(|p| p.unwrap_or_else(|e| format!("FAILED {e}"))).collect();
    ensure(!failed, text.join("; "))
}

fn escape_closed_form(p: f64) -> f64 {
    (3.0 * p - 2.0) / (2.0 * p - 1.0)
}

fn mean_closed_form(p: f64) -> f64 {
    (2.0 - 2.0 * p) / (4.0 * p - 3.0)
}

fn c1_escape_probability() -> Check {
    all([0.75, 0.8, 0.85, 0.9, 0.95]
        .iter()
        .map(|&p| {
            let est = stationary(p, 1e-9, 1 << 14).map_err(|e| format!("p={p}: {e}"))?;
            let err = (est.mu0 - escape_closed_form(p)).abs();
            ensure(err < 1e-6, format!("p={p} mu0={:.10} err={err:.1e} K={}", est.mu0, est.truncation))
        })
        .collect())
}

fn c2_speed_and_mean() -> Check {
    let mut parts = Vec::new();
    for p in [10.0f64 / 11.0, 0.93, 0.95] {
        parts.push((|| {
            let est = stationary(p, 1e-10, 1 << 14).map_err(|e| format!("p={p:.4}: {e}"))?;
            let speed = speed_from_mu(&est).value();
            let mean = est.mean.value.ok_or_else(|| format!("p={p:.4}: mean flagged divergent"))?;
            let (es, em) = ((speed - (4.0 * p - 3.0)).abs(), (mean - mean_closed_form(p)).abs());
            ensure(es < 1e-5 && em < 1e-6, format!("p={p:.4} speed={speed:.8} (err {es:.1e}) mean={mean:.8} (err {em:.1e})"))
        })());
    }
    let exact = closed_form_speed(&BigRational::new(10.into(), 11.into())).map_err(|e| e.to_string())?;
    parts.push(ensure(exact.status == Status::Exact, format!("10/11 status {:?}", exact.status)));
    for p in [0.78f64, 0.85] {
        parts.push((|| {
            let est = stationary(p, 1e-9, 1 << 14).map_err(|e| format!("p={p}: {e}"))?;
            let mean = est.mean.value.ok_or_else(|| format!("p={p}: mean flagged divergent"))?;
            let bound = mean_closed_form(p);
            ensure(mean <= bound + 1e-6, format!("p={p} mean={mean:.6} <= {bound:.6}"))
        })());
    }
    all(parts)
}

fn c3_bounds_near_threshold() -> Check {
    all([0.70, 0.72]
        .iter()
        .map(|&p| {
            let est = stationary(p, 1e-7, 1 << 14).map_err(|e| format!("p={p}: {e}"))?;
            let (lo, hi) = ((3.0 * p - 2.0) / p, (3.0 * p - 2.0) / (p * (2.0 * p - 1.0)));
            ensure(
                lo <= est.mu0 && est.mu0 <= hi,
                format!(
                    "p={p} mu0={:.8} in [{lo:.6}, {hi:.6}] K={} tail_mass={:.2e} alpha={:.4} max_row_tail={:.1e}",
                    est.mu0,
                    est.truncation,
                    est.tail_mass,
                    est.tail_exponent.unwrap_or(f64::NAN),
                    est.max_row_tail
                ),
            )
        })
        .collect())
}

fn c4_monte_carlo_escape() -> Check {
    let est = estimate_gamma(&env("homogeneous:0.8"), 10_000, 100_000, 2024).map_err(|e| e.to_string())?;
    let dev = (est.value - 2.0 / 3.0).abs();
    ensure(
        dev <= 4.0 * est.stderr && est.capped_trials == 0,
        format!("gamma_mc={:.5} stderr={:.5} |dev|={dev:.5} capped={}", est.value, est.stderr, est.capped_trials),
    )
}

fn c5_monte_carlo_speed() -> Check {
    let fast = estimate_speed(&env("homogeneous:0.95"), 1_000_000, 200, 5).map_err(|e| e.to_string())?;
    let slow_short = estimate_speed(&env("homogeneous:0.7"), 100_000, 200, 5).map_err(|e| e.to_string())?;
    let slow_long = estimate_speed(&env("homogeneous:0.7"), 1_000_000, 200, 5).map_err(|e| e.to_string())?;
    all(vec![
        ensure((fast.value - 0.8).abs() < 0.01, format!("p=0.95 v={:.5} ± {:.5}", fast.value, fast.stderr)),
        ensure(
            slow_long.value.abs() < 0.1 && slow_long.value < slow_short.value,
            format!("p=0.70 v(1e5)={:.5} v(1e6)={:.5}", slow_short.value, slow_long.value),
        ),
    ])
}

/// `T_n = K_n - U_0 + n + 2 Σ_{m=0}^{n} U_m`, recomputed from the raw counters.
fn c6_time_identity() -> Check {
    let mut parts = Vec::new();
    for p in ["0.6", "0.8", "0.95"] {
        for n in [10i64, 100] {
            let e = env(&format!("homogeneous:{p}"));
            let rule = StopRule::new(None, Some(n), 1_000_000);
            let (mut checked, mut bad, mut capped, mut next) = (0u64, 0u64, 0u64, 0u64);
            while checked < 10_000 {
                let chunk = 10_000 - checked;
                let results: Vec<_> = (next..next + chunk).into_par_iter().map(|t| run(&e, 0, &rule, 61, t)).collect();
                next += chunk;
                for rec in results {
                    let rec = rec.map_err(|e| e.to_string())?;
                    if rec.outcome != Outcome::HitUpper {
                        capped += 1;
                        continue;
                    }
                    checked += 1;
                    let sum_u: u64 = (0..=n).map(|m| rec.u(m)).sum();
                    let rhs = rec.k_count as i128 - rec.u(0) as i128 + n as i128 + 2 * sum_u as i128;
                    bad += u64::from(rec.steps_taken as i128 != rhs || rec.u(n) != 0);
                }
            }
            parts.push(ensure(bad == 0, format!("p={p} n={n}: {checked} paths, {bad} violations, {capped} capped")));
        }
    }
    all(parts)
}

fn c7_optional_stopping() -> Check {
    all([("homogeneous:0.8", 50i64), ("periodic:0.6,0.9", 40)]
        .iter()
        .map(|&(spec, n)| {
            let m = martingale_check(&env(spec), n, 100_000, 77).map_err(|e| e.to_string())?;
            let gap = (m.lhs - m.rhs).abs();
            ensure(
                gap <= 4.0 * m.stderr && m.capped_trials == 0,
                format!("{spec} n={n}: lhs={:.4} rhs={:.4} |gap|={gap:.4} stderr={:.4}", m.lhs, m.rhs, m.stderr),
            )
        })
        .collect())
}

fn c8_coupling() -> Check {
    let params = CouplingParams::new(0, -5, 5, 10_000);
    let rule = StopRule::new(Some(params.lower), Some(params.upper), params.horizon);
    let mut parts = Vec::new();
    for (lo, hi) in [("symmetric", "homogeneous:0.8"), ("homogeneous:0.7", "homogeneous:0.9")] {
        let (el, eh) = (env(lo), env(hi));
        parts.push((|| {
            let s = coupled_batch(&el, &eh, params, 8, 10_000).map_err(|e| e.to_string())?;
            ensure(
                s.inclusion_failures == 0 && s.runs == 10_000,
                format!("{lo}<={hi}: {} runs, {} inclusion failures, {} splits", s.runs, s.inclusion_failures, s.splits),
            )
        })());
        parts.push((|| {
            let runs = 100_000u64;
            let s = coupled_batch(&el, &eh, params, 88, runs).map_err(|e| e.to_string())?;
            let mut sub = Vec::new();
            for (label, e, frac) in [("low", &el, s.low_fraction()), ("high", &eh, s.high_fraction())] {
                let free = estimate_hit_probability(e, params.start, &rule, runs, 888).map_err(|e| e.to_string())?;
                let se = (frac * (1.0 - frac) / runs as f64 + free.stderr.powi(2)).sqrt();
                let dev = (frac - free.value).abs();
                sub.push(ensure(dev <= 4.0 * se, format!("{label} coupled={frac:.4} free={:.4} se={se:.4}", free.value)));
            }
            all(sub)
        })());
    }
    all(parts)
}

/// Brute-force n-fold convolution of `P(ζ = m) = 2^-(m+1)`.
fn convolution(n: usize, len: usize) -> Vec<f64> {
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

fn c9_kernel() -> Check {
    let mut parts = Vec::new();
    for p in [0.7f64, 0.8, 0.9] {
        parts.push((|| {
            let k = build_kernel(p, 800, &KernelOptions::default()).map_err(|e| e.to_string())?;
            let worst = (0..=200).map(|j| (k.dense_row(j).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
            ensure(worst < 1e-12, format!("p={p} max row-sum error {worst:.1e}"))
        })());
    }
    let mut worst = 0.0f64;
    for n in 1..=10 {
        for (m, want) in convolution(n, 61).iter().enumerate() {
            worst = worst.max((negbin_pmf::<f64>(n as u32, m as u32) - want).abs());
        }
    }
    parts.push(ensure(worst < 1e-13, format!("negbin vs convolution {worst:.1e}")));
    let tol = 1e-9;
    for p in [0.75f64, 0.8, 0.9] {
        parts.push((|| {
            let est = stationary(p, tol, 1 << 14).map_err(|e| e.to_string())?;
            let sum: f64 = est.mu.iter().enumerate().map(|(j, m)| p.powi(j as i32 + 1) * m).sum();
            let gap = (est.mu0 - sum).abs();
            ensure(gap < 10.0 * tol, format!("p={p} |mu0 - sum p^(j+1) mu_j| = {gap:.1e}"))
        })());
    }
    all(parts)
}

fn c10_generating_function() -> Check {
    let mut parts = Vec::new();
    for p in [0.8f64, 0.9] {
        let est = stationary(p, 1e-10, 1 << 14).map_err(|e| e.to_string())?;
        for g in [0.25f64, 0.5, 1.0] {
            let lib = gf_identity_residual(&est, p, g).map_err(|e| e.to_string())?;
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for (j, &m) in est.mu.iter().enumerate() {
                a += p.powi(j as i32 + 1) * m;
                b += (2.0 - (-g).exp()).powi(-(j as i32 + 1)) * m;
                c += (-g * j as f64).exp() * m;
            }
            let lhs = (2.0 * p - 1.0) * (g.exp() - 1.0) * a;
            let rhs = (1.0 - p) * b + ((2.0 * p - 1.0) * g.exp() - p) * c;
            let own = (lhs - rhs).abs();
            parts.push(ensure(lib < 1e-8 && own < 1e-8, format!("p={p} gamma={g}: {lib:.1e} (oracle {own:.1e})")));
        }
    }
    all(parts)
}

fn c11_chain_vs_walk() -> Check {
    let (empirical, capped) = empirical_u_law(&env("homogeneous:0.8"), 6, 1, 1_000_000, 11).map_err(|e| e.to_string())?;
    let chain = chain_marginal(0.8f64, 5, 200).map_err(|e| e.to_string())?;
    let tv = total_variation(&empirical, &chain);
    ensure(tv < 0.005 && capped == 0, format!("TV(U_1^6, Y_5) = {tv:.5} over 1e6 paths"))
}

fn c12_phase_boundaries() -> Check {
    let cfg = ScanConfig { gamma_trials: 0, speed_trials: 0, ..ScanConfig::default() };
    let grid = [0.60, 0.64, 2.0 / 3.0, 0.70];
    let rows = phase_scan(&grid, &cfg);
    let verdicts: Vec<Verdict> = rows.iter().map(|r| r.classification.as_ref().map(|c| c.verdict).unwrap()).collect();
    let recurrent: Vec<bool> = rows.iter().map(|r| r.classification.as_ref().unwrap().is_recurrent()).collect();
    let periodic = classify(&env("periodic:0.5,0.5,0.85"), default_boundary_tol());
    let periodic_oracle = (1.0 + 1.0 + 0.85 / 0.15) / 3.0;
    let iid = classify(&env("iid:0.5:0.5,0.9:0.5"), default_boundary_tol());
    all(vec![
        ensure(recurrent == [true, true, true, false], format!("scan verdicts {verdicts:?}")),
        ensure(
            periodic.verdict == Verdict::Transient && (periodic.criterion_value - periodic_oracle).abs() < 1e-12,
            format!("periodic criterion {:.4} {:?}", periodic.criterion_value, periodic.verdict),
        ),
        ensure(
            iid.verdict == Verdict::Transient && (iid.criterion_value - 5.0).abs() < 1e-12,
            format!("iid criterion {:.4} {:?}", iid.criterion_value, iid.verdict),
        ),
    ])
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Check); 12] = [
        (1, "escape probability closed form", c1_escape_probability),
        (2, "speed and mean closed forms", c2_speed_and_mean),
        (3, "escape bounds near the threshold", c3_bounds_near_threshold),
        (4, "Monte Carlo escape vs exact", c4_monte_carlo_escape),
        (5, "Monte Carlo speed", c5_monte_carlo_speed),
        (6, "pathwise time identity", c6_time_identity),
        (7, "optional stopping identity", c7_optional_stopping),
        (8, "monotone coupling", c8_coupling),
        (9, "kernel correctness", c9_kernel),
        (10, "generating-function identity", c10_generating_function),
        (11, "chain vs walk in law", c11_chain_vs_walk),
        (12, "phase boundaries", c12_phase_boundaries),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (id, title, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{id:>2}] {title} ({secs:.1}s): {detail}");
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion(s) failed");
        ExitCode::FAILURE
    }
}
