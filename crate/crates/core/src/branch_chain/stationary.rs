//! Stationary law of the leftward-jump-count chain.
//!
//! The chain is solved exactly on a truncated state space by a banded direct
//! solve, then the neglected mass above the truncation is extrapolated from
//! the power-law decay of the computed profile.
//!
//! Two facts make this work. First, fixing `ν_0 = 1` and solving the
//! invariance equations on `1..=K`, the profile `ν_j` for `j ≤ K/2` does not
//! change when `K` grows: the truncation only disturbs states near `K`.
//! Second, away from the origin `ν_j ≈ C j^{-α}(1 + a/j + b/j² + …)`, with
//! `α > 1` exactly when the chain is positive recurrent. Fitting that form on
//! `[K/8, K/2]` and summing it to infinity gives the normalization, and hence
//! `μ_0`, far more accurately than the truncated solve alone, whose error is
//! of the order of the tail mass `~K^{1-α}`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::kernel::{build_kernel, Kernel, KernelOptions};
use super::ChainError;
use crate::scalar::Real;

/// Fitted exponents within this margin of 1, 2, 3 are treated as
/// non-summable for the mass, mean and second moment respectively.
const EXPONENT_MARGIN: f64 = 0.01;
/// Profiles that have fallen below this fraction of `ν_0` at `K/2` are
/// treated as light-tailed and not extrapolated.
const LIGHT_TAIL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryOptions<T> {
    /// Target accuracy for `μ_0` across truncation doublings.
    pub tol: T,
    pub k_start: usize,
    pub k_max: usize,
    pub kernel: KernelOptions<T>,
}

impl<T: Real> StationaryOptions<T> {
    pub fn new(tol: T, k_max: usize) -> Self {
        Self { tol, k_start: 256.min(k_max), k_max, kernel: KernelOptions::default() }
    }
}

/// A moment of μ with its raw partial sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moment<T> {
    /// Tail-corrected value; `None` when divergent.
    pub value: Option<T>,
    /// `Σ_{j ≤ K/2} j^r μ_j`.
    pub partial: T,
    pub divergent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Doubling<T> {
    pub truncation: usize,
    pub mu0: T,
    pub tail_mass: T,
    pub tail_exponent: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryEstimate<T> {
    pub p: T,
    /// Kernel truncation `K` of the final solve.
    pub truncation: usize,
    /// `μ_j` for `j ≤ K/2`; together with `tail_mass` sums to 1.
    pub mu: Vec<T>,
    pub mu0: T,
    /// Extrapolated mass above `K/2`.
    pub tail_mass: T,
    /// Fitted decay exponent `α` of `μ_j ~ j^{-α}`; `None` for light tails.
    pub tail_exponent: Option<T>,
    /// `‖μP - μ‖₁` of the truncated solve.
    pub residual: T,
    /// Largest kernel `row_tail` among the rows `j ≤ K/2`.
    pub max_row_tail: T,
    pub mean: Moment<T>,
    pub second_moment: Moment<T>,
    pub history: Vec<Doubling<T>>,
}

impl<T: Real> StationaryEstimate<T> {
    /// `Σ_j p^{j+1} μ_j` over the stored profile.
    pub fn escape_sum(&self) -> T {
        let mut w = self.p;
        self.mu.iter().fold(T::zero(), |acc, &m| {
            let term = w * m;
            w = w * self.p;
            acc + term
        })
    }
}

/// Solves `μ = μP` on the truncated kernel. Returns the unnormalized profile
/// with `ν_0 = 1`.
///
/// With `A = I - P` restricted to states `1..=K` the equations read
/// `Aᵀ ν = P_{0,·}`. `A` is a banded M-matrix with non-negative row-sum
/// slack, so LU without pivoting is stable; `Aᵀ ν = b` is then solved as
/// `Uᵀ (Lᵀ ν) = b`.
pub fn solve_truncated<T: Real>(kernel: &Kernel<T>) -> Vec<T> {
    let n = kernel.truncation();
    let mut lower = 0usize;
    let mut upper = 0usize;
    for j in 1..=n {
        let (start, values) = kernel.band(j);
        if values.is_empty() {
            continue;
        }
        lower = lower.max(j.saturating_sub(start));
        upper = upper.max((start + values.len() - 1).min(n).saturating_sub(j));
    }
    let width = lower + upper + 1;
    // Row r (state r+1), column c (state c+1) lives at r*width + (c + lower - r).
    let mut a = vec![T::zero(); n * width];
    for r in 0..n {
        let j = r + 1;
        let (start, values) = kernel.band(j);
        for (offset, &v) in values.iter().enumerate() {
            let k = start + offset;
            if k > n {
                break;
            }
            a[r * width + (k - 1 + lower - r)] = -v;
        }
        a[r * width + lower] = a[r * width + lower] + T::one();
    }
    for c in 0..n {
        let pivot = a[c * width + lower];
        let last_row = (c + lower).min(n - 1);
        let last_col = (c + upper).min(n - 1);
        for r in c + 1..=last_row {
            let idx = r * width + (c + lower - r);
            if a[idx] == T::zero() {
                continue;
            }
            let factor = a[idx] / pivot;
            a[idx] = factor;
            let (head, tail) = a.split_at_mut(r * width);
            let pivot_row = &head[c * width..(c + 1) * width];
            let row = &mut tail[..width];
            for cc in c + 1..=last_col {
                row[cc + lower - r] = row[cc + lower - r] - factor * pivot_row[cc + lower - c];
            }
        }
    }
    // Uᵀ y = b.
    let mut y: Vec<T> = (1..=n).map(|k| kernel.entry(0, k)).collect();
    for i in 0..n {
        let mut acc = y[i];
        for k in i.saturating_sub(upper)..i {
            acc = acc - a[k * width + (i + lower - k)] * y[k];
        }
        y[i] = acc / a[i * width + lower];
    }
    // Lᵀ ν = y.
    for i in (0..n).rev() {
        let mut acc = y[i];
        for k in i + 1..=(i + lower).min(n - 1) {
            acc = acc - a[k * width + (i + lower - k)] * y[k];
        }
        y[i] = acc;
    }
    let mut nu = Vec::with_capacity(n + 1);
    nu.push(T::one());
    nu.extend(y);
    nu
}

/// Power-law tail fitted to the computed profile.
#[derive(Debug, Clone, Copy)]
struct TailFit {
    exponent: f64,
    /// Σ_{j > cut} of ν_j, j ν_j, j² ν_j under the model (∞ when divergent).
    sums: [f64; 3],
}

fn fit_tail(nu: &[f64], cut: usize) -> Option<TailFit> {
    let lo = (cut / 4).max(8);
    if cut < 32 || nu[cut] <= LIGHT_TAIL * nu[0] {
        return None;
    }
    let cutf = cut as f64;
    let rows = cut - lo + 1;
    let basis = |j: f64| {
        let x = cutf / j;
        [1.0, j.ln(), x, x * x]
    };
    let design = DMatrix::from_fn(rows, 4, |r, c| basis((lo + r) as f64)[c]);
    let target = DVector::from_fn(rows, |r, _| nu[lo + r].ln());
    let coef = design.svd(true, true).solve(&target, 1e-14).ok()?;
    let model = |j: f64| {
        let b = basis(j);
        (coef[0] * b[0] + coef[1] * b[1] + coef[2] * b[2] + coef[3] * b[3]).exp()
    };
    let exponent = -coef[1];
    let far = 64 * cut;
    let mut sums = [0.0f64; 3];
    for j in cut + 1..=far {
        let jf = j as f64;
        let f = model(jf);
        sums[0] += f;
        sums[1] += jf * f;
        sums[2] += jf * jf * f;
    }
    // Beyond `far` the correction terms are negligible: integrate C x^{-α}.
    let farf = far as f64;
    let amplitude = model(farf) * farf.powf(exponent);
    let edge = farf + 0.5;
    for (r, s) in sums.iter_mut().enumerate() {
        let order = exponent - r as f64 - 1.0;
        *s = if order <= EXPONENT_MARGIN {
            f64::INFINITY
        } else {
            *s + amplitude * edge.powf(-order) / order
        };
    }
    Some(TailFit { exponent, sums })
}

/// One truncation level: solve, fit, normalize.
fn estimate_at<T: Real>(p: T, kernel: &Kernel<T>) -> Result<StationaryEstimate<T>, ChainError> {
    let k = kernel.truncation();
    let cut = k / 2;
    let nu = solve_truncated(kernel);
    let total: T = nu.iter().fold(T::zero(), |a, &b| a + b);
    let raw: Vec<T> = nu.iter().map(|&v| v / total).collect();
    let image = kernel.left_mul(&raw);
    let residual = image.iter().zip(&raw).fold(T::zero(), |acc, (&a, &b)| acc + (a - b).abs());

    let nu64: Vec<f64> = nu.iter().map(|v| v.to_f64_lossy()).collect();
    let fit = fit_tail(&nu64, cut);
    if let Some(f) = fit {
        if f.exponent <= 1.0 + EXPONENT_MARGIN / 10.0 {
            return Err(ChainError::NotPositiveRecurrent { exponent: f.exponent, truncation: k });
        }
    }
    let from = |x: f64| T::from_f64(x).expect("finite");
    let head: f64 = nu64[..=cut].iter().sum();
    let (tail, exponent) = match fit {
        Some(f) => (f.sums[0], Some(f.exponent)),
        // Light tail: whatever the truncated solve put above K/2.
        None => (nu64[cut + 1..].iter().sum::<f64>(), None),
    };
    let norm = head + tail;
    let mu: Vec<T> = nu64[..=cut].iter().map(|&v| from(v / norm)).collect();
    let moment = |r: i32| {
        let partial: f64 = nu64[..=cut].iter().enumerate().map(|(j, &v)| (j as f64).powi(r) * v).sum::<f64>() / norm;
        let extra = fit.map_or(0.0, |f| f.sums[r as usize] / norm);
        let divergent = !extra.is_finite();
        Moment { value: (!divergent).then(|| from(partial + extra)), partial: from(partial), divergent }
    };
    Ok(StationaryEstimate {
        p,
        truncation: k,
        mu0: mu[0],
        mu,
        tail_mass: from(tail / norm),
        tail_exponent: exponent.map(from),
        residual,
        max_row_tail: kernel.max_row_tail(cut),
        mean: moment(1),
        second_moment: moment(2),
        history: Vec::new(),
    })
}

/// Stationary law with the default doubling schedule (`K = 256, 512, …`).
pub fn stationary<T: Real>(p: T, tol: T, k_max: usize) -> Result<StationaryEstimate<T>, ChainError> {
    stationary_with(p, &StationaryOptions::new(tol, k_max))
}

/// Doubles the truncation until `μ_0` moves by less than `tol` and the rows
/// used for the profile send less than `tol/10` above `K`.
///
/// Fails with `NotPositiveRecurrent` when the fitted decay exponent is not
/// above 1 (the profile is not summable), and with `NotConverged` when
/// `k_max` is reached first.
pub fn stationary_with<T: Real>(p: T, opts: &StationaryOptions<T>) -> Result<StationaryEstimate<T>, ChainError> {
    if opts.k_start < 64 || opts.k_max < opts.k_start {
        return Err(ChainError::InvalidArgument(format!(
            "need 64 <= k_start <= k_max, got {} and {}",
            opts.k_start, opts.k_max
        )));
    }
    let ten = T::from_f64(10.0).expect("10");
    let mut history: Vec<Doubling<T>> = Vec::new();
    let mut k = opts.k_start;
    loop {
        let kernel = build_kernel(p, k, &opts.kernel)?;
        let mut est = estimate_at(p, &kernel)?;
        let change = history.last().map(|prev| (est.mu0 - prev.mu0).abs());
        history.push(Doubling { truncation: k, mu0: est.mu0, tail_mass: est.tail_mass, tail_exponent: est.tail_exponent });
        let stable = change.is_some_and(|c| c < opts.tol);
        if stable && est.max_row_tail < opts.tol / ten {
            est.history = history;
            return Ok(est);
        }
        if 2 * k > opts.k_max {
            return Err(ChainError::NotConverged {
                truncation: k,
                mu0: est.mu0.to_f64_lossy(),
                last_change: change.map_or(f64::INFINITY, |c| c.to_f64_lossy()),
            });
        }
        k *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_stationary(p: f64, k: usize) -> Vec<f64> {
        // Power iteration on the dense truncated kernel; independent of the
        // banded solver.
        let kern = build_kernel(p, k, &KernelOptions { drop_below: 0.0, max_row_tail: None }).unwrap();
        let rows: Vec<Vec<f64>> = (0..=k).map(|j| kern.dense_row(j)).collect();
        let mut mu = vec![1.0 / (k + 1) as f64; k + 1];
        for _ in 0..200_000 {
            let mut next = vec![0.0; k + 1];
            for (j, row) in rows.iter().enumerate() {
                for (n, v) in next.iter_mut().zip(row) {
                    *n += mu[j] * v;
                }
            }
            let s: f64 = next.iter().sum();
            next.iter_mut().for_each(|v| *v /= s);
            let diff: f64 = next.iter().zip(&mu).map(|(a, b)| (a - b).abs()).sum();
            mu = next;
            if diff < 1e-15 {
                break;
            }
        }
        mu
    }

    #[test]
    fn banded_solve_matches_power_iteration() {
        for p in [0.7, 0.8, 0.95] {
            let kern = build_kernel(p, 80, &KernelOptions::default()).unwrap();
            let nu = solve_truncated(&kern);
            let s: f64 = nu.iter().sum();
            let oracle = dense_stationary(p, 80);
            for (a, b) in nu.iter().map(|v| v / s).zip(&oracle) {
                assert!((a - b).abs() < 1e-10, "p={p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn profile_is_stable_under_truncation() {
        let a = solve_truncated(&build_kernel(0.75f64, 256, &KernelOptions::default()).unwrap());
        let b = solve_truncated(&build_kernel(0.75, 512, &KernelOptions::default()).unwrap());
        for j in [1, 10, 64, 128] {
            assert!(((a[j] - b[j]) / b[j]).abs() < 1e-9, "j={j}");
        }
    }

    #[test]
    fn mu0_matches_closed_form_at_point_eight() {
        let est = stationary(0.8f64, 1e-9, 4096).unwrap();
        assert!((est.mu0 - 2.0 / 3.0).abs() < 1e-6, "{}", est.mu0);
        assert!((est.mu0 - est.escape_sum()).abs() < 1e-8);
        assert!(est.residual < 1e-12);
        let total: f64 = est.mu.iter().sum::<f64>() + est.tail_mass;
        assert!((total - 1.0).abs() < 1e-12);
        assert!(!est.mean.divergent && est.second_moment.divergent);
        assert!((est.tail_exponent.unwrap() - 3.0).abs() < 0.01);
    }

    #[test]
    fn heavy_tail_below_three_quarters() {
        let est = stationary(0.7, 1e-7, 4096).unwrap();
        assert!(est.mean.divergent && est.mean.value.is_none());
        assert!(est.mean.partial > 0.0);
        assert!((0.1 / 0.7..=0.1 / (0.7 * 0.4)).contains(&est.mu0), "{}", est.mu0);
    }

    #[test]
    fn recurrent_regime_is_rejected() {
        for p in [0.6, 2.0 / 3.0] {
            assert!(matches!(stationary(p, 1e-8, 4096), Err(ChainError::NotPositiveRecurrent { .. })), "p={p}");
        }
    }

    #[test]
    fn bad_options() {
        let mut opts = StationaryOptions::new(1e-8, 4096);
        opts.k_start = 16;
        assert!(stationary_with(0.8, &opts).is_err());
        assert!(matches!(stationary(0.75, 1e-14, 512), Err(ChainError::NotConverged { .. })));
    }
}
