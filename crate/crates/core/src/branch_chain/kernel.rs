use serde::Serialize;

use super::pmf::half;
use super::ChainError;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelOptions<T> {
    /// Entries in columns `k ≥ 1` below this are not stored.
    pub drop_below: T,
    /// Upper bound on `row_tail` over the rows `j ≤ K/2`; `None` disables it.
    pub max_row_tail: Option<T>,
}

impl<T: Real> Default for KernelOptions<T> {
    fn default() -> Self {
        Self { drop_below: T::from_f64(1e-20).expect("representable"), max_row_tail: None }
    }
}

/// Stored part of one row in columns `k ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
struct Band<T> {
    start: usize,
    values: Vec<T>,
}

/// Truncation of the leftward-jump-count kernel to states `0..=K`.
///
/// Each row is renormalized after the mass it sends above `K` is recorded in
/// `row_tail`. Column 0 is stored densely; the rest of each row keeps only
/// its band of non-negligible entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Kernel<T> {
    p: T,
    truncation: usize,
    col0: Vec<T>,
    bands: Vec<Band<T>>,
    row_tail: Vec<T>,
}

/// Builds the kernel for `p` on `0..=truncation` in O(K²).
///
/// With `S_j(m) = Σ_{n=1}^{j+1} p^{j+1-n} P(ζ_1+…+ζ_n = m)` the entries are
/// `(1-p) S_j(k-1)`, and `S_j = p S_{j-1} + NB_{j+1}`. The negative binomial
/// rows themselves advance by `NB_{n+1}(m) = (NB_n(m) + NB_{n+1}(m-1)) / 2`,
/// a positive recurrence that never needs `2^-n` on its own.
pub fn build_kernel<T: Real>(p: T, truncation: usize, opts: &KernelOptions<T>) -> Result<Kernel<T>, ChainError> {
    if !(p > half::<T>() && p < T::one()) {
        return Err(ChainError::InvalidP(p.to_f64_lossy()));
    }
    if truncation < 1 {
        return Err(ChainError::InvalidArgument("truncation must be at least 1".into()));
    }
    let len = truncation;
    let h = half::<T>();
    let q = T::one() - p;
    let mut nb: Vec<T> = (0..len).map(|m| h.powi(m as i32 + 1)).collect();
    let mut s = nb.clone();
    let mut col0 = Vec::with_capacity(len + 1);
    let mut bands = Vec::with_capacity(len + 1);
    let mut row_tail = Vec::with_capacity(len + 1);
    let mut p_pow = p;
    for j in 0..=truncation {
        if j > 0 {
            let mut prev = T::zero();
            for (x, acc) in nb.iter_mut().zip(s.iter_mut()) {
                prev = h * (*x + prev);
                *x = prev;
                *acc = p * *acc + prev;
            }
            p_pow = p_pow * p;
        }
        let mut total = p_pow;
        for v in &s {
            total = total + q * *v;
        }
        let tail = (T::one() - total).max(T::zero());
        let first = s.iter().position(|v| q * *v / total >= opts.drop_below);
        let last = s.iter().rposition(|v| q * *v / total >= opts.drop_below);
        let band = match (first, last) {
            (Some(a), Some(b)) => Band { start: a + 1, values: s[a..=b].iter().map(|v| q * *v / total).collect() },
            _ => Band { start: 1, values: Vec::new() },
        };
        if let Some(bound) = opts.max_row_tail {
            if 2 * j <= truncation && tail > bound {
                return Err(ChainError::RowTail { row: j, tail: tail.to_f64_lossy() });
            }
        }
        col0.push(p_pow / total);
        bands.push(band);
        row_tail.push(tail);
    }
    Ok(Kernel { p, truncation, col0, bands, row_tail })
}

impl<T: Real> Kernel<T> {
    pub fn p(&self) -> T {
        self.p
    }

    /// Largest state `K`.
    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Mass row `j` sent above `K` before renormalization.
    pub fn row_tail(&self, j: usize) -> T {
        self.row_tail[j]
    }

    pub fn row_tails(&self) -> &[T] {
        &self.row_tail
    }

    /// Largest `row_tail` among rows `0..=upto`.
    pub fn max_row_tail(&self, upto: usize) -> T {
        self.row_tail[..=upto.min(self.truncation)].iter().fold(T::zero(), |a, &b| a.max(b))
    }

    /// Renormalized entry `(j, k)`; zero outside the stored band.
    pub fn entry(&self, j: usize, k: usize) -> T {
        if k == 0 {
            return self.col0[j];
        }
        let band = &self.bands[j];
        k.checked_sub(band.start).and_then(|i| band.values.get(i)).copied().unwrap_or_else(T::zero)
    }

    pub fn dense_row(&self, j: usize) -> Vec<T> {
        (0..=self.truncation).map(|k| self.entry(j, k)).collect()
    }

    pub fn row_sum(&self, j: usize) -> T {
        self.bands[j].values.iter().fold(self.col0[j], |a, &b| a + b)
    }

    /// `(lo, hi)` columns of the stored band of row `j` (excluding column 0).
    pub(crate) fn band(&self, j: usize) -> (usize, &[T]) {
        (self.bands[j].start, &self.bands[j].values)
    }

    /// Row vector times kernel: `(μP)_k = Σ_j μ_j P_{jk}`.
    pub fn left_mul(&self, mu: &[T]) -> Vec<T> {
        assert_eq!(mu.len(), self.truncation + 1);
        let mut out = vec![T::zero(); self.truncation + 1];
        for (j, &m) in mu.iter().enumerate() {
            if m == T::zero() {
                continue;
            }
            out[0] = out[0] + m * self.col0[j];
            let band = &self.bands[j];
            for (o, &v) in out[band.start..].iter_mut().zip(&band.values) {
                *o = *o + m * v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::pmf::kernel_entry;
    use super::*;

    #[test]
    fn small_kernel_example() {
        let k = build_kernel(0.8f64, 2, &KernelOptions::default()).unwrap();
        assert!((k.row_tail(0) - 0.05).abs() < 1e-15);
        let row = k.dense_row(0);
        for (got, raw) in row.iter().zip([0.8, 0.1, 0.05]) {
            assert!((got - raw / 0.95).abs() < 1e-15);
        }
    }

    #[test]
    fn incremental_matches_direct_formula() {
        for p in [0.6f64, 0.8, 0.95] {
            let kern = build_kernel(p, 60, &KernelOptions { drop_below: 0.0, max_row_tail: None }).unwrap();
            for j in 0..=60usize {
                let norm = 1.0 - kern.row_tail(j);
                for k in 0..=60usize {
                    let direct = kernel_entry(p, j as u32, k as u32);
                    let got = kern.entry(j, k) * norm;
                    assert!((got - direct).abs() < 1e-13, "p={p} j={j} k={k}");
                }
                assert!((kern.entry(j, 0) * norm - p.powi(j as i32 + 1)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rows_are_stochastic() {
        for p in [0.7f64, 0.8, 0.9] {
            let kern = build_kernel(p, 600, &KernelOptions::default()).unwrap();
            for j in 0..=200 {
                assert!((kern.row_sum(j) - 1.0).abs() < 1e-12);
            }
            assert!(kern.row_tails().iter().all(|t| *t >= 0.0));
        }
    }

    #[test]
    fn row_tail_decays() {
        let kern = build_kernel(0.8f64, 500, &KernelOptions::default()).unwrap();
        assert!(kern.max_row_tail(50) < 1e-10);
        let strict = KernelOptions { drop_below: 1e-20, max_row_tail: Some(1e-12) };
        assert!(matches!(build_kernel(0.8f64, 16, &strict), Err(ChainError::RowTail { .. })));
        assert!(matches!(build_kernel(0.5f64, 16, &strict), Err(ChainError::InvalidP(_))));
    }

    #[test]
    fn left_mul_matches_dense() {
        let kern = build_kernel(0.75f64, 40, &KernelOptions::default()).unwrap();
        let mu: Vec<f64> = (0..=40).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let fast = kern.left_mul(&mu);
        for k in 0..=40 {
            let slow: f64 = (0..=40).map(|j| mu[j] * kern.entry(j, k)).sum();
            assert!((fast[k] - slow).abs() < 1e-14);
        }
    }
}
