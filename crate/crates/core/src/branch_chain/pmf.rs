use crate::scalar::Real;

/// `P(ζ = m) = 2^-(m+1)` for the geometric variable counting extra leftward
/// excursions from a symmetric site.
pub fn geom_pmf<T: Real>(m: u32) -> T {
    half::<T>().powi(m as i32 + 1)
}

/// `P(ζ_1 + … + ζ_n = m) = C(n+m-1, m) 2^-(n+m)`.
///
/// Built from `P(n, 0) = 2^-n` by the multiplicative recurrence
/// `P(n, m+1) = P(n, m) (n+m) / (2(m+1))`. The power of two is carried in a
/// separate exponent so large `n` does not underflow before the bulk of the
/// distribution is reached.
pub fn negbin_pmf<T: Real>(n: u32, m: u32) -> T {
    assert!(n >= 1, "negbin_pmf needs n >= 1");
    const RESCALE: i32 = 256;
    let two = T::one() + T::one();
    let big = two.powi(RESCALE);
    let mut value = T::one();
    let mut exp2: i64 = -i64::from(n);
    for i in 0..m {
        let num = T::from_u64(u64::from(n) + u64::from(i)).expect("fits");
        let den = two * T::from_u64(u64::from(i) + 1).expect("fits");
        value = value * num / den;
        if value > big {
            value = value / big;
            exp2 += i64::from(RESCALE);
        }
    }
    while exp2 < 0 && value > T::zero() {
        let shift = exp2.max(-i64::from(RESCALE));
        value = value * two.powi(shift as i32);
        exp2 -= shift;
    }
    while exp2 > 0 {
        let shift = exp2.min(i64::from(RESCALE));
        value = value * two.powi(shift as i32);
        exp2 -= shift;
    }
    value
}

/// `P(Y_1 = k | Y_0 = j)` for the chain of leftward-jump counts, by the
/// direct O(j·k) formula:
/// `p^{j+1}` for `k = 0`, else `(1-p) Σ_{l=0}^{j} p^l P(ζ_1+…+ζ_{j+1-l} = k-1)`.
pub fn kernel_entry<T: Real>(p: T, j: u32, k: u32) -> T {
    if k == 0 {
        return p.powi(j as i32 + 1);
    }
    let mut sum = T::zero();
    let mut weight = T::one();
    for l in 0..=j {
        sum = sum + weight * negbin_pmf::<T>(j + 1 - l, k - 1);
        weight = weight * p;
    }
    (T::one() - p) * sum
}

#[inline]
pub(crate) fn half<T: Real>() -> T {
    T::one() / (T::one() + T::one())
}
