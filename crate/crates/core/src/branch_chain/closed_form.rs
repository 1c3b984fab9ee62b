use std::cmp::Ordering;

use serde::Serialize;

use super::kernel::{build_kernel, KernelOptions};
use super::stationary::StationaryEstimate;
use super::ChainError;
use crate::scalar::{cmp_threshold, Real, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Exact,
    LowerBound,
    UpperBound,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedForm<T> {
    pub value: T,
    pub status: Status,
    /// Set where the regime itself is unresolved (ballisticity at p = 3/4).
    pub open: bool,
}

fn transient_p<T: Scalar>(p: &T) -> Result<(), ChainError> {
    if cmp_threshold(p, 2, 3) != Ordering::Greater || cmp_threshold(p, 1, 1) != Ordering::Less {
        return Err(ChainError::RecurrentRegime(p.to_f64_lossy()));
    }
    Ok(())
}

/// `P_1(T_0 = ∞) = (3p-2)/(2p-1)`: exact for `p ≥ 3/4`, a lower bound on
/// `(2/3, 3/4)`.
pub fn closed_form_gamma<T: Scalar>(p: &T) -> Result<ClosedForm<T>, ChainError> {
    transient_p(p)?;
    let value = (T::ratio(3, 1) * p.clone() - T::ratio(2, 1)) / (T::ratio(2, 1) * p.clone() - T::one());
    let status = if cmp_threshold(p, 3, 4) == Ordering::Less { Status::LowerBound } else { Status::Exact };
    Ok(ClosedForm { value, status, open: false })
}

/// Two-sided bounds `(3p-2)/p ≤ P_1(T_0 = ∞) ≤ (3p-2)/(p(2p-1))`.
pub fn gamma_bounds<T: Scalar>(p: &T) -> Result<(T, T), ChainError> {
    transient_p(p)?;
    let excess = T::ratio(3, 1) * p.clone() - T::ratio(2, 1);
    let lower = excess.clone() / p.clone();
    let upper = excess / (p.clone() * (T::ratio(2, 1) * p.clone() - T::one()));
    Ok((lower, upper))
}

/// Speed `lim X_n/n`: zero below 3/4, at least `4p-3` above, equal to it
/// from 10/11 on. At exactly 3/4 the answer is unknown; reported as a zero
/// lower bound with `open` set.
pub fn closed_form_speed<T: Scalar>(p: &T) -> Result<ClosedForm<T>, ChainError> {
    if cmp_threshold(p, 1, 2) != Ordering::Greater || cmp_threshold(p, 1, 1) != Ordering::Less {
        return Err(ChainError::InvalidP(p.to_f64_lossy()));
    }
    let linear = T::ratio(4, 1) * p.clone() - T::ratio(3, 1);
    Ok(match cmp_threshold(p, 3, 4) {
        Ordering::Less => ClosedForm { value: T::zero(), status: Status::Zero, open: false },
        Ordering::Equal => ClosedForm { value: T::zero(), status: Status::LowerBound, open: true },
        Ordering::Greater if cmp_threshold(p, 10, 11) == Ordering::Less => {
            ClosedForm { value: linear, status: Status::LowerBound, open: false }
        }
        Ordering::Greater => ClosedForm { value: linear, status: Status::Exact, open: false },
    })
}

/// `Σ j μ_j = (2-2p)/(4p-3)`: exact from 10/11 on, an upper bound on
/// `(3/4, 10/11)`.
pub fn mean_closed_form<T: Scalar>(p: &T) -> Result<ClosedForm<T>, ChainError> {
    if cmp_threshold(p, 3, 4) != Ordering::Greater || cmp_threshold(p, 1, 1) != Ordering::Less {
        return Err(ChainError::InvalidP(p.to_f64_lossy()));
    }
    let value = (T::ratio(2, 1) - T::ratio(2, 1) * p.clone()) / (T::ratio(4, 1) * p.clone() - T::ratio(3, 1));
    let status = if cmp_threshold(p, 10, 11) == Ordering::Less { Status::UpperBound } else { Status::Exact };
    Ok(ClosedForm { value, status, open: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Speed<T> {
    Ballistic(T),
    Divergent,
}

impl<T: Real> Speed<T> {
    /// Numeric speed; zero for a divergent mean.
    pub fn value(&self) -> T {
        match self {
            Speed::Ballistic(v) => *v,
            Speed::Divergent => T::zero(),
        }
    }
}

/// `1 / (1 + 2 Σ k μ_k)`.
pub fn speed_from_mean<T: Real>(mean: Option<T>) -> Speed<T> {
    match mean {
        Some(m) => Speed::Ballistic(T::one() / (T::one() + (T::one() + T::one()) * m)),
        None => Speed::Divergent,
    }
}

pub fn speed_from_mu<T: Real>(est: &StationaryEstimate<T>) -> Speed<T> {
    speed_from_mean(est.mean.value)
}

/// `|LHS - RHS|` of the generating-function identity satisfied by μ:
///
/// `(2p-1)(e^γ-1) Σ p^{j+1} μ_j
///   = (1-p) Σ (2-e^{-γ})^{-(j+1)} μ_j + ((2p-1)e^γ - p) Σ e^{-γj} μ_j`.
pub fn gf_identity_residual<T: Real>(est: &StationaryEstimate<T>, p: T, gamma: T) -> Result<T, ChainError> {
    if !(gamma > T::zero()) {
        return Err(ChainError::InvalidArgument("gamma must be positive".into()));
    }
    let one = T::one();
    let two = one + one;
    let eg = gamma.exp();
    let ratio = one / (two - (-gamma).exp());
    let decay = (-gamma).exp();
    let (mut s_p, mut s_ratio, mut s_decay) = (T::zero(), T::zero(), T::zero());
    let (mut wp, mut wr, mut wd) = (p, ratio, one);
    for &m in &est.mu {
        s_p = s_p + wp * m;
        s_ratio = s_ratio + wr * m;
        s_decay = s_decay + wd * m;
        wp = wp * p;
        wr = wr * ratio;
        wd = wd * decay;
    }
    let lhs = (two * p - one) * (eg - one) * s_p;
    let rhs = (one - p) * s_ratio + ((two * p - one) * eg - p) * s_decay;
    Ok((lhs - rhs).abs())
}

/// Law of `Y_n` started from `Y_0 = 0`, by repeated application of the
/// truncated kernel.
pub fn chain_marginal<T: Real>(p: T, n_steps: usize, truncation: usize) -> Result<Vec<T>, ChainError> {
    let kernel = build_kernel(p, truncation, &KernelOptions::default())?;
    let mut law = vec![T::zero(); truncation + 1];
    law[0] = T::one();
    for _ in 0..n_steps {
        law = kernel.left_mul(&law);
    }
    Ok(law)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::ratio(n, d)
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(closed_form_gamma(&0.75f64).unwrap(), ClosedForm { value: 0.5, status: Status::Exact, open: false });
        let g = closed_form_gamma(&0.9f64).unwrap();
        assert!((g.value - 0.875).abs() < 1e-15 && g.status == Status::Exact);
        let g = closed_form_gamma(&0.7f64).unwrap();
        assert!((g.value - 0.25).abs() < 1e-15 && g.status == Status::LowerBound);
        assert!(closed_form_gamma(&(2.0f64 / 3.0)).is_err());
        assert!(closed_form_gamma(&0.6f64).is_err());
        let exact = closed_form_gamma(&q(3, 4)).unwrap();
        assert_eq!((exact.value, exact.status), (q(1, 2), Status::Exact));
    }

    #[test]
    fn bounds_examples() {
        let (lo, hi) = gamma_bounds(&0.8f64).unwrap();
        assert!((lo - 0.5).abs() < 1e-15 && (hi - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(gamma_bounds(&q(3, 4)).unwrap(), (q(1, 3), q(2, 3)));
        let (lo, hi) = gamma_bounds(&0.999_999f64).unwrap();
        assert!((lo - 1.0).abs() < 1e-5 && (hi - 1.0).abs() < 1e-5 && lo <= hi);
    }

    #[test]
    fn speed_examples() {
        let s = closed_form_speed(&q(10, 11)).unwrap();
        assert_eq!((s.value, s.status), (q(7, 11), Status::Exact));
        let s = closed_form_speed(&(10.0f64 / 11.0)).unwrap();
        assert_eq!(s.status, Status::Exact);
        let s = closed_form_speed(&0.95f64).unwrap();
        assert!((s.value - 0.8).abs() < 1e-15 && s.status == Status::Exact);
        assert_eq!(closed_form_speed(&0.7f64).unwrap().status, Status::Zero);
        let border = closed_form_speed(&0.75f64).unwrap();
        assert_eq!((border.value, border.status, border.open), (0.0, Status::LowerBound, true));
        assert_eq!(closed_form_speed(&0.8f64).unwrap().status, Status::LowerBound);
        assert!(closed_form_speed(&0.5f64).is_err());
    }

    #[test]
    fn mean_speed_relation() {
        // 1/(1 + 2(2-2p)/(4p-3)) = 4p-3.
        for p in [0.8f64, 10.0 / 11.0, 0.95] {
            let m = mean_closed_form(&p).unwrap().value;
            assert!((speed_from_mean(Some(m)).value() - (4.0 * p - 3.0)).abs() < 1e-14);
        }
        assert_eq!(speed_from_mean(Some(0.0f64)).value(), 1.0);
        assert_eq!(speed_from_mean::<f64>(None).value(), 0.0);
    }

    #[test]
    fn marginal_first_steps() {
        let law = chain_marginal(0.8f64, 0, 32).unwrap();
        assert_eq!(law[0], 1.0);
        assert!(law[1..].iter().all(|v| *v == 0.0));
        let law = chain_marginal(0.8f64, 1, 64).unwrap();
        for (k, expected) in [0.8, 0.1, 0.05].iter().enumerate() {
            assert!((law[k] - expected).abs() < 1e-15);
        }
        let law = chain_marginal(0.8f64, 12, 128).unwrap();
        assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(law.iter().all(|v| *v >= 0.0));
    }
}
