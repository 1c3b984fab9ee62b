//! Cookie environments: the law of ω over ℤ, the per-trial consumption state,
//! and the recurrence/transience criterion.
//!
//! Every site carries a single cookie of strength ω(x) ∈ [1/2, 1). The walk
//! jumps right from `x` with probability ω(x) until the first time it jumps
//! left from `x`; from then on the site behaves like a symmetric site.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num::{BigRational, Integer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::scalar::{cmp_threshold, parse_rational, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("cookie strength {0} outside [1/2, 1)")]
    OutOfRange(String),
    #[error("periodic environment needs at least one value")]
    EmptyPeriod,
    #[error("i.i.d. law needs at least one support point")]
    EmptySupport,
    #[error("i.i.d. weight {0} is not positive")]
    NonPositiveWeight(String),
    #[error("i.i.d. weights sum to {0}, expected 1")]
    WeightSum(String),
    #[error("cannot parse environment `{input}`: {reason}")]
    Parse { input: String, reason: String },
    #[error("environment order violated at site {site:?}: low {low} > high {high}")]
    OrderViolation { site: Option<i64>, low: f64, high: f64 },
}

/// The shape of the cookie law.
#[derive(Debug, Clone, PartialEq)]
pub enum Variant<T> {
    /// ω(x) = p at every site.
    Homogeneous(T),
    /// ω(x) = omegas[(x - 1) mod N]; site 1 carries the first value.
    Periodic(Vec<T>),
    /// ω(x) i.i.d. with the given (value, weight) law, sorted by value.
    IidDiscrete(Vec<(T, T)>),
    /// ω ≡ 1/2.
    Symmetric,
}

/// Immutable, validated description of a cookie environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec<T> {
    variant: Variant<T>,
}

fn check_prob<T: Scalar>(p: &T) -> Result<(), EnvError> {
    let half = T::ratio(1, 2);
    if *p < half || *p >= T::one() {
        return Err(EnvError::OutOfRange(p.to_string()));
    }
    Ok(())
}

impl<T: Scalar> EnvironmentSpec<T> {
    pub fn homogeneous(p: T) -> Result<Self, EnvError> {
        check_prob(&p)?;
        Ok(Self { variant: Variant::Homogeneous(p) })
    }

    pub fn periodic(omegas: Vec<T>) -> Result<Self, EnvError> {
        if omegas.is_empty() {
            return Err(EnvError::EmptyPeriod);
        }
        omegas.iter().try_for_each(check_prob)?;
        Ok(Self { variant: Variant::Periodic(omegas) })
    }

    /// An i.i.d. product law. Duplicate values are merged and the support is
    /// stored in increasing order, which fixes the quantile map used to
    /// realize sites.
    pub fn iid(support: Vec<(T, T)>) -> Result<Self, EnvError> {
        if support.is_empty() {
            return Err(EnvError::EmptySupport);
        }
        let mut total = T::zero();
        for (value, weight) in &support {
            check_prob(value)?;
            if *weight <= T::zero() {
                return Err(EnvError::NonPositiveWeight(weight.to_string()));
            }
            total = total + weight.clone();
        }
        if (total.clone() - T::one()).abs() > T::ratio(1, 1_000_000_000_000) {
            return Err(EnvError::WeightSum(total.to_string()));
        }
        let mut sorted = support;
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
        let mut merged: Vec<(T, T)> = Vec::with_capacity(sorted.len());
        for (value, weight) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == value => last.1 = last.1.clone() + weight,
                _ => merged.push((value, weight)),
            }
        }
        Ok(Self { variant: Variant::IidDiscrete(merged) })
    }

    pub fn symmetric() -> Self {
        Self { variant: Variant::Symmetric }
    }

    pub fn variant(&self) -> &Variant<T> {
        &self.variant
    }

    pub fn is_random(&self) -> bool {
        matches!(self.variant, Variant::IidDiscrete(_))
    }

    /// ω(site) for deterministic environments; `None` for i.i.d. laws.
    pub fn deterministic_omega(&self, site: i64) -> Option<T> {
        match &self.variant {
            Variant::Homogeneous(p) => Some(p.clone()),
            Variant::Periodic(omegas) => {
                let n = omegas.len() as i64;
                Some(omegas[(site - 1).rem_euclid(n) as usize].clone())
            }
            Variant::Symmetric => Some(T::ratio(1, 2)),
            Variant::IidDiscrete(_) => None,
        }
    }

    /// The i.i.d. value selected by a uniform `u` through the quantile map.
    fn iid_quantile(support: &[(T, T)], u: f64) -> T {
        let mut cumulative = 0.0;
        for (value, weight) in support {
            cumulative += weight.to_f64_lossy();
            if u < cumulative {
                return value.clone();
            }
        }
        support.last().expect("non-empty support").0.clone()
    }

    /// Smallest and largest value ω can take.
    fn range(&self) -> (T, T) {
        let fold = |values: &mut dyn Iterator<Item = T>| {
            let first = values.next().expect("non-empty");
            values.fold((first.clone(), first), |(lo, hi), v| {
                (if v < lo { v.clone() } else { lo }, if v > hi { v } else { hi })
            })
        };
        match &self.variant {
            Variant::Homogeneous(p) => (p.clone(), p.clone()),
            Variant::Periodic(o) => fold(&mut o.iter().cloned()),
            Variant::IidDiscrete(s) => fold(&mut s.iter().map(|(v, _)| v.clone())),
            Variant::Symmetric => (T::ratio(1, 2), T::ratio(1, 2)),
        }
    }

    fn period(&self) -> Option<usize> {
        match &self.variant {
            Variant::Homogeneous(_) | Variant::Symmetric => Some(1),
            Variant::Periodic(o) => Some(o.len()),
            Variant::IidDiscrete(_) => None,
        }
    }

    /// Checks that `self` ≤ `high` pointwise, with i.i.d. sites realized by
    /// the shared quantile map. Between two i.i.d. laws this is stochastic
    /// dominance of the laws.
    pub fn check_dominated_by(&self, high: &Self) -> Result<(), EnvError> {
        let violation = |site, low: &T, hi: &T| EnvError::OrderViolation {
            site,
            low: low.to_f64_lossy(),
            high: hi.to_f64_lossy(),
        };
        if let (Variant::IidDiscrete(a), Variant::IidDiscrete(b)) = (&self.variant, &high.variant) {
            // F_low(t) >= F_high(t) at every support point of either law.
            let cdf = |s: &[(T, T)], t: &T| {
                s.iter().filter(|(v, _)| v <= t).fold(T::zero(), |acc, (_, w)| acc + w.clone())
            };
            for t in a.iter().chain(b.iter()).map(|(v, _)| v) {
                if cdf(a, t) < cdf(b, t) - T::ratio(1, 1_000_000_000_000) {
                    let (lo, _) = self.range();
                    let (_, hi) = high.range();
                    return Err(violation(None, &hi, &lo));
                }
            }
            return Ok(());
        }
        if let (Some(na), Some(nb)) = (self.period(), high.period()) {
            let lcm = na.lcm(&nb);
            if lcm <= 1_000_000 {
                for site in 1..=lcm as i64 {
                    let lo = self.deterministic_omega(site).expect("deterministic");
                    let hi = high.deterministic_omega(site).expect("deterministic");
                    if lo > hi {
                        return Err(violation(Some(site), &lo, &hi));
                    }
                }
                return Ok(());
            }
        }
        let (_, max_low) = self.range();
        let (min_high, _) = high.range();
        if max_low > min_high {
            return Err(violation(None, &max_low, &min_high));
        }
        Ok(())
    }

    /// Converts every value into another scalar type.
    pub fn convert<U: Scalar>(&self) -> Result<EnvironmentSpec<U>, EnvError> {
        let conv = |x: &T| -> Result<U, EnvError> {
            U::from_f64(x.to_f64_lossy()).ok_or_else(|| EnvError::OutOfRange(x.to_string()))
        };
        match &self.variant {
            Variant::Homogeneous(p) => EnvironmentSpec::homogeneous(conv(p)?),
            Variant::Periodic(o) => EnvironmentSpec::periodic(o.iter().map(conv).collect::<Result<_, _>>()?),
            Variant::IidDiscrete(s) => EnvironmentSpec::iid(
                s.iter().map(|(v, w)| Ok((conv(v)?, conv(w)?))).collect::<Result<_, EnvError>>()?,
            ),
            Variant::Symmetric => Ok(EnvironmentSpec::symmetric()),
        }
    }
}

/// Two-sided growable vector indexed by any `i64` site.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SiteVec<V> {
    pos: Vec<V>,
    neg: Vec<V>,
}

impl<V: Clone + Default> SiteVec<V> {
    pub fn new() -> Self {
        Self { pos: Vec::new(), neg: Vec::new() }
    }

    #[inline]
    fn slot(site: i64) -> (bool, usize) {
        if site >= 0 {
            (true, site as usize)
        } else {
            (false, (-(site + 1)) as usize)
        }
    }

    #[inline]
    pub fn get(&self, site: i64) -> Option<&V> {
        let (positive, i) = Self::slot(site);
        if positive { self.pos.get(i) } else { self.neg.get(i) }
    }

    #[inline]
    pub fn get_mut(&mut self, site: i64) -> &mut V {
        let (positive, i) = Self::slot(site);
        let side = if positive { &mut self.pos } else { &mut self.neg };
        if i >= side.len() {
            side.resize((i + 1).max(2 * side.len()), V::default());
        }
        &mut side[i]
    }

    /// All stored `(site, value)` pairs in increasing site order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, &V)> {
        let neg = self.neg.iter().enumerate().rev().map(|(i, v)| (-(i as i64) - 1, v));
        let pos = self.pos.iter().enumerate().map(|(i, v)| (i as i64, v));
        neg.chain(pos)
    }
}

/// Which cookies a single trial has eaten, plus the lazily realized i.i.d.
/// values. Confined to one trial.
#[derive(Debug, Clone)]
pub struct CookieState<T> {
    consumed: SiteVec<bool>,
    realized: SiteVec<Option<T>>,
    env_seed: u64,
}

impl<T: Scalar> CookieState<T> {
    /// Fresh state. `env_seed` selects the realization of i.i.d. environments
    /// and is ignored for deterministic ones.
    pub fn new(env_seed: u64) -> Self {
        Self { consumed: SiteVec::new(), realized: SiteVec::new(), env_seed }
    }

    #[inline]
    pub fn is_consumed(&self, site: i64) -> bool {
        self.consumed.get(site).copied().unwrap_or(false)
    }

    /// Marks the cookie at `site` eaten. Idempotent.
    #[inline]
    pub fn consume(&mut self, site: i64) {
        *self.consumed.get_mut(site) = true;
    }

    /// Eaten sites in increasing order.
    pub fn consumed_sites(&self) -> Vec<i64> {
        self.consumed.iter().filter(|(_, c)| **c).map(|(s, _)| s).collect()
    }

    /// Realized i.i.d. values, in increasing site order.
    pub fn realized_sites(&self) -> Vec<(i64, T)> {
        self.realized.iter().filter_map(|(s, v)| v.clone().map(|v| (s, v))).collect()
    }
}

/// The cookie strength at `site` before consumption, realizing it for i.i.d.
/// laws.
#[inline]
pub fn base_omega<T: Scalar>(env: &EnvironmentSpec<T>, state: &mut CookieState<T>, site: i64) -> T {
    match &env.variant {
        Variant::IidDiscrete(support) => {
            let seed = state.env_seed;
            state
                .realized
                .get_mut(site)
                .get_or_insert_with(|| EnvironmentSpec::iid_quantile(support, rng::site_uniform(seed, site)))
                .clone()
        }
        _ => env.deterministic_omega(site).expect("deterministic variant"),
    }
}

/// Current right-jump probability at `site`: 1/2 once eaten, ω(site) before.
#[inline]
pub fn omega_at<T: Scalar>(env: &EnvironmentSpec<T>, state: &mut CookieState<T>, site: i64) -> T {
    if state.is_consumed(site) {
        T::ratio(1, 2)
    } else {
        base_omega(env, state, site)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Recurrent,
    Transient,
    /// Criterion equal to the threshold within tolerance; equality belongs
    /// to the recurrent side.
    Boundary,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Recurrent => "recurrent",
            Verdict::Transient => "transient",
            Verdict::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification<T> {
    pub verdict: Verdict,
    pub criterion_value: T,
    pub threshold: T,
}

impl<T> Classification<T> {
    pub fn is_recurrent(&self) -> bool {
        matches!(self.verdict, Verdict::Recurrent | Verdict::Boundary)
    }
}

/// Mean of ω/(1-ω) under the environment law (one period, the single value,
/// or the i.i.d. expectation), compared with 2.
pub fn classify<T: Scalar>(env: &EnvironmentSpec<T>, boundary_tol: T) -> Classification<T> {
    let odds = |w: &T| w.clone() / (T::one() - w.clone());
    let criterion = match &env.variant {
        Variant::Homogeneous(p) => odds(p),
        Variant::Periodic(o) => {
            let sum = o.iter().fold(T::zero(), |acc, w| acc + odds(w));
            sum / T::from_usize(o.len()).expect("period length")
        }
        Variant::IidDiscrete(s) => s.iter().fold(T::zero(), |acc, (v, w)| acc + w.clone() * odds(v)),
        Variant::Symmetric => T::one(),
    };
    let threshold = T::from_i64(2).expect("2");
    let diff = criterion.clone() - threshold.clone();
    let verdict = if diff.abs() <= boundary_tol {
        Verdict::Boundary
    } else if diff > T::zero() {
        Verdict::Transient
    } else {
        Verdict::Recurrent
    };
    Classification { verdict, criterion_value: criterion, threshold }
}

/// Default boundary tolerance for [`classify`].
pub fn default_boundary_tol<T: Scalar>() -> T {
    T::ratio(1, 1_000_000_000_000)
}

/// Whether a homogeneous strength is on the transient side of 2/3.
pub fn homogeneous_is_transient<T: Scalar>(p: &T) -> bool {
    cmp_threshold(p, 2, 3) == Ordering::Greater
}

impl<T: Scalar> fmt::Display for EnvironmentSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.variant {
            Variant::Homogeneous(p) => write!(f, "homogeneous:{p}"),
            Variant::Periodic(o) => {
                let parts: Vec<String> = o.iter().map(|w| w.to_string()).collect();
                write!(f, "periodic:{}", parts.join(","))
            }
            Variant::IidDiscrete(s) => {
                let parts: Vec<String> = s.iter().map(|(v, w)| format!("{v}:{w}")).collect();
                write!(f, "iid:{}", parts.join(","))
            }
            Variant::Symmetric => write!(f, "symmetric"),
        }
    }
}

/// Parses the `homogeneous:<p>`, `periodic:<p1,...>`, `iid:<p1:w1,...>`,
/// `symmetric` grammar. Numbers may be decimals or fractions (`2/3`) and are
/// read exactly before conversion to `T`.
impl<T: Scalar> FromStr for EnvironmentSpec<T> {
    type Err = EnvError;

    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| EnvError::Parse { input: input.to_string(), reason: reason.to_string() };
        let num = |s: &str| -> Result<T, EnvError> {
            let r: BigRational = parse_rational(s).ok_or_else(|| err(&format!("bad number `{s}`")))?;
            T::from_rational(&r).ok_or_else(|| err(&format!("number `{s}` not representable")))
        };
        let trimmed = input.trim();
        if trimmed == "symmetric" {
            return Ok(Self::symmetric());
        }
        let (kind, rest) = trimmed.split_once(':').ok_or_else(|| err("expected `<kind>:<params>`"))?;
        match kind {
            "homogeneous" => Self::homogeneous(num(rest)?),
            "periodic" => Self::periodic(rest.split(',').map(num).collect::<Result<_, _>>()?),
            "iid" => {
                let support = rest
                    .split(',')
                    .map(|pair| {
                        let (v, w) = pair.split_once(':').ok_or_else(|| err("iid entries are `<p>:<w>`"))?;
                        Ok((num(v)?, num(w)?))
                    })
                    .collect::<Result<Vec<_>, EnvError>>()?;
                Self::iid(support)
            }
            other => Err(err(&format!("unknown kind `{other}`"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum VariantTag {
    Homogeneous,
    Periodic,
    Iid,
    Symmetric,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Param<T> {
    Value(T),
    Pair(T, T),
}

#[derive(Serialize, Deserialize)]
struct RawEnv<T> {
    variant: VariantTag,
    params: Vec<Param<T>>,
}

impl<T: Scalar + Serialize> Serialize for EnvironmentSpec<T> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let raw = match &self.variant {
            Variant::Homogeneous(p) => RawEnv { variant: VariantTag::Homogeneous, params: vec![Param::Value(p.clone())] },
            Variant::Periodic(o) => RawEnv {
                variant: VariantTag::Periodic,
                params: o.iter().cloned().map(Param::Value).collect(),
            },
            Variant::IidDiscrete(s) => RawEnv {
                variant: VariantTag::Iid,
                params: s.iter().map(|(v, w)| Param::Pair(v.clone(), w.clone())).collect(),
            },
            Variant::Symmetric => RawEnv { variant: VariantTag::Symmetric, params: vec![] },
        };
        raw.serialize(serializer)
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for EnvironmentSpec<T> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = RawEnv::<T>::deserialize(deserializer)?;
        let values = || -> Result<Vec<T>, D::Error> {
            raw.params
                .iter()
                .map(|p| match p {
                    Param::Value(v) => Ok(v.clone()),
                    Param::Pair(..) => Err(D::Error::custom("expected scalar parameter")),
                })
                .collect()
        };
        let env = match raw.variant {
            VariantTag::Homogeneous => {
                let v = values()?;
                if v.len() != 1 {
                    return Err(D::Error::custom("homogeneous takes exactly one parameter"));
                }
                Self::homogeneous(v[0].clone())
            }
            VariantTag::Periodic => Self::periodic(values()?),
            VariantTag::Iid => Self::iid(
                raw.params
                    .iter()
                    .map(|p| match p {
                        Param::Pair(v, w) => Ok((v.clone(), w.clone())),
                        Param::Value(_) => Err(D::Error::custom("expected [value, weight] pair")),
                    })
                    .collect::<Result<_, _>>()?,
            ),
            VariantTag::Symmetric => Ok(Self::symmetric()),
        };
        env.map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;
    use num::BigRational;
    use proptest::prelude::*;

    fn env(s: &str) -> EnvironmentSpec<f64> {
        s.parse().unwrap()
    }

    #[test]
    fn omega_at_definitions() {
        let mut st = CookieState::new(0);
        assert_eq!(omega_at(&env("homogeneous:0.8"), &mut st, 5), 0.8);
        st.consume(5);
        assert_eq!(omega_at(&env("homogeneous:0.8"), &mut st, 5), 0.5);
        let per = env("periodic:0.5,0.5,0.85");
        let mut st = CookieState::new(0);
        assert_eq!(omega_at(&per, &mut st, 3), 0.85);
        assert_eq!(omega_at(&per, &mut st, 4), 0.5);
        assert_eq!(omega_at(&per, &mut st, 0), 0.85);
        assert_eq!(omega_at(&per, &mut st, -3), 0.85);
    }

    #[test]
    fn consume_is_idempotent_and_two_sided() {
        let mut st = CookieState::<f64>::new(0);
        st.consume(3);
        assert_eq!(st.consumed_sites(), vec![3]);
        st.consume(3);
        assert_eq!(st.consumed_sites(), vec![3]);
        st.consume(-1);
        assert_eq!(st.consumed_sites(), vec![-1, 3]);
    }

    #[test]
    fn iid_sites_realize_once() {
        let e = env("iid:0.5:0.5,0.9:0.5");
        let mut st = CookieState::new(11);
        let first: Vec<f64> = (-50..50).map(|x| base_omega(&e, &mut st, x)).collect();
        let again: Vec<f64> = (-50..50).rev().map(|x| base_omega(&e, &mut st, x)).rev().collect();
        assert_eq!(first, again);
        // Visit order does not matter: a fresh state sees the same values.
        let mut fresh = CookieState::new(11);
        let reversed: Vec<f64> = (-50..50).rev().map(|x| base_omega(&e, &mut fresh, x)).rev().collect();
        assert_eq!(first, reversed);
        assert!(first.iter().any(|&w| w == 0.5) && first.iter().any(|&w| w == 0.9));
    }

    #[test]
    fn classify_examples() {
        let c = classify(&env("homogeneous:2/3"), default_boundary_tol());
        assert_eq!(c.verdict, Verdict::Boundary);
        assert!(c.is_recurrent());
        let exact: EnvironmentSpec<BigRational> = "homogeneous:2/3".parse().unwrap();
        let c = classify(&exact, BigRational::ratio(0, 1));
        assert_eq!(c.criterion_value, BigRational::ratio(2, 1));
        assert_eq!(c.verdict, Verdict::Boundary);

        let c = classify(&env("periodic:0.5,0.5,0.85"), default_boundary_tol());
        assert_eq!(c.verdict, Verdict::Transient);
        assert!((c.criterion_value - 23.0 / 9.0).abs() < 1e-12);
        let exact: EnvironmentSpec<BigRational> = "periodic:0.5,0.5,0.85".parse().unwrap();
        assert_eq!(classify(&exact, BigRational::ratio(0, 1)).criterion_value, BigRational::ratio(23, 9));

        let c = classify(&env("symmetric"), default_boundary_tol());
        assert_eq!((c.verdict, c.criterion_value), (Verdict::Recurrent, 1.0));

        let c = classify(&env("iid:0.5:0.5,0.9:0.5"), default_boundary_tol());
        assert_eq!(c.verdict, Verdict::Transient);
        assert!((c.criterion_value - 5.0).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_input() {
        assert!("homogeneous:1".parse::<EnvironmentSpec<f64>>().is_err());
        assert!("homogeneous:0.4".parse::<EnvironmentSpec<f64>>().is_err());
        assert!("periodic:".parse::<EnvironmentSpec<f64>>().is_err());
        assert!("iid:0.6:0.5".parse::<EnvironmentSpec<f64>>().is_err());
        assert!("iid:0.6:0,0.7:1".parse::<EnvironmentSpec<f64>>().is_err());
        assert!("walk:0.6".parse::<EnvironmentSpec<f64>>().is_err());
        assert!(EnvironmentSpec::<f64>::periodic(vec![]).is_err());
    }

    #[test]
    fn grammar_and_json_round_trip() {
        for s in ["homogeneous:0.8", "periodic:0.6,0.9", "iid:0.5:0.25,0.9:0.75", "symmetric"] {
            let e = env(s);
            assert_eq!(e.to_string(), s);
            let json = serde_json::to_string(&e).unwrap();
            let back: EnvironmentSpec<f64> = serde_json::from_str(&json).unwrap();
            assert_eq!(back, e);
        }
        assert_eq!(
            serde_json::to_string(&env("iid:0.5:0.5,0.9:0.5")).unwrap(),
            r#"{"variant":"iid","params":[[0.5,0.5],[0.9,0.5]]}"#
        );
        assert!(serde_json::from_str::<EnvironmentSpec<f64>>(r#"{"variant":"homogeneous","params":[1.5]}"#).is_err());
    }

    #[test]
    fn dominance_checks() {
        assert!(env("symmetric").check_dominated_by(&env("homogeneous:0.8")).is_ok());
        assert!(env("homogeneous:0.7").check_dominated_by(&env("homogeneous:0.9")).is_ok());
        assert!(env("homogeneous:0.9").check_dominated_by(&env("homogeneous:0.7")).is_err());
        assert!(env("periodic:0.6,0.9").check_dominated_by(&env("periodic:0.7,0.8,0.9,0.9")).is_err());
        assert!(env("periodic:0.6,0.8").check_dominated_by(&env("periodic:0.7,0.9,0.7,0.8")).is_ok());
        assert!(env("iid:0.5:0.5,0.9:0.5").check_dominated_by(&env("iid:0.6:0.4,0.9:0.6")).is_ok());
        assert!(env("iid:0.5:0.2,0.9:0.8").check_dominated_by(&env("iid:0.6:0.4,0.9:0.6")).is_err());
        assert!(env("iid:0.5:0.2,0.7:0.8").check_dominated_by(&env("homogeneous:0.7")).is_ok());
    }

    proptest! {
        #[test]
        fn periodic_criterion_is_rotation_invariant(
            values in prop::collection::vec(0.5f64..0.99, 1..8),
            shift in 0usize..8,
        ) {
            let mut rotated = values.clone();
            rotated.rotate_left(shift % values.len());
            let a = classify(&EnvironmentSpec::periodic(values).unwrap(), 1e-12);
            let b = classify(&EnvironmentSpec::periodic(rotated).unwrap(), 1e-12);
            prop_assert!((a.criterion_value - b.criterion_value).abs() < 1e-9);
        }

        #[test]
        fn homogeneous_transient_iff_above_two_thirds(p in 0.5f64..0.999) {
            let c = classify(&EnvironmentSpec::homogeneous(p).unwrap(), 1e-12);
            prop_assert_eq!(c.verdict == Verdict::Transient, p > 2.0 / 3.0 + 1e-12);
        }

        #[test]
        fn omega_stays_in_range(seed in any::<u64>(), sites in prop::collection::vec(-1000i64..1000, 1..50)) {
            let e = env("iid:0.5:0.3,0.75:0.3,0.95:0.4");
            let mut st = CookieState::new(seed);
            for (i, s) in sites.iter().enumerate() {
                if i % 3 == 0 { st.consume(*s); }
                let w = omega_at(&e, &mut st, *s);
                prop_assert!((0.5..1.0).contains(&w));
            }
        }
    }

    #[test]
    fn exact_scalars_convert() {
        let exact: EnvironmentSpec<BigRational> = "iid:1/2:1/3,9/10:2/3".parse().unwrap();
        let approx: EnvironmentSpec<f64> = exact.convert().unwrap();
        assert_eq!(approx, env("iid:0.5:0.3333333333333333,0.9:0.6666666666666666"));
        assert!(BigRational::threshold_slack() == BigRational::ratio(0, 1));
    }
}
