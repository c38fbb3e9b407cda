//! Exact finite-n moments of squared Haar entries and the covariances they
//! induce.
//!
//! A squared Haar row is `Dir_n(beta')`, which pins down the four mixed
//! second moments below. Everything else here is a bilinear combination of
//! them, so each formula is written once, generically, and evaluated either
//! in exact rational arithmetic or in `f64`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::floor_count;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentCase {
    /// `E|U_ij|^2`
    SingleSquare,
    /// `E|U_ij|^4`
    FourthPower,
    /// `E|U_ij|^2 |U_ik|^2`, `j != k`
    SameRowPair,
    /// `E|U_ij|^2 |U_mk|^2`, `m != i`, `j != k`
    CrossRowPair,
}

impl MomentCase {
    pub const ALL: [MomentCase; 4] = [
        MomentCase::SingleSquare,
        MomentCase::FourthPower,
        MomentCase::SameRowPair,
        MomentCase::CrossRowPair,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MomentCase::SingleSquare => "single_square",
            MomentCase::FourthPower => "fourth_power",
            MomentCase::SameRowPair => "same_row_pair",
            MomentCase::CrossRowPair => "cross_row_pair",
        }
    }

    fn min_n(self) -> u64 {
        match self {
            MomentCase::SingleSquare | MomentCase::FourthPower => 1,
            MomentCase::SameRowPair | MomentCase::CrossRowPair => 2,
        }
    }
}

/// Dirichlet parameter `beta' = beta / 2`, exact when rational.
#[derive(Clone, Debug, PartialEq)]
pub enum BetaPrime {
    Rational(BigRational),
    Real(f64),
}

impl BetaPrime {
    pub fn from_beta_index(beta: u32) -> Self {
        BetaPrime::Rational(BigRational::new(BigInt::from(beta), BigInt::from(2)))
    }

    pub fn value(&self) -> f64 {
        match self {
            BetaPrime::Rational(r) => rational_to_f64(r),
            BetaPrime::Real(x) => *x,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            BetaPrime::Rational(r) => r.is_positive(),
            BetaPrime::Real(x) => *x > 0.0 && x.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::arg("beta' must be positive"))
        }
    }
}

impl FromStr for BetaPrime {
    type Err = Error;
    /// `"3/2"` or `"1"` parse as exact rationals, anything else as a float.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bp = if let Ok(r) = s.parse::<BigRational>() {
            BetaPrime::Rational(r)
        } else {
            BetaPrime::Real(
                s.parse()
                    .map_err(|_| Error::arg(format!("bad beta' value {s:?}")))?,
            )
        };
        bp.validate()?;
        Ok(bp)
    }
}

impl fmt::Display for BetaPrime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BetaPrime::Rational(r) => write!(f, "{r}"),
            BetaPrime::Real(x) => write!(f, "{x}"),
        }
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A moment value: exact when `beta'` is rational, always with a decimal
/// rendering.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactValue {
    pub exact: Option<BigRational>,
    pub value: f64,
}

impl fmt::Display for ExactValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.exact {
            Some(r) => write!(f, "{r} ({:.17})", self.value),
            None => write!(f, "{:.17}", self.value),
        }
    }
}

/// Arithmetic the formulas need; implemented by `f64` and `BigRational`.
pub trait Scalar: Num + Clone + FromPrimitive {}
impl<T: Num + Clone + FromPrimitive> Scalar for T {}

fn int<T: Scalar>(k: u64) -> T {
    T::from_u64(k).expect("integer fits")
}

/// The four moments for dimension `n` (caller checks `n` against the case).
pub fn moment<T: Scalar>(case: MomentCase, n: u64, bp: &T) -> T {
    let nn: T = int(n);
    let denom = nn.clone() * (bp.clone() * nn.clone() + T::one());
    match case {
        MomentCase::SingleSquare => T::one() / nn,
        MomentCase::FourthPower => (T::one() + bp.clone()) / denom,
        MomentCase::SameRowPair => bp.clone() / denom,
        MomentCase::CrossRowPair => {
            let nm1: T = int(n - 1);
            (nm1.clone() * bp.clone() + T::one()) / (nm1 * denom)
        }
    }
}

pub fn haar_moment(case: MomentCase, n: u64, beta_prime: &BetaPrime) -> Result<ExactValue> {
    beta_prime.validate()?;
    if n < case.min_n() {
        return Err(Error::arg(format!(
            "{} needs n >= {}, got {n}",
            case.name(),
            case.min_n()
        )));
    }
    Ok(match beta_prime {
        BetaPrime::Rational(r) => {
            let v = moment(case, n, r);
            ExactValue {
                value: rational_to_f64(&v),
                exact: Some(v),
            }
        }
        BetaPrime::Real(x) => ExactValue {
            exact: None,
            value: moment(case, n, x),
        },
    })
}

/// `Cov_H(X_s(f), X_t(f))` for fixed eigenvalues, in terms of the row
/// counts `s_n <= t_n`, `S1 = sum f(lambda)` and `S2 = sum f(lambda)^2`.
pub fn partial_trace_cov_counts<T: Scalar>(s_n: u64, t_n: u64, n: u64, bp: &T, s1: &T, s2: &T) -> T {
    let (s_n, t_n) = if s_n <= t_n { (s_n, t_n) } else { (t_n, s_n) };
    if s_n == 0 || n < 2 {
        return T::zero();
    }
    let nn: T = int(n);
    let bn1 = bp.clone() * nn.clone() + T::one();
    let s1sq = s1.clone() * s1.clone();
    let a = s1sq.clone() / (nn.clone() * bn1.clone()) - s2.clone() / bn1.clone();
    let first = if t_n >= 1 {
        let coef: T = int::<T>(s_n) * int::<T>(t_n - 1) / (nn.clone() * int::<T>(n - 1));
        coef * a.clone()
    } else {
        T::zero()
    };
    let second = int::<T>(s_n) / nn * (T::zero() - a);
    first + second
}

/// Finite-n covariance of the partial trace under the Haar average.
/// Arguments with `s > t` are swapped; `n = 1` gives 0.
pub fn exact_cov_partial_trace(s: f64, t: f64, n: usize, beta_prime: f64, s1: f64, s2: f64) -> Result<f64> {
    check_unit("s", s)?;
    check_unit("t", t)?;
    check_n(n)?;
    if !(beta_prime > 0.0) {
        return Err(Error::arg("beta' must be positive"));
    }
    let (s_n, t_n) = (floor_count(s, n) as u64, floor_count(t, n) as u64);
    Ok(partial_trace_cov_counts(s_n, t_n, n as u64, &beta_prime, &s1, &s2))
}

/// Rational version of [`exact_cov_partial_trace`] on explicit row counts.
pub fn exact_cov_partial_trace_rational(
    s_n: u64,
    t_n: u64,
    n: u64,
    beta_prime: &BigRational,
    s1: &BigRational,
    s2: &BigRational,
) -> BigRational {
    partial_trace_cov_counts(s_n, t_n, n, beta_prime, s1, s2)
}

/// `Cov_H(W~_{s,t}, W~_{s',t'})` for block counts `a = floor(sn)`,
/// `b = floor(tn)`, `a2 = floor(s'n)`, `b2 = floor(t'n)`.
///
/// The pairs `(i, j)`, `(l, k)` split by whether `i = l` and whether
/// `j = k`; same-row and same-column pairs share the moment `SameRowPair`
/// because the transpose of a Haar matrix is Haar.
pub fn bivariate_cov_counts<T: Scalar>(a: u64, b: u64, a2: u64, b2: u64, n: u64, bp: &T) -> T {
    if n < 2 || a == 0 || b == 0 || a2 == 0 || b2 == 0 {
        return T::zero();
    }
    let same_i = a.min(a2);
    let same_j = b.min(b2);
    let diff_i = a * a2 - same_i;
    let diff_j = b * b2 - same_j;
    let fourth = moment(MomentCase::FourthPower, n, bp);
    let pair = moment(MomentCase::SameRowPair, n, bp);
    let cross = moment(MomentCase::CrossRowPair, n, bp);
    let nn: T = int(n);
    let mean_sq = int::<T>(a * b) * int::<T>(a2 * b2) / (nn.clone() * nn);
    fourth * int(same_i * same_j)
        + pair.clone() * int(same_i * diff_j)
        + pair * int(diff_i * same_j)
        + cross * int(diff_i) * int(diff_j)
        - mean_sq
}

pub fn exact_cov_bivariate(
    s: f64,
    s2: f64,
    t: f64,
    t2: f64,
    n: usize,
    beta_prime: f64,
) -> Result<f64> {
    for (name, x) in [("s", s), ("s'", s2), ("t", t), ("t'", t2)] {
        check_unit(name, x)?;
    }
    check_n(n)?;
    if !(beta_prime > 0.0) {
        return Err(Error::arg("beta' must be positive"));
    }
    let c = |x| floor_count(x, n) as u64;
    Ok(bivariate_cov_counts(c(s), c(t), c(s2), c(t2), n as u64, &beta_prime))
}

/// [`exact_cov_partial_trace`] for a possibly rational `beta'`. With a
/// rational `beta'` the binary values of `s1`, `s2` are carried exactly.
pub fn exact_cov_partial_trace_value(
    s: f64,
    t: f64,
    n: usize,
    beta_prime: &BetaPrime,
    s1: f64,
    s2: f64,
) -> Result<ExactValue> {
    beta_prime.validate()?;
    let value = exact_cov_partial_trace(s, t, n, beta_prime.value(), s1, s2)?;
    let exact = match beta_prime {
        BetaPrime::Rational(bp) => {
            let to_q = |x: f64| {
                BigRational::from_float(x).ok_or_else(|| Error::arg(format!("{x} is not finite")))
            };
            let (s_n, t_n) = (floor_count(s, n) as u64, floor_count(t, n) as u64);
            Some(partial_trace_cov_counts(s_n, t_n, n as u64, bp, &to_q(s1)?, &to_q(s2)?))
        }
        BetaPrime::Real(_) => None,
    };
    Ok(ExactValue {
        value: exact.as_ref().map_or(value, rational_to_f64),
        exact,
    })
}

/// [`exact_cov_bivariate`] for a possibly rational `beta'`.
pub fn exact_cov_bivariate_value(
    s: f64,
    s2: f64,
    t: f64,
    t2: f64,
    n: usize,
    beta_prime: &BetaPrime,
) -> Result<ExactValue> {
    beta_prime.validate()?;
    let value = exact_cov_bivariate(s, s2, t, t2, n, beta_prime.value())?;
    let exact = match beta_prime {
        BetaPrime::Rational(bp) => {
            let c = |x| floor_count(x, n) as u64;
            Some(bivariate_cov_counts(c(s), c(t), c(s2), c(t2), n as u64, bp))
        }
        BetaPrime::Real(_) => None,
    };
    Ok(ExactValue {
        value: exact.as_ref().map_or(value, rational_to_f64),
        exact,
    })
}

/// `n -> infinity` limit of the partial-trace covariance:
/// `(s ^ t - s t) (nu(f^2) - nu(f)^2) / beta'`.
pub fn limit_of_exact_cov(s: f64, t: f64, beta_prime: f64, nu_f: f64, nu_f2: f64) -> Result<f64> {
    check_unit("s", s)?;
    check_unit("t", t)?;
    if !(beta_prime > 0.0) {
        return Err(Error::arg("beta' must be positive"));
    }
    Ok((s.min(t) - s * t) * (nu_f2 - nu_f * nu_f) / beta_prime)
}

/// `E|U_ij|^2 = E|U_ij|^2|U_ik|^2 + (n-1) E|U_ij|^2|U_mk|^2`, checked
/// exactly. Returns the two sides.
pub fn moment_consistency(n: u64, bp: &BigRational) -> (BigRational, BigRational) {
    let lhs = moment(MomentCase::SingleSquare, n, bp);
    let rhs = moment(MomentCase::SameRowPair, n, bp)
        + moment(MomentCase::CrossRowPair, n, bp) * BigRational::from_integer(BigInt::from(n - 1));
    (lhs, rhs)
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::arg(format!("{name} = {x} is outside [0, 1]")));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::arg("dimension must be at least 1"));
    }
    Ok(())
}

/// `p/q` for small integers, for tests and CLI output.
pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

impl ExactValue {
    pub fn is_exactly(&self, r: &BigRational) -> bool {
        self.exact.as_ref() == Some(r)
    }
}
