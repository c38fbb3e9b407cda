//! Test functions and semicircle-law functionals.
//!
//! The semicircle law `nu` has density `sqrt(4 - x^2) / (2 pi)` on `[-2, 2]`.
//! Under `x = 2 cos(theta)` it becomes `(2/pi) sin^2(theta) d theta` on
//! `[0, pi]`, which is what every quadrature below works with.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::Beta;

/// Highest polynomial degree accepted.
pub const MAX_POLY_DEGREE: usize = 32;
/// Default Gauss–Chebyshev node count.
pub const DEFAULT_NODES: usize = 256;
const MAX_NODES: usize = 1 << 14;
/// Two successive quadrature refinements closer than this are accepted.
pub const QUADRATURE_TOL: f64 = 1e-10;
/// The two sigma_1^2 routes must agree to this tolerance.
pub const SIGMA1_ROUTE_TOL: f64 = 1e-8;
/// Relative Chebyshev tail criterion.
pub const CHEB_TAIL_TOL: f64 = 1e-10;
pub const CHEB_MAX_ORDER: usize = 4096;
/// Slack allowed on `nu(f^2) - nu(f)^2 >= 0`.
pub const VARIANCE_SLACK: f64 = 1e-12;

/// One level `gamma` on the half-open interval `(lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Representation {
    /// `sum_k c_k x^k`.
    Polynomial(Vec<f64>),
    /// `sum_m gamma_m 1_{(a_m, b_m]}(x)` with `a_1 < b_1 <= a_2 < ...`.
    PiecewiseConstant(Vec<Step>),
    /// `sum_k c_k T_k(x / 2)`, Chebyshev polynomials rescaled to `[-2, 2]`.
    Chebyshev(Vec<f64>),
}

/// A validated test function `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TestFunction {
    repr: Representation,
}

impl TestFunction {
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::arg("polynomial needs at least one coefficient"));
        }
        if coeffs.len() > MAX_POLY_DEGREE + 1 {
            return Err(Error::arg(format!(
                "polynomial degree {} exceeds {MAX_POLY_DEGREE}",
                coeffs.len() - 1
            )));
        }
        check_finite(&coeffs)?;
        Ok(TestFunction {
            repr: Representation::Polynomial(coeffs),
        })
    }

    pub fn step(steps: Vec<Step>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::arg("step function needs at least one interval"));
        }
        for s in &steps {
            check_finite(&[s.lo, s.hi, s.level])?;
            if !(s.lo < s.hi) {
                return Err(Error::arg(format!("empty interval ({}, {}]", s.lo, s.hi)));
            }
        }
        for w in steps.windows(2) {
            if w[0].hi > w[1].lo {
                return Err(Error::arg(format!(
                    "intervals out of order: ({}, {}] then ({}, {}]",
                    w[0].lo, w[0].hi, w[1].lo, w[1].hi
                )));
            }
        }
        Ok(TestFunction {
            repr: Representation::PiecewiseConstant(steps),
        })
    }

    pub fn chebyshev(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::arg("Chebyshev series needs at least one coefficient"));
        }
        check_finite(&coeffs)?;
        Ok(TestFunction {
            repr: Representation::Chebyshev(coeffs),
        })
    }

    /// `f(x) = x`.
    pub fn identity() -> Self {
        TestFunction::polynomial(vec![0.0, 1.0]).expect("valid")
    }

    pub fn constant(c: f64) -> Self {
        TestFunction::polynomial(vec![c]).expect("valid")
    }

    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        TestFunction::polynomial(c).expect("valid degree")
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self.repr, Representation::PiecewiseConstant(_))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.repr {
            Representation::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
            Representation::PiecewiseConstant(steps) => steps
                .iter()
                .find(|s| s.lo < x && x <= s.hi)
                .map_or(0.0, |s| s.level),
            Representation::Chebyshev(c) => clenshaw(c, 0.5 * x),
        }
    }

    /// `f'(x)` from the representation; `None` for step functions.
    pub fn derivative(&self, x: f64) -> Option<f64> {
        match &self.repr {
            Representation::Polynomial(c) => Some(
                c.iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, &ck)| acc * x + k as f64 * ck),
            ),
            Representation::PiecewiseConstant(_) => None,
            Representation::Chebyshev(c) => {
                // d/dx T_k(x/2) = (k/2) U_{k-1}(x/2)
                let u = 0.5 * x;
                let (mut prev, mut cur) = (0.0, 1.0); // U_{-1}, U_0
                let mut acc = 0.0;
                for (k, &ck) in c.iter().enumerate().skip(1) {
                    acc += ck * k as f64 * cur;
                    let next = 2.0 * u * cur - prev;
                    prev = cur;
                    cur = next;
                }
                Some(0.5 * acc)
            }
        }
    }

    /// Polynomial degree, or the series length minus one.
    pub fn degree(&self) -> Option<usize> {
        match &self.repr {
            Representation::Polynomial(c) | Representation::Chebyshev(c) => Some(c.len() - 1),
            Representation::PiecewiseConstant(_) => None,
        }
    }
}

fn check_finite(xs: &[f64]) -> Result<()> {
    if let Some(x) = xs.iter().find(|x| !x.is_finite()) {
        return Err(Error::arg(format!("non-finite parameter {x}")));
    }
    Ok(())
}

/// `sum_k c_k T_k(u)`.
fn clenshaw(c: &[f64], u: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = ck + 2.0 * u * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] + u * b1 - b2
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Representation::Polynomial(c) => write!(f, "poly:{}", join(c)),
            Representation::Chebyshev(c) => write!(f, "cheb:{}", join(c)),
            Representation::PiecewiseConstant(steps) => {
                let parts: Vec<String> = steps
                    .iter()
                    .map(|s| format!("{},{},{}", s.lo, s.hi, s.level))
                    .collect();
                write!(f, "step:{}", parts.join(";"))
            }
        }
    }
}

fn parse_list(body: &str) -> Result<Vec<f64>> {
    body.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .map_err(|_| Error::arg(format!("bad number {t:?} in test function")))
        })
        .collect()
}

impl FromStr for TestFunction {
    type Err = Error;

    /// `poly:c0,c1,...`, `step:a1,b1,g1;a2,b2,g2;...` or `cheb:c0,c1,...`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, body) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::arg(format!("test function {s:?} lacks a 'kind:' prefix")))?;
        match kind.trim() {
            "poly" => TestFunction::polynomial(parse_list(body)?),
            "cheb" => TestFunction::chebyshev(parse_list(body)?),
            "step" => {
                let steps = body
                    .split(';')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| match parse_list(p)?.as_slice() {
                        &[lo, hi, level] => Ok(Step { lo, hi, level }),
                        other => Err(Error::arg(format!(
                            "step piece needs a,b,gamma; got {} numbers",
                            other.len()
                        ))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                TestFunction::step(steps)
            }
            other => Err(Error::arg(format!(
                "unknown test function kind {other:?} (expected poly, step or cheb)"
            ))),
        }
    }
}

impl TryFrom<String> for TestFunction {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TestFunction> for String {
    fn from(f: TestFunction) -> String {
        f.to_string()
    }
}

/// Semicircle CDF `F(s) = nu((-inf, s])`.
pub fn semicircle_cdf(s: f64) -> f64 {
    if s <= -2.0 {
        0.0
    } else if s >= 2.0 {
        1.0
    } else {
        0.5 + s * (4.0 - s * s).sqrt() / (4.0 * PI) + (0.5 * s).asin() / PI
    }
}

/// `F^{-1}(p)` by bisection to `1e-12`.
pub fn semicircle_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return -2.0;
    }
    if p >= 1.0 {
        return 2.0;
    }
    let (mut lo, mut hi) = (-2.0f64, 2.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if semicircle_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `nu(g)` by `nodes`-point Gauss–Chebyshev quadrature of the second kind,
/// exact for polynomials of degree below `2 * nodes`.
pub fn gauss_chebyshev(g: impl Fn(f64) -> f64, nodes: usize) -> f64 {
    let h = PI / (nodes as f64 + 1.0);
    let w = 2.0 / (nodes as f64 + 1.0);
    (1..=nodes)
        .map(|j| {
            let theta = j as f64 * h;
            let s = theta.sin();
            w * s * s * g(2.0 * theta.cos())
        })
        .sum()
}

fn refine(mut eval: impl FnMut(usize) -> f64, start: usize) -> f64 {
    let mut nodes = start;
    let mut prev = eval(nodes);
    while nodes < MAX_NODES {
        nodes *= 2;
        let next = eval(nodes);
        if (next - prev).abs() < QUADRATURE_TOL {
            return next;
        }
        prev = next;
    }
    prev
}

/// Mass of `(lo, hi]` under `nu`.
fn interval_mass(lo: f64, hi: f64) -> f64 {
    semicircle_cdf(hi) - semicircle_cdf(lo)
}

/// `nu(f)`.
pub fn semicircle_integral(f: &TestFunction) -> f64 {
    match &f.repr {
        Representation::PiecewiseConstant(steps) => {
            steps.iter().map(|s| s.level * interval_mass(s.lo, s.hi)).sum()
        }
        _ => refine(|n| gauss_chebyshev(|x| f.eval(x), n), DEFAULT_NODES),
    }
}

/// `nu(f^2)`.
pub fn semicircle_integral_sq(f: &TestFunction) -> f64 {
    match &f.repr {
        Representation::PiecewiseConstant(steps) => steps
            .iter()
            .map(|s| s.level * s.level * interval_mass(s.lo, s.hi))
            .sum(),
        _ => refine(
            |n| {
                gauss_chebyshev(
                    |x| {
                        let y = f.eval(x);
                        y * y
                    },
                    n,
                )
            },
            DEFAULT_NODES,
        ),
    }
}

/// `sigma_0^2 = (2/beta)(nu(f^2) - nu(f)^2)`.
pub fn sigma0_sq(nu_f: f64, nu_f2: f64, beta: Beta) -> Result<f64> {
    let var = nu_f2 - nu_f * nu_f;
    if var < -VARIANCE_SLACK {
        return Err(Error::arg(format!(
            "nu(f^2) = {nu_f2} is below nu(f)^2 = {}",
            nu_f * nu_f
        )));
    }
    // cancellation noise from a (near-)constant f is a zero variance
    if var <= 64.0 * f64::EPSILON * nu_f2.abs() {
        return Ok(0.0);
    }
    Ok(2.0 / beta.value() * var)
}

/// Chebyshev coefficients `c_k` of `x -> f(x)` on `[-2, 2]`, i.e.
/// `f(x) = sum c_k T_k(x/2)`, from a discrete cosine sum over `2K`
/// Chebyshev nodes. `K` is doubled until `|c_K| <= 1e-10 max|c|`.
pub fn chebyshev_coeffs(f: &TestFunction, order: usize) -> Result<Vec<f64>> {
    if order < 1 {
        return Err(Error::arg("Chebyshev order must be at least 1"));
    }
    let mut k_max = order;
    loop {
        let m = 2 * k_max;
        let nodes: Vec<f64> = (0..m)
            .map(|j| (j as f64 + 0.5) * PI / m as f64)
            .collect();
        let values: Vec<f64> = nodes.iter().map(|t| f.eval(2.0 * t.cos())).collect();
        let coeffs: Vec<f64> = (0..=k_max)
            .map(|k| {
                let s: f64 = nodes
                    .iter()
                    .zip(&values)
                    .map(|(t, v)| v * (k as f64 * t).cos())
                    .sum();
                let scale = if k == 0 { 1.0 } else { 2.0 };
                scale * s / m as f64
            })
            .collect();
        let biggest = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        if coeffs[k_max].abs() <= CHEB_TAIL_TOL * biggest {
            return Ok(coeffs);
        }
        if k_max >= CHEB_MAX_ORDER {
            return Err(Error::Convergence(format!(
                "Chebyshev tail |c_{k_max}| = {:e} still above {CHEB_TAIL_TOL:e} * max|c|",
                coeffs[k_max].abs()
            )));
        }
        k_max = (2 * k_max).min(CHEB_MAX_ORDER);
    }
}

fn require_smooth(f: &TestFunction) -> Result<()> {
    if f.is_smooth() {
        Ok(())
    } else {
        Err(Error::Unsupported(
            "sigma_1^2 requires a C^1 test function; step functions are not supported".into(),
        ))
    }
}

/// `sigma_1^2` through the Chebyshev expansion: `(1/(2 beta)) sum k c_k^2`.
pub fn sigma1_sq_chebyshev(f: &TestFunction, beta: Beta) -> Result<f64> {
    require_smooth(f)?;
    let coeffs = match &f.repr {
        Representation::Chebyshev(c) => c.clone(),
        _ => chebyshev_coeffs(f, f.degree().unwrap_or(1).max(8))?,
    };
    let sum: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| k as f64 * c * c)
        .sum();
    Ok(sum / (2.0 * beta.value()))
}

/// `sigma_1^2` from the double integral with weight
/// `(4 - xy) / (sqrt(4 - x^2) sqrt(4 - y^2))`, by a tensor midpoint rule in
/// `(theta, phi)` after `x = 2 cos(theta)`, `y = 2 cos(phi)`. The removable
/// diagonal of the difference quotient takes the value `f'(x)^2`.
pub fn sigma1_sq_quadrature(f: &TestFunction, beta: Beta) -> Result<f64> {
    require_smooth(f)?;
    let eval = |nodes: usize| {
        let xs: Vec<f64> = (0..nodes)
            .map(|j| 2.0 * ((j as f64 + 0.5) * PI / nodes as f64).cos())
            .collect();
        let fx: Vec<f64> = xs.iter().map(|&x| f.eval(x)).collect();
        let dfx: Vec<f64> = xs.iter().map(|&x| f.derivative(x).unwrap_or(0.0)).collect();
        let mut total = 0.0;
        for j in 0..nodes {
            total += dfx[j] * dfx[j] * (4.0 - xs[j] * xs[j]);
            let mut row = 0.0;
            for l in j + 1..nodes {
                let q = (fx[j] - fx[l]) / (xs[j] - xs[l]);
                row += q * q * (4.0 - xs[j] * xs[l]);
            }
            total += 2.0 * row;
        }
        total / (2.0 * beta.value() * (nodes * nodes) as f64)
    };
    Ok(refine(eval, DEFAULT_NODES))
}

/// `sigma_1^2` for the Gaussian ensembles (semicircle limit), computed by
/// both routes; they must agree within [`SIGMA1_ROUTE_TOL`].
pub fn sigma1_sq_gaussian(f: &TestFunction, beta: Beta) -> Result<f64> {
    let cheb = sigma1_sq_chebyshev(f, beta)?;
    let quad = sigma1_sq_quadrature(f, beta)?;
    if (cheb - quad).abs() > SIGMA1_ROUTE_TOL * cheb.abs().max(1.0) {
        return Err(Error::Numeric(format!(
            "sigma_1^2 routes disagree: Chebyshev {cheb}, quadrature {quad}"
        )));
    }
    Ok(cheb)
}

/// The semicircle functionals of one test function.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemicircleSummary {
    pub nu_f: f64,
    pub nu_f2: f64,
    pub sigma0_sq: f64,
    /// `None` when `f` is not C^1.
    pub sigma1_sq: Option<f64>,
}

pub fn semicircle_summary(f: &TestFunction, beta: Beta) -> Result<SemicircleSummary> {
    let nu_f = semicircle_integral(f);
    let nu_f2 = semicircle_integral_sq(f);
    let sigma1_sq = match sigma1_sq_gaussian(f, beta) {
        Ok(v) => Some(v),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(SemicircleSummary {
        nu_f,
        nu_f2,
        sigma0_sq: sigma0_sq(nu_f, nu_f2, beta)?,
        sigma1_sq,
    })
}
