//! Eigenvalue sources: the Gaussian beta-ensembles (tridiagonal model and a
//! dense cross-check), deterministic semicircle quantiles, iid draws and
//! plain-text files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{check_dim, check_positive, chi_with, normal_with, Beta};
use crate::seed::Seed;
use crate::testfn::{self, semicircle_quantile, Representation, TestFunction};

/// Default eigenvalue tolerance, relative to the matrix max-norm.
pub const DEFAULT_EIG_TOL: f64 = 1e-12;
/// QL sweeps allowed per eigenvalue.
const MAX_QL_SWEEPS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenSource {
    BetaHermite,
    DenseGaussian,
    Quantile,
    Iid,
    File,
}

/// Eigenvalues `lambda_1 <= ... <= lambda_n`, all finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueVector {
    values: Vec<f64>,
    source: EigenSource,
}

impl EigenvalueVector {
    /// Validates finiteness and sorts ascending.
    pub fn new(mut values: Vec<f64>, source: EigenSource) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::arg("no eigenvalues"));
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::arg(format!("non-finite eigenvalue {x}")));
        }
        values.sort_by(f64::total_cmp);
        Ok(EigenvalueVector { values, source })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn source(&self) -> EigenSource {
        self.source
    }

    /// `X_1(f) = sum_k f(lambda_k)`.
    pub fn trace(&self, f: &TestFunction) -> f64 {
        self.values.iter().map(|&x| f.eval(x)).sum()
    }

    /// `sum_k f(lambda_k)^2`.
    pub fn trace_sq(&self, f: &TestFunction) -> f64 {
        self.values
            .iter()
            .map(|&x| {
                let y = f.eval(x);
                y * y
            })
            .sum()
    }

    /// The same support points in descending order (not re-sorted).
    pub fn reversed(&self) -> Vec<f64> {
        self.values.iter().rev().copied().collect()
    }
}

/// Symmetric tridiagonal matrix with nonnegative off-diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalMatrix {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || offdiag.len() + 1 != diag.len() {
            return Err(Error::arg("tridiagonal: need n >= 1 diagonal and n-1 off-diagonal entries"));
        }
        if offdiag.iter().any(|&e| !(e >= 0.0)) {
            return Err(Error::arg("tridiagonal: off-diagonal entries must be nonnegative"));
        }
        Ok(TridiagonalMatrix { diag, offdiag })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    fn max_norm(&self) -> f64 {
        self.diag
            .iter()
            .chain(&self.offdiag)
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Tridiagonal model whose eigenvalues have joint density proportional to
/// `prod |l_i - l_j|^beta prod exp(-n beta l_i^2 / 4)`: diagonal
/// `N(0, 2/(n beta))`, `k`-th off-diagonal `chi_{beta (n-k)} / sqrt(n beta)`.
pub fn beta_hermite_with<R: Rng + ?Sized>(rng: &mut R, n: usize, beta: f64) -> TridiagonalMatrix {
    let nb = n as f64 * beta;
    let sd = (2.0 / nb).sqrt();
    let scale = 1.0 / nb.sqrt();
    let diag = (0..n).map(|_| sd * normal_with(rng)).collect();
    let offdiag = (1..n)
        .map(|k| scale * chi_with(rng, beta * (n - k) as f64))
        .collect();
    TridiagonalMatrix { diag, offdiag }
}

pub fn sample_beta_hermite_tridiag(n: usize, beta: f64, seed: Seed) -> Result<TridiagonalMatrix> {
    check_dim(n)?;
    check_positive("beta", beta)?;
    Ok(beta_hermite_with(&mut seed.rng(), n, beta))
}

/// Dense symmetric (beta = 1) or Hermitian (beta = 2) matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseHermitian {
    pub n: usize,
    pub entries: Vec<Complex64>,
}

impl DenseHermitian {
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).re).sum()
    }

    /// `tr(A^k) / n` for `k = 1..=max_power`, by repeated multiplication.
    pub fn normalized_power_traces(&self, max_power: usize) -> Vec<f64> {
        let n = self.n;
        let mut power = self.entries.clone();
        let mut out = Vec::with_capacity(max_power);
        for p in 1..=max_power {
            if p > 1 {
                let mut next = vec![Complex64::new(0.0, 0.0); n * n];
                for i in 0..n {
                    for k in 0..n {
                        let a = power[i * n + k];
                        for j in 0..n {
                            next[i * n + j] += a * self.entries[k * n + j];
                        }
                    }
                }
                power = next;
            }
            out.push((0..n).map(|i| power[i * n + i].re).sum::<f64>() / n as f64);
        }
        out
    }
}

/// Gaussian ensemble with density proportional to `exp(-n beta tr(X^2)/4)`:
/// for beta = 1 diagonal `N(0, 2/n)` and off-diagonal `N(0, 1/n)`; for
/// beta = 2 diagonal `N(0, 1/n)` and off-diagonal real and imaginary parts
/// each `N(0, 1/(2n))`.
pub fn dense_gaussian_with<R: Rng + ?Sized>(rng: &mut R, n: usize, beta: Beta) -> DenseHermitian {
    let nf = n as f64;
    let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in i..n {
            let z = if i == j {
                let sd = match beta {
                    Beta::Orthogonal => (2.0 / nf).sqrt(),
                    Beta::Unitary => (1.0 / nf).sqrt(),
                };
                Complex64::new(sd * normal_with(rng), 0.0)
            } else {
                match beta {
                    Beta::Orthogonal => Complex64::new(normal_with(rng) / nf.sqrt(), 0.0),
                    Beta::Unitary => {
                        let sd = (0.5 / nf).sqrt();
                        Complex64::new(sd * normal_with(rng), sd * normal_with(rng))
                    }
                }
            };
            entries[i * n + j] = z;
            entries[j * n + i] = z.conj();
        }
    }
    DenseHermitian { n, entries }
}

pub fn sample_dense_gaussian(n: usize, beta: Beta, seed: Seed) -> Result<DenseHermitian> {
    check_dim(n)?;
    Ok(dense_gaussian_with(&mut seed.rng(), n, beta))
}

/// Householder reduction of a Hermitian matrix to real symmetric
/// tridiagonal form with nonnegative off-diagonal.
pub fn householder_tridiagonalize(a: &DenseHermitian) -> TridiagonalMatrix {
    let n = a.n;
    let mut m = a.entries.clone();
    let zero = Complex64::new(0.0, 0.0);
    let mut diag = Vec::with_capacity(n);
    let mut offdiag = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n.saturating_sub(1) {
        // x = m[k+1.., k]
        let x: Vec<Complex64> = (k + 1..n).map(|i| m[i * n + k]).collect();
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        diag.push(m[k * n + k].re);
        offdiag.push(norm);
        let x0abs = x[0].norm();
        let phase = if x0abs > 0.0 { x[0] / x0abs } else { Complex64::new(1.0, 0.0) };
        let mut v = x.clone();
        v[0] += phase * norm;
        let v_norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if v_norm2 == 0.0 {
            continue;
        }
        let tau = 2.0 / v_norm2;
        let len = n - k - 1;
        let off = k + 1;
        // p = tau B v
        let mut p = vec![zero; len];
        for (i, pi) in p.iter_mut().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                *pi += m[(off + i) * n + off + j] * vj;
            }
            *pi *= tau;
        }
        // q = p - (tau/2)(v* p) v, with v* p real
        let vp: f64 = v.iter().zip(&p).map(|(a, b)| (a.conj() * b).re).sum();
        let q: Vec<Complex64> = p
            .iter()
            .zip(&v)
            .map(|(pi, vi)| pi - vi * (0.5 * tau * vp))
            .collect();
        for i in 0..len {
            for j in 0..len {
                m[(off + i) * n + off + j] -= v[i] * q[j].conj() + q[i] * v[j].conj();
            }
        }
    }
    diag.push(m[(n - 1) * n + n - 1].re);
    TridiagonalMatrix { diag, offdiag }
}

/// All eigenvalues of a symmetric tridiagonal matrix, ascending, by the
/// implicit QL method with Wilkinson shifts. An off-diagonal entry is
/// deflated once it falls below `tol` times the matrix max-norm (or
/// machine precision relative to its diagonal neighbours).
pub fn tridiag_eigenvalues(m: &TridiagonalMatrix, tol: f64) -> Result<EigenvalueVector> {
    check_positive("tol", tol)?;
    let n = m.n();
    let mut d = m.diag.clone();
    let mut e = m.offdiag.clone();
    e.push(0.0);
    let small = tol * m.max_norm();
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut mm = l;
            while mm + 1 < n {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd || e[mm].abs() <= small {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_QL_SWEEPS {
                return Err(Error::Numeric(format!(
                    "QL iteration did not converge for eigenvalue index {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[mm] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = mm;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite eigenvalue from QL".into()));
    }
    d.sort_by(f64::total_cmp);
    Ok(EigenvalueVector {
        values: d,
        source: EigenSource::BetaHermite,
    })
}

/// `lambda_k = F^{-1}((k - 1/2)/n)` for the semicircle CDF `F`.
pub fn semicircle_quantiles(n: usize) -> Result<EigenvalueVector> {
    check_dim(n)?;
    let half = n / 2;
    let mut values = vec![0.0; n];
    // Fill the lower half and mirror, so the vector is exactly symmetric.
    for k in 0..half {
        let x = semicircle_quantile((k as f64 + 0.5) / n as f64);
        values[k] = x;
        values[n - 1 - k] = -x;
    }
    Ok(EigenvalueVector {
        values,
        source: EigenSource::Quantile,
    })
}

/// Law of iid support points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IidLaw {
    Uniform { a: f64, b: f64 },
    /// `x1` with probability `p`, `x2` otherwise.
    TwoPoint { x1: f64, x2: f64, p: f64 },
}

impl IidLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            IidLaw::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a <= b) {
                    return Err(Error::arg(format!("uniform({a}, {b}) needs finite a <= b")));
                }
            }
            IidLaw::TwoPoint { x1, x2, p } => {
                if !(x1.is_finite() && x2.is_finite() && (0.0..=1.0).contains(&p)) {
                    return Err(Error::arg(format!(
                        "two_point({x1}, {x2}, {p}) needs finite atoms and p in [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            IidLaw::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            IidLaw::TwoPoint { x1, x2, p } => {
                if rng.random::<f64>() < p {
                    x1
                } else {
                    x2
                }
            }
        }
    }
}

impl fmt::Display for IidLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IidLaw::Uniform { a, b } => write!(f, "uniform:{a},{b}"),
            IidLaw::TwoPoint { x1, x2, p } => write!(f, "two_point:{x1},{x2},{p}"),
        }
    }
}

impl FromStr for IidLaw {
    type Err = Error;
    /// `uniform:a,b` or `two_point:x1,x2,p`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, body) = s
            .split_once(':')
            .ok_or_else(|| Error::arg(format!("iid law {s:?} lacks a 'kind:' prefix")))?;
        let nums: Vec<f64> = body
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::arg(format!("bad number in iid law {s:?}")))?;
        let law = match (kind.trim(), nums.as_slice()) {
            ("uniform", &[a, b]) => IidLaw::Uniform { a, b },
            ("two_point", &[x1, x2, p]) => IidLaw::TwoPoint { x1, x2, p },
            _ => return Err(Error::arg(format!("unknown iid law {s:?}"))),
        };
        law.validate()?;
        Ok(law)
    }
}

pub fn eigenvalues_iid_with<R: Rng + ?Sized>(rng: &mut R, n: usize, law: &IidLaw) -> EigenvalueVector {
    let mut values: Vec<f64> = (0..n).map(|_| law.draw(rng)).collect();
    values.sort_by(f64::total_cmp);
    EigenvalueVector {
        values,
        source: EigenSource::Iid,
    }
}

pub fn eigenvalues_iid(n: usize, law: &IidLaw, seed: Seed) -> Result<EigenvalueVector> {
    check_dim(n)?;
    law.validate()?;
    Ok(eigenvalues_iid_with(&mut seed.rng(), n, law))
}

/// One decimal real per line; blank lines and lines starting with `#` are
/// skipped.
pub fn eigenvalues_from_file(path: &Path) -> Result<EigenvalueVector> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg,
        };
        // Accept the Unicode minus sign as well.
        let x: f64 = t
            .replace('\u{2212}', "-")
            .parse()
            .map_err(|_| parse_err(format!("not a number: {t:?}")))?;
        if !x.is_finite() {
            return Err(parse_err(format!("non-finite value {t:?}")));
        }
        values.push(x);
    }
    if values.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "no eigenvalues".into(),
        });
    }
    EigenvalueVector::new(values, EigenSource::File)
}

/// User-selectable eigenvalue source of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Ensemble {
    BetaHermite,
    DenseGaussian,
    Quantile,
    Iid(IidLaw),
    File(PathBuf),
}

impl Ensemble {
    /// Eigenvalues do not change between replicates.
    pub fn is_deterministic(&self) -> bool {
        matches!(self, Ensemble::Quantile | Ensemble::File(_))
    }

    /// The limit measure is the semicircle law.
    pub fn is_semicircle(&self) -> bool {
        matches!(
            self,
            Ensemble::BetaHermite | Ensemble::DenseGaussian | Ensemble::Quantile
        )
    }

    /// Draw `n` eigenvalues. File sources are read on every call; batch
    /// drivers should use [`PreparedEnsemble`].
    pub fn sample(&self, n: usize, beta: Beta, seed: Seed) -> Result<EigenvalueVector> {
        PreparedEnsemble::new(self, n)?.sample(beta, seed)
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ensemble::BetaHermite => write!(f, "beta_hermite"),
            Ensemble::DenseGaussian => write!(f, "dense_gaussian"),
            Ensemble::Quantile => write!(f, "quantile"),
            Ensemble::Iid(law) => write!(f, "iid:{law}"),
            Ensemble::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for Ensemble {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "beta_hermite" => return Ok(Ensemble::BetaHermite),
            "dense_gaussian" => return Ok(Ensemble::DenseGaussian),
            "quantile" => return Ok(Ensemble::Quantile),
            _ => {}
        }
        if let Some(law) = s.strip_prefix("iid:") {
            return Ok(Ensemble::Iid(law.parse()?));
        }
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(Ensemble::File(PathBuf::from(path)));
        }
        Err(Error::arg(format!(
            "unknown ensemble {s:?} (beta_hermite, dense_gaussian, quantile, iid:<law>, file:<path>)"
        )))
    }
}

impl TryFrom<String> for Ensemble {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Ensemble> for String {
    fn from(e: Ensemble) -> String {
        e.to_string()
    }
}

/// An ensemble with its deterministic data (file contents, quantiles)
/// resolved once.
#[derive(Clone, Debug)]
pub struct PreparedEnsemble {
    ensemble: Ensemble,
    n: usize,
    fixed: Option<EigenvalueVector>,
}

impl PreparedEnsemble {
    pub fn new(ensemble: &Ensemble, n: usize) -> Result<Self> {
        check_dim(n)?;
        let fixed = match ensemble {
            Ensemble::Quantile => Some(semicircle_quantiles(n)?),
            Ensemble::File(path) => {
                let v = eigenvalues_from_file(path)?;
                if v.len() != n {
                    return Err(Error::Config(format!(
                        "{} holds {} eigenvalues but n = {n}",
                        path.display(),
                        v.len()
                    )));
                }
                Some(v)
            }
            Ensemble::Iid(law) => {
                law.validate()?;
                None
            }
            _ => None,
        };
        Ok(PreparedEnsemble {
            ensemble: ensemble.clone(),
            n,
            fixed,
        })
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn fixed(&self) -> Option<&EigenvalueVector> {
        self.fixed.as_ref()
    }

    pub fn sample(&self, beta: Beta, seed: Seed) -> Result<EigenvalueVector> {
        if let Some(v) = &self.fixed {
            return Ok(v.clone());
        }
        let mut rng = seed.rng();
        match &self.ensemble {
            Ensemble::BetaHermite => {
                let m = beta_hermite_with(&mut rng, self.n, beta.value());
                tridiag_eigenvalues(&m, DEFAULT_EIG_TOL)
            }
            Ensemble::DenseGaussian => {
                let a = dense_gaussian_with(&mut rng, self.n, beta);
                let mut v = tridiag_eigenvalues(&householder_tridiagonalize(&a), DEFAULT_EIG_TOL)?;
                v.source = EigenSource::DenseGaussian;
                Ok(v)
            }
            Ensemble::Iid(law) => Ok(eigenvalues_iid_with(&mut rng, self.n, law)),
            Ensemble::Quantile | Ensemble::File(_) => unreachable!("resolved in new"),
        }
    }

    /// The limit measure `nu` of this source, used by the kernel formulas.
    pub fn limit_measure(&self) -> LimitMeasure {
        match &self.ensemble {
            Ensemble::Iid(IidLaw::Uniform { a, b }) => LimitMeasure::Uniform { a: *a, b: *b },
            Ensemble::Iid(IidLaw::TwoPoint { x1, x2, p }) => LimitMeasure::Discrete(vec![
                (*x1, *p),
                (*x2, 1.0 - *p),
            ]),
            Ensemble::File(_) => {
                let v = self.fixed.as_ref().expect("file resolved");
                let w = 1.0 / v.len() as f64;
                LimitMeasure::Discrete(v.values().iter().map(|&x| (x, w)).collect())
            }
            _ => LimitMeasure::Semicircle,
        }
    }
}

/// A probability measure against which `nu(f)` and `nu(f^2)` are taken.
#[derive(Clone, Debug, PartialEq)]
pub enum LimitMeasure {
    Semicircle,
    Uniform { a: f64, b: f64 },
    /// Atoms `(x, mass)`.
    Discrete(Vec<(f64, f64)>),
}

impl LimitMeasure {
    fn integrate(&self, f: &TestFunction, power: i32) -> f64 {
        match self {
            LimitMeasure::Semicircle => match power {
                1 => testfn::semicircle_integral(f),
                _ => testfn::semicircle_integral_sq(f),
            },
            LimitMeasure::Discrete(atoms) => {
                atoms.iter().map(|&(x, w)| w * f.eval(x).powi(power)).sum()
            }
            &LimitMeasure::Uniform { a, b } => {
                if b == a {
                    return f.eval(a).powi(power);
                }
                if let Representation::PiecewiseConstant(steps) = f.representation() {
                    return steps
                        .iter()
                        .map(|s| {
                            let overlap = (s.hi.min(b) - s.lo.max(a)).max(0.0);
                            s.level.powi(power) * overlap / (b - a)
                        })
                        .sum();
                }
                uniform_mean(|x| f.eval(x).powi(power), a, b)
            }
        }
    }

    pub fn integral(&self, f: &TestFunction) -> f64 {
        self.integrate(f, 1)
    }

    pub fn integral_sq(&self, f: &TestFunction) -> f64 {
        self.integrate(f, 2)
    }

    /// Whether `x` carries positive mass.
    pub fn has_atom_at(&self, x: f64) -> bool {
        match self {
            LimitMeasure::Discrete(atoms) => atoms.iter().any(|&(a, w)| a == x && w > 0.0),
            &LimitMeasure::Uniform { a, b } => a == b && a == x,
            LimitMeasure::Semicircle => false,
        }
    }
}

/// Mean of a smooth `g` over `[a, b]` by 32-point Gauss–Legendre on 16
/// panels.
fn uniform_mean(g: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const PANELS: usize = 16;
    let (nodes, weights) = gauss_legendre(32);
    let h = (b - a) / PANELS as f64;
    let mut total = 0.0;
    for p in 0..PANELS {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in nodes.iter().zip(&weights) {
            total += w * g(mid + 0.5 * h * x);
        }
    }
    total * 0.5 * h / (b - a)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration.
fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}
