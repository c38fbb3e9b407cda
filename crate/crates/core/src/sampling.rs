//! Random primitives: gamma, chi, Dirichlet weights, Ginibre matrices and
//! Haar-distributed orthogonal/unitary matrices.
//!
//! Every public sampler takes a [`Seed`] and is a pure function of its
//! arguments. The `*_with` variants draw from a caller-owned generator and
//! are what the batch drivers use inside one replicate.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{tags, Seed};

/// Maximum entry of `|U U* - I|` accepted for a sampled Haar matrix.
pub const UNITARITY_TOL: f64 = 1e-10;
/// Maximum deviation of a row's squared norm from 1.
pub const ROW_NORM_TOL: f64 = 1e-12;
/// Retries with a fresh substream after a (probability zero) QR breakdown.
pub const HAAR_MAX_RETRIES: u64 = 3;

/// Dyson index of the symmetry class: 1 (real orthogonal) or 2 (complex
/// unitary).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Beta {
    Orthogonal,
    Unitary,
}

impl Beta {
    pub fn from_index(beta: u32) -> Result<Self> {
        match beta {
            1 => Ok(Beta::Orthogonal),
            2 => Ok(Beta::Unitary),
            other => Err(Error::arg(format!("beta must be 1 or 2, got {other}"))),
        }
    }

    pub fn index(self) -> u32 {
        match self {
            Beta::Orthogonal => 1,
            Beta::Unitary => 2,
        }
    }

    pub fn value(self) -> f64 {
        self.index() as f64
    }

    /// `beta / 2`, the Dirichlet parameter of a squared Haar row.
    pub fn prime(self) -> f64 {
        self.value() / 2.0
    }

    pub fn is_complex(self) -> bool {
        self == Beta::Unitary
    }
}

impl TryFrom<u32> for Beta {
    type Error = Error;
    fn try_from(b: u32) -> Result<Self> {
        Beta::from_index(b)
    }
}

impl From<Beta> for u32 {
    fn from(b: Beta) -> u32 {
        b.index()
    }
}

#[inline]
pub fn normal_with<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Gamma(shape, 1) by Marsaglia–Tsang. Shapes below one are boosted to
/// `shape + 1` and corrected by `U^(1/shape)`. The caller guarantees
/// `shape > 0`.
pub fn gamma_with<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape < 1.0 {
        let boosted = gamma_with(rng, shape + 1.0);
        let u: f64 = rng.random();
        // u in [0, 1); 1 - u keeps the log finite.
        return boosted * ((1.0 - u).ln() / shape).exp();
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = normal_with(rng);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u: f64 = 1.0 - rng.random::<f64>();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

pub fn sample_gamma(shape: f64, seed: Seed) -> Result<f64> {
    check_positive("gamma shape", shape)?;
    Ok(gamma_with(&mut seed.rng(), shape))
}

/// Chi with `dof` degrees of freedom, as `sqrt(2 Gamma(dof/2))`.
pub fn chi_with<R: Rng + ?Sized>(rng: &mut R, dof: f64) -> f64 {
    (2.0 * gamma_with(rng, 0.5 * dof)).sqrt()
}

/// Homogeneous Dirichlet `Dir_n(beta_prime)` by self-normalizing iid
/// Gamma(beta_prime) draws.
pub fn dirichlet_with<R: Rng + ?Sized>(rng: &mut R, n: usize, beta_prime: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| gamma_with(rng, beta_prime)).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

pub fn sample_dirichlet_weights(n: usize, beta_prime: f64, seed: Seed) -> Result<Vec<f64>> {
    check_dim(n)?;
    check_positive("beta_prime", beta_prime)?;
    Ok(dirichlet_with(&mut seed.rng(), n, beta_prime))
}

/// Squared moduli of one row of a Haar matrix: `|g_k|^2 / sum |g|^2` for a
/// standard real or complex Gaussian vector `g`. This is the first column of
/// the Ginibre-QR construction used by [`sample_haar`], transposed.
pub fn haar_row_weights_with<R: Rng + ?Sized>(rng: &mut R, n: usize, beta: Beta) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            let a = normal_with(rng);
            match beta {
                Beta::Orthogonal => a * a,
                Beta::Unitary => {
                    let b = normal_with(rng);
                    a * a + b * b
                }
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

/// Square matrix with iid standard real (beta = 1) or complex (beta = 2,
/// real and imaginary parts of variance 1/2) Gaussian entries. Row-major;
/// `im` is empty in the real case.
#[derive(Clone, Debug, PartialEq)]
pub struct GinibreMatrix {
    pub n: usize,
    pub beta: Beta,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

pub fn ginibre_with<R: Rng + ?Sized>(rng: &mut R, n: usize, beta: Beta) -> GinibreMatrix {
    let len = n * n;
    match beta {
        Beta::Orthogonal => GinibreMatrix {
            n,
            beta,
            re: (0..len).map(|_| normal_with(rng)).collect(),
            im: Vec::new(),
        },
        Beta::Unitary => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let mut re = Vec::with_capacity(len);
            let mut im = Vec::with_capacity(len);
            for _ in 0..len {
                re.push(s * normal_with(rng));
                im.push(s * normal_with(rng));
            }
            GinibreMatrix { n, beta, re, im }
        }
    }
}

pub fn sample_ginibre(n: usize, beta: Beta, seed: Seed) -> Result<GinibreMatrix> {
    check_dim(n)?;
    Ok(ginibre_with(&mut seed.rng(), n, beta))
}

/// A Haar-distributed orthogonal (beta = 1) or unitary (beta = 2) matrix,
/// stored row-major with split real and imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarMatrix {
    n: usize,
    beta: Beta,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl HaarMatrix {
    pub fn identity(n: usize, beta: Beta) -> Self {
        let mut re = vec![0.0; n * n];
        for i in 0..n {
            re[i * n + i] = 1.0;
        }
        let im = if beta.is_complex() {
            vec![0.0; n * n]
        } else {
            Vec::new()
        };
        HaarMatrix { n, beta, re, im }
    }

    /// Build from explicit parts. No unitarity check is made.
    pub fn from_parts(n: usize, beta: Beta, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != n * n || (beta.is_complex() && im.len() != n * n) {
            return Err(Error::arg("matrix parts do not match the dimension"));
        }
        let im = if beta.is_complex() { im } else { Vec::new() };
        Ok(HaarMatrix { n, beta, re, im })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> Beta {
        self.beta
    }

    /// `(re, im)` of entry `(i, k)`.
    pub fn entry(&self, i: usize, k: usize) -> (f64, f64) {
        let idx = i * self.n + k;
        let im = if self.im.is_empty() { 0.0 } else { self.im[idx] };
        (self.re[idx], im)
    }

    #[inline]
    pub fn abs2(&self, i: usize, k: usize) -> f64 {
        let (a, b) = self.entry(i, k);
        a * a + b * b
    }

    /// Row-major `|U_{i,k}|^2`.
    pub fn abs2_matrix(&self) -> Vec<f64> {
        if self.im.is_empty() {
            self.re.iter().map(|a| a * a).collect()
        } else {
            self.re
                .iter()
                .zip(&self.im)
                .map(|(a, b)| a * a + b * b)
                .collect()
        }
    }

    /// `max |(U U*)_{ij} - delta_ij|`, an O(n^3) check.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let (mut sr, mut si) = (0.0, 0.0);
                for k in 0..n {
                    let (ar, ai) = self.entry(i, k);
                    let (br, bi) = self.entry(j, k);
                    // a * conj(b)
                    sr += ar * br + ai * bi;
                    si += ai * br - ar * bi;
                }
                if i == j {
                    sr -= 1.0;
                }
                worst = worst.max(sr.hypot(si));
            }
        }
        worst
    }

    /// `max_i |sum_k |U_{i,k}|^2 - 1|`.
    pub fn row_norm_defect(&self) -> f64 {
        let n = self.n;
        let a = self.abs2_matrix();
        a.chunks_exact(n.max(1))
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Householder reflector `H = I - tau v v*` acting on a trailing block.
struct Reflector {
    vr: Vec<f64>,
    vi: Vec<f64>,
    tau: f64,
}

/// Reflector mapping `x` to `alpha e_1` with `alpha = -phase(x_0) |x|`,
/// together with `alpha / |alpha|`. `None` if `x` vanishes.
fn make_reflector(xr: &[f64], xi: &[f64]) -> Option<(Reflector, (f64, f64))> {
    let complex = !xi.is_empty();
    let mut norm2 = xr.iter().map(|a| a * a).sum::<f64>();
    if complex {
        norm2 += xi.iter().map(|a| a * a).sum::<f64>();
    }
    let norm = norm2.sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return None;
    }
    let x0r = xr[0];
    let x0i = if complex { xi[0] } else { 0.0 };
    let x0abs = x0r.hypot(x0i);
    let (pr, pi) = if x0abs > 0.0 {
        (x0r / x0abs, x0i / x0abs)
    } else {
        (1.0, 0.0)
    };
    let mut vr = xr.to_vec();
    let mut vi = xi.to_vec();
    vr[0] = x0r + pr * norm;
    if complex {
        vi[0] = x0i + pi * norm;
    }
    let v_norm2 = (x0abs + norm) * (x0abs + norm) + norm2 - x0abs * x0abs;
    Some((
        Reflector {
            vr,
            vi,
            tau: 2.0 / v_norm2,
        },
        (-pr, -pi),
    ))
}

fn unit_phase(xr: f64, xi: f64) -> Option<(f64, f64)> {
    let a = xr.hypot(xi);
    (a > 0.0 && a.is_finite()).then(|| (xr / a, xi / a))
}

/// Apply `H` from the left to rows/columns `k..n` of a row-major matrix.
fn apply_left(
    re: &mut [f64],
    im: &mut [f64],
    n: usize,
    k: usize,
    h: &Reflector,
    wr: &mut [f64],
    wi: &mut [f64],
) {
    let m = n - k;
    let wr = &mut wr[..m];
    wr.fill(0.0);
    if im.is_empty() {
        for (i, &v) in h.vr.iter().enumerate() {
            let row = &re[(k + i) * n + k..(k + i + 1) * n];
            for (w, q) in wr.iter_mut().zip(row) {
                *w += v * q;
            }
        }
        for (i, &v) in h.vr.iter().enumerate() {
            let c = h.tau * v;
            let row = &mut re[(k + i) * n + k..(k + i + 1) * n];
            for (q, w) in row.iter_mut().zip(wr.iter()) {
                *q -= c * w;
            }
        }
        return;
    }
    let wi = &mut wi[..m];
    wi.fill(0.0);
    // w = v* Q
    for i in 0..m {
        let (a, b) = (h.vr[i], h.vi[i]);
        let base = (k + i) * n + k;
        let qr = &re[base..base + m];
        let qi = &im[base..base + m];
        for j in 0..m {
            wr[j] += a * qr[j] + b * qi[j];
            wi[j] += a * qi[j] - b * qr[j];
        }
    }
    // Q -= tau v w
    for i in 0..m {
        let (a, b) = (h.tau * h.vr[i], h.tau * h.vi[i]);
        let base = (k + i) * n + k;
        let (qr, qi) = (&mut re[base..base + m], &mut im[base..base + m]);
        for j in 0..m {
            qr[j] -= a * wr[j] - b * wi[j];
            qi[j] -= a * wi[j] + b * wr[j];
        }
    }
}

/// Form `Q = H_0 H_1 ... H_{n-2} diag(phases)` by backward accumulation.
fn accumulate(n: usize, beta: Beta, reflectors: &[Reflector], phases: &[(f64, f64)]) -> HaarMatrix {
    let mut q = HaarMatrix::identity(n, beta);
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    for (k, h) in reflectors.iter().enumerate().rev() {
        apply_left(&mut q.re, &mut q.im, n, k, h, &mut wr, &mut wi);
    }
    for i in 0..n {
        for (k, &(pr, pi)) in phases.iter().enumerate() {
            let idx = i * n + k;
            if beta.is_complex() {
                let (a, b) = (q.re[idx], q.im[idx]);
                q.re[idx] = a * pr - b * pi;
                q.im[idx] = a * pi + b * pr;
            } else {
                q.re[idx] *= pr;
            }
        }
    }
    q
}

fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, m: usize, beta: Beta) -> (Vec<f64>, Vec<f64>) {
    match beta {
        Beta::Orthogonal => ((0..m).map(|_| normal_with(rng)).collect(), Vec::new()),
        Beta::Unitary => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let mut re = Vec::with_capacity(m);
            let mut im = Vec::with_capacity(m);
            for _ in 0..m {
                re.push(s * normal_with(rng));
                im.push(s * normal_with(rng));
            }
            (re, im)
        }
    }
}

/// Householder QR of a Ginibre matrix with the diagonal phase correction
/// that makes `R` positive on the diagonal.
///
/// Column `k` of the Ginibre matrix is only ever used after the first `k`
/// reflections have been applied to it. Those reflections depend on earlier
/// columns alone and the Gaussian law is invariant under them, so the
/// reflected column is drawn directly as a fresh Gaussian vector. The
/// resulting `Q` has exactly the law of the phase-corrected QR factor while
/// skipping the O(n^3) trailing update. `None` signals breakdown.
pub fn haar_with<R: Rng + ?Sized>(rng: &mut R, n: usize, beta: Beta) -> Option<HaarMatrix> {
    let mut reflectors = Vec::with_capacity(n.saturating_sub(1));
    let mut phases = Vec::with_capacity(n);
    for k in 0..n {
        let (xr, xi) = gaussian_vector(rng, n - k, beta);
        if k + 1 == n {
            phases.push(unit_phase(xr[0], xi.first().copied().unwrap_or(0.0))?);
        } else {
            let (h, d) = make_reflector(&xr, &xi)?;
            reflectors.push(h);
            phases.push(d);
        }
    }
    Some(accumulate(n, beta, &reflectors, &phases))
}

pub fn sample_haar(n: usize, beta: Beta, seed: Seed) -> Result<HaarMatrix> {
    check_dim(n)?;
    for attempt in 0..=HAAR_MAX_RETRIES {
        let s = if attempt == 0 {
            seed
        } else {
            seed.child(tags::HAAR_RETRY + attempt)
        };
        if let Some(u) = haar_with(&mut s.rng(), n, beta) {
            return Ok(u);
        }
    }
    Err(Error::Numeric(format!(
        "QR breakdown in Haar sampling persisted after {HAAR_MAX_RETRIES} retries"
    )))
}

/// Phase-corrected Householder QR of an explicit Ginibre matrix: the
/// textbook construction, with the full trailing update.
pub fn haar_from_ginibre(g: &GinibreMatrix) -> Result<HaarMatrix> {
    let n = g.n;
    let complex = g.beta.is_complex();
    // Column-major working copy.
    let mut cr = vec![0.0; n * n];
    let mut ci = vec![0.0; if complex { n * n } else { 0 }];
    for i in 0..n {
        for k in 0..n {
            cr[k * n + i] = g.re[i * n + k];
            if complex {
                ci[k * n + i] = g.im[i * n + k];
            }
        }
    }
    let breakdown = || Error::Numeric("zero column in Ginibre QR".into());
    let mut reflectors = Vec::with_capacity(n.saturating_sub(1));
    let mut phases = Vec::with_capacity(n);
    for k in 0..n {
        let xr = &cr[k * n + k..(k + 1) * n];
        let xi: &[f64] = if complex { &ci[k * n + k..(k + 1) * n] } else { &[] };
        if k + 1 == n {
            phases.push(unit_phase(xr[0], xi.first().copied().unwrap_or(0.0)).ok_or_else(breakdown)?);
            break;
        }
        let (h, d) = make_reflector(xr, xi).ok_or_else(breakdown)?;
        for j in k + 1..n {
            // column j, rows k..n: c -= tau v (v* c)
            let (mut sr, mut si) = (0.0, 0.0);
            for i in 0..n - k {
                let (a, b) = (h.vr[i], if complex { h.vi[i] } else { 0.0 });
                let (cre, cim) = (cr[j * n + k + i], if complex { ci[j * n + k + i] } else { 0.0 });
                sr += a * cre + b * cim;
                si += a * cim - b * cre;
            }
            for i in 0..n - k {
                let (a, b) = (h.vr[i], if complex { h.vi[i] } else { 0.0 });
                cr[j * n + k + i] -= h.tau * (a * sr - b * si);
                if complex {
                    ci[j * n + k + i] -= h.tau * (a * si + b * sr);
                }
            }
        }
        reflectors.push(h);
        phases.push(d);
    }
    Ok(accumulate(n, g.beta, &reflectors, &phases))
}

pub(crate) fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::arg("dimension must be at least 1"));
    }
    Ok(())
}

pub(crate) fn check_positive(what: &str, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::arg(format!("{what} must be positive and finite, got {x}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Mean and standard error of the mean.
    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
        (mean, (var / m).sqrt())
    }

    fn assert_within(xs: &[f64], target: f64, what: &str) {
        let (mean, se) = mean_se(xs);
        assert!(
            (mean - target).abs() <= 5.0 * se,
            "{what}: mean {mean} vs {target} (se {se})"
        );
    }

    #[test]
    fn gamma_shape_one_is_exponential() {
        let mut rng = Seed::new(1, 0).rng();
        let xs: Vec<f64> = (0..100_000).map(|_| gamma_with(&mut rng, 1.0)).collect();
        assert_within(&xs, 1.0, "Exp(1) mean");
    }

    #[test]
    fn gamma_half_variance() {
        let mut rng = Seed::new(2, 0).rng();
        let xs: Vec<f64> = (0..100_000).map(|_| gamma_with(&mut rng, 0.5)).collect();
        let sq: Vec<f64> = xs.iter().map(|x| (x - 0.5).powi(2)).collect();
        assert_within(&sq, 0.5, "Gamma(1/2) variance");
    }

    #[test]
    fn gamma_is_deterministic_and_validated() {
        let s = Seed::new(3, 9);
        assert_eq!(sample_gamma(2.0, s).unwrap(), sample_gamma(2.0, s).unwrap());
        assert!(sample_gamma(0.0, s).is_err());
        assert!(sample_gamma(-1.0, s).is_err());
    }

    #[test]
    fn dirichlet_uniform_marginal() {
        let mut rng = Seed::new(4, 0).rng();
        let first: Vec<f64> = (0..100_000)
            .map(|_| dirichlet_with(&mut rng, 2, 1.0)[0])
            .collect();
        assert_within(&first, 0.5, "Dir_2(1) mean");
        let sq: Vec<f64> = first.iter().map(|x| (x - 0.5).powi(2)).collect();
        assert_within(&sq, 1.0 / 12.0, "Dir_2(1) variance");
    }

    #[test]
    fn dirichlet_second_moment_and_normalization() {
        let mut rng = Seed::new(5, 0).rng();
        let mut sq = Vec::new();
        for _ in 0..100_000 {
            let w = dirichlet_with(&mut rng, 4, 0.5);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|&x| x > 0.0));
            sq.push(w[0] * w[0]);
        }
        assert_within(&sq, 0.125, "E[w1^2]");
        assert!(sample_dirichlet_weights(0, 1.0, Seed::new(0, 0)).is_err());
    }

    #[test]
    fn ginibre_moments_and_determinism() {
        let mut rng = Seed::new(6, 0).rng();
        let xs: Vec<f64> = (0..100_000)
            .map(|_| ginibre_with(&mut rng, 1, Beta::Orthogonal).re[0])
            .collect();
        assert_within(&xs, 0.0, "N(0,1) mean");
        let abs2: Vec<f64> = (0..100_000)
            .map(|_| {
                let g = ginibre_with(&mut rng, 1, Beta::Unitary);
                g.re[0] * g.re[0] + g.im[0] * g.im[0]
            })
            .collect();
        assert_within(&abs2, 1.0, "E|z|^2");
        let s = Seed::new(6, 1);
        assert_eq!(
            sample_ginibre(5, Beta::Unitary, s).unwrap(),
            sample_ginibre(5, Beta::Unitary, s).unwrap()
        );
    }

    #[test]
    fn haar_is_unitary() {
        for beta in [Beta::Orthogonal, Beta::Unitary] {
            for n in [1, 2, 3, 7, 32, 65] {
                let u = sample_haar(n, beta, Seed::new(n as u64, 0)).unwrap();
                assert!(u.unitarity_defect() <= UNITARITY_TOL, "n={n} {beta:?}");
                assert!(u.row_norm_defect() <= ROW_NORM_TOL, "n={n} {beta:?}");
                if beta == Beta::Orthogonal {
                    assert!(u.im.is_empty());
                }
            }
        }
        let u = sample_haar(1, Beta::Unitary, Seed::new(0, 0)).unwrap();
        assert!((u.abs2(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn literal_qr_route_is_unitary_and_phase_corrected() {
        for beta in [Beta::Orthogonal, Beta::Unitary] {
            let g = sample_ginibre(6, beta, Seed::new(11, 0)).unwrap();
            let q = haar_from_ginibre(&g).unwrap();
            assert!(q.unitarity_defect() <= UNITARITY_TOL);
            // R = Q* G must be upper triangular with positive real diagonal.
            let n = g.n;
            for i in 0..n {
                for j in 0..n {
                    let (mut sr, mut si) = (0.0, 0.0);
                    for k in 0..n {
                        let (qr, qi) = q.entry(k, i);
                        let gi = if g.im.is_empty() { 0.0 } else { g.im[k * n + j] };
                        let gr = g.re[k * n + j];
                        sr += qr * gr + qi * gi;
                        si += qr * gi - qi * gr;
                    }
                    if i > j {
                        assert!(sr.hypot(si) < 1e-10);
                    } else if i == j {
                        assert!(sr > 0.0 && si.abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn haar_entry_moments() {
        let mut rng = Seed::new(12, 0).rng();
        let a: Vec<f64> = (0..100_000)
            .map(|_| haar_with(&mut rng, 8, Beta::Orthogonal).unwrap().abs2(0, 0))
            .collect();
        assert_within(&a, 1.0 / 8.0, "E|U11|^2, n=8");
        let b: Vec<f64> = (0..100_000)
            .map(|_| haar_with(&mut rng, 2, Beta::Orthogonal).unwrap().abs2(0, 0).powi(2))
            .collect();
        assert_within(&b, 3.0 / 8.0, "E|U11|^4, n=2");
    }

    #[test]
    fn haar_row_matches_dirichlet_moments() {
        let n = 5;
        for beta in [Beta::Orthogonal, Beta::Unitary] {
            let mut rng = Seed::new(13, beta.index() as u64).rng();
            let mut rows = Vec::new();
            let mut dirs = Vec::new();
            for _ in 0..50_000 {
                let u = haar_with(&mut rng, n, beta).unwrap();
                rows.push((u.abs2(0, 0), u.abs2(0, 0) * u.abs2(0, 1)));
                let w = dirichlet_with(&mut rng, n, beta.prime());
                dirs.push((w[0], w[0] * w[1]));
            }
            let diff1: Vec<f64> = rows.iter().zip(&dirs).map(|(r, d)| r.0 - d.0).collect();
            let diff2: Vec<f64> = rows.iter().zip(&dirs).map(|(r, d)| r.1 - d.1).collect();
            assert_within(&diff1, 0.0, "first moment");
            assert_within(&diff2, 0.0, "mixed second moment");
        }
    }

    #[test]
    fn beta_index_validation() {
        assert!(Beta::from_index(3).is_err());
        assert_eq!(Beta::from_index(2).unwrap().prime(), 1.0);
        assert_eq!(Beta::Orthogonal.prime(), 0.5);
    }
}
