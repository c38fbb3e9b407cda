//! Gaussian limit processes and their covariance kernels.
//!
//! Samplers build paths from independent increments instead of factoring
//! the kernel, which keeps the cost linear in the grid size and makes the
//! boundary zeros exact.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{BivariateSheet, ProcessKind, ProcessPath, TimeGrid};
use crate::sampling::normal_with;
use crate::seed::{tags, Seed};

/// Smallest Gram eigenvalue tolerated before a kernel counts as indefinite.
pub const PSD_FLOOR: f64 = -1e-10;
pub const DEFAULT_SHEET_POINTS: usize = 51;
pub const PSD_CHECK_POINTS: usize = 21;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Main,
    Bridge,
    Bivariate,
}

/// A covariance kernel on `[0,1]` (main, bridge) or on `[0,1]^2` (bivariate).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceKernel {
    pub kind: KernelKind,
    pub sigma0_sq: f64,
    /// Only used by [`KernelKind::Main`].
    pub sigma1_sq: f64,
}

fn check_variance(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::arg(format!("{name} must be a finite nonnegative number, got {v}")));
    }
    Ok(())
}

impl CovarianceKernel {
    pub fn main(sigma0_sq: f64, sigma1_sq: f64) -> Result<Self> {
        check_variance("sigma0^2", sigma0_sq)?;
        check_variance("sigma1^2", sigma1_sq)?;
        Ok(CovarianceKernel { kind: KernelKind::Main, sigma0_sq, sigma1_sq })
    }

    pub fn bridge(sigma0_sq: f64) -> Result<Self> {
        check_variance("sigma0^2", sigma0_sq)?;
        Ok(CovarianceKernel { kind: KernelKind::Bridge, sigma0_sq, sigma1_sq: 0.0 })
    }

    /// Tied-down sheet scaled by `scale`.
    pub fn bivariate(scale: f64) -> Result<Self> {
        check_variance("scale", scale)?;
        Ok(CovarianceKernel { kind: KernelKind::Bivariate, sigma0_sq: scale, sigma1_sq: 0.0 })
    }

    /// Covariance of the one-parameter kernels at `(s, t)`.
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        match self.kind {
            KernelKind::Main => limit_cov_main(s, t, self.sigma0_sq, self.sigma1_sq),
            KernelKind::Bridge => limit_cov_bridge(s, t, self.sigma0_sq),
            // restricted to the diagonal s = s', t = t'
            KernelKind::Bivariate => self.sigma0_sq * bivariate_bridge_cov(s, t, s, t),
        }
    }

    /// Covariance between the points `p = (s, t)` and `q = (s', t')`.
    pub fn eval2(&self, p: (f64, f64), q: (f64, f64)) -> f64 {
        match self.kind {
            KernelKind::Bivariate => self.sigma0_sq * bivariate_bridge_cov(p.0, p.1, q.0, q.1),
            _ => self.eval(p.0, q.0),
        }
    }

    /// Smallest eigenvalue of the Gram matrix on `grid` (on `grid x grid`
    /// for the bivariate kernel).
    pub fn min_gram_eigenvalue(&self, grid: &TimeGrid) -> f64 {
        let pts = grid.points();
        let nodes: Vec<(f64, f64)> = match self.kind {
            KernelKind::Bivariate => pts
                .iter()
                .flat_map(|&s| pts.iter().map(move |&t| (s, t)))
                .collect(),
            _ => pts.iter().map(|&t| (t, 0.0)).collect(),
        };
        let m = nodes.len();
        let mut a = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                a[i * m + j] = self.eval2(nodes[i], nodes[j]);
            }
        }
        symmetric_eigenvalues(a, m).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Errors with a numeric failure if the Gram matrix on `grid` has an
    /// eigenvalue below [`PSD_FLOOR`].
    pub fn check_psd(&self, grid: &TimeGrid) -> Result<()> {
        let lo = self.min_gram_eigenvalue(grid);
        if lo < PSD_FLOOR * self.sigma0_sq.max(self.sigma1_sq).max(1.0) {
            return Err(Error::Numeric(format!(
                "{:?} kernel is not positive semidefinite on the grid (eigenvalue {lo:e})",
                self.kind
            )));
        }
        Ok(())
    }
}

/// `(s^t - st) sigma0^2 + st sigma1^2`.
pub fn limit_cov_main(s: f64, t: f64, sigma0_sq: f64, sigma1_sq: f64) -> f64 {
    (s.min(t) - s * t) * sigma0_sq + s * t * sigma1_sq
}

/// `sigma0^2 (s^t - st)`.
pub fn limit_cov_bridge(s: f64, t: f64, sigma0_sq: f64) -> f64 {
    sigma0_sq * (s.min(t) - s * t)
}

/// `(s^s' - ss')(t^t' - tt')`.
pub fn bivariate_bridge_cov(s: f64, t: f64, s2: f64, t2: f64) -> f64 {
    (s.min(s2) - s * s2) * (t.min(t2) - t * t2)
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.
/// Meant for the small Gram matrices of kernel checks.
pub fn symmetric_eigenvalues(mut a: Vec<f64>, m: usize) -> Vec<f64> {
    assert_eq!(a.len(), m * m);
    let scale = a.iter().fold(0.0f64, |x, v| x.max(v.abs())).max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                off += a[i * m + j] * a[i * m + j];
            }
        }
        if off.sqrt() <= 1e-15 * scale * m as f64 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = a[p * m + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q * m + q] - a[p * m + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..m).map(|i| a[i * m + i]).collect()
}

/// Standard Brownian bridge on `grid` from the stream of `rng`.
pub fn brownian_bridge_with<R: Rng + ?Sized>(rng: &mut R, grid: &TimeGrid) -> Vec<f64> {
    let pts = grid.points();
    let mut w = Vec::with_capacity(pts.len());
    w.push(0.0);
    for win in pts.windows(2) {
        let dt = win[1] - win[0];
        let prev = *w.last().unwrap();
        w.push(prev + dt.sqrt() * normal_with(rng));
    }
    let w1 = *w.last().unwrap();
    let last = pts.len() - 1;
    pts.iter()
        .zip(&w)
        .enumerate()
        .map(|(i, (&t, &wt))| if i == 0 || i == last { 0.0 } else { wt - t * w1 })
        .collect()
}

pub fn sample_brownian_bridge(grid: &TimeGrid, seed: Seed) -> ProcessPath {
    ProcessPath {
        grid: grid.clone(),
        values: brownian_bridge_with(&mut seed.child(tags::LIMIT_PATH).rng(), grid),
        n: 0,
        kind: ProcessKind::QuenchedW,
    }
}

/// Tied-down sheet: a Brownian sheet `S` with the projection
/// `S(s,t) - s S(1,t) - t S(s,1) + st S(1,1)`.
pub fn bivariate_bridge_with<R: Rng + ?Sized>(rng: &mut R, s_grid: &TimeGrid, t_grid: &TimeGrid) -> Vec<f64> {
    let (sp, tp) = (s_grid.points(), t_grid.points());
    let (ns, nt) = (sp.len(), tp.len());
    let mut sheet = vec![0.0; ns * nt];
    for i in 1..ns {
        let ds = sp[i] - sp[i - 1];
        let mut row = 0.0;
        for j in 1..nt {
            let dt = tp[j] - tp[j - 1];
            row += (ds * dt).sqrt() * normal_with(rng);
            sheet[i * nt + j] = sheet[(i - 1) * nt + j] + row;
        }
    }
    let s11 = sheet[ns * nt - 1];
    let mut out = vec![0.0; ns * nt];
    for i in 1..ns - 1 {
        for j in 1..nt - 1 {
            let (s, t) = (sp[i], tp[j]);
            out[i * nt + j] =
                sheet[i * nt + j] - s * sheet[(ns - 1) * nt + j] - t * sheet[i * nt + nt - 1] + s * t * s11;
        }
    }
    out
}

pub fn sample_bivariate_bridge(s_grid: &TimeGrid, t_grid: &TimeGrid, seed: Seed) -> BivariateSheet {
    BivariateSheet {
        s_grid: s_grid.clone(),
        t_grid: t_grid.clone(),
        values: bivariate_bridge_with(&mut seed.child(tags::LIMIT_PATH).rng(), s_grid, t_grid),
    }
}

/// `sigma0 B_t + t sigma1 G` with `B` a bridge and `G` an independent
/// standard normal.
pub fn limit_process_main(grid: &TimeGrid, sigma0_sq: f64, sigma1_sq: f64, seed: Seed) -> Result<ProcessPath> {
    check_variance("sigma0^2", sigma0_sq)?;
    check_variance("sigma1^2", sigma1_sq)?;
    let bridge = sample_brownian_bridge(grid, seed);
    let g = normal_with(&mut seed.child(tags::LIMIT_GAUSSIAN).rng());
    let (a, b) = (sigma0_sq.sqrt(), sigma1_sq.sqrt());
    Ok(ProcessPath {
        grid: grid.clone(),
        values: grid
            .points()
            .iter()
            .zip(&bridge.values)
            .map(|(&t, &bt)| a * bt + t * b * g)
            .collect(),
        n: 0,
        kind: ProcessKind::RawX,
    })
}

/// Sheet dump: `#` comment lines, then `s,t,value` rows.
pub fn write_sheet_csv<W: Write>(out: &mut W, sheet: &BivariateSheet, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "s,t,value")?;
    for (i, &s) in sheet.s_grid.points().iter().enumerate() {
        for (j, &t) in sheet.t_grid.points().iter().enumerate() {
            writeln!(out, "{s:.16e},{t:.16e},{:.16e}", sheet.get(i, j))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_examples() {
        assert_eq!(limit_cov_main(1.0, 1.0, 3.0, 2.0), 2.0);
        let t = 0.3;
        assert!((limit_cov_main(t, t, 3.0, 2.0) - t * ((1.0 - t) * 3.0 + t * 2.0)).abs() < 1e-15);
        assert!((limit_cov_main(0.2, 0.7, 1.5, 1.5) - 1.5 * 0.2).abs() < 1e-15);
        assert_eq!(limit_cov_bridge(0.5, 0.5, 1.0), 0.25);
        assert_eq!(limit_cov_bridge(0.0, 0.4, 1.0), 0.0);
        assert_eq!(limit_cov_bridge(1.0, 0.4, 1.0), 0.0);
        assert_eq!(bivariate_bridge_cov(0.5, 0.5, 0.5, 0.5), 1.0 / 16.0);
        assert_eq!(bivariate_bridge_cov(0.3, 1.0, 0.2, 0.4), 0.0);
        assert_eq!(bivariate_bridge_cov(0.3, 0.6, 0.2, 0.4), bivariate_bridge_cov(0.2, 0.4, 0.3, 0.6));
    }

    #[test]
    fn kernel_decomposition() {
        let g = TimeGrid::uniform(11).unwrap();
        for &s in g.points() {
            for &t in g.points() {
                let lhs = limit_cov_main(s, t, 1.3, 0.7);
                let rhs = limit_cov_bridge(s, t, 1.3) + s * t * 0.7;
                assert!((lhs - rhs).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn kernels_are_psd() {
        let g = TimeGrid::uniform(PSD_CHECK_POINTS).unwrap();
        for k in [
            CovarianceKernel::main(1.0, 2.0).unwrap(),
            CovarianceKernel::main(2.0, 0.0).unwrap(),
            CovarianceKernel::bridge(1.0).unwrap(),
        ] {
            assert!(k.min_gram_eigenvalue(&g) >= PSD_FLOOR, "{k:?}");
            k.check_psd(&g).unwrap();
        }
        let small = TimeGrid::uniform(9).unwrap();
        CovarianceKernel::bivariate(1.0).unwrap().check_psd(&small).unwrap();
        assert!(CovarianceKernel::main(-1.0, 0.0).is_err());
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3
        let mut ev = symmetric_eigenvalues(vec![2.0, 1.0, 1.0, 2.0], 2);
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
        // indefinite matrix is detected
        let ev = symmetric_eigenvalues(vec![0.0, 1.0, 1.0, 0.0], 2);
        assert!(ev.iter().any(|&x| (x + 1.0).abs() < 1e-14));
    }

    #[test]
    fn boundaries_are_exact_zeros() {
        let g = TimeGrid::uniform(51).unwrap();
        let b = sample_brownian_bridge(&g, Seed::new(1, 0));
        assert_eq!(b.values[0], 0.0);
        assert_eq!(*b.values.last().unwrap(), 0.0);
        let sheet = sample_bivariate_bridge(&g, &g, Seed::new(1, 1));
        assert_eq!(sheet.boundary_max(), 0.0);
        let z = limit_process_main(&g, 0.0, 0.0, Seed::new(1, 2)).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sheet_csv_layout() {
        let g = TimeGrid::uniform(3).unwrap();
        let sheet = sample_bivariate_bridge(&g, &g, Seed::new(2, 0));
        let mut buf = Vec::new();
        write_sheet_csv(&mut buf, &sheet, &["seed = 2".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# seed = 2");
        assert_eq!(lines[1], "s,t,value");
        assert_eq!(lines.len(), 2 + 9);
        let v: f64 = lines[2 + 4].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(v, sheet.get(1, 1));
    }
}
