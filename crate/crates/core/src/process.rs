//! Partial-trace processes built from one Haar matrix and one eigenvalue
//! vector, plus the parallel replicate driver.
//!
//! With weights `w_{k,t} = sum_{i <= floor(tn)} |U_{i,k}|^2` the partial
//! trace is `X_t(f) = sum_k w_{k,t} f(lambda_k)`. Summing over `k` first
//! gives row sums `v_i = sum_k |U_{i,k}|^2 f(lambda_k)`, and then every
//! `X_t` on a grid is a prefix sum of `v`, O(n^2) in total.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{Ensemble, EigenvalueVector, PreparedEnsemble};
use crate::error::{Error, Result};
use crate::sampling::{self, Beta, HaarMatrix};
use crate::seed::{mix64, tags, Seed};
use crate::testfn::TestFunction;

/// `t n` within this distance below an integer counts as that integer, so
/// grid points like 0.29 with n = 100 land on row 29.
pub const FLOOR_SLACK: f64 = 1e-9;
/// Allowed mismatch between a supplied trace and the path endpoint.
pub const TRACE_MATCH_TOL: f64 = 1e-9;
/// Stream reserved for the single eigenvalue draw of a quenched run.
pub const QUENCHED_STREAM: u64 = u64::MAX;
pub const DEFAULT_GRID_POINTS: usize = 101;
pub const DEFAULT_MEMORY_BUDGET: u64 = 4 << 30;

/// `floor(t n)`, clamped to `0..=n`.
pub fn floor_count(t: f64, n: usize) -> usize {
    let c = (t * n as f64 + FLOOR_SLACK).floor();
    if c <= 0.0 {
        0
    } else {
        (c as usize).min(n)
    }
}

/// Strictly increasing points in `[0, 1]` starting at 0 and ending at 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 || points[0] != 0.0 || *points.last().unwrap() != 1.0 {
            return Err(Error::arg("time grid must start at 0 and end at 1"));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::arg("time grid must be strictly increasing"));
        }
        Ok(TimeGrid { points })
    }

    /// `m` equally spaced points `j / (m - 1)`.
    pub fn uniform(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::arg("a uniform grid needs at least 2 points"));
        }
        let last = (m - 1) as f64;
        TimeGrid::new((0..m).map(|j| j as f64 / last).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the grid point equal to `t` (up to 1e-12).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.points.iter().position(|&p| (p - t).abs() <= 1e-12)
    }

    /// Uniform grid of `fallback` points with the probes merged in.
    pub fn with_probes(fallback: usize, probes: &[f64]) -> Result<Self> {
        let mut pts = TimeGrid::uniform(fallback)?.points;
        for &p in probes {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::arg(format!("probe {p} outside [0, 1]")));
            }
            if !pts.iter().any(|&q| (q - p).abs() <= 1e-12) {
                pts.push(p);
            }
        }
        pts.sort_by(f64::total_cmp);
        TimeGrid::new(pts)
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        TimeGrid::new(v)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Self {
        g.points
    }
}

impl FromStr for TimeGrid {
    type Err = Error;
    /// `uniform:M` or `points:0,0.25,...,1`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(m) = s.strip_prefix("uniform:") {
            let m: usize = m
                .trim()
                .parse()
                .map_err(|_| Error::arg(format!("bad grid size {m:?}")))?;
            return TimeGrid::uniform(m);
        }
        if let Some(list) = s.strip_prefix("points:") {
            let pts = list
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::arg(format!("bad grid point list {list:?}")))?;
            return TimeGrid::new(pts);
        }
        Err(Error::arg(format!(
            "grid spec {s:?} must be uniform:M or points:t0,...,1"
        )))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    /// `X_t(f)`.
    RawX,
    /// `X_t(f) - E_H[X_t(f)]`.
    QuenchedW,
    /// `(floor(tn)/n)(X_1(f) - E[X_1(f)])`.
    LinearZ,
    /// `t -> W~_{s,t}` at a fixed row fraction `s`.
    BivariateRow,
}

impl ProcessKind {
    pub fn name(self) -> &'static str {
        match self {
            ProcessKind::RawX => "raw_x",
            ProcessKind::QuenchedW => "quenched_w",
            ProcessKind::LinearZ => "linear_z",
            ProcessKind::BivariateRow => "bivariate_row",
        }
    }
}

impl fmt::Display for ProcessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProcessKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw_x" | "x" => Ok(ProcessKind::RawX),
            "quenched_w" | "w" => Ok(ProcessKind::QuenchedW),
            "linear_z" | "z" => Ok(ProcessKind::LinearZ),
            "bivariate_row" => Ok(ProcessKind::BivariateRow),
            other => Err(Error::arg(format!("unknown process kind {other:?}"))),
        }
    }
}

/// One path on a grid. Values only change where `t n` crosses an integer.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub n: usize,
    pub kind: ProcessKind,
}

impl ProcessPath {
    pub fn at(&self, t: f64) -> Option<f64> {
        self.grid.index_of(t).map(|i| self.values[i])
    }
}

/// Values of `W~_{s,t}` on `s_grid x t_grid`, row-major in `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct BivariateSheet {
    pub s_grid: TimeGrid,
    pub t_grid: TimeGrid,
    pub values: Vec<f64>,
}

impl BivariateSheet {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.t_grid.len() + j]
    }

    pub fn at(&self, s: f64, t: f64) -> Option<f64> {
        Some(self.get(self.s_grid.index_of(s)?, self.t_grid.index_of(t)?))
    }

    /// Largest absolute value on the boundary of the unit square.
    pub fn boundary_max(&self) -> f64 {
        let (ns, nt) = (self.s_grid.len(), self.t_grid.len());
        let mut m = 0.0f64;
        for i in 0..ns {
            for j in 0..nt {
                if i == 0 || j == 0 || i + 1 == ns || j + 1 == nt {
                    m = m.max(self.get(i, j).abs());
                }
            }
        }
        m
    }
}

/// Compensated accumulator.
#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

fn check_dims(u: &HaarMatrix, n: usize) -> Result<()> {
    if u.n() != n {
        return Err(Error::arg(format!(
            "dimension mismatch: U is {0}x{0}, {n} eigenvalues",
            u.n()
        )));
    }
    Ok(())
}

/// `w_{k,t} = sum_{i <= floor(tn)} |U_{i,k}|^2`.
pub fn partial_weights(u: &HaarMatrix, t: f64) -> Vec<f64> {
    let n = u.n();
    let rows = floor_count(t, n);
    let mut acc = vec![Kahan::default(); n];
    for i in 0..rows {
        for (k, a) in acc.iter_mut().enumerate() {
            a.add(u.abs2(i, k));
        }
    }
    acc.into_iter().map(|a| a.sum).collect()
}

/// `v_i = sum_k |U_{i,k}|^2 f(lambda_k)`.
pub fn row_sums(u: &HaarMatrix, f_values: &[f64]) -> Vec<f64> {
    let n = u.n();
    (0..n)
        .map(|i| {
            let mut acc = Kahan::default();
            for (k, fk) in f_values.iter().enumerate() {
                acc.add(u.abs2(i, k) * fk);
            }
            acc.sum
        })
        .collect()
}

/// Read a prefix-summed row sequence off at the grid.
fn path_from_rows(v: &[f64], grid: &TimeGrid) -> Vec<f64> {
    let n = v.len();
    let mut prefix = Vec::with_capacity(n + 1);
    let mut acc = Kahan::default();
    prefix.push(0.0);
    for &x in v {
        acc.add(x);
        prefix.push(acc.sum);
    }
    grid.points()
        .iter()
        .map(|&t| prefix[floor_count(t, n)])
        .collect()
}

pub fn partial_trace_path(
    u: &HaarMatrix,
    lambda: &EigenvalueVector,
    f: &TestFunction,
    grid: &TimeGrid,
) -> Result<ProcessPath> {
    check_dims(u, lambda.len())?;
    let f_values: Vec<f64> = lambda.values().iter().map(|&x| f.eval(x)).collect();
    Ok(ProcessPath {
        grid: grid.clone(),
        values: path_from_rows(&row_sums(u, &f_values), grid),
        n: u.n(),
        kind: ProcessKind::RawX,
    })
}

/// `W_t = X_t - (floor(tn)/n) X_1`. The subtraction uses the path's own
/// endpoint so `W_1 = 0` exactly.
pub fn center_quenched(path: &ProcessPath, trace_value: f64) -> Result<ProcessPath> {
    if path.kind != ProcessKind::RawX {
        return Err(Error::arg("quenched centering expects a raw_x path"));
    }
    let end = *path.values.last().expect("grid has points");
    if (end - trace_value).abs() > TRACE_MATCH_TOL * trace_value.abs().max(1.0) {
        return Err(Error::arg(format!(
            "trace value {trace_value} does not match path endpoint {end}"
        )));
    }
    let n = path.n;
    let values = path
        .grid
        .points()
        .iter()
        .zip(&path.values)
        .map(|(&t, &x)| {
            let c = floor_count(t, n);
            if c == n {
                0.0
            } else {
                x - c as f64 / n as f64 * end
            }
        })
        .collect();
    Ok(ProcessPath {
        values,
        kind: ProcessKind::QuenchedW,
        ..path.clone()
    })
}

/// `Z_t = (floor(tn)/n)(X_1(f) - mean_trace)`.
pub fn z_path(lambda: &EigenvalueVector, f: &TestFunction, mean_trace: f64, grid: &TimeGrid) -> ProcessPath {
    linear_z(lambda.trace(f), mean_trace, lambda.len(), grid)
}

fn linear_z(trace: f64, mean_trace: f64, n: usize, grid: &TimeGrid) -> ProcessPath {
    let dev = trace - mean_trace;
    ProcessPath {
        grid: grid.clone(),
        values: grid
            .points()
            .iter()
            .map(|&t| floor_count(t, n) as f64 / n as f64 * dev)
            .collect(),
        n,
        kind: ProcessKind::LinearZ,
    }
}

/// `X_t - (floor(tn)/n) mean_trace`, the fully centered process when
/// `mean_trace` estimates `E[X_1(f)]`.
pub fn center_full(path: &ProcessPath, mean_trace: f64) -> Vec<f64> {
    let n = path.n;
    path.grid
        .points()
        .iter()
        .zip(&path.values)
        .map(|(&t, &x)| x - floor_count(t, n) as f64 / n as f64 * mean_trace)
        .collect()
}

/// 2-D prefix sums of `|U_{i,j}|^2 - 1/n` read off on the grids.
pub fn bivariate_sheet(u: &HaarMatrix, s_grid: &TimeGrid, t_grid: &TimeGrid) -> BivariateSheet {
    let n = u.n();
    let inv = 1.0 / n as f64;
    let t_counts: Vec<usize> = t_grid.points().iter().map(|&t| floor_count(t, n)).collect();
    let s_counts: Vec<usize> = s_grid.points().iter().map(|&s| floor_count(s, n)).collect();
    // column-prefix sums accumulated row by row
    let mut col_acc = vec![Kahan::default(); n];
    let mut values = vec![0.0; s_grid.len() * t_grid.len()];
    let mut rows_done = 0;
    for (si, &sc) in s_counts.iter().enumerate() {
        while rows_done < sc {
            for (j, a) in col_acc.iter_mut().enumerate() {
                a.add(u.abs2(rows_done, j) - inv);
            }
            rows_done += 1;
        }
        let mut row = Kahan::default();
        let mut j = 0;
        for (ti, &tc) in t_counts.iter().enumerate() {
            while j < tc {
                row.add(col_acc[j].sum);
                j += 1;
            }
            values[si * t_grid.len() + ti] = row.sum;
        }
    }
    BivariateSheet {
        s_grid: s_grid.clone(),
        t_grid: t_grid.clone(),
        values,
    }
}

/// `(mu~_1(f), mu~_1(1))` with `mu~_1 = (1/(n beta')) sum gamma_k delta_{lambda_k}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaSpectral {
    pub mu_tilde_f: f64,
    pub mu_tilde_mass: f64,
}

impl GammaSpectral {
    /// The normalized value, equal in law to `mu_1(f) = f(Z)_{1,1}`.
    pub fn normalized(&self) -> f64 {
        self.mu_tilde_f / self.mu_tilde_mass
    }
}

pub fn spectral_measure_gamma_with<R: rand::Rng + ?Sized>(
    rng: &mut R,
    f_values: &[f64],
    beta_prime: f64,
) -> GammaSpectral {
    let scale = 1.0 / (f_values.len() as f64 * beta_prime);
    let (mut num, mut mass) = (Kahan::default(), Kahan::default());
    for &fk in f_values {
        let g = sampling::gamma_with(rng, beta_prime);
        num.add(g * fk);
        mass.add(g);
    }
    GammaSpectral {
        mu_tilde_f: scale * num.sum,
        mu_tilde_mass: scale * mass.sum,
    }
}

pub fn spectral_measure_gamma(
    lambda: &EigenvalueVector,
    beta_prime: f64,
    f: &TestFunction,
    seed: Seed,
) -> Result<GammaSpectral> {
    sampling::check_positive("beta'", beta_prime)?;
    let f_values: Vec<f64> = lambda.values().iter().map(|&x| f.eval(x)).collect();
    Ok(spectral_measure_gamma_with(&mut seed.rng(), &f_values, beta_prime))
}

/// Everything that determines a replicate ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub ensemble: Ensemble,
    pub beta: Beta,
    pub n: usize,
    pub f: TestFunction,
    pub grid: TimeGrid,
    pub kind: ProcessKind,
    pub seed: u64,
    /// Worker threads; 0 means rayon's default.
    pub threads: usize,
    /// Draw the eigenvalues once and reuse them for every replicate.
    pub quenched: bool,
    /// Row fraction `s` for [`ProcessKind::BivariateRow`].
    pub sheet_row: f64,
    pub memory_budget: u64,
}

impl BatchConfig {
    pub fn new(ensemble: Ensemble, beta: Beta, n: usize, f: TestFunction) -> Self {
        BatchConfig {
            ensemble,
            beta,
            n,
            f,
            grid: TimeGrid::uniform(DEFAULT_GRID_POINTS).expect("valid"),
            kind: ProcessKind::RawX,
            seed: 0,
            threads: 0,
            quenched: false,
            sheet_row: 0.5,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }

    /// `key = value` lines describing the configuration.
    pub fn fingerprint_lines(&self) -> Vec<String> {
        vec![
            format!("ensemble = {}", self.ensemble),
            format!("beta = {}", self.beta.index()),
            format!("n = {}", self.n),
            format!("f = {}", self.f),
            format!("kind = {}", self.kind),
            format!("seed = {}", self.seed),
            format!("quenched = {}", self.quenched),
            format!("grid_points = {}", self.grid.len()),
            format!("sheet_row = {}", self.sheet_row),
        ]
    }

    /// 64-bit hash of the fingerprint lines.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint_lines()
            .iter()
            .flat_map(|l| l.bytes())
            .fold(0u64, |h, b| mix64(h ^ b as u64))
    }

    fn check_budget(&self, replicates: usize) -> Result<()> {
        let workers = if self.threads == 0 {
            rayon::current_num_threads()
        } else {
            self.threads
        } as u64;
        let paths = replicates as u64 * self.grid.len() as u64 * 8;
        let matrices = workers * (self.n as u64).pow(2) * 16 * 2;
        if paths.saturating_add(matrices) > self.memory_budget {
            return Err(Error::Config(format!(
                "n = {} with R = {replicates} needs about {} bytes, above the budget of {}",
                self.n,
                paths + matrices,
                self.memory_budget
            )));
        }
        Ok(())
    }
}

/// `R` paths on a common grid with their seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateEnsemble {
    pub grid: TimeGrid,
    pub n: usize,
    pub kind: ProcessKind,
    pub paths: Vec<Vec<f64>>,
    pub seeds: Vec<Seed>,
    /// `X_1(f)` of every replicate.
    pub traces: Vec<f64>,
    pub fingerprint: Vec<String>,
}

impl ReplicateEnsemble {
    pub fn replicates(&self) -> usize {
        self.paths.len()
    }

    pub fn path(&self, r: usize) -> ProcessPath {
        ProcessPath {
            grid: self.grid.clone(),
            values: self.paths[r].clone(),
            n: self.n,
            kind: self.kind,
        }
    }

    /// Values of every replicate at grid point `t`.
    pub fn column(&self, t: f64) -> Option<Vec<f64>> {
        let idx = self.grid.index_of(t)?;
        Some(self.paths.iter().map(|p| p[idx]).collect())
    }
}

/// Run `f` on `threads` workers (0: rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

struct Replicate {
    path: Vec<f64>,
    trace: f64,
}

/// `R` independent replicates, replicate `r` driven by `Seed(base, r)`.
/// The output does not depend on the number of worker threads.
pub fn simulate_batch(config: &BatchConfig, replicates: usize) -> Result<ReplicateEnsemble> {
    if replicates < 2 {
        return Err(Error::arg("a replicate ensemble needs R >= 2"));
    }
    if !(0.0..=1.0).contains(&config.sheet_row) {
        return Err(Error::arg("sheet_row must lie in [0, 1]"));
    }
    config.check_budget(replicates)?;
    let prepared = PreparedEnsemble::new(&config.ensemble, config.n)?;
    let fixed = match prepared.fixed() {
        Some(v) => Some(v.clone()),
        None if config.quenched => Some(prepared.sample(
            config.beta,
            Seed::new(config.seed, QUENCHED_STREAM).child(tags::EIGENVALUES),
        )?),
        None => None,
    };
    let base = Seed::new(config.seed, 0);
    let one_replicate = |r: usize| -> Result<Replicate> {
        let seed = base.replicate(r as u64);
        let lambda = match &fixed {
            Some(v) => v.clone(),
            None => prepared.sample(config.beta, seed.child(tags::EIGENVALUES))?,
        };
        let u = sampling::sample_haar(config.n, config.beta, seed.child(tags::EIGENVECTORS))?;
        let trace = lambda.trace(&config.f);
        let path = match config.kind {
            ProcessKind::BivariateRow => {
                let s_grid = TimeGrid::with_probes(2, &[config.sheet_row])?;
                let sheet = bivariate_sheet(&u, &s_grid, &config.grid);
                let i = s_grid.index_of(config.sheet_row).expect("probe on grid");
                (0..config.grid.len()).map(|j| sheet.get(i, j)).collect()
            }
            _ => partial_trace_path(&u, &lambda, &config.f, &config.grid)?.values,
        };
        Ok(Replicate { path, trace })
    };
    let results: Vec<Replicate> = with_threads(config.threads, || {
        (0..replicates)
            .into_par_iter()
            .map(one_replicate)
            .collect::<Result<Vec<_>>>()
    })??;

    let traces: Vec<f64> = results.iter().map(|r| r.trace).collect();
    let mean_trace = match &fixed {
        Some(v) => v.trace(&config.f),
        None => traces.iter().sum::<f64>() / replicates as f64,
    };
    let paths = results
        .into_iter()
        .map(|rep| {
            let raw = ProcessPath {
                grid: config.grid.clone(),
                values: rep.path,
                n: config.n,
                kind: ProcessKind::RawX,
            };
            Ok(match config.kind {
                ProcessKind::RawX | ProcessKind::BivariateRow => raw.values,
                ProcessKind::QuenchedW => center_quenched(&raw, rep.trace)?.values,
                ProcessKind::LinearZ => linear_z(rep.trace, mean_trace, config.n, &config.grid).values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicateEnsemble {
        grid: config.grid.clone(),
        n: config.n,
        kind: config.kind,
        paths,
        seeds: (0..replicates).map(|r| base.replicate(r as u64)).collect(),
        traces,
        fingerprint: config.fingerprint_lines(),
    })
}

/// Ensemble dump: fingerprint as `#` comment lines, then
/// `replicate,t,value` rows with 17 significant digits.
pub fn write_ensemble_csv<W: std::io::Write>(out: &mut W, ens: &ReplicateEnsemble) -> Result<()> {
    for line in &ens.fingerprint {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "replicate,t,value")?;
    for (r, path) in ens.paths.iter().enumerate() {
        for (&t, &v) in ens.grid.points().iter().zip(path) {
            writeln!(out, "{r},{t:.16e},{v:.16e}")?;
        }
    }
    Ok(())
}
