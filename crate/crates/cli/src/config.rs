//! Run configuration: command-line flags layered over an optional TOML
//! key-value file. Flags win.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use partrace::ensembles::Ensemble;
use partrace::process::{ProcessKind, TimeGrid};
use partrace::stats::SpectralRoute;
use partrace::testfn::TestFunction;
use partrace::{Beta, Error, Result};
use serde::Deserialize;

pub const OUT_DIR_ENV: &str = "PARTRACE_OUT_DIR";

/// Keys accepted in a config file. Names match the long flags with `_`
/// in place of `-`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub ensemble: Option<String>,
    pub beta: Option<u32>,
    pub n: Option<usize>,
    pub f: Option<String>,
    pub grid: Option<String>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub kind: Option<String>,
    pub probes: Option<Vec<f64>>,
    pub k_sigma: Option<f64>,
    pub sigma0_override: Option<f64>,
    pub sigma1_override: Option<f64>,
    pub route: Option<String>,
    pub sheet_row: Option<f64>,
    pub quenched: Option<bool>,
    pub memory_budget: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// TOML file with `key = value` settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// beta_hermite, dense_gaussian, quantile, iid:uniform:a,b,
    /// iid:two_point:x1,x2,p or file:<path>.
    #[arg(long)]
    pub ensemble: Option<String>,
    /// Dyson index, 1 (real) or 2 (complex).
    #[arg(long)]
    pub beta: Option<u32>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Test function: poly:c0,c1,..., step:a,b,g;... or cheb:c0,c1,...
    #[arg(long)]
    pub f: Option<String>,
    /// uniform:M or points:0,...,1
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, short = 'R')]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, env = OUT_DIR_ENV)]
    pub out_dir: Option<PathBuf>,
    /// raw_x, quenched_w, linear_z or bivariate_row.
    #[arg(long)]
    pub kind: Option<String>,
    /// Comma-separated probe times.
    #[arg(long, value_delimiter = ',')]
    pub probes: Option<Vec<f64>>,
    #[arg(long)]
    pub k_sigma: Option<f64>,
    #[arg(long)]
    pub sigma0_override: Option<f64>,
    #[arg(long)]
    pub sigma1_override: Option<f64>,
    /// gamma or haar_row.
    #[arg(long)]
    pub route: Option<String>,
    /// Row fraction s for bivariate_row paths.
    #[arg(long)]
    pub sheet_row: Option<f64>,
    /// Draw the eigenvalues once per run.
    #[arg(long)]
    pub quenched: bool,
    /// Skip the automatic re-run after a KS failure.
    #[arg(long)]
    pub no_ks_retry: bool,
    #[arg(long)]
    pub memory_budget: Option<u64>,
}

/// A fully resolved configuration.
#[derive(Debug, Clone)]
pub struct Run {
    pub ensemble: Ensemble,
    pub beta: Beta,
    pub n: usize,
    pub f: TestFunction,
    pub grid: TimeGrid,
    pub replicates: usize,
    pub seed: u64,
    pub threads: usize,
    pub out_dir: Option<PathBuf>,
    pub kind: ProcessKind,
    pub probes: Vec<f64>,
    pub k_sigma: f64,
    pub sigma0_override: Option<f64>,
    pub sigma1_override: Option<f64>,
    pub route: SpectralRoute,
    pub sheet_row: f64,
    pub quenched: bool,
    pub ks_retry: bool,
    pub memory_budget: u64,
}

/// Defaults that depend on the subcommand.
pub struct Defaults {
    pub ensemble: &'static str,
    pub n: usize,
    pub replicates: usize,
}

fn parse<T: FromStr<Err = Error>>(key: &str, s: &str) -> Result<T> {
    s.parse().map_err(|e: Error| Error::Config(format!("{key}: {e}")))
}

fn positive(key: &str, v: usize) -> Result<usize> {
    if v == 0 {
        return Err(Error::Config(format!("{key} must be positive")));
    }
    Ok(v)
}

impl RunArgs {
    pub fn resolve(&self, defaults: &Defaults) -> Result<Run> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let ensemble = self.ensemble.clone().or(file.ensemble).unwrap_or(defaults.ensemble.into());
        let beta = self.beta.or(file.beta).unwrap_or(2);
        let f = self.f.clone().or(file.f).unwrap_or("poly:0,1".into());
        let grid = self.grid.clone().or(file.grid).unwrap_or("uniform:101".into());
        let kind = self.kind.clone().or(file.kind).unwrap_or("raw_x".into());
        let route = self.route.clone().or(file.route).unwrap_or("gamma".into());
        let k_sigma = self.k_sigma.or(file.k_sigma).unwrap_or(partrace::stats::DEFAULT_K_SIGMA);
        if !(k_sigma > 0.0) {
            return Err(Error::Config("k_sigma must be positive".into()));
        }
        let sheet_row = self.sheet_row.or(file.sheet_row).unwrap_or(0.5);
        if !(0.0..=1.0).contains(&sheet_row) {
            return Err(Error::Config("sheet_row must lie in [0, 1]".into()));
        }
        Ok(Run {
            ensemble: parse("ensemble", &ensemble)?,
            beta: Beta::from_index(beta).map_err(|e| Error::Config(format!("beta: {e}")))?,
            n: positive("n", self.n.or(file.n).unwrap_or(defaults.n))?,
            f: parse("f", &f)?,
            grid: parse("grid", &grid)?,
            replicates: positive("replicates", self.replicates.or(file.replicates).unwrap_or(defaults.replicates))?,
            seed: self.seed.or(file.seed).unwrap_or(0),
            threads: self.threads.or(file.threads).unwrap_or(0),
            out_dir: self.out_dir.clone().or(file.out_dir),
            kind: parse("kind", &kind)?,
            probes: self
                .probes
                .clone()
                .or(file.probes)
                .unwrap_or_else(|| vec![0.25, 0.5, 0.75, 1.0]),
            k_sigma,
            sigma0_override: self.sigma0_override.or(file.sigma0_override),
            sigma1_override: self.sigma1_override.or(file.sigma1_override),
            route: parse("route", &route)?,
            sheet_row,
            quenched: self.quenched || file.quenched.unwrap_or(false),
            ks_retry: !self.no_ks_retry,
            memory_budget: self
                .memory_budget
                .or(file.memory_budget)
                .unwrap_or(partrace::process::DEFAULT_MEMORY_BUDGET),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const D: Defaults = Defaults { ensemble: "quantile", n: 16, replicates: 10 };

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "n = 32\nbeta = 1\nf = \"poly:0,0,1\"\nseed = 5\n").unwrap();
        let args = RunArgs { config: Some(path), n: Some(8), ..Default::default() };
        let run = args.resolve(&D).unwrap();
        assert_eq!(run.n, 8);
        assert_eq!(run.beta, Beta::Orthogonal);
        assert_eq!(run.seed, 5);
        assert_eq!(run.f.to_string(), "poly:0,0,1");
    }

    #[test]
    fn bad_values_are_config_errors() {
        let args = RunArgs { beta: Some(3), ..Default::default() };
        assert!(matches!(args.resolve(&D), Err(Error::Config(_))));
        let args = RunArgs { f: Some("x^2".into()), ..Default::default() };
        assert!(matches!(args.resolve(&D), Err(Error::Config(_))));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "colour = 3\n").unwrap();
        let args = RunArgs { config: Some(path), ..Default::default() };
        assert!(matches!(args.resolve(&D), Err(Error::Config(_))));
    }
}
