use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use partrace::ensembles::{EigenSource, EigenvalueVector, Ensemble, PreparedEnsemble};
use partrace::exact::{self, BetaPrime, MomentCase};
use partrace::limits;
use partrace::process::{self, BatchConfig, TimeGrid};
use partrace::stats::{self, Theorem, VerifyConfig};
use partrace::testfn::{self, TestFunction};
use partrace::{Beta, Error, Result, Seed};
use serde_json::json;

mod config;

use config::{Defaults, RunArgs};

#[derive(Parser)]
#[command(name = "partrace", version, about = "Partial traces of random matrices: exact formulas, simulation and limit checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the four Haar entry moments, exact and in decimal.
    HaarMoments(HaarArgs),
    /// Exact finite-n covariance of the partial trace or of the sheet.
    ExactCov(ExactCovArgs),
    /// Semicircle integrals and limit variances of a test function.
    Sigma(SigmaArgs),
    /// Simulate a replicate ensemble; writes CSV paths and a JSON summary.
    Simulate(RunArgs),
    /// Check a limit theorem by simulation; exit 0 on pass, 1 on failure.
    Verify(VerifyArgs),
    /// Sample limit processes (bridge, main limit or tied-down sheet).
    SampleBridge(BridgeArgs),
}

#[derive(Args)]
struct BetaArgs {
    /// Dyson index, 1 or 2.
    #[arg(long, conflicts_with = "beta_prime")]
    beta: Option<u32>,
    /// beta / 2 directly, e.g. 3/2 or 0.7.
    #[arg(long)]
    beta_prime: Option<String>,
}

impl BetaArgs {
    fn resolve(&self) -> Result<BetaPrime> {
        match (&self.beta_prime, self.beta) {
            (Some(s), _) => s.parse(),
            (None, b) => Ok(BetaPrime::from_beta_index(Beta::from_index(b.unwrap_or(2))?.index())),
        }
    }
}

#[derive(Args)]
struct HaarArgs {
    #[arg(long)]
    n: u64,
    #[command(flatten)]
    beta: BetaArgs,
}

#[derive(Args)]
struct ExactCovArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    beta: BetaArgs,
    #[arg(long)]
    s: f64,
    #[arg(long)]
    t: f64,
    /// Covariance of the centered sheet at (s, t) and (s2, t2) instead.
    #[arg(long, requires_all = ["s2", "t2"])]
    sheet: bool,
    #[arg(long)]
    s2: Option<f64>,
    #[arg(long)]
    t2: Option<f64>,
    /// Comma-separated eigenvalues.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "ensemble")]
    eigenvalues: Option<Vec<f64>>,
    /// Eigenvalue source when no explicit list is given.
    #[arg(long)]
    ensemble: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "poly:0,1")]
    f: String,
}

#[derive(Args)]
struct SigmaArgs {
    #[arg(long)]
    f: String,
    #[arg(long, default_value_t = 2)]
    beta: u32,
}

#[derive(Args)]
struct VerifyArgs {
    /// spectral_clt, quenched_bridge, main_fclt or bivariate.
    theorem: String,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct BridgeArgs {
    /// bridge, main or sheet.
    #[arg(long, default_value = "bridge")]
    kind: String,
    /// Grid for paths, or for both sheet axes.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value_t = 1)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    sigma0_sq: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma1_sq: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Outcome {
    Done,
    Failed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::HaarMoments(a) => haar_moments(&a),
        Command::ExactCov(a) => exact_cov(&a),
        Command::Sigma(a) => sigma(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Verify(a) => verify(&a),
        Command::SampleBridge(a) => sample_bridge(&a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn haar_moments(a: &HaarArgs) -> Result<Outcome> {
    let bp = a.beta.resolve()?;
    let values = MomentCase::ALL
        .iter()
        .map(|&case| Ok((case, exact::haar_moment(case, a.n, &bp)?)))
        .collect::<Result<Vec<_>>>()?;
    println!("n = {}, beta' = {bp}", a.n);
    for (case, v) in values {
        println!("{:<15} {v}", case.name());
    }
    Ok(Outcome::Done)
}

fn eigenvalues_for(a: &ExactCovArgs) -> Result<EigenvalueVector> {
    if let Some(v) = &a.eigenvalues {
        if v.len() != a.n {
            return Err(Error::Argument(format!("{} eigenvalues given for n = {}", v.len(), a.n)));
        }
        return EigenvalueVector::new(v.clone(), EigenSource::File);
    }
    let ens: Ensemble = a.ensemble.as_deref().unwrap_or("quantile").parse()?;
    let prepared = PreparedEnsemble::new(&ens, a.n)?;
    let beta = a.beta.beta.map(Beta::from_index).transpose()?.unwrap_or(Beta::Unitary);
    prepared.sample(beta, Seed::new(a.seed, 0).child(partrace::seed::tags::EIGENVALUES))
}

fn exact_cov(a: &ExactCovArgs) -> Result<Outcome> {
    let bp = a.beta.resolve()?;
    if a.sheet {
        let (s2, t2) = (a.s2.unwrap(), a.t2.unwrap());
        let v = exact::exact_cov_bivariate_value(a.s, s2, a.t, t2, a.n, &bp)?;
        let limit = limits::bivariate_bridge_cov(a.s, a.t, s2, t2) / bp.value();
        println!("cov  = {v}");
        println!("limit = {limit:.17}");
        return Ok(Outcome::Done);
    }
    let f: TestFunction = a.f.parse()?;
    let lambda = eigenvalues_for(a)?;
    let (s1, s2) = (lambda.trace(&f), lambda.trace_sq(&f));
    let v = exact::exact_cov_partial_trace_value(a.s, a.t, a.n, &bp, s1, s2)?;
    let nf = a.n as f64;
    let limit = exact::limit_of_exact_cov(a.s, a.t, bp.value(), s1 / nf, s2 / nf)?;
    println!("S1 = {s1:.17}, S2 = {s2:.17}");
    println!("cov  = {v}");
    println!("limit = {limit:.17}");
    Ok(Outcome::Done)
}

fn sigma(a: &SigmaArgs) -> Result<Outcome> {
    let f: TestFunction = a.f.parse()?;
    let beta = Beta::from_index(a.beta)?;
    let s = testfn::semicircle_summary(&f, beta)?;
    println!("nu(f)    = {:.17}", s.nu_f);
    println!("nu(f^2)  = {:.17}", s.nu_f2);
    println!("sigma0^2 = {:.17}", s.sigma0_sq);
    match s.sigma1_sq {
        Some(v) => println!("sigma1^2 = {v:.17}"),
        None => println!("sigma1^2 = unsupported (requires C¹)"),
    }
    Ok(Outcome::Done)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn simulate(args: &RunArgs) -> Result<Outcome> {
    let run = args.resolve(&Defaults { ensemble: "beta_hermite", n: 128, replicates: 1000 })?;
    let mut cfg = BatchConfig::new(run.ensemble.clone(), run.beta, run.n, run.f.clone());
    cfg.grid = run.grid.clone();
    cfg.kind = run.kind;
    cfg.seed = run.seed;
    cfg.threads = run.threads;
    cfg.quenched = run.quenched;
    cfg.sheet_row = run.sheet_row;
    cfg.memory_budget = run.memory_budget;
    let ens = process::simulate_batch(&cfg, run.replicates)?;

    let out_dir = run.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let csv_path = out_dir.join("ensemble.csv");
    let mut w = create(&csv_path)?;
    process::write_ensemble_csv(&mut w, &ens)?;
    w.flush()?;

    let probes: Vec<f64> = run.probes.iter().copied().filter(|&t| ens.grid.index_of(t).is_some()).collect();
    let summary = stats::summarize(&ens, &probes)?;
    let sup: Vec<f64> = ens.paths.iter().map(|p| p.iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect();
    let doc = json!({
        "config": cfg,
        "replicates": ens.replicates(),
        "summary": summary,
        "sup_abs": {
            "mean": sup.iter().sum::<f64>() / sup.len() as f64,
            "max": sup.iter().copied().fold(0.0, f64::max),
        },
        "csv": csv_path,
    });
    let json_path = out_dir.join("summary.json");
    let mut w = create(&json_path)?;
    serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| Error::Config(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(Outcome::Done)
}

fn verify(args: &VerifyArgs) -> Result<Outcome> {
    let theorem: Theorem = args.theorem.parse()?;
    let defaults = match theorem {
        Theorem::MainFclt => Defaults { ensemble: "beta_hermite", n: 256, replicates: 4000 },
        _ => Defaults { ensemble: "quantile", n: 256, replicates: 2000 },
    };
    let run = args.run.resolve(&defaults)?;
    let mut cfg = VerifyConfig::new(run.ensemble, run.beta, run.n, run.f, run.replicates);
    cfg.seed = run.seed;
    cfg.threads = run.threads;
    cfg.probes = run.probes;
    cfg.k_sigma = run.k_sigma;
    cfg.sigma0_override = run.sigma0_override;
    cfg.sigma1_override = run.sigma1_override;
    cfg.route = run.route;
    cfg.ks_retry = run.ks_retry;
    let report = stats::verify_theorem(theorem, &cfg)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
    println!("{text}");
    eprint!("{report}");
    if let Some(dir) = run.out_dir {
        let mut w = create(&dir.join(format!("report_{}.json", theorem.name())))?;
        writeln!(w, "{text}")?;
        w.flush()?;
    }
    Ok(if report.pass { Outcome::Done } else { Outcome::Failed })
}

fn sample_bridge(a: &BridgeArgs) -> Result<Outcome> {
    if a.paths == 0 {
        return Err(Error::Argument("--paths must be positive".into()));
    }
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let comments = vec![
        format!("kind = {}", a.kind),
        format!("seed = {}", a.seed),
        format!("sigma0_sq = {}", a.sigma0_sq),
        format!("sigma1_sq = {}", a.sigma1_sq),
    ];
    match a.kind.as_str() {
        "sheet" => {
            let grid: TimeGrid = a
                .grid
                .as_deref()
                .unwrap_or("uniform:51")
                .parse()?;
            let kernel = limits::CovarianceKernel::bivariate(a.sigma0_sq)?;
            let scale = kernel.sigma0_sq.sqrt();
            for r in 0..a.paths {
                let mut sheet = limits::sample_bivariate_bridge(&grid, &grid, Seed::new(a.seed, r as u64));
                sheet.values.iter_mut().for_each(|v| *v *= scale);
                let mut c = comments.clone();
                c.push(format!("replicate = {r}"));
                limits::write_sheet_csv(&mut out, &sheet, &c)?;
            }
        }
        "bridge" | "main" => {
            let grid: TimeGrid = a.grid.as_deref().unwrap_or("uniform:101").parse()?;
            let kernel = if a.kind == "main" {
                limits::CovarianceKernel::main(a.sigma0_sq, a.sigma1_sq)?
            } else {
                limits::CovarianceKernel::bridge(a.sigma0_sq)?
            };
            kernel.check_psd(&TimeGrid::uniform(limits::PSD_CHECK_POINTS)?)?;
            for c in &comments {
                writeln!(out, "# {c}")?;
            }
            writeln!(out, "replicate,t,value")?;
            for r in 0..a.paths {
                let path = limits::limit_process_main(&grid, kernel.sigma0_sq, kernel.sigma1_sq, Seed::new(a.seed, r as u64))?;
                for (&t, &v) in grid.points().iter().zip(&path.values) {
                    writeln!(out, "{r},{t:.16e},{v:.16e}")?;
                }
            }
        }
        other => return Err(Error::Argument(format!("unknown limit kind {other:?} (bridge, main, sheet)"))),
    }
    out.flush()?;
    Ok(Outcome::Done)
}
