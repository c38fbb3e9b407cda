//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits non-zero if any fails.
//!
//! `cargo test -p partrace --test acceptance` runs all of them; extra
//! arguments select criteria by number (`-- 3 5`).

use std::io::Write;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use partrace::ensembles::{semicircle_quantiles, Ensemble};
use partrace::exact::{self, BetaPrime, MomentCase};
use partrace::process::{self, BatchConfig, ProcessKind, TimeGrid};
use partrace::sampling::{self, Beta};
use partrace::stats::{self, SpectralRoute, Theorem, VerifyConfig};
use partrace::testfn::{self, TestFunction};
use partrace::{ensembles, Seed};

const K: f64 = 5.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// Mean and standard error.
fn mean_se(x: &[f64]) -> (f64, f64) {
    let r = x.len() as f64;
    let m = x.iter().sum::<f64>() / r;
    let v = x.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (r - 1.0);
    (m, (v / r).sqrt())
}

fn q(p: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(d))
}

fn haar_moments() -> Verdict {
    let reps = 200_000;
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for n in [2usize, 4, 8, 16] {
        for beta in [Beta::Orthogonal, Beta::Unitary] {
            let bp = BetaPrime::from_beta_index(beta.index());
            let mut cols = vec![Vec::with_capacity(reps); 4];
            for r in 0..reps {
                let u = sampling::sample_haar(n, beta, Seed::new(101 + n as u64, r as u64)).unwrap();
                let (a, b, c) = (u.abs2(0, 0), u.abs2(0, 1), u.abs2(1, 1));
                cols[0].push(a);
                cols[1].push(a * a);
                cols[2].push(a * b);
                cols[3].push(a * c);
            }
            for (case, col) in MomentCase::ALL.iter().zip(&cols) {
                let exact = exact::haar_moment(*case, n as u64, &bp).unwrap().value;
                let (m, se) = mean_se(col);
                let dev = (m - exact).abs() / se;
                worst = worst.max(dev);
                if dev > K {
                    bad.push(format!("n={n} beta={} {}: {m} vs {exact}", beta.index(), case.name()));
                }
            }
        }
    }
    verdict(bad.is_empty(), format!("max deviation {worst:.2} SE over 32 moments {bad:?}"))
}

/// Brute-force covariance of partial traces: a sum over all index quadruples
/// of `f_k f_m Cov(|U_ik|^2, |U_lm|^2)`, with the entry moment picked by
/// which indices coincide.
fn brute_force_cov(s_n: usize, t_n: usize, n: u64, bp: &BigRational, fv: &[BigRational]) -> BigRational {
    let mom = |c| exact::moment(c, n, bp);
    let (e4, pair, cross, single) = (
        mom(MomentCase::FourthPower),
        mom(MomentCase::SameRowPair),
        mom(MomentCase::CrossRowPair),
        mom(MomentCase::SingleSquare),
    );
    let mean_sq = single.clone() * single;
    let mut acc = q(0, 1);
    for i in 0..s_n {
        for l in 0..t_n {
            for (k, fk) in fv.iter().enumerate() {
                for (m, fm) in fv.iter().enumerate() {
                    let e = match (i == l, k == m) {
                        (true, true) => e4.clone(),
                        (true, false) | (false, true) => pair.clone(),
                        (false, false) => cross.clone(),
                    };
                    acc += fk * fm * (e - mean_sq.clone());
                }
            }
        }
    }
    acc
}

fn exact_covariance() -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;

    // analytic anchors
    let one: BetaPrime = "1".parse().unwrap();
    let half: BetaPrime = "1/2".parse().unwrap();
    let a = exact::exact_cov_partial_trace_value(0.5, 0.5, 2, &one, 1.0, 1.0).unwrap();
    let b = exact::exact_cov_partial_trace_value(0.5, 0.5, 2, &half, 1.0, 1.0).unwrap();
    let anchors = a.is_exactly(&q(1, 12)) && b.is_exactly(&q(1, 8));
    pass &= anchors;
    notes.push(format!("anchors 1/12, 1/8: {anchors}"));

    // brute-force oracle, exact rationals
    let mut oracle_ok = true;
    let mut cases = 0;
    for n in 2..=5u64 {
        for bp in [q(1, 2), q(1, 1), q(3, 2)] {
            for trial in 0..10i64 {
                let lambda: Vec<i64> = (0..n as i64).map(|k| (k * 7 + trial * 3) % 11 - 5).collect();
                let coeffs = [trial % 3 - 1, 2 - trial % 4, 1];
                let fv: Vec<BigRational> = lambda
                    .iter()
                    .map(|&x| q(coeffs[0] + coeffs[1] * x + coeffs[2] * x * x, 1))
                    .collect();
                let s1: BigRational = fv.iter().sum();
                let s2: BigRational = fv.iter().map(|v| v * v).sum();
                let s_n = (trial as u64) % (n + 1);
                let t_n = s_n + (trial as u64 / 3) % (n + 1 - s_n);
                let closed = exact::exact_cov_partial_trace_rational(s_n, t_n, n, &bp, &s1, &s2);
                let brute = brute_force_cov(s_n as usize, t_n as usize, n, &bp, &fv);
                oracle_ok &= closed == brute;
                cases += 1;
            }
        }
    }
    pass &= oracle_ok;
    notes.push(format!("oracle agreement on {cases} cases: {oracle_ok}"));

    // Monte Carlo against the Haar average with fixed eigenvalues
    let reps = 200_000;
    let f = TestFunction::polynomial(vec![0.0, 1.0, 0.5]).unwrap();
    let mut worst = 0.0f64;
    for n in [2usize, 4, 8] {
        let lambda = semicircle_quantiles(n).unwrap();
        let (s1, s2) = (lambda.trace(&f), lambda.trace_sq(&f));
        for beta in [Beta::Orthogonal, Beta::Unitary] {
            let probes = if n == 2 { vec![0.5] } else { vec![0.25, 0.5, 0.75] };
            let grid = TimeGrid::with_probes(2, &probes).unwrap();
            let mut cols = vec![Vec::with_capacity(reps); probes.len()];
            for r in 0..reps {
                let u = sampling::sample_haar(n, beta, Seed::new(202 + n as u64, r as u64)).unwrap();
                let p = process::partial_trace_path(&u, &lambda, &f, &grid).unwrap();
                for (c, &t) in cols.iter_mut().zip(&probes) {
                    c.push(p.at(t).unwrap());
                }
            }
            let summary = stats::summarize_columns(probes.clone(), &cols).unwrap();
            let report = stats::compare_cov(
                "exact_cov",
                &summary,
                |s, t| exact::exact_cov_partial_trace(s, t, n, beta.prime(), s1, s2).unwrap(),
                K,
            )
            .unwrap();
            worst = worst.max(report.statistic);
            if !report.pass {
                pass = false;
                notes.push(format!("n={n} beta={} failed: {report}", beta.index()));
            }
        }
    }
    notes.push(format!("Monte Carlo max deviation {worst:.2} SE"));
    verdict(pass, notes.join("; "))
}

fn sigma_kernels() -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    for beta in [Beta::Orthogonal, Beta::Unitary] {
        for (k, expect) in [(1usize, 2.0 / beta.value()), (2, 4.0 / beta.value())] {
            let f = TestFunction::monomial(k);
            let a = testfn::sigma1_sq_quadrature(&f, beta).unwrap();
            let b = testfn::sigma1_sq_chebyshev(&f, beta).unwrap();
            let ok = (a - expect).abs() <= 1e-6 && (b - expect).abs() <= 1e-6;
            pass &= ok;
            notes.push(format!("x^{k} beta={}: {a:.9} / {b:.9} ({ok})", beta.index()));
        }
        let reps = 50_000;
        let traces: Vec<f64> = (0..reps)
            .map(|r| {
                ensembles::sample_dense_gaussian(128, beta, Seed::new(303, r as u64))
                    .unwrap()
                    .trace()
            })
            .collect();
        let s = stats::summarize_columns(vec![1.0], &[traces]).unwrap();
        let dev = (s.cov[0][0] - 2.0 / beta.value()).abs() / s.se_cov[0][0];
        pass &= dev <= K;
        notes.push(format!("Var(tr Z) beta={}: {:.4} ({dev:.2} SE)", beta.index(), s.cov[0][0]));
    }
    verdict(pass, notes.join("; "))
}

fn spectral_clt() -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    for route in [SpectralRoute::Gamma, SpectralRoute::HaarRow] {
        let mut cfg = VerifyConfig::new(Ensemble::Quantile, Beta::Unitary, 512, TestFunction::identity(), 50_000);
        cfg.seed = 404;
        cfg.route = route;
        let r = stats::verify_theorem(Theorem::SpectralClt, &cfg).unwrap();
        pass &= r.pass && !r.vacuous;
        let p = &r.probes[0];
        notes.push(format!(
            "{route:?}: var {:.4} ({:.2} SE), KS p = {:.3}",
            p.empirical, p.dev_sigma, r.ks[0].p
        ));
    }
    verdict(pass, notes.join("; "))
}

fn quenched_bridge() -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    for beta in [Beta::Orthogonal, Beta::Unitary] {
        let mut cfg = VerifyConfig::new(Ensemble::Quantile, beta, 256, TestFunction::identity(), 2000);
        cfg.seed = 505;
        cfg.probes = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let r = stats::verify_theorem(Theorem::QuenchedBridge, &cfg).unwrap();
        // the endpoint columns must be exactly zero, not merely small
        let mut batch = BatchConfig::new(Ensemble::Quantile, beta, 256, TestFunction::identity());
        batch.kind = ProcessKind::QuenchedW;
        batch.grid = TimeGrid::uniform(5).unwrap();
        batch.seed = 505;
        let ens = process::simulate_batch(&batch, 200).unwrap();
        let zero_ends = ens.paths.iter().all(|p| p[0] == 0.0 && p[4] == 0.0);
        pass &= r.pass && zero_ends;
        notes.push(format!(
            "beta={}: max {:.2} SE, exact zero endpoints {zero_ends}",
            beta.index(),
            r.statistic
        ));
    }
    verdict(pass, notes.join("; "))
}

fn main_fclt() -> Verdict {
    let f = TestFunction::monomial(2);
    let s0 = testfn::semicircle_summary(&f, Beta::Unitary).unwrap().sigma0_sq;
    let s1 = testfn::sigma1_sq_gaussian(&f, Beta::Unitary).unwrap();
    let sig_ok = (s0 - 1.0).abs() < 1e-8 && (s1 - 2.0).abs() < 1e-8;
    let mut cfg = VerifyConfig::new(Ensemble::BetaHermite, Beta::Unitary, 256, f, 4000);
    cfg.seed = 606;
    cfg.probes = vec![0.25, 0.5, 0.75, 1.0];
    let r = stats::verify_theorem(Theorem::MainFclt, &cfg).unwrap();
    let at_one = r.probes.iter().find(|p| p.s == 1.0 && p.t == 1.0).unwrap();
    verdict(
        r.pass && sig_ok,
        format!(
            "sigma0^2 = {s0:.6}, sigma1^2 = {s1:.6}; max {:.2} SE; Var(X_1) = {:.4} vs {:.1}",
            r.statistic, at_one.empirical, at_one.reference
        ),
    )
}

fn bivariate() -> Verdict {
    let mut pass = true;
    let mut worst_rate = 0.0f64;
    for beta in [Beta::Orthogonal, Beta::Unitary] {
        let limit = (2.0 / beta.value()) / 16.0;
        for n in 8..=1024usize {
            let v = exact::exact_cov_bivariate(0.5, 0.5, 0.5, 0.5, n, beta.prime()).unwrap();
            let scaled = (v - limit).abs() * n as f64;
            worst_rate = worst_rate.max(scaled);
            pass &= scaled <= 2.0;
        }
    }
    let mut notes = vec![format!("max n |exact - limit| = {worst_rate:.3} (bound 2)")];
    for beta in [Beta::Orthogonal, Beta::Unitary] {
        let mut cfg = VerifyConfig::new(Ensemble::Quantile, beta, 128, TestFunction::identity(), 2000);
        cfg.seed = 707;
        let r = stats::verify_theorem(Theorem::Bivariate, &cfg).unwrap();
        pass &= r.pass;
        notes.push(format!("MC beta={}: max {:.2} SE", beta.index(), r.statistic));
    }
    verdict(pass, notes.join("; "))
}

fn decomposition_and_invariance() -> Verdict {
    let mut notes = Vec::new();
    let grid = TimeGrid::uniform(65).unwrap();
    let n = 64;
    let f = TestFunction::polynomial(vec![0.3, -1.0, 0.7]).unwrap();

    // pathwise X - mean = W + Z and the mass identity
    let reps = 200;
    let mut max_gap = 0.0f64;
    let mut max_mass = 0.0f64;
    let mut runs = Vec::new();
    for r in 0..reps {
        let lam = Ensemble::BetaHermite.sample(n, Beta::Unitary, Seed::new(808, r)).unwrap();
        let u = sampling::sample_haar(n, Beta::Unitary, Seed::new(809, r)).unwrap();
        for &t in grid.points() {
            let w: f64 = process::partial_weights(&u, t).iter().sum();
            max_mass = max_mass.max((w - process::floor_count(t, n) as f64).abs());
        }
        let x = process::partial_trace_path(&u, &lam, &f, &grid).unwrap();
        runs.push((lam, x));
    }
    let mean_trace = runs.iter().map(|(l, _)| l.trace(&f)).sum::<f64>() / reps as f64;
    for (lam, x) in &runs {
        let w = process::center_quenched(x, lam.trace(&f)).unwrap();
        let z = process::z_path(lam, &f, mean_trace, &grid);
        for ((a, b), c) in process::center_full(x, mean_trace).iter().zip(&w.values).zip(&z.values) {
            max_gap = max_gap.max((a - b - c).abs());
        }
    }
    let decomposition = max_gap <= 1e-9;
    let mass = max_mass <= 1e-9 * n as f64;
    notes.push(format!("decomposition gap {max_gap:.1e}, mass gap {max_mass:.1e}"));

    // first two moments of W under eigenvalue reversal
    let lam = semicircle_quantiles(n).unwrap();
    let values: Vec<f64> = lam.values().iter().map(|&x| f.eval(x)).collect();
    let reps = 4000;
    let probes = [0.25, 0.5, 0.75];
    let collect = |order: &[f64], stream: u64| -> Vec<Vec<f64>> {
        let mut cols = vec![Vec::with_capacity(reps); probes.len()];
        for r in 0..reps {
            let u = sampling::sample_haar(n, Beta::Orthogonal, Seed::new(810 + stream, r as u64)).unwrap();
            let v = process::row_sums(&u, order);
            let total: f64 = v.iter().sum();
            let mut prefix = 0.0;
            let mut idx = 0;
            for (c, &t) in cols.iter_mut().zip(&probes) {
                let cnt = process::floor_count(t, n);
                while idx < cnt {
                    prefix += v[idx];
                    idx += 1;
                }
                c.push(prefix - cnt as f64 / n as f64 * total);
            }
        }
        cols
    };
    let reversed: Vec<f64> = values.iter().rev().copied().collect();
    let a = stats::summarize_columns(probes.to_vec(), &collect(&values, 0)).unwrap();
    let b = stats::summarize_columns(probes.to_vec(), &collect(&reversed, 1)).unwrap();
    let mut worst = 0.0f64;
    for i in 0..probes.len() {
        let dm = (a.mean[i] - b.mean[i]).abs() / a.se_mean[i].hypot(b.se_mean[i]);
        let dv = (a.cov[i][i] - b.cov[i][i]).abs() / a.se_cov[i][i].hypot(b.se_cov[i][i]);
        worst = worst.max(dm).max(dv);
    }
    let invariance = worst <= K;
    notes.push(format!("reversal max {worst:.2} SE"));

    // reproducibility across thread counts, byte for byte
    let mut cfg = BatchConfig::new(Ensemble::BetaHermite, Beta::Orthogonal, 32, f.clone());
    cfg.seed = 811;
    cfg.kind = ProcessKind::QuenchedW;
    let mut bytes = Vec::new();
    for threads in [1, 2, 4] {
        cfg.threads = threads;
        let ens = process::simulate_batch(&cfg, 64).unwrap();
        let mut out = Vec::new();
        process::write_ensemble_csv(&mut out, &ens).unwrap();
        bytes.push(out);
    }
    let reproducible = bytes.windows(2).all(|w| w[0] == w[1]);
    notes.push(format!("thread-count reproducible {reproducible}"));
    verdict(decomposition && mass && invariance && reproducible, notes.join("; "))
}

type Criterion = (usize, &'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 8] = [
    (1, "Haar moment identities", haar_moments),
    (2, "exact covariance identity", exact_covariance),
    (3, "sigma kernels", sigma_kernels),
    (4, "spectral CLT", spectral_clt),
    (5, "quenched bridge", quenched_bridge),
    (6, "main functional CLT", main_fclt),
    (7, "bivariate sheet", bivariate),
    (8, "decomposition and invariance", decomposition_and_invariance),
];

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut out = std::io::stdout().lock();
    let mut failed = 0;
    for (id, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let secs = start.elapsed().as_secs_f64();
        if !v.pass {
            failed += 1;
        }
        writeln!(
            out,
            "criterion {id} ({name}): {} in {secs:.1} s; {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        )
        .unwrap();
    }
    if failed > 0 {
        writeln!(out, "{failed} acceptance criteria failed").unwrap();
        std::process::exit(1);
    }
}
