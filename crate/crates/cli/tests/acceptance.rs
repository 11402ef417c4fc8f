//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use hybridcal::calibrate::{sample_pooled, McmcConfig};
use hybridcal::data::{builtin_dataset, reference_experiments};
use hybridcal::gp::{
    fit_map, kernel_rbf_ard, log_marginal_likelihood, FitConfig, GpHyperparams, GpModel, Point,
};
use hybridcal::optimize::{gh_expected_utility, utility, RunReport, UtilityConfig};
use hybridcal::physics::{
    impact_distance, oracle_impact, simple_range, LaunchInput, PhysicsParams,
};
use hybridcal::quadrature::GaussHermite;
use hybridcal::rng;
use hybridcal::surrogate::{self, PerSamplePrediction, SurrogateConfig, SurrogateKind};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

fn physics_fidelity() -> Outcome {
    let params = PhysicsParams::reference();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for psi in linspace(5.0, 85.0, 10) {
        for v0 in linspace(40.0, 100.0, 10) {
            let x = LaunchInput::new(v0, psi).unwrap();
            let analytic = impact_distance(&params, &x).unwrap();
            let rk4 = oracle_impact(&params, &x, 1e-5).unwrap().x;
            worst = worst.max(((analytic - rk4) / rk4).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-4 && secs < 10.0,
        format!("max relative error {worst:.2e} (< 1e-4), {secs:.2} s (< 10 s)"),
    )
}

fn table_reproduction() -> Outcome {
    let params = PhysicsParams::reference();
    let mut worst_all: f64 = 0.0;
    let mut worst_shared: f64 = 0.0;
    for e in reference_experiments() {
        let miss = (impact_distance(&params, &e.input()).unwrap() - e.y_obs).abs();
        worst_all = worst_all.max(miss);
        if e.id.len() == 1 {
            worst_shared = worst_shared.max(miss);
        }
    }
    outcome(
        worst_all <= 15.0 && worst_shared <= 12.0,
        format!("max |truth - table| {worst_all:.2} m over 8 rows (<= 15), {worst_shared:.2} m over rows 1-5 (<= 12)"),
    )
}

fn vacuum_equivalence() -> Outcome {
    let mut r = rng::stream(3, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let g = 1.0 + 29.0 * rng::uniform(&mut r);
        let v0 = 5.0 + 195.0 * rng::uniform(&mut r);
        let psi = 0.5 + 89.0 * rng::uniform(&mut r);
        let x = LaunchInput::new(v0, psi).unwrap();
        let p = PhysicsParams::new(1.0, g, 0.0).unwrap();
        let a = impact_distance(&p, &x).unwrap();
        let b = simple_range(g, &x);
        worst = worst.max(((a - b) / b).abs());
    }
    outcome(
        worst < 1e-6,
        format!("max relative difference {worst:.2e} over 100 launches (< 1e-6)"),
    )
}

/// `log N(y | 0, K + (noise + jitter) I)` by dense LU.
fn dense_lml(x: &[Point], y: &[f64], h: &GpHyperparams) -> f64 {
    let n = x.len();
    let jitter = 1e-10 * h.signal_var;
    let c = DMatrix::from_fn(n, n, |i, j| {
        kernel_rbf_ard(&x[i], &x[j], h) + if i == j { h.noise_var + jitter } else { 0.0 }
    });
    let lu = c.lu();
    let y = DVector::from_column_slice(y);
    -0.5 * y.dot(&lu.solve(&y).unwrap())
        - 0.5 * lu.determinant().ln()
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

fn random_inputs(r: &mut rng::StreamRng, n: usize) -> Vec<Point> {
    (0..n)
        .map(|_| [40.0 + 60.0 * rng::uniform(r), 1.0 + 89.0 * rng::uniform(r)])
        .collect()
}

fn gp_core() -> Outcome {
    let mut r = rng::stream(11, 0);
    let mut lml_err: f64 = 0.0;
    for trial in 0..200 {
        let n = 1 + trial % 10;
        let x = random_inputs(&mut r, n);
        let y: Vec<f64> = (0..n).map(|_| rng::standard_normal(&mut r)).collect();
        let sf = 0.1 + 0.9 * rng::uniform(&mut r);
        let l = [
            1.0 + 49.0 * rng::uniform(&mut r),
            1.0 + 49.0 * rng::uniform(&mut r),
        ];
        let sn = 0.05 + 2.0 * rng::uniform(&mut r);
        let h = GpHyperparams::new(sf * sf, l, sn * sn).unwrap();
        let got = log_marginal_likelihood(&x, &y, &h).unwrap();
        lml_err = lml_err.max((got - dense_lml(&x, &y, &h)).abs());
    }

    // near-noiseless interpolation at well-separated inputs
    let x: Vec<Point> = (0..6)
        .map(|i| [40.0 + 12.0 * i as f64, 5.0 + 16.0 * i as f64])
        .collect();
    let y = vec![3.0, -1.0, 4.0, 1.5, -5.0, 9.0];
    let mean = y.iter().sum::<f64>() / 6.0;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 6.0).sqrt();
    let h = GpHyperparams::new(1.0, [8.0, 10.0], 1e-10).unwrap();
    let m = GpModel::new(x.clone(), y.clone(), mean, sd, h).unwrap();
    let interp_err = x
        .iter()
        .zip(m.standardized_targets())
        .map(|(p, t)| (m.predict_standardized(p).0 - t).abs())
        .fold(0.0, f64::max);

    // synthetic recovery, N = 40
    let truth = GpHyperparams::new(0.64, [15.0, 20.0], 0.01).unwrap();
    let mut r = rng::stream(0, 1);
    let x = random_inputs(&mut r, 40);
    let k = DMatrix::from_fn(40, 40, |i, j| {
        kernel_rbf_ard(&x[i], &x[j], &truth) + if i == j { 1e-10 } else { 0.0 }
    });
    let f = k.cholesky().unwrap().l() * DVector::from_fn(40, |_, _| rng::standard_normal(&mut r));
    let y: Vec<f64> = (0..40)
        .map(|i| f[i] + 0.1 * rng::standard_normal(&mut r))
        .collect();
    let fit = fit_map(&x, &y, &FitConfig::default()).unwrap();
    let l = fit.hyper().lengthscales;
    let recovered = (l[0] - 15.0).abs() <= 7.5 && (l[1] - 20.0).abs() <= 10.0;

    outcome(
        lml_err < 1e-8 && interp_err < 1e-6 && recovered,
        format!(
            "lml max |diff| {lml_err:.2e} (< 1e-8); interpolation error {interp_err:.2e} (< 1e-6); recovered lengthscales ({:.2}, {:.2}) vs (15, 20) +-50%",
            l[0], l[1]
        ),
    )
}

fn quadrature() -> Outcome {
    let rule = GaussHermite::seven();
    let wsum: f64 = rule.weights.iter().sum();
    let wsum_err = (wsum - std::f64::consts::PI.sqrt()).abs();
    let cfg = UtilityConfig::default();
    let draws = 10_000_000;
    let mut worst = (0.0, 0.0, 0.0);
    for (i, mean) in linspace(0.0, 250.0, 6).into_iter().enumerate() {
        for (j, sd) in linspace(0.0, 50.0, 6).into_iter().enumerate() {
            let mut r = rng::stream(99, (i * 6 + j) as u64);
            let mut total = 0.0;
            for _ in 0..draws {
                total += utility(
                    cfg.target - (mean + sd * rng::standard_normal(&mut r)),
                    &cfg,
                );
            }
            let mc = total / draws as f64;
            let gh = gh_expected_utility(
                &PerSamplePrediction {
                    mean,
                    variance: sd * sd,
                },
                &cfg,
                rule,
            );
            if (gh - mc).abs() > worst.0 {
                worst = ((gh - mc).abs(), mean, sd);
            }
        }
    }
    outcome(
        worst.0 < 1e-2 && wsum_err < 1e-12,
        format!(
            "max |GH - MC| {:.4} at mean {} m, sd {} m (< 1e-2); weight sum error {wsum_err:.1e} (< 1e-12)",
            worst.0, worst.1, worst.2
        ),
    )
}

fn mcmc_correctness() -> Outcome {
    let mu = [1.0, -2.0];
    let cov = [[1.0, 0.6], [0.6, 2.0]];
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    let prec = [
        [cov[1][1] / det, -cov[0][1] / det],
        [-cov[1][0] / det, cov[0][0] / det],
    ];
    let log_density = |x: &[f64]| {
        let d = [x[0] - mu[0], x[1] - mu[1]];
        -0.5 * (d[0] * (prec[0][0] * d[0] + prec[0][1] * d[1])
            + d[1] * (prec[1][0] * d[0] + prec[1][1] * d[1]))
    };
    let cfg = McmcConfig {
        chains: 4,
        burn_in: 2000,
        keep: 12_500,
        seed: 5,
        ..Default::default()
    };
    let (draws, _) = sample_pooled(
        &log_density,
        |_, r| vec![rng::standard_normal(r), rng::standard_normal(r)],
        &cfg,
    )
    .unwrap();
    let n = draws.len() as f64;
    let m = [0, 1].map(|k| draws.iter().map(|d| d[k]).sum::<f64>() / n);
    let c = |a: usize, b: usize| {
        draws
            .iter()
            .map(|d| (d[a] - m[a]) * (d[b] - m[b]))
            .sum::<f64>()
            / (n - 1.0)
    };
    let mean_err = (m[0] - mu[0]).abs().max((m[1] - mu[1]).abs());
    let cov_rel = [(0, 0), (0, 1), (1, 1)]
        .iter()
        .map(|&(a, b)| ((c(a, b) - cov[a][b]) / cov[a][b]).abs())
        .fold(0.0, f64::max);
    outcome(
        mean_err < 0.05 && cov_rel < 0.10,
        format!("{} draws: mean error {mean_err:.4} (< 0.05), covariance relative error {cov_rel:.3} (< 0.10)", draws.len()),
    )
}

fn biased_gravity() -> Outcome {
    let ds = builtin_dataset("C").unwrap();
    let cfg = SurrogateConfig {
        mcmc: McmcConfig {
            seed: 42,
            ..Default::default()
        },
        ..Default::default()
    };
    let s = surrogate::fit(SurrogateKind::Simple, &ds, &cfg).unwrap();
    let g = s.posterior().unwrap().g_mean();
    outcome(
        (29.0..=43.0).contains(&g) && g > 9.8,
        format!("dataset C posterior mean g = {g:.3} m/s^2 (in [29, 43])"),
    )
}

fn run_reproduce(dir: &Path) -> Result<f64, String> {
    let start = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_hybridcal"))
        .args(["--quiet", "--output-dir"])
        .arg(dir)
        .args(["reproduce", "--seed", "42"])
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(String::from_utf8_lossy(&o.stderr).into_owned());
    }
    Ok(start.elapsed().as_secs_f64())
}

fn report(dir: &Path, ds: &str, model: &str) -> RunReport {
    RunReport::load(&dir.join("reproduce").join(format!("{ds}-{model}.json"))).unwrap()
}

fn table_ii(dir: &Path, secs: f64) -> Outcome {
    let mut ok = secs < 600.0;
    let mut notes = Vec::new();
    for ds in ["A", "B", "C"] {
        let (s, g, h) = (
            report(dir, ds, "simple"),
            report(dir, ds, "gp"),
            report(dir, ds, "hybrid"),
        );
        let order = h.max_expected_utility > g.max_expected_utility
            && g.max_expected_utility > s.max_expected_utility;
        let overshoot = s.observed_distance_m > 100.0;
        let close = (h.observed_distance_m - 100.0).abs() <= 33.0;
        ok &= order && overshoot && close;
        notes.push(format!(
            "{ds}: E[u] {:.3}/{:.3}/{:.3}, simple lands {:.1} m, hybrid lands {:.1} m",
            s.max_expected_utility,
            g.max_expected_utility,
            h.max_expected_utility,
            s.observed_distance_m,
            h.observed_distance_m
        ));
    }
    let hc = report(dir, "C", "hybrid");
    let near = (hc.argmax_psi_deg - 72.0).abs() <= 1.0 && (hc.argmax_v0_mps - 72.5).abs() <= 2.5;
    ok &= near;
    notes.push(format!(
        "hybrid-C argmax ({}, {}); {secs:.1} s (< 600 s)",
        hc.argmax_psi_deg, hc.argmax_v0_mps
    ));
    outcome(ok, notes.join("; "))
}

fn exact_value_caveat(dir: &Path, windows_pass: bool) -> Outcome {
    let best = |model: &str| {
        ["A", "B", "C"]
            .iter()
            .map(|ds| report(dir, ds, model).max_expected_utility)
            .fold(f64::MIN, f64::max)
    };
    outcome(
        windows_pass,
        format!(
            "checked by windows only; best E[u] simple/gp/hybrid {:.3}/{:.3}/{:.3} (published 0.698/0.818/0.987)",
            best("simple"),
            best("gp"),
            best("hybrid")
        ),
    )
}

fn determinism(a: &Path, b: &Path) -> Outcome {
    let mut names: Vec<String> = fs::read_dir(a.join("reproduce"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| {
            fs::read(a.join("reproduce").join(n)).ok() != fs::read(b.join("reproduce").join(n)).ok()
        })
        .collect();
    outcome(
        differing.is_empty() && names.len() == 10,
        format!("{} files compared, {} differ", names.len(), differing.len()),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 physics fidelity", physics_fidelity()),
        ("2 Table I reproduction", table_reproduction()),
        ("3 vacuum equivalence", vacuum_equivalence()),
        ("4 GP core", gp_core()),
        ("5 quadrature", quadrature()),
        ("6 MCMC correctness", mcmc_correctness()),
        ("7 biased g", biased_gravity()),
    ];

    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    match (run_reproduce(first.path()), run_reproduce(second.path())) {
        (Ok(secs), Ok(_)) => {
            let c8 = table_ii(first.path(), secs);
            let windows = c8.pass;
            results.push(("8 Table II qualitative", c8));
            results.push((
                "9 exact-value caveat",
                exact_value_caveat(first.path(), windows),
            ));
            results.push(("10 determinism", determinism(first.path(), second.path())));
        }
        (Err(e), _) | (_, Err(e)) => {
            for name in [
                "8 Table II qualitative",
                "9 exact-value caveat",
                "10 determinism",
            ] {
                results.push((name, outcome(false, format!("reproduce failed: {e}"))));
            }
        }
    }

    let mut failed = 0;
    for (name, o) in &results {
        println!(
            "[{}] criterion {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
