use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use hybridcal::calibrate::{posterior_summary, McmcConfig, SimplePrior};
use hybridcal::data::{
    builtin_dataset, generate_dataset, load_dataset, load_designs, save_dataset, Dataset,
    NoiseSpec, REFERENCE_SIGMA_M,
};
use hybridcal::gp::FitConfig;
use hybridcal::optimize::{
    evaluate_truth, expected_distance, grid_search, GridSpec, ObjectiveSurface, RunReport,
    UtilityConfig, DEFAULT_SAMPLES,
};
use hybridcal::physics::PhysicsParams;
use hybridcal::surrogate::{
    self, CalibratedSurrogate, SurrogateConfig, SurrogateKind, MANIFEST_FILE,
};

const THREADS_ENV: &str = "HYBRIDCAL_THREADS";
const DATASETS: [&str; 3] = ["A", "B", "C"];

#[derive(Parser, Debug)]
#[command(
    name = "hybridcal",
    version,
    about = "Calibrate projectile surrogates and choose a firing solution"
)]
struct Cli {
    /// Seed for every random stream (MCMC, GP restarts, subsampling, noise).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    #[arg(long, global = true, default_value = "out")]
    output_dir: PathBuf,

    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a training dataset CSV.
    Generate(GenerateArgs),
    /// Calibrate one surrogate and save its artifacts.
    Calibrate(CalibrateArgs),
    /// Grid-search the expected utility and evaluate the chosen launch on the truth model.
    Optimize(OptimizeArgs),
    /// Run all dataset x model combinations and print the results table.
    Reproduce(ReproduceArgs),
    /// Export the expected-utility surface as CSV.
    Surface(OptimizeArgs),
}

#[derive(Args, Debug, Clone)]
struct TruthArgs {
    #[arg(long, default_value_t = 1.0)]
    mass_kg: f64,
    #[arg(long, default_value_t = 9.8)]
    gravity_mps2: f64,
    /// Quadratic drag coefficient, kg/m.
    #[arg(long, default_value_t = 0.01)]
    drag_kg_per_m: f64,
}

impl TruthArgs {
    fn params(&self) -> Result<PhysicsParams> {
        Ok(PhysicsParams::new(
            self.mass_kg,
            self.gravity_mps2,
            self.drag_kg_per_m,
        )?)
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Copy a tabulated training set (A, B or C).
    #[arg(long, conflicts_with = "designs", required_unless_present = "designs")]
    builtin: Option<String>,
    /// CSV of launch designs (psi_deg,v0_mps) to simulate.
    #[arg(long)]
    designs: Option<PathBuf>,
    #[arg(long, default_value_t = REFERENCE_SIGMA_M)]
    sigma_m: f64,
    #[arg(long)]
    name: Option<String>,
    /// Output file; defaults to <output-dir>/dataset-<name>.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    truth: TruthArgs,
}

#[derive(Args, Debug, Clone)]
struct FitArgs {
    /// Builtin label (A, B, C) or path to a dataset CSV.
    #[arg(long, default_value = "A")]
    dataset: String,
    /// simple, gp or hybrid.
    #[arg(long, default_value = "hybrid")]
    model: SurrogateKind,
    #[arg(long, default_value_t = McmcConfig::default().chains)]
    chains: usize,
    #[arg(long, default_value_t = McmcConfig::default().burn_in)]
    burn_in: usize,
    /// Retained draws per chain.
    #[arg(long, default_value_t = McmcConfig::default().keep)]
    keep: usize,
    #[arg(long, default_value_t = FitConfig::default().restarts)]
    restarts: usize,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[command(flatten)]
    fit: FitArgs,
}

#[derive(Args, Debug, Clone)]
struct GridArgs {
    #[arg(long, default_value_t = GridSpec::default().psi_min)]
    psi_min_deg: f64,
    #[arg(long, default_value_t = GridSpec::default().psi_max)]
    psi_max_deg: f64,
    #[arg(long, default_value_t = GridSpec::default().psi_step)]
    psi_step_deg: f64,
    #[arg(long, default_value_t = GridSpec::default().v0_min)]
    v0_min_mps: f64,
    #[arg(long, default_value_t = GridSpec::default().v0_max)]
    v0_max_mps: f64,
    #[arg(long, default_value_t = GridSpec::default().v0_step)]
    v0_step_mps: f64,
}

impl GridArgs {
    fn spec(&self) -> Result<GridSpec> {
        let g = GridSpec {
            v0_min: self.v0_min_mps,
            v0_max: self.v0_max_mps,
            v0_step: self.v0_step_mps,
            psi_min: self.psi_min_deg,
            psi_max: self.psi_max_deg,
            psi_step: self.psi_step_deg,
        };
        g.validate()?;
        Ok(g)
    }
}

#[derive(Args, Debug, Clone)]
struct DecisionArgs {
    #[arg(long, default_value_t = UtilityConfig::default().target)]
    target_m: f64,
    #[arg(long, default_value_t = UtilityConfig::default().miss_cap)]
    miss_cap_m: f64,
    /// Posterior draws used in the expectation.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[command(flatten)]
    grid: GridArgs,
}

impl DecisionArgs {
    fn utility(&self) -> Result<UtilityConfig> {
        Ok(UtilityConfig::new(self.target_m, self.miss_cap_m)?)
    }
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    fit: FitArgs,
    /// Saved surrogate manifest; defaults to the calibrate output for --dataset/--model.
    #[arg(long, conflicts_with = "fit_inline")]
    surrogate: Option<PathBuf>,
    /// Calibrate inline instead of loading saved artifacts.
    #[arg(long = "fit", id = "fit_inline")]
    fit_inline: bool,
    #[command(flatten)]
    decision: DecisionArgs,
    /// Observation noise for the truth-model shot.
    #[arg(long, default_value_t = REFERENCE_SIGMA_M)]
    sigma_m: f64,
    #[command(flatten)]
    truth: TruthArgs,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[command(flatten)]
    decision: DecisionArgs,
    #[arg(long, default_value_t = REFERENCE_SIGMA_M)]
    sigma_m: f64,
    #[arg(long, default_value_t = McmcConfig::default().chains)]
    chains: usize,
    #[arg(long, default_value_t = McmcConfig::default().burn_in)]
    burn_in: usize,
    #[arg(long, default_value_t = McmcConfig::default().keep)]
    keep: usize,
    #[arg(long, default_value_t = FitConfig::default().restarts)]
    restarts: usize,
    #[command(flatten)]
    truth: TruthArgs,
}

fn surrogate_config(
    seed: u64,
    chains: usize,
    burn_in: usize,
    keep: usize,
    restarts: usize,
) -> Result<SurrogateConfig> {
    let mcmc = McmcConfig {
        chains,
        burn_in,
        keep,
        seed,
        ..Default::default()
    };
    mcmc.validate()?;
    if restarts == 0 {
        bail!("--restarts must be at least 1");
    }
    let gp = FitConfig {
        restarts,
        seed,
        ..Default::default()
    };
    Ok(SurrogateConfig {
        prior: SimplePrior::default(),
        mcmc,
        gp,
    })
}

fn load_data_source(source: &str) -> Result<Dataset> {
    if DATASETS.contains(&source) {
        return Ok(builtin_dataset(source)?);
    }
    let path = Path::new(source);
    load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn dataset_tag(ds: &Dataset) -> String {
    ds.name.replace(
        |c: char| !c.is_ascii_alphanumeric() && c != '-' && c != '_',
        "_",
    )
}

fn bundle_dir(output_dir: &Path, ds: &str, kind: SurrogateKind) -> PathBuf {
    output_dir.join(format!("{ds}-{kind}"))
}

/// Per-combination noise seed, so the nine truth shots of a run are independent.
fn truth_noise_seed(seed: u64, dataset: &str, kind: SurrogateKind) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in dataset.bytes().chain(*b"/").chain(kind.as_str().bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    seed ^ h
}

fn cmd_generate(cli: &Cli, args: &GenerateArgs) -> Result<()> {
    let params = args.truth.params()?;
    let ds = if let Some(label) = &args.builtin {
        builtin_dataset(label)?
    } else {
        let path = args.designs.as_ref().expect("clap enforces a data source");
        let designs =
            load_designs(path).with_context(|| format!("reading designs {}", path.display()))?;
        let noise = NoiseSpec::new(args.sigma_m, cli.seed)?;
        let name = args.name.clone().unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "generated".into())
        });
        generate_dataset(&name, &designs, &params, &noise)?
    };
    let out = match &args.out {
        Some(p) => p.clone(),
        None => cli
            .output_dir
            .join(format!("dataset-{}.csv", dataset_tag(&ds))),
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    save_dataset(&ds, &out)?;
    if args.builtin.is_some() {
        info!("tabulated observations; truth model not evaluated");
    } else {
        info!(
            "truth model: m = {} kg, g = {} m/s^2, C = {} kg/m, sigma = {} m, seed = {}",
            params.mass, params.gravity, params.drag_coeff, args.sigma_m, cli.seed
        );
    }
    println!("wrote {} experiments to {}", ds.len(), out.display());
    Ok(())
}

fn calibration_summary(s: &CalibratedSurrogate, ds: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "dataset {} ({} experiments), model {}",
        ds.name,
        ds.len(),
        s.kind()
    );
    if let Some(post) = s.posterior() {
        let sum = posterior_summary(post);
        let _ = writeln!(
            out,
            "g   mean {:.3} m/s^2  sd {:.3}  90% [{:.3}, {:.3}]",
            sum.g.mean, sum.g.sd, sum.g.q05, sum.g.q95
        );
        let _ = writeln!(
            out,
            "tau mean {:.4e} 1/m^2  sd {:.4e}  90% [{:.4e}, {:.4e}]",
            sum.tau.mean, sum.tau.sd, sum.tau.q05, sum.tau.q95
        );
        let _ = writeln!(
            out,
            "draws {}  acceptance {:.3}",
            post.len(),
            post.meta.acceptance_rate
        );
    }
    if let Some(gp) = s.gp() {
        let h = gp.hyper();
        let _ = writeln!(
            out,
            "GP MAP: sigma_f {:.4}  l_v0 {:.3} m/s  l_psi {:.3} deg  sigma {:.4}  (standardized)",
            h.signal_sd(),
            h.lengthscales[0],
            h.lengthscales[1],
            h.noise_sd()
        );
        let _ = writeln!(
            out,
            "log marginal likelihood {:.4}",
            gp.log_marginal_likelihood()
        );
    }
    if let Some(g_ref) = s.residual_reference_g() {
        let _ = writeln!(out, "residual reference g {g_ref:.3} m/s^2");
    }
    out
}

fn cmd_calibrate(cli: &Cli, args: &CalibrateArgs) -> Result<()> {
    let f = &args.fit;
    let ds = load_data_source(&f.dataset)?;
    let cfg = surrogate_config(cli.seed, f.chains, f.burn_in, f.keep, f.restarts)?;
    let s = surrogate::fit(f.model, &ds, &cfg)
        .with_context(|| format!("fitting {} to {}", f.model, ds.name))?;
    let dir = bundle_dir(&cli.output_dir, &dataset_tag(&ds), f.model);
    let manifest = surrogate::save_bundle(&s, &ds.name, &dir)?;
    let summary = calibration_summary(&s, &ds);
    fs::write(dir.join("summary.txt"), &summary)
        .with_context(|| format!("writing summary in {}", dir.display()))?;
    print!("{summary}");
    println!("saved {}", manifest.display());
    Ok(())
}

fn obtain_surrogate(cli: &Cli, args: &OptimizeArgs) -> Result<(String, CalibratedSurrogate)> {
    if args.fit_inline {
        let f = &args.fit;
        let ds = load_data_source(&f.dataset)?;
        let cfg = surrogate_config(cli.seed, f.chains, f.burn_in, f.keep, f.restarts)?;
        let s = surrogate::fit(f.model, &ds, &cfg)?;
        return Ok((ds.name.clone(), s));
    }
    let manifest = match &args.surrogate {
        Some(p) => p.clone(),
        None => {
            let ds = load_data_source(&args.fit.dataset)?;
            bundle_dir(&cli.output_dir, &dataset_tag(&ds), args.fit.model).join(MANIFEST_FILE)
        }
    };
    if !manifest.exists() {
        bail!(
            "no calibrated surrogate at {} (run `calibrate` first or pass --fit)",
            manifest.display()
        );
    }
    let (m, s) = surrogate::load_bundle(&manifest)
        .with_context(|| format!("loading {}", manifest.display()))?;
    Ok((m.dataset, s))
}

fn run_decision(s: &CalibratedSurrogate, decision: &DecisionArgs) -> Result<ObjectiveSurface> {
    let grid = decision.grid.spec()?;
    Ok(grid_search(
        s,
        &grid,
        &decision.utility()?,
        decision.samples,
    )?)
}

fn make_report(
    dataset: &str,
    s: &CalibratedSurrogate,
    surface: &ObjectiveSurface,
    samples: usize,
    truth: &PhysicsParams,
    sigma_m: f64,
    seed: u64,
) -> Result<RunReport> {
    let noise = NoiseSpec::new(sigma_m, truth_noise_seed(seed, dataset, s.kind()))?;
    Ok(RunReport {
        dataset: dataset.to_string(),
        model: s.kind().as_str().to_string(),
        argmax_psi_deg: surface.argmax.psi,
        argmax_v0_mps: surface.argmax.v0,
        max_expected_utility: surface.max_value,
        expected_distance_m: expected_distance(s, &surface.argmax, samples)?,
        observed_distance_m: evaluate_truth(&surface.argmax, truth, &noise)?,
        seed,
    })
}

fn argmax_line(r: &RunReport) -> String {
    format!(
        "{} {}: psi {} deg, v0 {} m/s, E[u] {:.3}, expected {:.1} m, observed {:.1} m",
        r.dataset,
        r.model,
        r.argmax_psi_deg,
        r.argmax_v0_mps,
        r.max_expected_utility,
        r.expected_distance_m,
        r.observed_distance_m
    )
}

fn cmd_optimize(cli: &Cli, args: &OptimizeArgs) -> Result<()> {
    let (dataset, s) = obtain_surrogate(cli, args)?;
    let surface = run_decision(&s, &args.decision)?;
    let report = make_report(
        &dataset,
        &s,
        &surface,
        args.decision.samples,
        &args.truth.params()?,
        args.sigma_m,
        cli.seed,
    )?;
    fs::create_dir_all(&cli.output_dir)
        .with_context(|| format!("creating {}", cli.output_dir.display()))?;
    let stem = format!("{dataset}-{}", s.kind());
    let surface_path = cli.output_dir.join(format!("{stem}-surface.csv"));
    let report_path = cli.output_dir.join(format!("{stem}-report.json"));
    surface.write_csv(&surface_path)?;
    report.save(&report_path)?;
    println!("{}", argmax_line(&report));
    info!(
        "wrote {} and {}",
        surface_path.display(),
        report_path.display()
    );
    Ok(())
}

fn cmd_surface(cli: &Cli, args: &OptimizeArgs) -> Result<()> {
    let (dataset, s) = obtain_surrogate(cli, args)?;
    let surface = run_decision(&s, &args.decision)?;
    fs::create_dir_all(&cli.output_dir)
        .with_context(|| format!("creating {}", cli.output_dir.display()))?;
    let path = cli
        .output_dir
        .join(format!("{dataset}-{}-surface.csv", s.kind()));
    surface.write_csv(&path)?;
    println!(
        "max E[u] {:.4} at psi {} deg, v0 {} m/s; wrote {} nodes to {}",
        surface.max_value,
        surface.argmax.psi,
        surface.argmax.v0,
        surface.values.len(),
        path.display()
    );
    Ok(())
}

fn table(reports: &[RunReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8}{:<8}{:>8}{:>8}{:>10}{:>12}{:>12}{:>8}",
        "dataset", "model", "psi", "v0", "max E[u]", "expected", "observed", "seed"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<8}{:<8}{:>8}{:>8}{:>10.3}{:>12.1}{:>12.1}{:>8}",
            r.dataset,
            r.model,
            r.argmax_psi_deg,
            r.argmax_v0_mps,
            r.max_expected_utility,
            r.expected_distance_m,
            r.observed_distance_m,
            r.seed
        );
    }
    out
}

/// Datasets where the max expected utility is not ordered Hybrid > GP > Simple.
fn ordering_violations(reports: &[RunReport]) -> Vec<String> {
    let value = |ds: &str, kind: SurrogateKind| {
        reports
            .iter()
            .find(|r| r.dataset == ds && r.model == kind.as_str())
            .map(|r| r.max_expected_utility)
    };
    DATASETS
        .iter()
        .filter_map(|&ds| {
            let (s, g, h) = (
                value(ds, SurrogateKind::Simple)?,
                value(ds, SurrogateKind::BlackBoxGp)?,
                value(ds, SurrogateKind::Hybrid)?,
            );
            (!(h > g && g > s)).then(|| format!("{ds}: hybrid {h:.4}, gp {g:.4}, simple {s:.4}"))
        })
        .collect()
}

fn cmd_reproduce(cli: &Cli, args: &ReproduceArgs) -> Result<bool> {
    let cfg = surrogate_config(
        cli.seed,
        args.chains,
        args.burn_in,
        args.keep,
        args.restarts,
    )?;
    let truth = args.truth.params()?;
    let dir = cli.output_dir.join("reproduce");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut reports = Vec::new();
    for ds_label in DATASETS {
        let ds = builtin_dataset(ds_label)?;
        for kind in SurrogateKind::ALL {
            let s = surrogate::fit(kind, &ds, &cfg)
                .with_context(|| format!("fitting {kind} to {ds_label}"))?;
            let surface = run_decision(&s, &args.decision)
                .with_context(|| format!("optimizing {kind} on {ds_label}"))?;
            let report = make_report(
                ds_label,
                &s,
                &surface,
                args.decision.samples,
                &truth,
                args.sigma_m,
                cli.seed,
            )?;
            report.save(&dir.join(format!("{ds_label}-{kind}.json")))?;
            info!("{}", argmax_line(&report));
            reports.push(report);
        }
    }
    let text = table(&reports);
    fs::write(dir.join("table.txt"), &text)
        .with_context(|| format!("writing table in {}", dir.display()))?;
    print!("{text}");
    let bad = ordering_violations(&reports);
    if bad.is_empty() {
        println!("ordering hybrid > gp > simple holds on every dataset");
        Ok(true)
    } else {
        for b in &bad {
            eprintln!("ordering violated: {b}");
        }
        Ok(false)
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .with_context(|| format!("{THREADS_ENV}={v:?} is not a thread count"))?;
    if n == 0 {
        bail!("{THREADS_ENV} must be at least 1");
    }
    if rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .is_err()
    {
        warn!("thread pool already initialized; ignoring {THREADS_ENV}");
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    configure_threads()?;
    match &cli.command {
        Command::Generate(a) => cmd_generate(cli, a)?,
        Command::Calibrate(a) => cmd_calibrate(cli, a)?,
        Command::Optimize(a) => cmd_optimize(cli, a)?,
        Command::Surface(a) => cmd_surface(cli, a)?,
        Command::Reproduce(a) => return cmd_reproduce(cli, a),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
