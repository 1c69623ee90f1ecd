//! Command-line surface.
//!
//! Three subcommands: `codelength` (one criterion, one family, one sample),
//! `select` (compare the families under one criterion), and `experiment`
//! (Monte Carlo runs writing CSV tables plus a JSON run manifest).
//!
//! Experiments read an optional JSON config file; every field can be
//! overridden by a flag, and flags win. Outputs are deterministic functions
//! of the resolved config — the manifest written next to each table set is
//! enough to reproduce the run byte for byte. The only environment
//! dependence is `MDLSELECT_WORKERS`, which caps the rayon worker count and
//! never changes results.
//!
//! Exit codes: 0 success, 2 argument/config errors, 3 degenerate sample
//! where the criterion needs an ML estimate, 4 I/O failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::codes::{self, CriterionId};
use crate::harness::{
    self, CalibrationBin, ErrorExperiment, ExperimentConfig, RegretSlopeExperiment,
};
use crate::models::{Mean, ModelFamily, Sample};
use crate::selection;
use crate::{Error, Result};

/// Environment variable capping the rayon worker count.
pub const WORKERS_ENV: &str = "MDLSELECT_WORKERS";

#[derive(Parser)]
#[command(
    name = "mdlselect",
    version,
    about = "MDL model selection between Poisson and geometric models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print one criterion's codelength report for one family
    Codelength(CodelengthArgs),
    /// Compare both families under one criterion
    Select(SelectArgs),
    /// Run a Monte Carlo experiment and write CSV tables
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Poisson,
    Geometric,
}

impl From<FamilyArg> for ModelFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Poisson => ModelFamily::Poisson,
            FamilyArg::Geometric => ModelFamily::Geometric,
        }
    }
}

#[derive(Args)]
struct CriterionArgs {
    /// known-mu | bic | anml | anml-two-part | plugin | bayes-exact | bayes-approx
    #[arg(long)]
    criterion: String,
    /// True mean (required by, and only valid with, known-mu)
    #[arg(long)]
    mu: Option<f64>,
    /// Parameter range bound for anml
    #[arg(long = "mu-star")]
    mu_star: Option<f64>,
}

impl CriterionArgs {
    fn resolve(&self) -> Result<(CriterionId, Option<Mean>)> {
        let criterion = if self.criterion == "anml" {
            let mu_star = self.mu_star.ok_or_else(|| {
                Error::InvalidArgument("anml needs --mu-star (or use anml(MU_STAR))".into())
            })?;
            format!("anml({mu_star})").parse::<CriterionId>()?
        } else {
            let parsed = CriterionId::from_str(&self.criterion)?;
            if self.mu_star.is_some() {
                return Err(Error::InvalidArgument(format!(
                    "--mu-star only applies to anml, not {parsed}"
                )));
            }
            parsed
        };
        let mu_true = match self.mu {
            Some(v) => Some(Mean::new(v)?),
            None => None,
        };
        if criterion.requires_true_mean() && mu_true.is_none() {
            return Err(Error::InvalidArgument("known-mu needs --mu".into()));
        }
        if !criterion.requires_true_mean() && mu_true.is_some() {
            return Err(Error::InvalidArgument(format!(
                "--mu only applies to known-mu, not {criterion}"
            )));
        }
        Ok((criterion, mu_true))
    }
}

#[derive(Args)]
struct CodelengthArgs {
    /// Model family to code with
    #[arg(long)]
    family: FamilyArg,
    #[command(flatten)]
    criterion: CriterionArgs,
    /// Comma-separated nonnegative integer outcomes, e.g. 3,5
    #[arg(long)]
    data: String,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    criterion: CriterionArgs,
    /// Comma-separated nonnegative integer outcomes, e.g. 3,5
    #[arg(long)]
    data: String,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(subcommand)]
    kind: ExperimentKind,
}

#[derive(Subcommand)]
enum ExperimentKind {
    /// Error-rate and bias curves over (mean, n) cells
    ErrorCurve(ExperimentRunArgs),
    /// Posterior calibration binning on one (mean, n) cell
    Calibration(ExperimentRunArgs),
    /// Plug-in regret growth against ln n
    RegretSlope(RegretArgs),
}

#[derive(Args)]
struct ExperimentRunArgs {
    /// JSON config file; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV tables and the run manifest
    #[arg(long, default_value = "mdlselect-out")]
    out_dir: PathBuf,
    /// Comma-separated means, e.g. 4 or 4,8,16
    #[arg(long)]
    means: Option<String>,
    /// Sample sizes: comma list and/or inclusive ranges, e.g. 4..30 or 4,8,16
    #[arg(long)]
    n: Option<String>,
    /// Replicates per (mean, n) cell
    #[arg(long)]
    replicates: Option<u64>,
    /// Probability that a replicate is Poisson-generated
    #[arg(long)]
    pi: Option<f64>,
    /// Comma-separated criteria, e.g. known-mu,bic,anml(10),plugin
    #[arg(long)]
    criteria: Option<String>,
    /// Master seed; everything in a run derives from it
    #[arg(long)]
    seed: Option<u64>,
    /// Posterior bins for the calibration experiment
    #[arg(long)]
    bins: Option<u32>,
    /// Also write a companion matplotlib script next to the tables
    #[arg(long)]
    emit_plot_script: bool,
}

#[derive(Args)]
struct RegretArgs {
    #[command(flatten)]
    run: ExperimentRunArgs,
    /// Family whose plug-in code is measured
    #[arg(long)]
    model: FamilyArg,
    /// Family the data are drawn from
    #[arg(long)]
    generating: FamilyArg,
    /// Generating mean (defaults to the config's first mean)
    #[arg(long)]
    mean: Option<f64>,
}

/// JSON config schema; every field optional, flags override.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    means: Option<Vec<f64>>,
    n_values: Option<Vec<u32>>,
    replicates: Option<u64>,
    poisson_prior: Option<f64>,
    criteria: Option<Vec<String>>,
    master_seed: Option<u64>,
    calibration_bins: Option<u32>,
}

/// Parses argv, dispatches, and returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    if let Some(workers) = read_worker_override() {
        // Ignore failure: the global pool can only be initialised once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    let outcome = match cli.command {
        Command::Codelength(args) => cmd_codelength(&args),
        Command::Select(args) => cmd_select(&args),
        Command::Experiment(args) => match args.kind {
            ExperimentKind::ErrorCurve(run) => cmd_error_curve(&run),
            ExperimentKind::Calibration(run) => cmd_calibration(&run),
            ExperimentKind::RegretSlope(args) => cmd_regret_slope(&args),
        },
    };
    match outcome {
        Ok(()) => 0,
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::DegenerateSample(_) => 3,
                Error::InvalidArgument(_)
                | Error::InvalidConfig(_)
                | Error::Unsupported(_) => 2,
                Error::NumericOverflow(_) | Error::Internal(_) => 1,
            }
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            4
        }
    }
}

fn read_worker_override() -> Option<usize> {
    let raw = std::env::var(WORKERS_ENV).ok()?;
    match raw.parse::<usize>() {
        Ok(w) if w >= 1 => Some(w),
        _ => {
            eprintln!("warning: ignoring {WORKERS_ENV}={raw} (expected a positive integer)");
            None
        }
    }
}

enum CliError {
    Core(Error),
    Io(std::io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult = std::result::Result<(), CliError>;

fn parse_data(data: &str) -> Result<Sample> {
    let outcomes = data
        .split(',')
        .map(|tok| {
            tok.trim().parse::<u64>().map_err(|_| {
                Error::InvalidArgument(format!("bad outcome {tok:?}: expected a nonnegative integer"))
            })
        })
        .collect::<Result<Vec<u64>>>()?;
    Sample::new(outcomes)
}

// ---------------------------------------------------------------------------
// codelength / select
// ---------------------------------------------------------------------------

fn cmd_codelength(args: &CodelengthArgs) -> CliResult {
    let (criterion, mu_true) = args.criterion.resolve()?;
    let sample = parse_data(&args.data)?;
    let family: ModelFamily = args.family.into();
    let report = codes::codelength(criterion, family, &sample, mu_true)?;
    println!("criterion: {criterion}");
    println!("family: {}", family.label());
    println!("total_nats: {}", report.total);
    println!("model_dependent_nats: {}", report.model_dependent);
    println!("hyper_code_nats: {}", report.hyper_code_length);
    println!("startup_code_nats: {}", report.startup_code_length);
    println!("conditioning: {}", report.conditioning);
    println!("degenerate: {}", report.degenerate);
    match codes::regret_of(family, &report, &sample) {
        Ok(regret) => println!("regret_nats: {regret}"),
        Err(Error::DegenerateSample(_)) => println!("regret_nats: undefined"),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn cmd_select(args: &SelectArgs) -> CliResult {
    let (criterion, mu_true) = args.criterion.resolve()?;
    let sample = parse_data(&args.data)?;
    let result = selection::evaluate(criterion, &sample, mu_true)?;
    if result.degenerate && criterion.requires_ml_estimate() {
        return Err(Error::DegenerateSample(
            "criterion needs an ML mean estimate and the sample has none",
        )
        .into());
    }
    println!("criterion: {criterion}");
    println!("delta_nats: {}", result.delta_nats);
    println!("chosen: {}", result.chosen.label());
    println!("posterior_poisson: {}", result.posterior_poisson);
    println!("degenerate: {}", result.degenerate);
    Ok(())
}

// ---------------------------------------------------------------------------
// experiment plumbing
// ---------------------------------------------------------------------------

fn load_config(args: &ExperimentRunArgs) -> Result<ExperimentConfig> {
    let file: ConfigFile = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::InvalidConfig(format!("cannot read {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    let defaults = ExperimentConfig::default();

    let criteria_from_file = file
        .criteria
        .map(|names| {
            names
                .iter()
                .map(|name| name.parse::<CriterionId>())
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;

    let mut cfg = ExperimentConfig {
        means: file.means.unwrap_or(defaults.means),
        n_values: file.n_values.unwrap_or(defaults.n_values),
        replicates: file.replicates.unwrap_or(defaults.replicates),
        poisson_prior: file.poisson_prior.unwrap_or(defaults.poisson_prior),
        criteria: criteria_from_file.unwrap_or(defaults.criteria),
        master_seed: file.master_seed.unwrap_or(defaults.master_seed),
        calibration_bins: file.calibration_bins.unwrap_or(defaults.calibration_bins),
    };

    if let Some(means) = &args.means {
        cfg.means = means
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidConfig(format!("bad mean {tok:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
    }
    if let Some(spec) = &args.n {
        cfg.n_values = parse_n_values(spec)?;
    }
    if let Some(replicates) = args.replicates {
        cfg.replicates = replicates;
    }
    if let Some(pi) = args.pi {
        cfg.poisson_prior = pi;
    }
    if let Some(criteria) = &args.criteria {
        cfg.criteria = split_criteria(criteria)?
            .iter()
            .map(|name| name.parse::<CriterionId>())
            .collect::<Result<Vec<_>>>()?;
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(bins) = args.bins {
        cfg.calibration_bins = bins;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Sample-size spec: comma-separated tokens, each a number or an inclusive
/// range `a..b`.
fn parse_n_values(spec: &str) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for tok in spec.split(',') {
        let tok = tok.trim();
        if let Some((a, b)) = tok.split_once("..") {
            let lo: u32 = a
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad range start {a:?}")))?;
            let hi: u32 = b
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad range end {b:?}")))?;
            if lo > hi {
                return Err(Error::InvalidConfig(format!("empty range {tok:?}")));
            }
            out.extend(lo..=hi);
        } else {
            out.push(
                tok.parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad sample size {tok:?}")))?,
            );
        }
    }
    Ok(out)
}

/// Splits a criteria list on commas that are not inside `anml(...)`.
fn split_criteria(spec: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for ch in spec.chars() {
        match ch {
            '(' => {
                depth += 1;
                current.push(ch);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                current.push(ch);
            }
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut current).trim().to_string());
            }
            _ => current.push(ch),
        }
    }
    if !current.trim().is_empty() {
        out.push(current.trim().to_string());
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig("empty criteria list".into()));
    }
    Ok(out)
}

#[derive(Serialize)]
struct ManifestConfig {
    means: Vec<f64>,
    n_values: Vec<u32>,
    replicates: u64,
    poisson_prior: f64,
    criteria: Vec<String>,
    master_seed: u64,
    calibration_bins: u32,
}

impl From<&ExperimentConfig> for ManifestConfig {
    fn from(cfg: &ExperimentConfig) -> Self {
        Self {
            means: cfg.means.clone(),
            n_values: cfg.n_values.clone(),
            replicates: cfg.replicates,
            poisson_prior: cfg.poisson_prior,
            criteria: cfg.criteria.iter().map(|c| c.to_string()).collect(),
            master_seed: cfg.master_seed,
            calibration_bins: cfg.calibration_bins,
        }
    }
}

/// Written alongside every output set; echoes everything needed to
/// re-execute the identical run.
#[derive(Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    experiment: String,
    config: ManifestConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    regret: Option<RegretManifest>,
    tie_policy: &'static str,
    workers: String,
    started_unix_ms: u128,
    finished_unix_ms: u128,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct RegretManifest {
    model: String,
    generating: String,
    mean: f64,
    replicates: u64,
}

fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn write_manifest(
    dir: &Path,
    experiment: &str,
    cfg: &ExperimentConfig,
    regret: Option<RegretManifest>,
    started_unix_ms: u128,
    outputs: &[PathBuf],
) -> CliResult {
    let manifest = RunManifest {
        tool: "mdlselect",
        version: env!("CARGO_PKG_VERSION"),
        experiment: experiment.to_string(),
        config: cfg.into(),
        regret,
        tie_policy: "ties count as half an error for each generating family",
        workers: std::env::var(WORKERS_ENV).unwrap_or_else(|_| "default".into()),
        started_unix_ms,
        finished_unix_ms: unix_ms(),
        outputs: outputs
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Internal(Box::leak(format!("manifest: {e}").into_boxed_str()) as &str))?;
    std::fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(())
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_table(path: &Path, header: &str, rows: &[String]) -> CliResult {
    let mut text = String::with_capacity(rows.len() * 48 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// experiment subcommands
// ---------------------------------------------------------------------------

fn cmd_error_curve(args: &ExperimentRunArgs) -> CliResult {
    let cfg = load_config(args)?;
    let started = unix_ms();
    let out = harness::run_error_experiment(&cfg)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let paths = write_error_tables(&args.out_dir, &out)?;
    if args.emit_plot_script {
        write_plot_script(&args.out_dir)?;
    }
    write_manifest(&args.out_dir, "error-curve", &cfg, None, started, &paths)?;
    println!(
        "error-curve: {} cells x {} criteria -> {}",
        cfg.means.len() * cfg.n_values.len(),
        cfg.criteria.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn write_error_tables(dir: &Path, out: &ErrorExperiment) -> std::result::Result<Vec<PathBuf>, CliError> {
    let main = dir.join("error_curve.csv");
    let rows: Vec<String> = out
        .points
        .iter()
        .map(|p| {
            format!(
                "{},{},{},{},{},{},{},{},{},{}",
                p.criterion,
                p.n,
                p.mean,
                p.poisson_prior,
                opt_cell(p.log10_error_poisson()),
                opt_cell(p.log10_error_geometric()),
                opt_cell(p.log10_error_mixture()),
                opt_cell(p.bias()),
                p.ties(),
                p.replicates(),
            )
        })
        .collect();
    write_table(
        &main,
        "criterion,n,mean,pi,err_p_gen,err_g_gen,err_mix,bias,ties,reps",
        &rows,
    )?;

    let counts = dir.join("error_curve_counts.csv");
    let rows: Vec<String> = out
        .points
        .iter()
        .map(|p| {
            format!(
                "{},{},{},{},{},{},{},{},{},{},{}",
                p.criterion,
                p.n,
                p.mean,
                p.poisson_prior,
                p.reps_poisson,
                p.reps_geometric,
                p.errors_poisson,
                p.errors_geometric,
                p.ties_poisson,
                p.ties_geometric,
                p.fallback_exact,
            )
        })
        .collect();
    write_table(
        &counts,
        "criterion,n,mean,pi,reps_p,reps_g,err_p,err_g,tie_p,tie_g,fallback_exact",
        &rows,
    )?;

    let mut paths = vec![main, counts];
    if !out.baseline.is_empty() {
        let baseline = dir.join("error_curve_baseline.csv");
        let rows: Vec<String> = out
            .baseline
            .iter()
            .map(|b| {
                format!(
                    "{},{},{},{},{},{},{}",
                    b.criterion,
                    b.n,
                    b.mean,
                    b.poisson_prior,
                    opt_cell(b.d_log10_poisson),
                    opt_cell(b.d_log10_geometric),
                    opt_cell(b.d_log10_mixture),
                )
            })
            .collect();
        write_table(
            &baseline,
            "criterion,n,mean,pi,d_log10_err_p,d_log10_err_g,d_log10_err_mix",
            &rows,
        )?;
        paths.push(baseline);
    }
    Ok(paths)
}

fn cmd_calibration(args: &ExperimentRunArgs) -> CliResult {
    let mut cfg = load_config(args)?;
    // Paper-style defaults for this experiment when the caller did not pin
    // a cell: one mean, one sample size.
    if args.means.is_none() && args.config.is_none() {
        cfg.means = vec![8.0];
    }
    if args.n.is_none() && args.config.is_none() {
        cfg.n_values = vec![8];
    }
    let started = unix_ms();
    let bins = harness::run_calibration_experiment(&cfg)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let path = args.out_dir.join("calibration.csv");
    let rows: Vec<String> = bins
        .iter()
        .map(|b: &CalibrationBin| {
            format!(
                "{},{},{},{},{},{},{},{}",
                b.criterion,
                b.bin_index,
                b.lower,
                b.upper,
                b.count,
                b.poisson_count,
                opt_cell(b.poisson_frequency()),
                b.fallback_count,
            )
        })
        .collect();
    write_table(
        &path,
        "criterion,bin,lo,hi,count,poisson_count,freq_poisson,fallback_count",
        &rows,
    )?;
    if args.emit_plot_script {
        write_plot_script(&args.out_dir)?;
    }
    write_manifest(&args.out_dir, "calibration", &cfg, None, started, &[path])?;
    println!(
        "calibration: {} bins x {} criteria -> {}",
        cfg.calibration_bins,
        cfg.criteria.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_regret_slope(args: &RegretArgs) -> CliResult {
    let cfg = load_config(&args.run)?;
    let mean_value = args.mean.unwrap_or(cfg.means[0]);
    let mean = Mean::new(mean_value)?;
    let started = unix_ms();
    let out = harness::run_regret_slope_experiment(
        args.model.into(),
        args.generating.into(),
        mean,
        &cfg.n_values,
        cfg.replicates,
        cfg.master_seed,
    )?;
    std::fs::create_dir_all(&args.run.out_dir)?;
    let paths = write_regret_tables(&args.run.out_dir, &out)?;
    if args.run.emit_plot_script {
        write_plot_script(&args.run.out_dir)?;
    }
    write_manifest(
        &args.run.out_dir,
        "regret-slope",
        &cfg,
        Some(RegretManifest {
            model: out.model.label().to_string(),
            generating: out.generating.label().to_string(),
            mean: out.mean,
            replicates: cfg.replicates,
        }),
        started,
        &paths,
    )?;
    println!(
        "regret-slope: slope {} (predicted {}) -> {}",
        out.slope,
        out.predicted_slope,
        args.run.out_dir.display()
    );
    Ok(())
}

fn write_regret_tables(
    dir: &Path,
    out: &RegretSlopeExperiment,
) -> std::result::Result<Vec<PathBuf>, CliError> {
    let points = dir.join("regret_points.csv");
    let rows: Vec<String> = out
        .points
        .iter()
        .map(|p| {
            format!(
                "{},{},{},{},{},{},{}",
                out.model.label(),
                out.generating.label(),
                out.mean,
                p.n,
                p.mean_regret,
                p.replicates_used,
                p.skipped,
            )
        })
        .collect();
    write_table(
        &points,
        "model,generating,mean,n,mean_regret,replicates_used,skipped",
        &rows,
    )?;

    let fit = dir.join("regret_fit.csv");
    let row = format!(
        "{},{},{},{},{},{},{}",
        out.model.label(),
        out.generating.label(),
        out.mean,
        out.slope,
        out.intercept,
        out.r_squared,
        out.predicted_slope,
    );
    write_table(
        &fit,
        "model,generating,mean,slope,intercept,r_squared,predicted_slope",
        &[row],
    )?;
    Ok(vec![points, fit])
}

fn write_plot_script(dir: &Path) -> CliResult {
    let mut s = String::new();
    let _ = writeln!(s, "#!/usr/bin/env python3");
    let _ = writeln!(s, "\"\"\"Plot companion for mdlselect CSV tables found in this directory.\"\"\"");
    let _ = writeln!(s, "import csv, os");
    let _ = writeln!(s, "import matplotlib.pyplot as plt");
    let _ = writeln!(s);
    let _ = writeln!(s, "def load(name):");
    let _ = writeln!(s, "    if not os.path.exists(name):");
    let _ = writeln!(s, "        return []");
    let _ = writeln!(s, "    with open(name) as f:");
    let _ = writeln!(s, "        return list(csv.DictReader(f))");
    let _ = writeln!(s);
    let _ = writeln!(s, "rows = load('error_curve.csv')");
    let _ = writeln!(s, "if rows:");
    let _ = writeln!(s, "    crits = sorted({{r['criterion'] for r in rows}})");
    let _ = writeln!(s, "    for crit in crits:");
    let _ = writeln!(s, "        pts = [(int(r['n']), float(r['err_mix'])) for r in rows");
    let _ = writeln!(s, "               if r['criterion'] == crit and r['err_mix']]");
    let _ = writeln!(s, "        if pts:");
    let _ = writeln!(s, "            pts.sort()");
    let _ = writeln!(s, "            plt.plot(*zip(*pts), marker='o', label=crit)");
    let _ = writeln!(s, "    plt.xlabel('n'); plt.ylabel('log10 error (mixture)')");
    let _ = writeln!(s, "    plt.legend(); plt.savefig('error_curve.png', dpi=150); plt.clf()");
    let _ = writeln!(s);
    let _ = writeln!(s, "rows = load('calibration.csv')");
    let _ = writeln!(s, "if rows:");
    let _ = writeln!(s, "    crits = sorted({{r['criterion'] for r in rows}})");
    let _ = writeln!(s, "    for crit in crits:");
    let _ = writeln!(s, "        pts = [((float(r['lo']) + float(r['hi'])) / 2, float(r['freq_poisson']))");
    let _ = writeln!(s, "               for r in rows if r['criterion'] == crit and r['freq_poisson']]");
    let _ = writeln!(s, "        if pts:");
    let _ = writeln!(s, "            plt.plot(*zip(*pts), marker='.', label=crit)");
    let _ = writeln!(s, "    plt.plot([0, 1], [0, 1], 'k--', lw=0.8)");
    let _ = writeln!(s, "    plt.xlabel('assessed P(poisson)'); plt.ylabel('empirical frequency')");
    let _ = writeln!(s, "    plt.legend(); plt.savefig('calibration.png', dpi=150); plt.clf()");
    let _ = writeln!(s);
    let _ = writeln!(s, "rows = load('regret_points.csv')");
    let _ = writeln!(s, "if rows:");
    let _ = writeln!(s, "    import math");
    let _ = writeln!(s, "    pts = [(math.log(int(r['n'])), float(r['mean_regret'])) for r in rows]");
    let _ = writeln!(s, "    pts.sort()");
    let _ = writeln!(s, "    plt.plot(*zip(*pts), marker='o')");
    let _ = writeln!(s, "    plt.xlabel('ln n'); plt.ylabel('mean plug-in regret')");
    let _ = writeln!(s, "    plt.savefig('regret_slope.png', dpi=150)");
    std::fs::write(dir.join("plot.py"), s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_parsing() {
        assert_eq!(parse_data("3,5").unwrap().outcomes(), &[3, 5]);
        assert_eq!(parse_data(" 0 , 1 ,2").unwrap().outcomes(), &[0, 1, 2]);
        assert!(parse_data("").is_err());
        assert!(parse_data("3,-1").is_err());
        assert!(parse_data("3,x").is_err());
    }

    #[test]
    fn n_value_specs() {
        assert_eq!(parse_n_values("4..7").unwrap(), vec![4, 5, 6, 7]);
        assert_eq!(parse_n_values("4,8,16").unwrap(), vec![4, 8, 16]);
        assert_eq!(parse_n_values("2..3,10").unwrap(), vec![2, 3, 10]);
        assert!(parse_n_values("7..4").is_err());
        assert!(parse_n_values("x").is_err());
    }

    #[test]
    fn criteria_splitting_respects_parentheses() {
        assert_eq!(
            split_criteria("bic,anml(10),plugin").unwrap(),
            vec!["bic", "anml(10)", "plugin"]
        );
        assert_eq!(split_criteria("known-mu").unwrap(), vec!["known-mu"]);
    }

    #[test]
    fn criterion_resolution() {
        let args = CriterionArgs {
            criterion: "anml".into(),
            mu: None,
            mu_star: Some(10.0),
        };
        let (c, mu) = args.resolve().unwrap();
        assert_eq!(c, CriterionId::AnmlRestricted(10.0));
        assert!(mu.is_none());

        let args = CriterionArgs {
            criterion: "anml".into(),
            mu: None,
            mu_star: None,
        };
        assert!(args.resolve().is_err());

        let args = CriterionArgs {
            criterion: "known-mu".into(),
            mu: Some(1.0),
            mu_star: None,
        };
        let (c, mu) = args.resolve().unwrap();
        assert_eq!(c, CriterionId::KnownMu);
        assert_eq!(mu.unwrap().get(), 1.0);

        let args = CriterionArgs {
            criterion: "bic".into(),
            mu: Some(1.0),
            mu_star: None,
        };
        assert!(args.resolve().is_err());
    }

    #[test]
    fn config_file_merging() {
        let dir = std::env::temp_dir().join(format!("mdlselect-cli-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cfg.json");
        std::fs::write(
            &path,
            r#"{"means": [2.0], "replicates": 10, "criteria": ["bic", "anml(10)"]}"#,
        )
        .unwrap();
        let args = ExperimentRunArgs {
            config: Some(path.clone()),
            out_dir: dir.clone(),
            means: None,
            n: Some("4,5".into()),
            replicates: None,
            pi: None,
            criteria: None,
            seed: Some(9),
            bins: None,
            emit_plot_script: false,
        };
        let cfg = load_config(&args).unwrap();
        assert_eq!(cfg.means, vec![2.0]); // from file
        assert_eq!(cfg.n_values, vec![4, 5]); // flag wins
        assert_eq!(cfg.replicates, 10);
        assert_eq!(cfg.master_seed, 9);
        assert_eq!(
            cfg.criteria,
            vec![CriterionId::Bic, CriterionId::AnmlRestricted(10.0)]
        );

        std::fs::write(&path, r#"{"unknown_field": 1}"#).unwrap();
        assert!(load_config(&args).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

}
