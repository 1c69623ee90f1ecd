//! Deterministic, parallel Monte Carlo experiments.
//!
//! Three experiment families: error-rate/bias curves, calibration binning,
//! and plug-in regret growth. All randomness is derived per replicate from
//! `(master_seed, stream_label, replicate_index)` via
//! [`derive_replicate_seed`], never from a shared sequential stream, so:
//!
//! * re-running a configuration reproduces its outputs byte for byte, and
//! * outputs are identical for any number of rayon workers (replicate
//!   tallies are exact integer counts, reduced associatively; real-valued
//!   reductions are summed sequentially in replicate order).
//!
//! Within a replicate every criterion scores the same sample (a paired
//! design, which sharpens between-criterion comparisons). Ties count as
//! half an error for each generating family; tie counts are also reported
//! separately so any other scoring can be recomputed from the output
//! tables.

use rayon::prelude::*;

use crate::codes::{plugin_codelength, regret_of, CriterionId};
use crate::models::{Mean, ModelFamily, Sample};
use crate::rng::{mix64, SplitMix64};
use crate::selection::{self, Chosen, SelectionResult};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Seed derivation
// ---------------------------------------------------------------------------

/// Derives the seed for one replicate of one named stream.
///
/// Defined as `mix64(mix64(master_seed ^ fnv1a64(stream_label)) ^
/// (replicate_index * 0x9E3779B97F4A7C15))` where `mix64` is the SplitMix64
/// finalizer and `fnv1a64` the standard 64-bit FNV-1a hash. For a fixed
/// master seed and label this is injective in the replicate index (odd
/// multiplication, xor and `mix64` are all bijections on `u64`), so
/// replicate streams never collide.
pub fn derive_replicate_seed(master_seed: u64, stream_label: &str, replicate_index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &byte in stream_label.as_bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let stream = mix64(master_seed ^ h);
    mix64(stream ^ replicate_index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Declarative description of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Generating means, one cell per (mean, n) pair.
    pub means: Vec<f64>,
    /// Sample sizes.
    pub n_values: Vec<u32>,
    /// Replicates per cell.
    pub replicates: u64,
    /// Probability that a replicate is Poisson-generated.
    pub poisson_prior: f64,
    /// Criteria evaluated on every replicate.
    pub criteria: Vec<CriterionId>,
    pub master_seed: u64,
    /// Number of posterior bins for the calibration experiment.
    pub calibration_bins: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            means: vec![4.0],
            n_values: (4..=30).collect(),
            replicates: 100_000,
            poisson_prior: 0.5,
            criteria: CriterionId::standard_set(),
            master_seed: 1,
            calibration_bins: 40,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.means.is_empty() {
            return fail("means must be nonempty".into());
        }
        for &m in &self.means {
            if !(m > 0.0 && m.is_finite()) {
                return fail(format!("means must be finite and > 0, got {m}"));
            }
        }
        if self.n_values.is_empty() {
            return fail("n_values must be nonempty".into());
        }
        if self.n_values.iter().any(|&n| n == 0) {
            return fail("n_values must be >= 1".into());
        }
        if self.replicates == 0 {
            return fail("replicates must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.poisson_prior) {
            return fail(format!(
                "poisson_prior must be in [0, 1], got {}",
                self.poisson_prior
            ));
        }
        if self.criteria.is_empty() {
            return fail("criteria must be nonempty".into());
        }
        if self.calibration_bins < 2 {
            return fail("calibration_bins must be >= 2".into());
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Shared scoring
// ---------------------------------------------------------------------------

/// Evaluates a criterion like [`selection::evaluate`], except that a
/// degenerate approximate-Bayes conditional (no nonzero outcome after the
/// first) falls back to the exact Bayes code for that replicate. Returns
/// the result and whether the fallback fired.
pub fn evaluate_with_fallback(
    criterion: CriterionId,
    sample: &Sample,
    mu_true: Option<Mean>,
) -> Result<(SelectionResult, bool)> {
    let result = selection::evaluate(criterion, sample, mu_true)?;
    if result.degenerate && criterion == CriterionId::BayesApprox {
        let exact = selection::evaluate(CriterionId::BayesExact, sample, None)?;
        return Ok((exact, true));
    }
    Ok((result, false))
}

fn draw_generating_family(cfg: &ExperimentConfig, family_label: &str, replicate: u64) -> ModelFamily {
    let seed = derive_replicate_seed(cfg.master_seed, family_label, replicate);
    if SplitMix64::new(seed).next_f64() < cfg.poisson_prior {
        ModelFamily::Poisson
    } else {
        ModelFamily::Geometric
    }
}

fn log10_rate(errors: u64, ties: u64, reps: u64) -> Option<f64> {
    if reps == 0 {
        return None;
    }
    let weighted = errors as f64 + 0.5 * ties as f64;
    if weighted == 0.0 {
        None // censored: no observed errors
    } else {
        Some((weighted / reps as f64).log10())
    }
}

// ---------------------------------------------------------------------------
// Error-rate / bias experiment
// ---------------------------------------------------------------------------

/// Per-(criterion, mean, n) tallies of the error experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurvePoint {
    pub criterion: CriterionId,
    pub mean: f64,
    pub n: u32,
    pub poisson_prior: f64,
    pub reps_poisson: u64,
    pub reps_geometric: u64,
    pub errors_poisson: u64,
    pub errors_geometric: u64,
    pub ties_poisson: u64,
    pub ties_geometric: u64,
    /// Replicates scored through the exact-Bayes fallback.
    pub fallback_exact: u64,
}

impl ErrorCurvePoint {
    pub fn replicates(&self) -> u64 {
        self.reps_poisson + self.reps_geometric
    }

    pub fn ties(&self) -> u64 {
        self.ties_poisson + self.ties_geometric
    }

    /// `log10((errors + ties/2) / reps)` on Poisson-generated replicates;
    /// `None` marks a censored cell (no errors observed, or no replicates).
    pub fn log10_error_poisson(&self) -> Option<f64> {
        log10_rate(self.errors_poisson, self.ties_poisson, self.reps_poisson)
    }

    pub fn log10_error_geometric(&self) -> Option<f64> {
        log10_rate(self.errors_geometric, self.ties_geometric, self.reps_geometric)
    }

    pub fn log10_error_mixture(&self) -> Option<f64> {
        log10_rate(
            self.errors_poisson + self.errors_geometric,
            self.ties_poisson + self.ties_geometric,
            self.replicates(),
        )
    }

    /// Classification bias: `log10 err(Poisson-generated) − log10
    /// err(geometric-generated)`.
    pub fn bias(&self) -> Option<f64> {
        Some(self.log10_error_poisson()? - self.log10_error_geometric()?)
    }
}

/// Bias per (criterion, mean, n), derived from [`ErrorCurvePoint`].
#[derive(Debug, Clone, PartialEq)]
pub struct BiasPoint {
    pub criterion: CriterionId,
    pub mean: f64,
    pub n: u32,
    pub bias: Option<f64>,
}

/// Log-error differences against the known-μ baseline at the same
/// (mean, n), per column; present only when known-μ is among the criteria.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselinePoint {
    pub criterion: CriterionId,
    pub mean: f64,
    pub n: u32,
    pub poisson_prior: f64,
    pub d_log10_poisson: Option<f64>,
    pub d_log10_geometric: Option<f64>,
    pub d_log10_mixture: Option<f64>,
}

/// Output of [`run_error_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorExperiment {
    pub points: Vec<ErrorCurvePoint>,
    pub bias: Vec<BiasPoint>,
    pub baseline: Vec<BaselinePoint>,
}

#[derive(Clone)]
struct ErrorTally {
    reps: [u64; 2],
    errors: [u64; 2],
    ties: [u64; 2],
    fallback: u64,
}

impl ErrorTally {
    fn new() -> Self {
        Self {
            reps: [0; 2],
            errors: [0; 2],
            ties: [0; 2],
            fallback: 0,
        }
    }
}

fn family_index(family: ModelFamily) -> usize {
    match family {
        ModelFamily::Poisson => 0,
        ModelFamily::Geometric => 1,
    }
}

fn merge_tallies(mut a: Vec<ErrorTally>, b: Vec<ErrorTally>) -> Vec<ErrorTally> {
    for (x, y) in a.iter_mut().zip(b) {
        for f in 0..2 {
            x.reps[f] += y.reps[f];
            x.errors[f] += y.errors[f];
            x.ties[f] += y.ties[f];
        }
        x.fallback += y.fallback;
    }
    a
}

fn simulate_error_cell(cfg: &ExperimentConfig, mean: Mean, n: u32) -> Vec<ErrorTally> {
    let label = format!("error/mean={}/n={}", mean.get(), n);
    let family_label = format!("{label}/family");
    let sample_label = format!("{label}/sample");
    let fresh = || vec![ErrorTally::new(); cfg.criteria.len()];
    (0..cfg.replicates)
        .into_par_iter()
        .fold(fresh, |mut acc, i| {
            let generating = draw_generating_family(cfg, &family_label, i);
            let sample = generating.sample(
                mean,
                n as usize,
                derive_replicate_seed(cfg.master_seed, &sample_label, i),
            );
            let f = family_index(generating);
            for (k, &criterion) in cfg.criteria.iter().enumerate() {
                let mu_true = criterion.requires_true_mean().then_some(mean);
                let (result, fell_back) = evaluate_with_fallback(criterion, &sample, mu_true)
                    .expect("criterion evaluation on validated config");
                acc[k].reps[f] += 1;
                match result.chosen {
                    Chosen::Tie => acc[k].ties[f] += 1,
                    chosen if chosen.matches(generating) => {}
                    _ => acc[k].errors[f] += 1,
                }
                acc[k].fallback += fell_back as u64;
            }
            acc
        })
        .reduce(fresh, merge_tallies)
}

/// Runs the error-probability experiment over every (mean, n) cell: each
/// replicate draws a generating family from the prior, draws one sample,
/// and scores every criterion on it against the generating family.
pub fn run_error_experiment(cfg: &ExperimentConfig) -> Result<ErrorExperiment> {
    cfg.validate()?;
    let mut points = Vec::new();
    for &mean_value in &cfg.means {
        let mean = Mean::new(mean_value)?;
        for &n in &cfg.n_values {
            let tallies = simulate_error_cell(cfg, mean, n);
            for (k, tally) in tallies.into_iter().enumerate() {
                points.push(ErrorCurvePoint {
                    criterion: cfg.criteria[k],
                    mean: mean_value,
                    n,
                    poisson_prior: cfg.poisson_prior,
                    reps_poisson: tally.reps[0],
                    reps_geometric: tally.reps[1],
                    errors_poisson: tally.errors[0],
                    errors_geometric: tally.errors[1],
                    ties_poisson: tally.ties[0],
                    ties_geometric: tally.ties[1],
                    fallback_exact: tally.fallback,
                });
            }
        }
    }
    let bias = points
        .iter()
        .map(|p| BiasPoint {
            criterion: p.criterion,
            mean: p.mean,
            n: p.n,
            bias: p.bias(),
        })
        .collect();
    let baseline = baseline_points(&points);
    Ok(ErrorExperiment {
        points,
        bias,
        baseline,
    })
}

fn baseline_points(points: &[ErrorCurvePoint]) -> Vec<BaselinePoint> {
    points
        .iter()
        .filter(|p| p.criterion != CriterionId::KnownMu)
        .filter_map(|p| {
            let base = points.iter().find(|b| {
                b.criterion == CriterionId::KnownMu && b.mean == p.mean && b.n == p.n
            })?;
            let diff = |a: Option<f64>, b: Option<f64>| Some(a? - b?);
            Some(BaselinePoint {
                criterion: p.criterion,
                mean: p.mean,
                n: p.n,
                poisson_prior: p.poisson_prior,
                d_log10_poisson: diff(p.log10_error_poisson(), base.log10_error_poisson()),
                d_log10_geometric: diff(p.log10_error_geometric(), base.log10_error_geometric()),
                d_log10_mixture: diff(p.log10_error_mixture(), base.log10_error_mixture()),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Calibration experiment
// ---------------------------------------------------------------------------

/// One posterior bin of the calibration experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationBin {
    pub criterion: CriterionId,
    pub bin_index: u32,
    /// Assessed-probability interval `[lower, upper)`; the last bin is
    /// closed on the right.
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
    /// How many of the replicates in this bin were Poisson-generated.
    pub poisson_count: u64,
    /// Replicates in this bin scored through the exact-Bayes fallback.
    pub fallback_count: u64,
}

impl CalibrationBin {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    /// Empirical frequency with which the data actually were Poisson.
    pub fn poisson_frequency(&self) -> Option<f64> {
        (self.count > 0).then(|| self.poisson_count as f64 / self.count as f64)
    }
}

#[derive(Clone)]
struct CalTally {
    count: Vec<u64>,
    poisson: Vec<u64>,
    fallback: Vec<u64>,
}

impl CalTally {
    fn new(cells: usize) -> Self {
        Self {
            count: vec![0; cells],
            poisson: vec![0; cells],
            fallback: vec![0; cells],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.count.iter_mut().zip(other.count) {
            *a += b;
        }
        for (a, b) in self.poisson.iter_mut().zip(other.poisson) {
            *a += b;
        }
        for (a, b) in self.fallback.iter_mut().zip(other.fallback) {
            *a += b;
        }
        self
    }
}

/// Runs the calibration experiment on a single (mean, n) cell: every
/// replicate computes each criterion's posterior probability of Poisson,
/// bins it, and records whether the sample actually was Poisson-generated.
///
/// Every replicate lands in exactly one bin per criterion, so each
/// criterion's bin counts sum to `replicates`. Requires a generating prior
/// strictly inside `(0, 1)` and exactly one mean and one sample size.
pub fn run_calibration_experiment(cfg: &ExperimentConfig) -> Result<Vec<CalibrationBin>> {
    cfg.validate()?;
    if !(cfg.poisson_prior > 0.0 && cfg.poisson_prior < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "calibration needs a generating prior strictly inside (0, 1), got {}",
            cfg.poisson_prior
        )));
    }
    if cfg.means.len() != 1 || cfg.n_values.len() != 1 {
        return Err(Error::InvalidConfig(
            "calibration uses exactly one mean and one sample size".into(),
        ));
    }
    let mean = Mean::new(cfg.means[0])?;
    let n = cfg.n_values[0];
    let bins = cfg.calibration_bins as usize;
    let label = format!("calibration/mean={}/n={}", mean.get(), n);
    let family_label = format!("{label}/family");
    let sample_label = format!("{label}/sample");

    let cells = cfg.criteria.len() * bins;
    let tally = (0..cfg.replicates)
        .into_par_iter()
        .fold(
            || CalTally::new(cells),
            |mut acc, i| {
                let generating = draw_generating_family(cfg, &family_label, i);
                let sample = generating.sample(
                    mean,
                    n as usize,
                    derive_replicate_seed(cfg.master_seed, &sample_label, i),
                );
                for (k, &criterion) in cfg.criteria.iter().enumerate() {
                    let mu_true = criterion.requires_true_mean().then_some(mean);
                    let (result, fell_back) = evaluate_with_fallback(criterion, &sample, mu_true)
                        .expect("criterion evaluation on validated config");
                    let bin = ((result.posterior_poisson * bins as f64) as usize).min(bins - 1);
                    let cell = k * bins + bin;
                    acc.count[cell] += 1;
                    acc.poisson[cell] += (generating == ModelFamily::Poisson) as u64;
                    acc.fallback[cell] += fell_back as u64;
                }
                acc
            },
        )
        .reduce(|| CalTally::new(cells), CalTally::merge);

    let mut out = Vec::with_capacity(cells);
    for (k, &criterion) in cfg.criteria.iter().enumerate() {
        for b in 0..bins {
            let cell = k * bins + b;
            out.push(CalibrationBin {
                criterion,
                bin_index: b as u32,
                lower: b as f64 / bins as f64,
                upper: (b + 1) as f64 / bins as f64,
                count: tally.count[cell],
                poisson_count: tally.poisson[cell],
                fallback_count: tally.fallback[cell],
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Plug-in regret-slope experiment
// ---------------------------------------------------------------------------

/// Mean plug-in regret at one sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretPoint {
    pub n: u32,
    pub mean_regret: f64,
    pub replicates_used: u64,
    /// Replicates whose post-startup suffix had no ML estimate (all zero);
    /// excluded from the mean.
    pub skipped: u64,
}

/// Output of [`run_regret_slope_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegretSlopeExperiment {
    pub model: ModelFamily,
    pub generating: ModelFamily,
    pub mean: f64,
    pub points: Vec<RegretPoint>,
    /// Least-squares slope of mean regret against `ln n`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `½ · Var(generating) / Var(model)` at the shared mean: the expected
    /// regret growth rate per `ln n` when the model is (mis)matched to the
    /// generating family.
    pub predicted_slope: f64,
}

/// Measures how the plug-in code's regret (against the best model element)
/// grows with sample size when the data come from `generating` but the
/// code models them with `model`.
pub fn run_regret_slope_experiment(
    model: ModelFamily,
    generating: ModelFamily,
    mean: Mean,
    n_values: &[u32],
    replicates: u64,
    master_seed: u64,
) -> Result<RegretSlopeExperiment> {
    if n_values.is_empty() || n_values.iter().any(|&n| n == 0) {
        return Err(Error::InvalidConfig("n_values must be nonempty and >= 1".into()));
    }
    let (lo, hi) = (
        *n_values.iter().min().expect("nonempty"),
        *n_values.iter().max().expect("nonempty"),
    );
    if (hi as f64) < 10.0 * lo as f64 {
        return Err(Error::InvalidConfig(format!(
            "n_values must span at least one decade, got {lo}..{hi}"
        )));
    }
    if replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be >= 1".into()));
    }

    let mut points = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let label = format!(
            "regret/model={}/gen={}/mean={}/n={}",
            model.label(),
            generating.label(),
            mean.get(),
            n
        );
        // Ordered collect + sequential sum keeps the floating-point
        // reduction identical under any worker count.
        let regrets: Vec<Option<f64>> = (0..replicates)
            .into_par_iter()
            .map(|i| {
                let sample = generating.sample(
                    mean,
                    n as usize,
                    derive_replicate_seed(master_seed, &label, i),
                );
                let report = plugin_codelength(model, &sample).ok()?;
                regret_of(model, &report, &sample).ok()
            })
            .collect();
        let mut sum = 0.0;
        let mut used = 0u64;
        for r in regrets.into_iter().flatten() {
            sum += r;
            used += 1;
        }
        if used == 0 {
            return Err(Error::DegenerateSample(
                "no replicate produced a defined plug-in regret",
            ));
        }
        points.push(RegretPoint {
            n,
            mean_regret: sum / used as f64,
            replicates_used: used,
            skipped: replicates - used,
        });
    }

    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_regret).collect();
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(RegretSlopeExperiment {
        model,
        generating,
        mean: mean.get(),
        points,
        slope,
        intercept,
        r_squared,
        predicted_slope: 0.5 * generating.variance(mean) / model.variance(mean),
    })
}

/// Ordinary least squares of `y` on `x`; returns (slope, intercept, R²).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert!(xs.len() == ys.len() && xs.len() >= 2, "need >= 2 points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    (slope, intercept, r_squared)
}
