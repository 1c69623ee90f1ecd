//! Universal-code length functions for the two families.
//!
//! Each criterion assigns the data a codelength in nats relative to a model
//! family; the difference between the Poisson and geometric lengths drives
//! model selection. The NML code itself does not exist here (both families
//! have infinite parametric complexity — see
//! [`nml_divergence_diagnostic`]), so the criteria below are the usable
//! substitutes:
//!
//! * [`codelength_known_mu`] — oracle baseline, codes with the true mean.
//! * [`codelength_bic`] — `L(x^n|μ̂) + ½ ln n`; equivalent to a GLRT with
//!   threshold 0.
//! * [`anml_restricted_codelength`] — asymptotic NML with the parameter
//!   range restricted to `(0, μ*]`; equivalent to a GLRT with threshold
//!   [`delta_threshold`]`(μ*)`.
//! * [`anml_two_part_codelength`] — encodes a dyadic parameter range
//!   `(2^{b-1}, 2^b]` first, then uses restricted ANML on it.
//! * [`plugin_codelength`] — prequential plug-in code; codes each outcome
//!   with the ML estimator of the preceding ones, after a model-independent
//!   startup code.
//! * [`bayes_exact_codelength`] / [`bayes_approx_codelength`] — Bayes
//!   marginal codelength under the improper Jeffreys prior, made proper by
//!   conditioning on the first outcome; exact closed form and asymptotic
//!   expansion.

use std::f64::consts::{LN_2, TAU};
use std::fmt;
use std::str::FromStr;

use statrs::function::gamma::ln_gamma;

use crate::models::{
    codelength_given_mean, codelength_slice, log_factorial, mean_of, ml_mean, Count, Mean,
    ModelFamily, Sample,
};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Criterion identifiers
// ---------------------------------------------------------------------------

/// A model-selection criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriterionId {
    /// Codes with the true generating mean (supplied externally).
    KnownMu,
    /// BIC / maximum-likelihood testing.
    Bic,
    /// Restricted ANML with parameter range `(0, μ*]`.
    AnmlRestricted(f64),
    /// Two-part ANML with a separately encoded dyadic range.
    AnmlTwoPart,
    /// Prequential plug-in code.
    PlugIn,
    /// Exact Jeffreys-Bayes marginal, conditioned on the first outcome.
    BayesExact,
    /// Asymptotic approximation of the Jeffreys-Bayes marginal.
    BayesApprox,
}

impl CriterionId {
    /// Whether [`crate::selection::evaluate`] must be given the true mean.
    pub fn requires_true_mean(self) -> bool {
        matches!(self, CriterionId::KnownMu)
    }

    /// Whether the criterion is undefined on all-zero samples (its
    /// codelength needs an ML mean estimate).
    pub fn requires_ml_estimate(self) -> bool {
        matches!(
            self,
            CriterionId::AnmlRestricted(_) | CriterionId::AnmlTwoPart | CriterionId::BayesApprox
        )
    }

    /// The full battery used by the experiments: known-μ, BIC, restricted
    /// ANML for μ* ∈ {10, 100, 1000}, two-part ANML, plug-in, and the two
    /// Bayes codes.
    pub fn standard_set() -> Vec<CriterionId> {
        vec![
            CriterionId::KnownMu,
            CriterionId::Bic,
            CriterionId::AnmlRestricted(10.0),
            CriterionId::AnmlRestricted(100.0),
            CriterionId::AnmlRestricted(1000.0),
            CriterionId::AnmlTwoPart,
            CriterionId::PlugIn,
            CriterionId::BayesExact,
            CriterionId::BayesApprox,
        ]
    }
}

impl fmt::Display for CriterionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriterionId::KnownMu => write!(f, "known-mu"),
            CriterionId::Bic => write!(f, "bic"),
            CriterionId::AnmlRestricted(mu_star) => write!(f, "anml({mu_star})"),
            CriterionId::AnmlTwoPart => write!(f, "anml-two-part"),
            CriterionId::PlugIn => write!(f, "plugin"),
            CriterionId::BayesExact => write!(f, "bayes-exact"),
            CriterionId::BayesApprox => write!(f, "bayes-approx"),
        }
    }
}

impl FromStr for CriterionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "known-mu" => Ok(CriterionId::KnownMu),
            "bic" => Ok(CriterionId::Bic),
            "anml-two-part" => Ok(CriterionId::AnmlTwoPart),
            "plugin" => Ok(CriterionId::PlugIn),
            "bayes-exact" => Ok(CriterionId::BayesExact),
            "bayes-approx" => Ok(CriterionId::BayesApprox),
            _ => {
                if let Some(inner) = s.strip_prefix("anml(").and_then(|r| r.strip_suffix(')')) {
                    let mu_star: f64 = inner.parse().map_err(|_| {
                        Error::InvalidArgument(format!("bad anml parameter range bound: {inner:?}"))
                    })?;
                    if mu_star > 0.0 && mu_star.is_finite() {
                        Ok(CriterionId::AnmlRestricted(mu_star))
                    } else {
                        Err(Error::InvalidArgument(format!(
                            "anml range bound must be finite and > 0, got {mu_star}"
                        )))
                    }
                } else {
                    Err(Error::InvalidArgument(format!(
                        "unknown criterion {s:?} (expected known-mu, bic, anml(MU_STAR), \
                         anml-two-part, plugin, bayes-exact or bayes-approx)"
                    )))
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Codelength reports
// ---------------------------------------------------------------------------

/// What part of the sample a report's model-dependent length covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// The whole sample.
    Full,
    /// Everything except the first outcome (which the code conditions on).
    ConditionedOnFirst,
    /// Everything after the startup prefix of the given length (outcomes
    /// 1..=p were coded with the model-independent startup code).
    StartupExcluded(usize),
}

impl fmt::Display for Conditioning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Conditioning::Full => write!(f, "full"),
            Conditioning::ConditionedOnFirst => write!(f, "conditioned-on-first"),
            Conditioning::StartupExcluded(p) => write!(f, "startup-excluded({p})"),
        }
    }
}

/// A criterion's codelength for one family, with its conditioning metadata.
///
/// Invariant: `total = model_dependent + hyper_code_length + startup cost`,
/// where the startup cost and hyper code are identical for both families and
/// therefore cancel from every between-family comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CodelengthReport {
    /// Everything, in nats.
    pub total: f64,
    /// The family-dependent part, in nats.
    pub model_dependent: f64,
    /// Two-part index cost (0 for every other criterion), in nats.
    pub hyper_code_length: f64,
    /// Model-independent startup cost (0 for every criterion except
    /// plug-in), in nats.
    pub startup_code_length: f64,
    pub conditioning: Conditioning,
    /// Set when the sample forced the criterion's degenerate (all-zero)
    /// policy; such reports compare as exact ties between families.
    pub degenerate: bool,
}

impl CodelengthReport {
    fn checked(self, op: &'static str) -> Result<Self> {
        if self.total.is_finite() && self.model_dependent.is_finite() {
            Ok(self)
        } else {
            Err(Error::NumericOverflow(op))
        }
    }
}

/// A parameter range `(lower, upper]` used to restrict the ANML complexity
/// integral. `lower == upper` denotes the empty range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestrictedRange {
    lower: f64,
    upper: f64,
}

impl RestrictedRange {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_finite() && upper.is_finite() && 0.0 <= lower && lower <= upper {
            Ok(Self { lower, upper })
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid parameter range ({lower}, {upper}]"
            )))
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower < value && value <= self.upper
    }
}

// ---------------------------------------------------------------------------
// Universal integer codes (ideal lengths)
// ---------------------------------------------------------------------------

/// Ideal Elias gamma codelength in nats for `m ≥ 1`: `2⌊log2 m⌋ + 1` bits.
pub fn elias_gamma_nats(m: u64) -> f64 {
    assert!(m >= 1, "Elias gamma is defined for m >= 1");
    (2 * m.ilog2() + 1) as f64 * LN_2
}

/// Startup code for one outcome: Elias gamma applied to `x + 1`. Used to
/// code outcomes for which no ML estimate exists yet; identical for both
/// families by construction.
pub fn startup_code_nats(x: Count) -> f64 {
    elias_gamma_nats(x + 1)
}

/// Code for the two-part range index `b` (a possibly negative integer):
/// zig-zag `0, -1, 1, -2, 2, … → 0, 1, 2, 3, 4, …`, then Elias gamma on
/// `value + 1`. Grows like `2 log2 |b|` bits, and cancels from every
/// between-family comparison because `b` depends on the sample alone.
pub fn signed_integer_code_nats(b: i64) -> f64 {
    let zigzag = if b >= 0 {
        (b as u64) * 2
    } else {
        ((-(b + 1)) as u64) * 2 + 1
    };
    elias_gamma_nats(zigzag + 1)
}

// ---------------------------------------------------------------------------
// Parametric-complexity pieces
// ---------------------------------------------------------------------------

/// `∫ √I(μ) dμ` over `(lower, upper]`, in closed form.
///
/// Poisson: `∫ μ^{-1/2} dμ = 2√μ`. Geometric: `∫ (μ(μ+1))^{-1/2} dμ
/// = 2 asinh(√μ) = 2 ln(√μ + √(μ+1))`.
pub fn sqrt_fisher_integral(family: ModelFamily, range: &RestrictedRange) -> f64 {
    match family {
        ModelFamily::Poisson => 2.0 * (range.upper.sqrt() - range.lower.sqrt()),
        ModelFamily::Geometric => 2.0 * (range.upper.sqrt().asinh() - range.lower.sqrt().asinh()),
    }
}

/// Difference between the restricted parametric complexities of the two
/// families over `(0, μ*]`:
/// `δ(μ*) = ln(2√μ*) − ln(2 ln(√μ* + √(μ*+1)))`.
///
/// This is the effective GLRT threshold of the restricted-ANML criterion;
/// it is strictly increasing and unbounded in `μ*`.
pub fn delta_threshold(mu_star: f64) -> f64 {
    assert!(
        mu_star > 0.0 && mu_star.is_finite(),
        "delta_threshold needs mu_star > 0"
    );
    let range = RestrictedRange::new(0.0, mu_star).expect("valid range");
    sqrt_fisher_integral(ModelFamily::Poisson, &range).ln()
        - sqrt_fisher_integral(ModelFamily::Geometric, &range).ln()
}

/// Dyadic range for the two-part code: `b = ⌈log2 μ̂⌉` and the range
/// `(2^{b-1}, 2^b]`, which always contains `μ̂` (an exact power of two maps
/// to the range with it as upper endpoint).
pub fn two_part_range(mu_hat: Mean) -> (i64, RestrictedRange) {
    let b = mu_hat.get().log2().ceil() as i64;
    let range = RestrictedRange::new(((b - 1) as f64).exp2(), (b as f64).exp2())
        .expect("dyadic range is valid");
    (b, range)
}

fn half_ln_n_over_2pi(n: usize) -> f64 {
    0.5 * (n as f64 / TAU).ln()
}

// ---------------------------------------------------------------------------
// Criterion codelengths
// ---------------------------------------------------------------------------

/// Codelength with the true mean supplied externally: `L(x^n | μ)`.
pub fn codelength_known_mu(
    family: ModelFamily,
    sample: &Sample,
    mu_true: Mean,
) -> Result<CodelengthReport> {
    let total = codelength_given_mean(family, sample, mu_true)?;
    CodelengthReport {
        total,
        model_dependent: total,
        hyper_code_length: 0.0,
        startup_code_length: 0.0,
        conditioning: Conditioning::Full,
        degenerate: false,
    }
    .checked("known-mu")
}

/// `L(x^n | μ̂) + ½ ln n`. All-zero samples take the `μ̂ ↓ 0` limit, where
/// `L → 0` for both families, and are flagged degenerate (an exact tie).
pub fn codelength_bic(family: ModelFamily, sample: &Sample) -> Result<CodelengthReport> {
    let penalty = 0.5 * (sample.len() as f64).ln();
    let (fit, degenerate) = match ml_mean(sample) {
        Some(mu_hat) => (codelength_given_mean(family, sample, mu_hat)?, false),
        None => (0.0, true),
    };
    CodelengthReport {
        total: fit + penalty,
        model_dependent: fit + penalty,
        hyper_code_length: 0.0,
        startup_code_length: 0.0,
        conditioning: Conditioning::Full,
        degenerate,
    }
    .checked("bic")
}

/// `L(x^n | μ̂) + ½ ln(n/2π) + ln ∫_0^{μ*} √I(μ) dμ`.
///
/// Evaluated as written even when `μ̂ > μ*`: the selection rule it induces
/// is exactly a GLRT with threshold [`delta_threshold`]`(μ*)`, independent
/// of where `μ̂` falls.
pub fn anml_restricted_codelength(
    family: ModelFamily,
    sample: &Sample,
    mu_star: f64,
) -> Result<CodelengthReport> {
    if !(mu_star > 0.0 && mu_star.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "anml range bound must be finite and > 0, got {mu_star}"
        )));
    }
    let mu_hat = ml_mean(sample).ok_or(Error::DegenerateSample(
        "restricted ANML needs an ML mean estimate (all-zero sample)",
    ))?;
    let fit = codelength_given_mean(family, sample, mu_hat)?;
    let range = RestrictedRange::new(0.0, mu_star)?;
    let complexity = sqrt_fisher_integral(family, &range).ln();
    let total = fit + half_ln_n_over_2pi(sample.len()) + complexity;
    CodelengthReport {
        total,
        model_dependent: total,
        hyper_code_length: 0.0,
        startup_code_length: 0.0,
        conditioning: Conditioning::Full,
        degenerate: false,
    }
    .checked("anml-restricted")
}

/// Two-part ANML: encode `b = ⌈log2 μ̂⌉` with [`signed_integer_code_nats`],
/// then restricted ANML over the dyadic range `(2^{b-1}, 2^b]`.
pub fn anml_two_part_codelength(family: ModelFamily, sample: &Sample) -> Result<CodelengthReport> {
    let mu_hat = ml_mean(sample).ok_or(Error::DegenerateSample(
        "two-part ANML needs an ML mean estimate (all-zero sample)",
    ))?;
    let (b, range) = two_part_range(mu_hat);
    let hyper = signed_integer_code_nats(b);
    let fit = codelength_given_mean(family, sample, mu_hat)?;
    let model_dependent =
        fit + half_ln_n_over_2pi(sample.len()) + sqrt_fisher_integral(family, &range).ln();
    CodelengthReport {
        total: model_dependent + hyper,
        model_dependent,
        hyper_code_length: hyper,
        startup_code_length: 0.0,
        conditioning: Conditioning::Full,
        degenerate: false,
    }
    .checked("anml-two-part")
}

/// Prequential plug-in code.
///
/// Outcomes up to and including the first nonzero one are coded with the
/// model-independent startup code ([`startup_code_nats`]); every later
/// outcome `x_i` costs `-ln P(x_i | μ̂(x^{i-1}))`. On all-zero samples the
/// whole sample is startup and the report is degenerate.
pub fn plugin_codelength(family: ModelFamily, sample: &Sample) -> Result<CodelengthReport> {
    let outcomes = sample.outcomes();
    let (prefix, degenerate) = match outcomes.iter().position(|&x| x > 0) {
        Some(i) => (i + 1, false),
        None => (outcomes.len(), true),
    };
    let startup: f64 = outcomes[..prefix].iter().map(|&x| startup_code_nats(x)).sum();
    let mut model_dependent = 0.0;
    let mut running_sum: u64 = outcomes[..prefix].iter().sum();
    for i in prefix..outcomes.len() {
        let mu_hat = Mean::new(running_sum as f64 / i as f64)?;
        model_dependent += family.outcome_codelength(outcomes[i], mu_hat);
        running_sum += outcomes[i];
    }
    CodelengthReport {
        total: startup + model_dependent,
        model_dependent,
        hyper_code_length: 0.0,
        startup_code_length: startup,
        conditioning: Conditioning::StartupExcluded(prefix),
        degenerate,
    }
    .checked("plugin")
}

/// Exact Jeffreys-Bayes marginal codelength, conditional on the first
/// outcome.
///
/// The improper Jeffreys prior `w(μ) ∝ √I(μ)` becomes a proper posterior
/// after one outcome; the marginal likelihood of the rest has a closed form
/// (with `s = Σ x_i` over the whole sample):
///
/// * Poisson: `P(x_2^n | x_1) = Γ(s+½) / Γ(x_1+½) / (n^{s+½} ∏_{i≥2} x_i!)`
/// * geometric: `P(x_2^n | x_1) = (x_1+½) Γ(s+½) Γ(n) / Γ(n+s+½)`
///
/// For `n = 1` the conditional is empty and the codelength is exactly 0.
/// All-zero samples are fine: both posteriors are proper after any first
/// outcome, including zero.
pub fn bayes_exact_codelength(family: ModelFamily, sample: &Sample) -> Result<CodelengthReport> {
    let n = sample.len();
    let total = if n == 1 {
        0.0
    } else {
        let s = sample.sum() as f64;
        let x1 = sample.outcomes()[0] as f64;
        let nf = n as f64;
        match family {
            ModelFamily::Poisson => {
                let lf_rest: f64 = sample.outcomes()[1..]
                    .iter()
                    .map(|&x| log_factorial(x))
                    .sum();
                ln_gamma(x1 + 0.5) - ln_gamma(s + 0.5) + (s + 0.5) * nf.ln() + lf_rest
            }
            ModelFamily::Geometric => {
                -((x1 + 0.5).ln() + ln_gamma(s + 0.5) + ln_gamma(nf) - ln_gamma(nf + s + 0.5))
            }
        }
    };
    CodelengthReport {
        total,
        model_dependent: total,
        hyper_code_length: 0.0,
        startup_code_length: 0.0,
        conditioning: Conditioning::ConditionedOnFirst,
        degenerate: false,
    }
    .checked("bayes-exact")
}

/// Asymptotic expansion of the conditional Bayes codelength:
/// `L(x_2^n | μ̂₂) + ½ ln(n/2π) + ln(√I(μ̂₂) / w(μ̂₂ | x_1))`, where
/// `μ̂₂ = μ̂(x_2^n)` and `w(· | x_1)` is the Jeffreys posterior after the
/// first outcome. The last term expands to
///
/// * Poisson: `μ̂₂ − x_1 ln μ̂₂ + ln Γ(x_1+½)`
/// * geometric: `x_1 ln(1 + 1/μ̂₂) + ln(μ̂₂+1) − ln(x_1+½)`
///
/// Needs `n ≥ 2` and some nonzero outcome among `x_2..x_n`; the `n` in the
/// `½ ln(n/2π)` term is the full sample length.
pub fn bayes_approx_codelength(family: ModelFamily, sample: &Sample) -> Result<CodelengthReport> {
    let outcomes = sample.outcomes();
    if outcomes.len() < 2 {
        return Err(Error::DegenerateSample(
            "approximate Bayes needs at least two outcomes",
        ));
    }
    let rest = &outcomes[1..];
    let mu2 = mean_of(rest).ok_or(Error::DegenerateSample(
        "approximate Bayes needs a nonzero outcome after the first",
    ))?;
    let x1 = outcomes[0] as f64;
    let rest_sum = sample.sum() - outcomes[0];
    let fit = codelength_slice(family, rest, rest_sum, mu2);
    let prior_term = match family {
        ModelFamily::Poisson => mu2.get() - x1 * mu2.get().ln() + ln_gamma(x1 + 0.5),
        ModelFamily::Geometric => {
            x1 * (1.0 / mu2.get()).ln_1p() + (mu2.get() + 1.0).ln() - (x1 + 0.5).ln()
        }
    };
    let total = fit + half_ln_n_over_2pi(outcomes.len()) + prior_term;
    CodelengthReport {
        total,
        model_dependent: total,
        hyper_code_length: 0.0,
        startup_code_length: 0.0,
        conditioning: Conditioning::ConditionedOnFirst,
        degenerate: false,
    }
    .checked("bayes-approx")
}

/// Dispatch a criterion to its codelength function.
///
/// `mu_true` must be supplied exactly when the criterion is
/// [`CriterionId::KnownMu`].
pub fn codelength(
    criterion: CriterionId,
    family: ModelFamily,
    sample: &Sample,
    mu_true: Option<Mean>,
) -> Result<CodelengthReport> {
    if criterion.requires_true_mean() != mu_true.is_some() {
        return Err(Error::InvalidArgument(format!(
            "criterion {criterion} {} a true mean",
            if criterion.requires_true_mean() {
                "requires"
            } else {
                "does not take"
            }
        )));
    }
    match criterion {
        CriterionId::KnownMu => {
            codelength_known_mu(family, sample, mu_true.expect("checked above"))
        }
        CriterionId::Bic => codelength_bic(family, sample),
        CriterionId::AnmlRestricted(mu_star) => {
            anml_restricted_codelength(family, sample, mu_star)
        }
        CriterionId::AnmlTwoPart => anml_two_part_codelength(family, sample),
        CriterionId::PlugIn => plugin_codelength(family, sample),
        CriterionId::BayesExact => bayes_exact_codelength(family, sample),
        CriterionId::BayesApprox => bayes_approx_codelength(family, sample),
    }
}

/// Regret of a report: its model-dependent length minus the ML codelength
/// of the portion it covers, `L_U − L(covered | μ̂(covered))`.
///
/// The covered portion follows the report's conditioning (whole sample,
/// everything after the first outcome, or the post-startup suffix). Errors
/// with [`Error::DegenerateSample`] when the covered portion has no ML
/// estimate.
pub fn regret_of(family: ModelFamily, report: &CodelengthReport, sample: &Sample) -> Result<f64> {
    let outcomes = sample.outcomes();
    let covered: &[Count] = match report.conditioning {
        Conditioning::Full => outcomes,
        Conditioning::ConditionedOnFirst => &outcomes[1..],
        Conditioning::StartupExcluded(p) => &outcomes[p.min(outcomes.len())..],
    };
    let mu_hat = mean_of(covered).ok_or(Error::DegenerateSample(
        "regret: no ML mean estimate for the covered portion",
    ))?;
    let sum: u64 = covered.iter().sum();
    Ok(report.model_dependent - codelength_slice(family, covered, sum, mu_hat))
}

/// Partial sum `Σ_{x=1}^{x_max} P(x | μ̂ = x)` of the NML normalizer for
/// samples of length 1.
///
/// The sum grows without bound in `x_max` — like `√x_max` for Poisson
/// (terms `~ 1/√(2πx)`) and like `ln x_max` for geometric (terms
/// `~ 1/(e·x)`) — which is why no NML code exists for either family. Only
/// `n = 1` is supported (exhaustive enumeration).
pub fn nml_divergence_diagnostic(
    family: ModelFamily,
    n: usize,
    x_max: Count,
) -> Result<f64> {
    if n != 1 {
        return Err(Error::Unsupported(
            "NML divergence diagnostic enumerates n = 1 only",
        ));
    }
    let mut sum = 0.0;
    for x in 1..=x_max {
        let xf = x as f64;
        let ln_term = match family {
            ModelFamily::Poisson => -xf + xf * xf.ln() - log_factorial(x),
            ModelFamily::Geometric => xf * xf.ln() - (xf + 1.0) * (xf + 1.0).ln(),
        };
        sum += ln_term.exp();
    }
    Ok(sum)
}
