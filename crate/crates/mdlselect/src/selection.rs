//! Turning two codelength reports into a selection decision.
//!
//! The decision rule is MAP with a uniform prior on the two models: pick
//! whichever family yields the shorter codelength. Through the
//! codelength/probability correspondence the same comparison yields a
//! posterior probability for the Poisson model,
//! `exp(-L_P) / (exp(-L_P) + exp(-L_G))`.

use crate::codes::{self, CodelengthReport, CriterionId};
use crate::models::{Mean, ModelFamily, Sample};
use crate::{Error, Result};

/// Outcome of comparing the two family codelengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chosen {
    Poisson,
    Geometric,
    /// Exactly equal codelengths. Includes every degenerate (all-zero)
    /// sample under criteria that need an ML estimate.
    Tie,
}

impl Chosen {
    pub fn label(self) -> &'static str {
        match self {
            Chosen::Poisson => "poisson",
            Chosen::Geometric => "geometric",
            Chosen::Tie => "tie",
        }
    }

    /// Whether the decision names the given generating family.
    pub fn matches(self, family: ModelFamily) -> bool {
        matches!(
            (self, family),
            (Chosen::Poisson, ModelFamily::Poisson) | (Chosen::Geometric, ModelFamily::Geometric)
        )
    }
}

/// A model-selection decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionResult {
    /// `L_poisson − L_geometric` in nats (family-dependent parts only; the
    /// startup and hyper terms are common to both families and cancel by
    /// construction).
    pub delta_nats: f64,
    pub chosen: Chosen,
    /// `1 / (1 + exp(delta_nats))`, the MAP posterior of the Poisson model.
    pub posterior_poisson: f64,
    /// Set when the criterion hit its degenerate-sample policy; degenerate
    /// results are exact ties.
    pub degenerate: bool,
}

impl SelectionResult {
    fn from_delta(delta_nats: f64, degenerate: bool) -> Self {
        let chosen = if delta_nats < 0.0 {
            Chosen::Poisson
        } else if delta_nats > 0.0 {
            Chosen::Geometric
        } else {
            Chosen::Tie
        };
        Self {
            delta_nats,
            chosen,
            posterior_poisson: posterior_poisson(delta_nats),
            degenerate,
        }
    }

    fn degenerate_tie() -> Self {
        Self::from_delta(0.0, true)
    }
}

/// Posterior probability of the Poisson model given the codelength
/// difference `delta = L_P − L_G`, computed as a numerically safe logistic:
/// no overflow for any finite `delta`, and `posterior(-d) = 1 - posterior(d)`.
pub fn posterior_poisson(delta_nats: f64) -> f64 {
    if delta_nats >= 0.0 {
        let e = (-delta_nats).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + delta_nats.exp())
    }
}

/// Evaluates one criterion on a sample and compares the two families.
///
/// `mu_true` must be supplied exactly when the criterion is
/// [`CriterionId::KnownMu`]. Samples on which the criterion's codelength is
/// undefined (no ML estimate) come back as degenerate ties rather than
/// errors; genuinely invalid inputs still error.
pub fn evaluate(
    criterion: CriterionId,
    sample: &Sample,
    mu_true: Option<Mean>,
) -> Result<SelectionResult> {
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
    let poisson = match codes::codelength(criterion, ModelFamily::Poisson, sample, mu_true) {
        Ok(report) => report,
        Err(Error::DegenerateSample(_)) => return Ok(SelectionResult::degenerate_tie()),
        Err(e) => return Err(e),
    };
    let geometric = match codes::codelength(criterion, ModelFamily::Geometric, sample, mu_true) {
        Ok(report) => report,
        Err(Error::DegenerateSample(_)) => return Ok(SelectionResult::degenerate_tie()),
        Err(e) => return Err(e),
    };
    combine(&poisson, &geometric)
}

/// Compares two family reports produced by the same criterion on the same
/// sample. Their conditioning metadata and family-independent costs must
/// match; a mismatch indicates a codelength bug, not bad input.
pub(crate) fn combine(
    poisson: &CodelengthReport,
    geometric: &CodelengthReport,
) -> Result<SelectionResult> {
    if poisson.conditioning != geometric.conditioning {
        return Err(Error::Internal("conditioning mismatch between family reports"));
    }
    if poisson.hyper_code_length != geometric.hyper_code_length {
        return Err(Error::Internal("hyper-code mismatch between family reports"));
    }
    if poisson.startup_code_length != geometric.startup_code_length {
        return Err(Error::Internal("startup-code mismatch between family reports"));
    }
    let degenerate = poisson.degenerate || geometric.degenerate;
    // Family-independent terms cancel exactly: compare the model-dependent
    // parts, not the totals.
    let delta = if degenerate {
        0.0
    } else {
        poisson.model_dependent - geometric.model_dependent
    };
    Ok(SelectionResult::from_delta(delta, degenerate))
}
