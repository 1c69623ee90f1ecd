//! Shared test oracles, independent of the library's codelength paths:
//! adaptive quadrature for integral cross-checks and exhaustive
//! enumeration for exact error probabilities on small outcome lattices.

#![allow(dead_code)] // each integration test binary uses a subset

use mdlselect::codes::CriterionId;
use mdlselect::harness::evaluate_with_fallback;
use mdlselect::models::{Mean, ModelFamily, Sample};
use mdlselect::selection::Chosen;
use statrs::function::gamma::ln_gamma;

// ---------------------------------------------------------------------------
// Adaptive Simpson quadrature
// ---------------------------------------------------------------------------

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + adaptive_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// Adaptive Simpson integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    assert!(b >= a);
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    adaptive_step(f, a, b, fa, fm, fb, whole, tol, 60)
}

// ---------------------------------------------------------------------------
// Quadrature of sqrt-Fisher-information integrals
// ---------------------------------------------------------------------------

/// `∫_lower^upper sqrt(I(μ)) dμ` by quadrature, with a `μ = u²`
/// substitution so the `μ^(-1/2)` endpoint singularity vanishes.
pub fn sqrt_fisher_integral_quadrature(family: ModelFamily, lower: f64, upper: f64) -> f64 {
    // After μ = u²: sqrt(1/μ)·2u = 2 and sqrt(1/(μ(μ+1)))·2u = 2/sqrt(μ+1).
    let integrand = move |u: f64| -> f64 {
        match family {
            ModelFamily::Poisson => 2.0,
            ModelFamily::Geometric => 2.0 / (u * u + 1.0).sqrt(),
        }
    };
    adaptive_simpson(&integrand, lower.sqrt(), upper.sqrt(), 1e-12)
}

// ---------------------------------------------------------------------------
// Bayes marginal codelengths by quadrature
// ---------------------------------------------------------------------------

/// `-ln ∫ P(x_2^n | μ) w(μ | x_1) dμ` via adaptive quadrature of the
/// integrand itself (Jeffreys posterior times the product pmf), rebuilt
/// here from first principles rather than the closed forms under test.
pub fn bayes_marginal_quadrature_nats(family: ModelFamily, xs: &[u64]) -> f64 {
    let n = xs.len();
    assert!(n >= 1);
    if n == 1 {
        return 0.0; // empty conditional: the posterior integrates to one
    }
    let s: u64 = xs.iter().sum();
    let x1 = xs[0] as f64;
    let lf_rest: f64 = xs[1..].iter().map(|&x| ln_gamma(x as f64 + 1.0)).sum();

    // ln of the integrand after substituting the integration variable u,
    // chosen per family so endpoint singularities disappear.
    let (ln_g, u_hi): (Box<dyn Fn(f64) -> f64>, f64) = match family {
        ModelFamily::Poisson => {
            // μ = u²: ln g(u) = -n u² + 2s ln u + ln 2 - lnΓ(x1+½) - Σ ln x_i!
            let c = (2.0f64).ln() - ln_gamma(x1 + 0.5) - lf_rest;
            let nf = n as f64;
            let sf = s as f64;
            let f = move |u: f64| -> f64 {
                let power = if s == 0 { 0.0 } else { 2.0 * sf * u.ln() };
                -nf * u * u + power + c
            };
            // Gamma(s+½, rate n) tail is negligible far beyond the mode.
            let mu_hi = (sf + 0.5 + 80.0 + 15.0 * (sf + 1.0).sqrt()) / nf;
            (Box::new(f), mu_hi.sqrt())
        }
        ModelFamily::Geometric => {
            // μ = t/(1-t), then t = u²:
            // ln g(u) = ln(x1+½) + 2s ln u + (n-1) ln(1-u²) + ln 2
            let c = (x1 + 0.5).ln() + (2.0f64).ln();
            let sf = s as f64;
            let m = (n - 1) as f64;
            let f = move |u: f64| -> f64 {
                let power = if s == 0 { 0.0 } else { 2.0 * sf * u.ln() };
                let edge = if n == 1 { 0.0 } else { m * (1.0 - u * u).ln() };
                power + edge + c
            };
            (Box::new(f), 1.0)
        }
    };

    // Factor out the peak so the scaled integrand is O(1).
    let mut peak = f64::NEG_INFINITY;
    for i in 0..=4000 {
        let u = u_hi * i as f64 / 4000.0;
        peak = peak.max(ln_g(u));
    }
    assert!(peak.is_finite());
    let scaled = |u: f64| -> f64 {
        let v = ln_g(u) - peak;
        if v < -745.0 {
            0.0
        } else {
            v.exp()
        }
    };
    let integral = adaptive_simpson(&scaled, 0.0, u_hi, 1e-11);
    -(peak + integral.ln())
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration of error probabilities
// ---------------------------------------------------------------------------

/// pmf table `P(x | μ)` for `x = 0..=x_max`, built by direct recurrence.
pub fn pmf_table(family: ModelFamily, mu: f64, x_max: u64) -> Vec<f64> {
    let mut table = Vec::with_capacity(x_max as usize + 1);
    match family {
        ModelFamily::Poisson => {
            let mut p = (-mu).exp();
            table.push(p);
            for x in 1..=x_max {
                p *= mu / x as f64;
                table.push(p);
            }
        }
        ModelFamily::Geometric => {
            let ratio = mu / (mu + 1.0);
            let mut p = 1.0 / (mu + 1.0);
            table.push(p);
            for _ in 1..=x_max {
                p *= ratio;
                table.push(p);
            }
        }
    }
    table
}

fn score(criterion: CriterionId, xs: &[u64], generating: ModelFamily, mu_true: Option<Mean>) -> f64 {
    let sample = Sample::new(xs.to_vec()).unwrap();
    let (result, _) = evaluate_with_fallback(criterion, &sample, mu_true).unwrap();
    match result.chosen {
        Chosen::Tie => 0.5,
        chosen if chosen.matches(generating) => 0.0,
        _ => 1.0,
    }
}

/// Exact error probability (ties counting one half) and per-replicate score
/// variance for a criterion on samples of size `n ∈ {1, 2}` from
/// `generating` with mean `mu`, by enumerating the truncated outcome
/// lattice. Panics unless the lattice holds all but `1e-12` of the mass.
pub fn enumerate_error_probability(
    criterion: CriterionId,
    generating: ModelFamily,
    mu: f64,
    n: usize,
    x_max: u64,
) -> (f64, f64) {
    let pmf = pmf_table(generating, mu, x_max);
    let mu_true = criterion
        .requires_true_mean()
        .then(|| Mean::new(mu).unwrap());
    let mut mass = 0.0;
    let mut mean_score = 0.0;
    let mut mean_square = 0.0;
    match n {
        1 => {
            for (x, &w) in pmf.iter().enumerate() {
                let s = score(criterion, &[x as u64], generating, mu_true);
                mass += w;
                mean_score += w * s;
                mean_square += w * s * s;
            }
        }
        2 => {
            for (x1, &w1) in pmf.iter().enumerate() {
                for (x2, &w2) in pmf.iter().enumerate() {
                    let w = w1 * w2;
                    let s = score(criterion, &[x1 as u64, x2 as u64], generating, mu_true);
                    mass += w;
                    mean_score += w * s;
                    mean_square += w * s * s;
                }
            }
        }
        _ => panic!("enumeration supports n = 1 or 2"),
    }
    assert!(
        mass > 1.0 - 1e-12,
        "lattice too small: mass {mass} (x_max {x_max})"
    );
    (mean_score, mean_square - mean_score * mean_score)
}
