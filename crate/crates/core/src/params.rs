//! Closed-form parameter calculus.
//!
//! Conventions: `lambda`, `mu` are relaxation parameters of relaxed firmly
//! nonexpansive operators (or relaxed cutters); `alpha`, `beta` are strict
//! pseudocontraction (or demicontraction) constants. The two are linked by the
//! bijection `alpha = (lambda - 2) / lambda`, `lambda = 2 / (1 - alpha)`.
//!
//! All strict inequalities are evaluated on the inputs exactly as given, with
//! no tolerance. Certificates therefore fail closed at the boundary.

use serde::Serialize;

use crate::error::{check_below_one, check_positive, Error, Result};

/// `alpha = (lambda - 2) / lambda`: a λ-RFNE operator is an α-SPC.
pub fn rfne_to_spc(lambda: f64) -> Result<f64> {
    check_positive("lambda", lambda)?;
    Ok((lambda - 2.0) / lambda)
}

/// Inverse of [`rfne_to_spc`]: `lambda = 2 / (1 - alpha)`.
pub fn spc_to_rfne(alpha: f64) -> Result<f64> {
    check_below_one("alpha", alpha)?;
    Ok(2.0 / (1.0 - alpha))
}

/// An α-demicontraction is a `2 / (1 - alpha)`-relaxed cutter.
pub fn demicontraction_to_relaxed_cutter(alpha: f64) -> Result<f64> {
    spc_to_rfne(alpha)
}

/// A λ-relaxed cutter is a `(lambda - 2) / lambda`-demicontraction.
pub fn relaxed_cutter_to_demicontraction(lambda: f64) -> Result<f64> {
    rfne_to_spc(lambda)
}

/// Constant of the μ-relaxation of an α-demicontraction:
/// `beta = (mu + alpha - 1) / mu`.
pub fn relax_demicontraction(alpha: f64, mu: f64) -> Result<f64> {
    check_below_one("alpha", alpha)?;
    check_positive("mu", mu)?;
    Ok((mu + alpha - 1.0) / mu)
}

/// Raw value of `4 (λ + μ − λμ) / (4 − λμ)`, or `None` when `λμ = 4`.
///
/// Defined for every positive pair with `λμ ≠ 4`; outside `λμ < 4` the value
/// carries no class meaning. When exactly one of the parameters equals 2 the
/// quotient simplifies to 2 and that value is returned exactly.
pub fn nu(lambda: f64, mu: f64) -> Option<f64> {
    let prod = lambda * mu;
    if prod == 4.0 {
        return None;
    }
    if lambda == 2.0 || mu == 2.0 {
        return Some(2.0);
    }
    Some(4.0 * (lambda + mu - prod) / (4.0 - prod))
}

/// Why a composition of relaxed operators is not certified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictNote {
    /// `λμ < 4`: the composition carries the ν* certificate.
    Certified,
    /// `λ = μ = 2`: every nonzero ν solves the defining equation.
    BothTwo,
    /// `λμ = 4` with `λ ≠ 2`: the defining equation has no solution.
    NoSolution,
    /// `4 < λμ < λ + μ`: ν is negative.
    NegativeBeyondFour,
    /// `λμ = λ + μ > 4`: ν is zero.
    ZeroBeyondFour,
    /// `λ + μ < λμ`: ν is positive but no class follows.
    PositiveBeyondFour,
}

/// Outcome of [`nu_star`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompositionVerdict {
    pub nu_star: Option<f64>,
    pub certified: bool,
    /// `λμ < λ + μ`: fixed points of the composition are exactly the common
    /// fixed points (given that common fixed points exist).
    pub fix_intersection_ok: bool,
    pub note: VerdictNote,
}

/// Relaxation constant of the composition of a λ-RFNE and a μ-RFNE operator.
pub fn nu_star(lambda: f64, mu: f64) -> Result<CompositionVerdict> {
    check_positive("lambda", lambda)?;
    check_positive("mu", mu)?;
    let prod = lambda * mu;
    let sum = lambda + mu;
    let value = nu(lambda, mu);
    let note = if prod < 4.0 {
        VerdictNote::Certified
    } else if prod == 4.0 {
        if lambda == 2.0 {
            VerdictNote::BothTwo
        } else {
            VerdictNote::NoSolution
        }
    } else if prod < sum {
        VerdictNote::NegativeBeyondFour
    } else if prod == sum {
        VerdictNote::ZeroBeyondFour
    } else {
        VerdictNote::PositiveBeyondFour
    };
    Ok(CompositionVerdict {
        nu_star: value,
        certified: prod < 4.0,
        fix_intersection_ok: prod < sum,
        note,
    })
}

/// Certified ν* or an [`Error::Uncertified`] explaining the failure.
pub fn certified_nu_star(lambda: f64, mu: f64) -> Result<f64> {
    let verdict = nu_star(lambda, mu)?;
    match (verdict.certified, verdict.nu_star) {
        (true, Some(v)) => Ok(v),
        _ => Err(Error::Uncertified(format!(
            "lambda * mu = {} is not below 4 (lambda = {lambda}, mu = {mu}); {:?}",
            lambda * mu,
            verdict.note
        ))),
    }
}

/// Bounds on ν* for `λμ < 4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NuBounds {
    /// `4 min / (min + 2)`, strictly above `min{λ, μ}`.
    pub lower: f64,
    /// `max{λ, μ}`, also a lower bound.
    pub lower_max: f64,
    /// `4 max / (max + 2) < 2`, available when both parameters are below 2.
    pub upper: Option<f64>,
}

pub fn nu_bounds(lambda: f64, mu: f64) -> Result<NuBounds> {
    certified_nu_star(lambda, mu)?;
    let lo = lambda.min(mu);
    let hi = lambda.max(mu);
    Ok(NuBounds {
        lower: 4.0 * lo / (lo + 2.0),
        lower_max: hi,
        upper: (hi < 2.0).then(|| 4.0 * hi / (hi + 2.0)),
    })
}

/// SPC constant of the composition of an α-SPC and a β-SPC:
/// `αβ / (α + β)`, valid when `α + β < αβ`.
pub fn gamma_star(alpha: f64, beta: f64) -> Result<f64> {
    check_below_one("alpha", alpha)?;
    check_below_one("beta", beta)?;
    let sum = alpha + beta;
    let prod = alpha * beta;
    if sum < prod {
        Ok(prod / sum)
    } else {
        Err(Error::Uncertified(format!(
            "alpha + beta = {sum} is not below alpha * beta = {prod} (alpha = {alpha}, beta = {beta})"
        )))
    }
}

/// Result of [`chain_gamma`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ChainVerdict {
    Accepted { gamma: f64 },
    /// The reciprocal sum vanishes, so γ is undefined.
    ZeroReciprocalSum,
    /// γ ≥ 1; the chain statement says nothing.
    NotBelowOne { gamma: f64 },
    /// One constant is positive but γ < 0. The reciprocal sum is negative,
    /// so `1/γ > 1` fails and the chain need not be a demicontraction.
    NegativeWithPositiveMember { gamma: f64 },
}

impl ChainVerdict {
    pub fn gamma(&self) -> Option<f64> {
        match self {
            ChainVerdict::Accepted { gamma } => Some(*gamma),
            _ => None,
        }
    }
}

/// Demicontraction constant `γ_m = (Σ 1/α_i)^{-1}` of `T_m ⋯ T_1`.
///
/// Each `α_i` must lie in `(−∞, 1) \ {0}` and at most one may be positive.
/// With a positive member γ must also be positive; otherwise the chain is
/// rejected even though γ < 1.
pub fn chain_gamma(alphas: &[f64]) -> Result<ChainVerdict> {
    if alphas.is_empty() {
        return Err(Error::EmptyOperatorList);
    }
    let mut positives = 0;
    for &a in alphas {
        check_below_one("alpha", a)?;
        if a == 0.0 {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: a,
                reason: "must be nonzero in a chain",
            });
        }
        if a > 0.0 {
            positives += 1;
        }
    }
    if positives > 1 {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: positives as f64,
            reason: "at most one constant in a chain may be positive",
        });
    }
    let s: f64 = alphas.iter().map(|a| 1.0 / a).sum();
    if s == 0.0 {
        return Ok(ChainVerdict::ZeroReciprocalSum);
    }
    let gamma = 1.0 / s;
    if positives == 1 && gamma < 0.0 {
        Ok(ChainVerdict::NegativeWithPositiveMember { gamma })
    } else if gamma < 1.0 {
        Ok(ChainVerdict::Accepted { gamma })
    } else {
        Ok(ChainVerdict::NotBelowOne { gamma })
    }
}

/// Relaxation parameter of a convex combination of λ_i-RFNE operators
/// (or λ_i-relaxed cutters): `Σ w_i λ_i`.
pub fn convex_lambda(weights: &[f64], lambdas: &[f64]) -> Result<f64> {
    check_weights(weights, lambdas.len())?;
    for &l in lambdas {
        check_positive("lambda", l)?;
    }
    Ok(weights.iter().zip(lambdas).map(|(w, l)| w * l).sum())
}

/// SPC constant of a convex combination of α_i-SPCs (or demicontractions):
/// `1 − (Σ w_i / (1 − α_i))^{-1}`.
pub fn convex_alpha(weights: &[f64], alphas: &[f64]) -> Result<f64> {
    check_weights(weights, alphas.len())?;
    for &a in alphas {
        check_below_one("alpha", a)?;
    }
    let s: f64 = weights.iter().zip(alphas).map(|(w, a)| w / (1.0 - a)).sum();
    Ok(1.0 - 1.0 / s)
}

pub(crate) fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyOperatorList);
    }
    if weights.len() != n {
        return Err(Error::WeightCount {
            weights: weights.len(),
            ops: n,
        });
    }
    for &w in weights {
        check_positive("weight", w)?;
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::WeightSum { sum });
    }
    Ok(())
}

/// `λμ < 4 ⟹ λ + μ > λμ`.
pub fn lemma_a_holds(lambda: f64, mu: f64) -> Result<bool> {
    check_positive("lambda", lambda)?;
    check_positive("mu", mu)?;
    let prod = lambda * mu;
    Ok(prod >= 4.0 || lambda + mu > prod)
}

/// Checks both implications:
/// (i) `α + β < αβ ⟹ (α + β < 0 ∧ αβ/(α + β) < 1)`;
/// (ii) `(αβ/(α + β) < 1 ∧ at most one of α, β ≥ 0) ⟹ α + β < αβ`.
///
/// The second implication is checked exactly as stated. It is false when
/// `α + β > 0 > αβ`: the quotient is then negative, hence below 1, yet
/// `α + β > αβ`. See [`lemma_b_repaired_holds`].
pub fn lemma_b_holds(alpha: f64, beta: f64) -> Result<bool> {
    check_below_one("alpha", alpha)?;
    check_below_one("beta", beta)?;
    let sum = alpha + beta;
    let prod = alpha * beta;
    let first = !(sum < prod) || (sum < 0.0 && prod / sum < 1.0);
    let at_most_one_nonneg = !(alpha >= 0.0 && beta >= 0.0);
    // With α + β = 0 the quotient is not a real number and the antecedent is false.
    let quotient_below_one = sum != 0.0 && prod / sum < 1.0;
    let second = !(quotient_below_one && at_most_one_nonneg) || sum < prod;
    Ok(first && second)
}

/// Lemma B with the second hypothesis strengthened to `0 < αβ/(α + β) < 1`,
/// which is what inverting the quotient needs.
pub fn lemma_b_repaired_holds(alpha: f64, beta: f64) -> Result<bool> {
    check_below_one("alpha", alpha)?;
    check_below_one("beta", beta)?;
    let sum = alpha + beta;
    let prod = alpha * beta;
    let first = !(sum < prod) || (sum < 0.0 && prod / sum < 1.0);
    let at_most_one_nonneg = !(alpha >= 0.0 && beta >= 0.0);
    let quotient = if sum != 0.0 { prod / sum } else { f64::NAN };
    let hypothesis = quotient > 0.0 && quotient < 1.0 && at_most_one_nonneg;
    Ok(first && (!hypothesis || sum < prod))
}

/// Residual of `(1 − 2/ν)² = 4 (1/λ − 1/ν)(1/μ − 1/ν)`.
pub fn nu_equation_residual(lambda: f64, mu: f64, nu: f64) -> f64 {
    let lhs = (1.0 - 2.0 / nu).powi(2);
    let rhs = 4.0 * (1.0 / lambda - 1.0 / nu) * (1.0 / mu - 1.0 / nu);
    lhs - rhs
}

/// One row of the ν(λ, μ) level-set grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NuGridRow {
    pub lambda: f64,
    pub mu: f64,
    pub nu: Option<f64>,
}

/// Grid of ν(λ, μ) over `[min, max]²` with spacing `step`. Grid points are
/// `min + i * step`, so values do not accumulate rounding along the axis.
pub fn nu_grid(min: f64, max: f64, step: f64) -> Result<Vec<NuGridRow>> {
    check_positive("min", min)?;
    check_positive("step", step)?;
    if !(max.is_finite() && max >= min) {
        return Err(Error::InvalidParameter {
            name: "max",
            value: max,
            reason: "must be finite and at least min",
        });
    }
    let n = ((max - min) / step + 1e-9).floor() as usize + 1;
    let axis: Vec<f64> = (0..n).map(|i| min + i as f64 * step).collect();
    let mut rows = Vec::with_capacity(n * n);
    for &lambda in &axis {
        for &mu in &axis {
            rows.push(NuGridRow {
                lambda,
                mu,
                nu: nu(lambda, mu),
            });
        }
    }
    Ok(rows)
}
