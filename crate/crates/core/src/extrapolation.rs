//! Step-size functions for extrapolated compositions `U T` of a λ-RFNE (or
//! λ-relaxed cutter) `T` and a μ-RFNE `U` with `λμ < 4`.
//!
//! Notation: `a = T(x) − x` and `b = U(T(x)) − T(x)`, so `a + b = UT(x) − x`.
//! Every τ returned here lies in `(0, ν*]` or equals 1 on fixed points.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{same_dim, Point};
use crate::operators::{OperatorHandle, PrimitiveSet};
use crate::params;

/// Relative floor on the τ denominator.
pub const DENOMINATOR_FLOOR: f64 = 1e-14;
/// Relative tolerance for deciding `UT(x) = x`.
pub const FIX_TOL: f64 = 1e-14;

fn certified(lambda: f64, mu: f64) -> Result<f64> {
    params::certified_nu_star(lambda, mu)
}

/// Value of the quotient `‖a + b‖² / ((1/λ)‖a‖² + (1/μ)‖b‖² + ⟨a, b⟩)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaValue {
    pub denominator: f64,
    pub ratio: f64,
    /// `a + b = 0`, so the ratio is 0.
    pub degenerate: bool,
}

/// Positivity of the denominator and the bound `ratio ≤ ν*` for `λμ < 4`.
pub fn lemma_a_plus_b(lambda: f64, mu: f64, a: &Point, b: &Point) -> Result<LemmaValue> {
    certified(lambda, mu)?;
    same_dim(a, b)?;
    if a.norm_sq() + b.norm_sq() == 0.0 {
        return Err(Error::InvalidParameter {
            name: "a, b",
            value: 0.0,
            reason: "a and b must not both vanish",
        });
    }
    let denominator = denominator(lambda, mu, a, b);
    let sum = a + b;
    let ratio = sum.norm_sq() / denominator;
    Ok(LemmaValue {
        denominator,
        ratio,
        degenerate: sum.norm_sq() == 0.0,
    })
}

fn denominator(lambda: f64, mu: f64, a: &Point, b: &Point) -> f64 {
    // Squares first, cross term last.
    let sq = a.norm_sq() / lambda + b.norm_sq() / mu;
    sq + a.inner(b).expect("same dimension")
}

/// Quotient with the guards: 1 when both vectors vanish or the denominator
/// falls under the relative floor.
fn guarded_quotient(num: f64, den: f64, scale: f64) -> f64 {
    if scale == 0.0 || den < DENOMINATOR_FLOOR * scale {
        1.0
    } else {
        num / den
    }
}

/// Displacements of `x` and `y` under `T` and `U T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtrapolationState {
    pub a1: Point,
    pub b1: Point,
    pub a2: Point,
    pub b2: Point,
    pub lambda: f64,
    pub mu: f64,
}

impl ExtrapolationState {
    pub fn new(a1: Point, b1: Point, a2: Point, b2: Point, lambda: f64, mu: f64) -> Result<Self> {
        certified(lambda, mu)?;
        same_dim(&a1, &b1)?;
        same_dim(&a1, &a2)?;
        same_dim(&a1, &b2)?;
        Ok(ExtrapolationState {
            a1,
            b1,
            a2,
            b2,
            lambda,
            mu,
        })
    }

    /// Evaluates `T` and `U` at `x` and `y`.
    pub fn at(
        t: &OperatorHandle,
        u: &OperatorHandle,
        lambda: f64,
        mu: f64,
        x: &Point,
        y: &Point,
    ) -> Result<Self> {
        let tx = t.eval(x)?;
        let ty = t.eval(y)?;
        let utx = u.eval(&tx)?;
        let uty = u.eval(&ty)?;
        Self::new(&tx - x, &utx - &tx, &ty - y, &uty - &ty, lambda, mu)
    }
}

/// τ*(x, y) for two arbitrary points.
pub fn tau_star_pair(state: &ExtrapolationState) -> Result<f64> {
    let nu = certified(state.lambda, state.mu)?;
    let da = &state.a1 - &state.a2;
    let db = &state.b1 - &state.b2;
    let scale = da.norm_sq() + db.norm_sq();
    let num = (&da + &db).norm_sq();
    let den = denominator(state.lambda, state.mu, &da, &db);
    let tau = guarded_quotient(num, den, scale);
    Ok(if scale == 0.0 { 1.0 } else { tau.min(nu) })
}

/// τ*(x) for compositions with a common fixed point:
/// `‖a + b‖² / ((1/λ)‖a‖² + (1/μ)‖b‖² + ⟨a, b⟩)`, or 1 on `Fix UT`.
pub fn tau_star_common(
    t: &OperatorHandle,
    u: &OperatorHandle,
    lambda: f64,
    mu: f64,
    x: &Point,
) -> Result<f64> {
    let nu = certified(lambda, mu)?;
    let tx = t.eval(x)?;
    let a = &tx - x;
    let b = &u.eval(&tx)? - &tx;
    Ok(tau_common_from(&a, &b, lambda, mu, x, nu))
}

pub(crate) fn tau_common_from(a: &Point, b: &Point, lambda: f64, mu: f64, x: &Point, nu: f64) -> f64 {
    let sum = a + b;
    if sum.norm() <= FIX_TOL * (1.0 + x.norm()) {
        return 1.0;
    }
    let tau = guarded_quotient(
        sum.norm_sq(),
        denominator(lambda, mu, a, b),
        a.norm_sq() + b.norm_sq(),
    );
    tau.min(nu)
}

/// τ̄ and τ̂ = min{τ̄, ν*(λ, 1)} for `T = (P_A)_λ`, `U = P_B`, `B` a hyperplane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallAffineTau {
    pub tau_bar: f64,
    pub tau_hat: f64,
}

/// Step for the relaxed projection onto `A` followed by the projection onto
/// the hyperplane `B`, evaluated at `x ∈ B`.
///
/// `τ̄(x) = ‖a + b‖² / ((1/λ)‖a‖² + ‖b‖² + ⟨a, b⟩ − (1/λ)‖b‖²)`, which bounds
/// τ*(x, z) from above for every fixed point `z`.
pub fn tau_ball_affine(
    a_set: &PrimitiveSet,
    b_set: &PrimitiveSet,
    lambda: f64,
    x: &Point,
) -> Result<BallAffineTau> {
    if !b_set.is_affine() {
        return Err(Error::Unsupported(
            "the second set must be a hyperplane".into(),
        ));
    }
    if !(1.0..4.0).contains(&lambda) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "must lie in [1, 4)",
        });
    }
    let violation = b_set.violation(x)?;
    if violation > 1e-9 * (1.0 + x.norm()) {
        return Err(Error::NotInSet { violation });
    }
    let nu = certified(lambda, 1.0)?;
    let tx = x.axpy(lambda, &(&a_set.project(x)? - x))?;
    let a = &tx - x;
    let b = &b_set.project(&tx)? - &tx;
    let sum = &a + &b;
    if sum.norm() <= FIX_TOL * (1.0 + x.norm()) {
        return Ok(BallAffineTau {
            tau_bar: 1.0,
            tau_hat: 1.0,
        });
    }
    let bb = b.norm_sq();
    let den = a.norm_sq() / lambda + bb - bb / lambda + a.inner(&b)?;
    let tau_bar = guarded_quotient(sum.norm_sq(), den, a.norm_sq() + bb);
    Ok(BallAffineTau {
        tau_bar,
        tau_hat: tau_bar.min(nu),
    })
}

/// τ̂(x); see [`tau_ball_affine`].
pub fn tau_hat_ball_affine(
    a_set: &PrimitiveSet,
    b_set: &PrimitiveSet,
    lambda: f64,
    x: &Point,
) -> Result<f64> {
    Ok(tau_ball_affine(a_set, b_set, lambda, x)?.tau_hat)
}
