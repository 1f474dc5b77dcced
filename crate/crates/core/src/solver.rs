//! Relaxed fixed-point iteration `x^{k+1} = x^k + λ_k σ(x^k) (V(x^k) − x^k)`
//! and the named method presets built on it.

use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{check_positive, Error, Result};
use crate::extrapolation;
use crate::hilbert::{LinearMap, Point};
use crate::operators::{ClassCertificate, OperatorHandle, PrimitiveSet, RelaxationFn};
use crate::params;

pub const DEFAULT_EPSILON: f64 = 0.05;
/// Iterates with a larger norm count as diverged.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// Relaxation parameters λ_k.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum Schedule {
    Constant(f64),
    /// Repeats the listed values.
    Cyclic(Vec<f64>),
}

impl Schedule {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::Cyclic(vs) => vs[k % vs.len()],
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            Schedule::Constant(v) => std::slice::from_ref(v),
            Schedule::Cyclic(vs) => vs,
        }
    }
}

/// Extrapolation factor σ.
#[derive(Clone)]
pub enum Sigma {
    Constant(f64),
    Function(RelaxationFn),
}

impl Sigma {
    pub fn at(&self, x: &Point) -> Result<f64> {
        let s = match self {
            Sigma::Constant(c) => *c,
            Sigma::Function(f) => f(x)?,
        };
        if s.is_finite() && s > 0.0 {
            Ok(s)
        } else {
            Err(Error::InvalidRelaxation {
                value: s,
                at: x.clone(),
            })
        }
    }
}

impl fmt::Debug for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma::Constant(c) => write!(f, "Constant({c})"),
            Sigma::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// Per-iteration relaxation: `λ_k` from a schedule, times an optional σ(x).
#[derive(Debug, Clone)]
pub struct StepRule {
    schedule: Schedule,
    sigma: Option<Sigma>,
    epsilon: f64,
}

impl StepRule {
    /// Validates every scheduled value against `[ε, 2 − ε]`, `ε ∈ (0, 1)`.
    pub fn new(schedule: Schedule, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                value: epsilon,
                reason: "must lie in (0, 1)",
            });
        }
        if schedule.values().is_empty() {
            return Err(Error::InvalidParameter {
                name: "schedule",
                value: 0.0,
                reason: "must contain at least one value",
            });
        }
        for &v in schedule.values() {
            if !(v >= epsilon && v <= 2.0 - epsilon) {
                return Err(Error::InvalidParameter {
                    name: "lambda_k",
                    value: v,
                    reason: "must lie in [epsilon, 2 - epsilon]",
                });
            }
        }
        Ok(StepRule {
            schedule,
            sigma: None,
            epsilon,
        })
    }

    /// Skips the `[ε, 2 − ε]` check. Only for demonstrating what goes wrong
    /// outside the admissible range.
    pub fn unvalidated(schedule: Schedule) -> Self {
        StepRule {
            schedule,
            sigma: None,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn with_sigma(mut self, sigma: Sigma) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn sigma(&self) -> Option<&Sigma> {
        self.sigma.as_ref()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `λ_k σ(x)`.
    pub fn step(&self, k: usize, x: &Point) -> Result<f64> {
        let sigma = match &self.sigma {
            Some(s) => s.at(x)?,
            None => 1.0,
        };
        Ok(self.schedule.at(k) * sigma)
    }
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::new(Schedule::Constant(1.0), DEFAULT_EPSILON).expect("1 is admissible")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stall {
    pub window: usize,
    /// Stop when the residual fell by less than this fraction over `window`
    /// iterations.
    pub min_decrease: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StoppingRule {
    pub residual_tol: f64,
    pub max_iters: usize,
    pub stall: Option<Stall>,
}

impl StoppingRule {
    pub fn new(residual_tol: f64, max_iters: usize) -> Result<Self> {
        check_positive("residual_tol", residual_tol)?;
        if max_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iters",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        Ok(StoppingRule {
            residual_tol,
            max_iters,
            stall: None,
        })
    }

    pub fn with_stall(mut self, window: usize, min_decrease: f64) -> Result<Self> {
        if window == 0 || !(min_decrease >= 0.0 && min_decrease < 1.0) {
            return Err(Error::InvalidParameter {
                name: "stall",
                value: min_decrease,
                reason: "window must be positive and min_decrease in [0, 1)",
            });
        }
        self.stall = Some(Stall {
            window,
            min_decrease,
        });
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Converged,
    MaxIters,
    Stalled,
    Diverged,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRow {
    pub k: usize,
    pub x: Point,
    /// `‖V(x^k) − x^k‖` for the base operator.
    pub residual: f64,
    /// `λ_k σ(x^k)`; for the last row, the step that would be taken next.
    pub step: f64,
    pub dist_to_ref: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTrace {
    pub label: String,
    pub rows: Vec<IterationRow>,
    pub status: Status,
    /// Largest increase of the distance to the reference point, when one was
    /// supplied.
    pub fejer_violation: Option<f64>,
}

impl IterationTrace {
    /// Index of the last iterate.
    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.k)
    }

    pub fn final_point(&self) -> Option<&Point> {
        self.rows.last().map(|r| &r.x)
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.rows.last().map(|r| r.residual)
    }

    /// First `k` whose distance to the reference is at most `tol`.
    pub fn first_within(&self, tol: f64) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.dist_to_ref.is_some_and(|d| d <= tol))
            .map(|r| r.k)
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: status={} iterations={} final_residual={:.6e}",
            self.label,
            self.status,
            self.iterations(),
            self.final_residual().unwrap_or(f64::NAN)
        )
    }

    /// CSV with header `k,residual,step,dist_to_ref,x_0,...`. Floats carry 17
    /// significant digits; a missing distance is an empty field.
    pub fn to_csv(&self) -> String {
        let dim = self.rows.first().map_or(0, |r| r.x.dim());
        let mut out = String::from("k,residual,step,dist_to_ref");
        for i in 0..dim {
            let _ = write!(out, ",x_{i}");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{:.16e},{:.16e},", r.k, r.residual, r.step);
            if let Some(d) = r.dist_to_ref {
                let _ = write!(out, "{d:.16e}");
            }
            for v in r.x.as_slice() {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
        out
    }

    /// JSON document with the rows, status and the supplied configuration.
    pub fn to_json(&self, config: &serde_json::Value) -> String {
        let doc = serde_json::json!({
            "label": self.label,
            "status": self.status,
            "iterations": self.iterations(),
            "final_residual": self.final_residual(),
            "fejer_violation": self.fejer_violation,
            "config": config,
            "rows": self.rows,
        });
        serde_json::to_string_pretty(&doc).expect("trace serializes") + "\n"
    }
}

/// Runs the iteration from `x0`. Divergence is reported through the status;
/// errors are reserved for invalid inputs and failing σ evaluations.
pub fn iterate(
    v_base: &OperatorHandle,
    rule: &StepRule,
    stop: &StoppingRule,
    x0: &Point,
    reference: Option<&Point>,
) -> Result<IterationTrace> {
    if x0.dim() != v_base.dim() {
        return Err(Error::DimensionMismatch {
            expected: v_base.dim(),
            found: x0.dim(),
        });
    }
    if let Some(z) = reference {
        if z.dim() != x0.dim() {
            return Err(Error::DimensionMismatch {
                expected: x0.dim(),
                found: z.dim(),
            });
        }
    }
    let mut rows: Vec<IterationRow> = Vec::new();
    let mut fejer: Option<f64> = reference.map(|_| 0.0);
    let mut x = x0.clone();
    let mut k = 0;
    let status = loop {
        let vx = v_base.eval(&x)?;
        let d = &vx - &x;
        let residual = d.norm();
        let dist = reference.map(|z| x.dist(z).expect("checked dimension"));
        if let (Some(prev), Some(cur), Some(worst)) =
            (rows.last().and_then(|r| r.dist_to_ref), dist, fejer.as_mut())
        {
            *worst = worst.max(cur - prev);
        }
        if !residual.is_finite() {
            break Status::Diverged;
        }
        let step = rule.step(k, &x)?;
        rows.push(IterationRow {
            k,
            x: x.clone(),
            residual,
            step,
            dist_to_ref: dist,
        });
        if residual <= stop.residual_tol {
            break Status::Converged;
        }
        if k >= stop.max_iters {
            break Status::MaxIters;
        }
        if let Some(s) = stop.stall {
            if k >= s.window {
                let old = rows[k - s.window].residual;
                if old - residual < s.min_decrease * old {
                    break Status::Stalled;
                }
            }
        }
        let next = x.axpy(step, &d)?;
        if !next.is_finite() || next.norm() > DIVERGENCE_NORM {
            break Status::Diverged;
        }
        x = next;
        k += 1;
    };
    Ok(IterationTrace {
        label: v_base.label().to_string(),
        rows,
        status,
        fejer_violation: fejer,
    })
}

/// `max_k ‖x^{k+1} − z‖ − ‖x^k − z‖`, or 0 for a single-row trace.
pub fn fejer_check(trace: &IterationTrace, z: &Point) -> Result<f64> {
    if trace.rows.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut worst: f64 = 0.0;
    for w in trace.rows.windows(2) {
        worst = worst.max(w[1].x.dist(z)? - w[0].x.dist(z)?);
    }
    Ok(worst)
}

/// A base operator with its step rule.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: String,
    pub v_base: OperatorHandle,
    pub rule: StepRule,
    /// The factors `T` and `U` of `V = U T`, when the method has them.
    pub factors: Option<(OperatorHandle, OperatorHandle)>,
}

impl Preset {
    pub fn run(&self, stop: &StoppingRule, x0: &Point, reference: Option<&Point>) -> Result<IterationTrace> {
        let mut trace = iterate(&self.v_base, &self.rule, stop, x0, reference)?;
        trace.label = self.name.clone();
        Ok(trace)
    }
}

fn check_same_dim(a: &PrimitiveSet, b: &PrimitiveSet) -> Result<()> {
    if a.dim() == b.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        })
    }
}

/// Iteration for an operator with a relaxed-cutter parameter λ (FNE and
/// cutters give λ = 1, an α-demicontraction gives λ = 2/(1 − α)): σ ≡ 1/λ,
/// which turns the operator into a cutter.
pub fn preset_certified(v: &OperatorHandle, rule: StepRule) -> Result<Preset> {
    let cert = v
        .certificate()
        .ok_or_else(|| Error::Uncertified(format!("{} carries no certificate", v.label())))?;
    let lambda = cert.relaxed_cutter_lambda().expect("every class has a cutter form");
    Ok(Preset {
        name: format!("certified[{cert}]"),
        v_base: v.clone(),
        rule: rule.with_sigma(Sigma::Constant(1.0 / lambda)),
        factors: None,
    })
}

/// Averaged alternating reflections `V = ½(Id + R_B R_A)`, firmly
/// nonexpansive. The ½ averaging is folded into `V` so that residuals are
/// those of the averaged operator.
pub fn preset_dr(a: &PrimitiveSet, b: &PrimitiveSet, rule: StepRule) -> Result<Preset> {
    check_same_dim(a, b)?;
    let ra = OperatorHandle::reflection(a.clone());
    let rb = OperatorHandle::reflection(b.clone());
    let v = rb
        .compose(&ra)?
        .relax(0.5)?
        .with_certificate(Some(ClassCertificate::Fne))?
        .with_label("DR");
    Ok(Preset {
        name: "dr".into(),
        v_base: v,
        rule,
        factors: Some((ra, rb)),
    })
}

fn relaxed_pair(
    a: &PrimitiveSet,
    b: &PrimitiveSet,
    lambda: f64,
    mu: f64,
) -> Result<(OperatorHandle, OperatorHandle, f64)> {
    check_same_dim(a, b)?;
    let nu = params::certified_nu_star(lambda, mu)?;
    let t = OperatorHandle::projection(a.clone()).relax(lambda)?;
    let u = OperatorHandle::projection(b.clone()).relax(mu)?;
    Ok((t, u, nu))
}

/// `x^{k+1} = (UT)_{λ_k/ν*}(x^k)` with `T = (P_A)_λ`, `U = (P_B)_μ`.
pub fn preset_raspc(
    a: &PrimitiveSet,
    b: &PrimitiveSet,
    lambda: f64,
    mu: f64,
    rule: StepRule,
) -> Result<Preset> {
    let (t, u, nu) = relaxed_pair(a, b, lambda, mu)?;
    Ok(Preset {
        name: "raspc".into(),
        v_base: u.compose(&t)?,
        rule: rule.with_sigma(Sigma::Constant(1.0 / nu)),
        factors: Some((t, u)),
    })
}

/// Which extrapolation formula the EADC preset uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EadcStep {
    /// τ*(x), valid with a common fixed point of `T` and `U`.
    Common,
    /// τ̂(x) for `U = P_B`, `B` a hyperplane, iterates in `B`.
    BallAffine,
}

/// Extrapolated alternating method: `σ(x) = 1/τ(x)` with τ from
/// [`extrapolation`]. The caller asserts that `Fix T ∩ Fix U` is nonempty.
pub fn preset_eadc(
    a: &PrimitiveSet,
    b: &PrimitiveSet,
    lambda: f64,
    mu: f64,
    step: EadcStep,
    rule: StepRule,
) -> Result<Preset> {
    let (t, u, nu) = relaxed_pair(a, b, lambda, mu)?;
    let sigma: RelaxationFn = match step {
        EadcStep::Common => {
            let (t, u) = (t.clone(), u.clone());
            Arc::new(move |x: &Point| {
                let tx = t.eval(x)?;
                let a1 = &tx - x;
                let b1 = &u.eval(&tx)? - &tx;
                Ok(1.0 / extrapolation::tau_common_from(&a1, &b1, lambda, mu, x, nu))
            })
        }
        EadcStep::BallAffine => {
            if mu != 1.0 {
                return Err(Error::InvalidParameter {
                    name: "mu",
                    value: mu,
                    reason: "the ball/affine step needs mu = 1",
                });
            }
            let (a, b) = (a.clone(), b.clone());
            Arc::new(move |x: &Point| {
                Ok(1.0 / extrapolation::tau_hat_ball_affine(&a, &b, lambda, x)?)
            })
        }
    };
    Ok(Preset {
        name: "eadc".into(),
        v_base: u.compose(&t)?,
        rule: rule.with_sigma(Sigma::Function(sigma)),
        factors: Some((t, u)),
    })
}

/// Constants of the split common fixed point method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MoudafiConstants {
    pub gamma: f64,
    pub delta: f64,
    pub tau: f64,
}

/// `γ = 1 − (1 − α)/λ`, `δ = 1 − (1 − β)/μ`, `τ = 2(γ + δ)/(γ + δ − γδ)`,
/// requiring `γ + δ < γδ`.
pub fn moudafi_constants(alpha: f64, beta: f64, lambda: f64, mu: f64) -> Result<MoudafiConstants> {
    let gamma = params::relax_demicontraction(alpha, lambda)?;
    let delta = params::relax_demicontraction(beta, mu)?;
    if !(gamma + delta < gamma * delta) {
        return Err(Error::Uncertified(format!(
            "gamma + delta = {} is not below gamma * delta = {} \
             (alpha = {alpha}, beta = {beta}, lambda = {lambda}, mu = {mu})",
            gamma + delta,
            gamma * delta
        )));
    }
    let tau = 2.0 * (gamma + delta) / (gamma + delta - gamma * delta);
    Ok(MoudafiConstants { gamma, delta, tau })
}

/// Split common fixed point iteration `x^{k+1} = x^k + σ_k/τ (U_μ T_λ x^k − x^k)`
/// with `T` the Landweber operator of `S` through `A`.
pub fn preset_moudafi(
    s: &OperatorHandle,
    u: &OperatorHandle,
    a: &LinearMap,
    lambda: f64,
    mu: f64,
    rule: StepRule,
) -> Result<Preset> {
    let alpha = demicontraction_of(s)?;
    let beta = demicontraction_of(u)?;
    let c = moudafi_constants(alpha, beta, lambda, mu)?;
    let t = OperatorHandle::landweber(s, a)?.relax(lambda)?;
    let u = u.relax(mu)?;
    Ok(Preset {
        name: "moudafi".into(),
        v_base: u.compose(&t)?,
        rule: rule.with_sigma(Sigma::Constant(1.0 / c.tau)),
        factors: Some((t, u)),
    })
}

fn demicontraction_of(op: &OperatorHandle) -> Result<f64> {
    op.certificate()
        .and_then(|c| c.demicontraction_alpha())
        .ok_or_else(|| {
            Error::Uncertified(format!(
                "{} has no demicontraction certificate",
                op.label()
            ))
        })
}
