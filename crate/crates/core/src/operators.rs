//! Operators on R^n and their class certificates.
//!
//! An [`OperatorHandle`] is an immutable, cheaply clonable expression tree.
//! Combinators attach a [`ClassCertificate`] only when a closed-form rule in
//! [`crate::params`] covers the combination, and a [`FixSet`] only when the
//! fixed-point set is known to be the intersection of primitive sets.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_positive, Error, Result};
use crate::hilbert::{same_dim, LinearMap, Point};
use crate::params;

/// Closed convex sets with closed-form metric projections.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrimitiveSet {
    /// `{x : ⟨a, x⟩ = b}`
    Hyperplane { normal: Point, offset: f64 },
    /// `{x : ⟨a, x⟩ ≤ b}`
    Halfspace { normal: Point, offset: f64 },
    Ball { center: Point, radius: f64 },
    Box { lower: Point, upper: Point },
}

impl PrimitiveSet {
    pub fn hyperplane(normal: Point, offset: f64) -> Result<Self> {
        check_normal(&normal, offset)?;
        Ok(PrimitiveSet::Hyperplane { normal, offset })
    }

    pub fn halfspace(normal: Point, offset: f64) -> Result<Self> {
        check_normal(&normal, offset)?;
        Ok(PrimitiveSet::Halfspace { normal, offset })
    }

    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        check_positive("radius", radius)?;
        Ok(PrimitiveSet::Ball { center, radius })
    }

    pub fn cube(lower: Point, upper: Point) -> Result<Self> {
        same_dim(&lower, &upper)?;
        if let Some(i) = (0..lower.dim()).find(|&i| lower[i] > upper[i]) {
            return Err(Error::InvalidSet(format!(
                "box lower bound exceeds upper bound in coordinate {i} ({} > {})",
                lower[i], upper[i]
            )));
        }
        Ok(PrimitiveSet::Box { lower, upper })
    }

    pub fn dim(&self) -> usize {
        match self {
            PrimitiveSet::Hyperplane { normal, .. } | PrimitiveSet::Halfspace { normal, .. } => {
                normal.dim()
            }
            PrimitiveSet::Ball { center, .. } => center.dim(),
            PrimitiveSet::Box { lower, .. } => lower.dim(),
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, PrimitiveSet::Hyperplane { .. })
    }

    /// Metric projection of `x` onto the set.
    pub fn project(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim(), x)?;
        Ok(match self {
            PrimitiveSet::Hyperplane { normal, offset } => {
                let t = (normal.inner(x)? - offset) / normal.norm_sq();
                x.axpy(-t, normal)?
            }
            PrimitiveSet::Halfspace { normal, offset } => {
                let excess = normal.inner(x)? - offset;
                if excess <= 0.0 {
                    x.clone()
                } else {
                    x.axpy(-excess / normal.norm_sq(), normal)?
                }
            }
            PrimitiveSet::Ball { center, radius } => {
                let d = x.try_sub(center)?;
                let n = d.norm();
                if n <= *radius {
                    x.clone()
                } else {
                    center.axpy(radius / n, &d)?
                }
            }
            PrimitiveSet::Box { lower, upper } => Point::from_raw(
                (0..x.dim())
                    .map(|i| x[i].clamp(lower[i], upper[i]))
                    .collect(),
            ),
        })
    }

    /// Distance from `x` to the set.
    pub fn violation(&self, x: &Point) -> Result<f64> {
        check_dim(self.dim(), x)?;
        Ok(match self {
            PrimitiveSet::Hyperplane { normal, offset } => {
                (normal.inner(x)? - offset).abs() / normal.norm()
            }
            PrimitiveSet::Halfspace { normal, offset } => {
                (normal.inner(x)? - offset).max(0.0) / normal.norm()
            }
            PrimitiveSet::Ball { center, radius } => (x.dist(center)? - radius).max(0.0),
            PrimitiveSet::Box { .. } => x.dist(&self.project(x)?)?,
        })
    }

    pub fn contains(&self, x: &Point, tol: f64) -> Result<bool> {
        Ok(self.violation(x)? <= tol)
    }

    /// A point of the set near its "middle": the foot of the normal through
    /// the origin, the ball center, or the box midpoint.
    pub fn anchor(&self) -> Point {
        match self {
            PrimitiveSet::Hyperplane { normal, offset }
            | PrimitiveSet::Halfspace { normal, offset } => {
                normal.scale(offset / normal.norm_sq())
            }
            PrimitiveSet::Ball { center, .. } => center.clone(),
            PrimitiveSet::Box { lower, upper } => 0.5 * &(lower + upper),
        }
    }
}

fn check_normal(normal: &Point, offset: f64) -> Result<()> {
    if normal.norm_sq() == 0.0 {
        return Err(Error::InvalidSet("normal vector must be nonzero".into()));
    }
    if !offset.is_finite() {
        return Err(Error::InvalidSet(format!("offset {offset} is not finite")));
    }
    Ok(())
}

fn check_dim(expected: usize, x: &Point) -> Result<()> {
    if x.dim() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            found: x.dim(),
        })
    }
}

/// `P_C(x)`.
pub fn project(set: &PrimitiveSet, x: &Point) -> Result<Point> {
    set.project(x)
}

/// Fixed-point set given as an intersection of primitive sets. The empty list
/// stands for the whole space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixSet {
    dim: usize,
    sets: Vec<PrimitiveSet>,
}

impl FixSet {
    pub fn whole_space(dim: usize) -> Self {
        FixSet {
            dim,
            sets: Vec::new(),
        }
    }

    pub fn intersection(dim: usize, sets: Vec<PrimitiveSet>) -> Result<Self> {
        for s in &sets {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.dim(),
                });
            }
        }
        Ok(FixSet { dim, sets })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sets(&self) -> &[PrimitiveSet] {
        &self.sets
    }

    pub fn is_whole_space(&self) -> bool {
        self.sets.is_empty()
    }

    fn meet(&self, other: &FixSet) -> FixSet {
        let mut sets = self.sets.clone();
        for s in &other.sets {
            if !sets.contains(s) {
                sets.push(s.clone());
            }
        }
        FixSet {
            dim: self.dim,
            sets,
        }
    }

    pub fn violation(&self, x: &Point) -> Result<f64> {
        check_dim(self.dim, x)?;
        let mut worst: f64 = 0.0;
        for s in &self.sets {
            worst = worst.max(s.violation(x)?);
        }
        Ok(worst)
    }

    pub fn contains(&self, x: &Point, tol: f64) -> Result<bool> {
        Ok(self.violation(x)? <= tol)
    }

    /// Maps `x` to a point of the set by cyclic projections. The result is a
    /// point of the intersection, not necessarily the nearest one. Fails when
    /// the sweeps do not reach `1e-10` feasibility, which happens for empty
    /// or nearly tangent intersections.
    pub fn pull_in(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim, x)?;
        let mut y = x.clone();
        match self.sets.len() {
            0 => return Ok(y),
            1 => return self.sets[0].project(&y),
            _ => {}
        }
        if self.sets.iter().all(PrimitiveSet::is_affine) {
            return self.project_affine(x);
        }
        for _ in 0..10_000 {
            for s in &self.sets {
                y = s.project(&y)?;
            }
            if self.violation(&y)? <= 1e-12 {
                return Ok(y);
            }
        }
        let violation = self.violation(&y)?;
        if violation <= 1e-10 {
            Ok(y)
        } else {
            Err(Error::NotInSet { violation })
        }
    }

    /// Exact projection onto an intersection of hyperplanes:
    /// `x + Aᵀ (A Aᵀ)⁺ (b − A x)`.
    fn project_affine(&self, x: &Point) -> Result<Point> {
        let m = self.sets.len();
        let n = self.dim;
        let mut a = DMatrix::<f64>::zeros(m, n);
        let mut r = DVector::<f64>::zeros(m);
        for (i, s) in self.sets.iter().enumerate() {
            if let PrimitiveSet::Hyperplane { normal, offset } = s {
                for j in 0..n {
                    a[(i, j)] = normal[j];
                }
                r[i] = offset - normal.inner(x)?;
            }
        }
        let gram = &a * a.transpose();
        let eps = 1e-13 * gram.amax().max(1.0);
        let c = gram
            .svd(true, true)
            .solve(&r, eps)
            .map_err(|e| Error::InvalidSet(e.to_string()))?;
        let step = a.transpose() * c;
        let y = Point::from_raw(x.as_slice().iter().zip(step.iter()).map(|(u, v)| u + v).collect());
        let violation = self.violation(&y)?;
        if violation <= 1e-10 * (1.0 + y.norm()) {
            Ok(y)
        } else {
            Err(Error::NotInSet { violation })
        }
    }
}

/// Operator class claim with its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "class", content = "parameter", rename_all = "snake_case")]
pub enum ClassCertificate {
    Ne,
    Fne,
    Cutter,
    /// λ-relaxation of a firmly nonexpansive operator.
    Rfne(f64),
    /// α-strict pseudocontraction.
    Spc(f64),
    RelaxedCutter(f64),
    Demicontraction(f64),
}

impl ClassCertificate {
    pub fn validate(self) -> Result<Self> {
        match self {
            ClassCertificate::Rfne(l) | ClassCertificate::RelaxedCutter(l) => {
                check_positive("lambda", l)?
            }
            ClassCertificate::Spc(a) | ClassCertificate::Demicontraction(a) => {
                crate::error::check_below_one("alpha", a)?
            }
            _ => {}
        }
        Ok(self)
    }

    /// Pair classes are defined by an inequality over all pairs of points;
    /// the others only constrain points against fixed points.
    pub fn is_pair_class(&self) -> bool {
        matches!(
            self,
            ClassCertificate::Ne
                | ClassCertificate::Fne
                | ClassCertificate::Rfne(_)
                | ClassCertificate::Spc(_)
        )
    }

    /// Relaxation parameter λ such that the operator is λ-RFNE.
    pub fn rfne_lambda(&self) -> Option<f64> {
        match *self {
            ClassCertificate::Fne => Some(1.0),
            ClassCertificate::Ne => Some(2.0),
            ClassCertificate::Rfne(l) => Some(l),
            ClassCertificate::Spc(a) => Some(2.0 / (1.0 - a)),
            _ => None,
        }
    }

    /// Relaxation parameter λ such that the operator is a λ-relaxed cutter
    /// (given a nonempty fixed-point set).
    pub fn relaxed_cutter_lambda(&self) -> Option<f64> {
        match *self {
            ClassCertificate::Cutter => Some(1.0),
            ClassCertificate::RelaxedCutter(l) => Some(l),
            ClassCertificate::Demicontraction(a) => Some(2.0 / (1.0 - a)),
            other => other.rfne_lambda(),
        }
    }

    /// Constant α such that the operator is an α-demicontraction.
    pub fn demicontraction_alpha(&self) -> Option<f64> {
        match *self {
            ClassCertificate::Demicontraction(a) | ClassCertificate::Spc(a) => Some(a),
            other => other.relaxed_cutter_lambda().map(|l| (l - 2.0) / l),
        }
    }

    fn is_alpha_form(&self) -> bool {
        matches!(
            self,
            ClassCertificate::Spc(_) | ClassCertificate::Demicontraction(_)
        )
    }

    /// Certificate of the μ-relaxation.
    pub fn relaxed(&self, mu: f64) -> Result<Self> {
        check_positive("mu", mu)?;
        Ok(match *self {
            ClassCertificate::Fne => ClassCertificate::Rfne(mu),
            ClassCertificate::Ne => ClassCertificate::Rfne(2.0 * mu),
            ClassCertificate::Rfne(l) => ClassCertificate::Rfne(l * mu),
            ClassCertificate::Spc(a) => {
                ClassCertificate::Spc(params::rfne_to_spc(mu * params::spc_to_rfne(a)?)?)
            }
            ClassCertificate::Cutter => ClassCertificate::RelaxedCutter(mu),
            ClassCertificate::RelaxedCutter(l) => ClassCertificate::RelaxedCutter(l * mu),
            ClassCertificate::Demicontraction(a) => {
                ClassCertificate::Demicontraction(params::relax_demicontraction(a, mu)?)
            }
        })
    }
}

impl fmt::Display for ClassCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassCertificate::Ne => write!(f, "NE"),
            ClassCertificate::Fne => write!(f, "FNE"),
            ClassCertificate::Cutter => write!(f, "cutter"),
            ClassCertificate::Rfne(l) => write!(f, "{l}-RFNE"),
            ClassCertificate::Spc(a) => write!(f, "{a}-SPC"),
            ClassCertificate::RelaxedCutter(l) => write!(f, "{l}-relaxed cutter"),
            ClassCertificate::Demicontraction(a) => write!(f, "{a}-demicontraction"),
        }
    }
}

/// Point-dependent relaxation factor.
pub type RelaxationFn = Arc<dyn Fn(&Point) -> Result<f64> + Send + Sync>;
type MapFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;

enum Kind {
    Identity,
    Project(PrimitiveSet),
    Relax {
        inner: OperatorHandle,
        lambda: f64,
    },
    GeneralizedRelax {
        inner: OperatorHandle,
        sigma: RelaxationFn,
    },
    Compose {
        outer: OperatorHandle,
        inner: OperatorHandle,
    },
    Convex {
        ops: Vec<OperatorHandle>,
        weights: Vec<f64>,
    },
    Landweber {
        s: OperatorHandle,
        a: LinearMap,
        inv_norm_sq: f64,
    },
    Custom(MapFn),
}

struct Node {
    kind: Kind,
    dim: usize,
    certificate: Option<ClassCertificate>,
    fix: Option<FixSet>,
    label: String,
}

/// An operator R^n → R^n with an optional class certificate and an optional
/// description of its fixed-point set.
#[derive(Clone)]
pub struct OperatorHandle(Arc<Node>);

impl fmt::Debug for OperatorHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorHandle")
            .field("label", &self.0.label)
            .field("dim", &self.0.dim)
            .field("certificate", &self.0.certificate)
            .finish()
    }
}

impl OperatorHandle {
    fn node(
        kind: Kind,
        dim: usize,
        certificate: Option<ClassCertificate>,
        fix: Option<FixSet>,
        label: String,
    ) -> Self {
        OperatorHandle(Arc::new(Node {
            kind,
            dim,
            certificate,
            fix,
            label,
        }))
    }

    pub fn identity(dim: usize) -> Self {
        Self::node(
            Kind::Identity,
            dim,
            Some(ClassCertificate::Fne),
            Some(FixSet::whole_space(dim)),
            "Id".into(),
        )
    }

    /// Metric projection `P_C`, certified firmly nonexpansive with `Fix = C`.
    pub fn projection(set: PrimitiveSet) -> Self {
        let dim = set.dim();
        let label = match &set {
            PrimitiveSet::Hyperplane { .. } => "P_hyperplane",
            PrimitiveSet::Halfspace { .. } => "P_halfspace",
            PrimitiveSet::Ball { .. } => "P_ball",
            PrimitiveSet::Box { .. } => "P_box",
        };
        let fix = FixSet::intersection(dim, vec![set.clone()]).ok();
        Self::node(
            Kind::Project(set),
            dim,
            Some(ClassCertificate::Fne),
            fix,
            label.into(),
        )
    }

    /// `2 P_C − Id`.
    pub fn reflection(set: PrimitiveSet) -> Self {
        Self::projection(set)
            .relax(2.0)
            .expect("2 is a valid relaxation")
    }

    /// An arbitrary map with no certificate and unknown fixed points.
    pub fn custom<F>(dim: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&Point) -> Point + Send + Sync + 'static,
    {
        Self::node(Kind::Custom(Arc::new(f)), dim, None, None, label.into())
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn certificate(&self) -> Option<ClassCertificate> {
        self.0.certificate
    }

    pub fn fix_set(&self) -> Option<&FixSet> {
        self.0.fix.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.0.label
    }

    /// Rebuilds the handle with a different certificate. Intended for facts
    /// established outside the propagation rules (for example that the
    /// averaged reflection operator is firmly nonexpansive).
    pub fn with_certificate(&self, certificate: Option<ClassCertificate>) -> Result<Self> {
        if let Some(c) = certificate {
            c.validate()?;
        }
        Ok(self.rebuild(certificate, self.0.fix.clone(), self.0.label.clone()))
    }

    pub fn with_fix_set(&self, fix: Option<FixSet>) -> Result<Self> {
        if let Some(f) = &fix {
            if f.dim() != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    found: f.dim(),
                });
            }
        }
        Ok(self.rebuild(self.0.certificate, fix, self.0.label.clone()))
    }

    pub fn with_label(&self, label: impl Into<String>) -> Self {
        self.rebuild(self.0.certificate, self.0.fix.clone(), label.into())
    }

    fn rebuild(
        &self,
        certificate: Option<ClassCertificate>,
        fix: Option<FixSet>,
        label: String,
    ) -> Self {
        // Wrap rather than copy the node so that closures stay shared.
        let inner = self.clone();
        let dim = self.dim();
        Self::node(
            Kind::Relax { inner, lambda: 1.0 },
            dim,
            certificate,
            fix,
            label,
        )
    }

    /// `T_λ = Id + λ(T − Id)`.
    pub fn relax(&self, lambda: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        let certificate = match self.certificate() {
            Some(c) => Some(c.relaxed(lambda)?),
            None => None,
        };
        Ok(Self::node(
            Kind::Relax {
                inner: self.clone(),
                lambda,
            },
            self.dim(),
            certificate,
            self.0.fix.clone(),
            format!("({})_{lambda}", self.label()),
        ))
    }

    /// `x ↦ x + σ(x)(T(x) − x)`. The certificate is dropped; fixed points are
    /// kept.
    pub fn generalized_relax(&self, sigma: RelaxationFn) -> Self {
        Self::node(
            Kind::GeneralizedRelax {
                inner: self.clone(),
                sigma,
            },
            self.dim(),
            None,
            self.0.fix.clone(),
            format!("({})_sigma", self.label()),
        )
    }

    /// `self ∘ inner`, that is `U T` with `U = self` and `T = inner`.
    ///
    /// If both factors are λ- and μ-RFNE (or α-, β-SPC) with `λμ < 4` the result
    /// is ν*-RFNE (SPC when both inputs are in SPC form). Otherwise, if both
    /// carry relaxed-cutter parameters with `λμ < 4`, the result is a
    /// ν*-relaxed cutter (demicontraction when both are in α form); that claim
    /// presumes a common fixed point. The fixed-point set is the intersection
    /// when `λμ < λ + μ`.
    pub fn compose(&self, inner: &OperatorHandle) -> Result<Self> {
        if self.dim() != inner.dim() {
            return Err(Error::DimensionMismatch {
                expected: inner.dim(),
                found: self.dim(),
            });
        }
        let (certificate, fix_ok) = compose_certificate(inner.certificate(), self.certificate())?;
        let fix = match (fix_ok, inner.fix_set(), self.fix_set()) {
            (true, Some(a), Some(b)) => Some(a.meet(b)),
            _ => None,
        };
        Ok(Self::node(
            Kind::Compose {
                outer: self.clone(),
                inner: inner.clone(),
            },
            self.dim(),
            certificate,
            fix,
            format!("{} o {}", self.label(), inner.label()),
        ))
    }

    /// Applies `ops[0]` first, then `ops[1]`, and so on.
    pub fn chain(ops: &[OperatorHandle]) -> Result<Self> {
        let (first, rest) = ops.split_first().ok_or(Error::EmptyOperatorList)?;
        let mut acc = first.clone();
        for op in rest {
            acc = op.compose(&acc)?;
        }
        Ok(acc)
    }

    /// `Σ w_i T_i`.
    pub fn convex_combination(ops: &[OperatorHandle], weights: &[f64]) -> Result<Self> {
        params::check_weights(weights, ops.len())?;
        let dim = ops[0].dim();
        for op in ops {
            if op.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: op.dim(),
                });
            }
        }
        let certs: Option<Vec<ClassCertificate>> = ops.iter().map(|o| o.certificate()).collect();
        let certificate = match certs {
            Some(c) => convex_certificate(&c, weights)?,
            None => None,
        };
        let fix = ops
            .iter()
            .map(|o| o.fix_set())
            .collect::<Option<Vec<_>>>()
            .map(|fs| {
                fs.iter()
                    .skip(1)
                    .fold(fs[0].clone(), |acc, f| acc.meet(f))
            });
        let label = format!(
            "conv({})",
            ops.iter().map(|o| o.label()).collect::<Vec<_>>().join(", ")
        );
        Ok(Self::node(
            Kind::Convex {
                ops: ops.to_vec(),
                weights: weights.to_vec(),
            },
            dim,
            certificate,
            fix,
            label,
        ))
    }

    /// Landweber operator `x ↦ x + A*(S(Ax) − Ax) / ‖A‖²` on the domain of `A`.
    ///
    /// Needs the cached norm of `A`. The demicontraction constant of `S`
    /// carries over, and `Fix = A⁻¹(Fix S)` is recorded when `Fix S` is a
    /// known intersection of hyperplanes, halfspaces and boxes.
    pub fn landweber(s: &OperatorHandle, a: &LinearMap) -> Result<Self> {
        if a.is_zero() {
            return Err(Error::ZeroMap);
        }
        let norm = a.norm().ok_or(Error::MissingNorm)?;
        if s.dim() != a.rows() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                found: s.dim(),
            });
        }
        let certificate = s
            .certificate()
            .and_then(|c| c.demicontraction_alpha())
            .map(ClassCertificate::Demicontraction);
        let fix = s.fix_set().and_then(|f| preimage(f, a));
        Ok(Self::node(
            Kind::Landweber {
                s: s.clone(),
                a: a.clone(),
                inv_norm_sq: 1.0 / (norm * norm),
            },
            a.cols(),
            certificate,
            fix,
            format!("L[{}]", s.label()),
        ))
    }

    /// Evaluates the operator. Deterministic: equal inputs give bit-identical
    /// outputs.
    pub fn eval(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim(), x)?;
        self.eval_unchecked(x)
    }

    fn eval_unchecked(&self, x: &Point) -> Result<Point> {
        match &self.0.kind {
            Kind::Identity => Ok(x.clone()),
            Kind::Project(set) => set.project(x),
            Kind::Relax { inner, lambda } => {
                let tx = inner.eval_unchecked(x)?;
                if *lambda == 1.0 {
                    return Ok(tx);
                }
                x.axpy(*lambda, &(&tx - x))
            }
            Kind::GeneralizedRelax { inner, sigma } => {
                let tx = inner.eval_unchecked(x)?;
                let s = sigma(x)?;
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::InvalidRelaxation {
                        value: s,
                        at: x.clone(),
                    });
                }
                x.axpy(s, &(&tx - x))
            }
            Kind::Compose { outer, inner } => outer.eval_unchecked(&inner.eval_unchecked(x)?),
            Kind::Convex { ops, weights } => {
                let mut acc = vec![0.0; x.dim()];
                for (op, w) in ops.iter().zip(weights) {
                    let y = op.eval_unchecked(x)?;
                    for (a, v) in acc.iter_mut().zip(y.as_slice()) {
                        *a += w * v;
                    }
                }
                Ok(Point::from_raw(acc))
            }
            Kind::Landweber { s, a, inv_norm_sq } => {
                let ax = a.apply(x)?;
                let r = &s.eval_unchecked(&ax)? - &ax;
                x.axpy(*inv_norm_sq, &a.apply_adjoint(&r)?)
            }
            Kind::Custom(f) => {
                let y = f(x);
                check_dim(self.dim(), &y)?;
                Ok(y)
            }
        }
    }

    /// `T(x) − x`.
    pub fn displacement(&self, x: &Point) -> Result<Point> {
        Ok(&self.eval(x)? - x)
    }

    /// `‖T(x) − x‖`.
    pub fn residual(&self, x: &Point) -> Result<f64> {
        Ok(self.displacement(x)?.norm())
    }
}

/// Certificate for `U T` from the certificates of `T` and `U`, plus whether
/// `Fix UT = Fix T ∩ Fix U` is sanctioned.
fn compose_certificate(
    t: Option<ClassCertificate>,
    u: Option<ClassCertificate>,
) -> Result<(Option<ClassCertificate>, bool)> {
    let (Some(t), Some(u)) = (t, u) else {
        return Ok((None, false));
    };
    let alpha_form = t.is_alpha_form() && u.is_alpha_form();
    let (lambda, mu, pair) = match (t.rfne_lambda(), u.rfne_lambda()) {
        (Some(l), Some(m)) => (l, m, true),
        _ => match (t.relaxed_cutter_lambda(), u.relaxed_cutter_lambda()) {
            (Some(l), Some(m)) => (l, m, false),
            _ => return Ok((None, false)),
        },
    };
    let verdict = params::nu_star(lambda, mu)?;
    let certificate = match (verdict.certified, verdict.nu_star) {
        (true, Some(nu)) => Some(match (pair, alpha_form) {
            (true, true) => ClassCertificate::Spc(params::rfne_to_spc(nu)?),
            (true, false) => ClassCertificate::Rfne(nu),
            (false, true) => ClassCertificate::Demicontraction(params::rfne_to_spc(nu)?),
            (false, false) => ClassCertificate::RelaxedCutter(nu),
        }),
        _ => None,
    };
    Ok((certificate, verdict.fix_intersection_ok))
}

fn convex_certificate(
    certs: &[ClassCertificate],
    weights: &[f64],
) -> Result<Option<ClassCertificate>> {
    let alpha_form = certs.iter().all(|c| c.is_alpha_form());
    if let Some(lambdas) = certs
        .iter()
        .map(|c| c.rfne_lambda())
        .collect::<Option<Vec<_>>>()
    {
        return Ok(Some(if alpha_form {
            let alphas: Vec<f64> = certs.iter().filter_map(|c| c.demicontraction_alpha()).collect();
            ClassCertificate::Spc(params::convex_alpha(weights, &alphas)?)
        } else {
            ClassCertificate::Rfne(params::convex_lambda(weights, &lambdas)?)
        }));
    }
    if let Some(lambdas) = certs
        .iter()
        .map(|c| c.relaxed_cutter_lambda())
        .collect::<Option<Vec<_>>>()
    {
        return Ok(Some(if alpha_form {
            let alphas: Vec<f64> = certs.iter().filter_map(|c| c.demicontraction_alpha()).collect();
            ClassCertificate::Demicontraction(params::convex_alpha(weights, &alphas)?)
        } else {
            ClassCertificate::RelaxedCutter(params::convex_lambda(weights, &lambdas)?)
        }));
    }
    Ok(None)
}

/// `{x : Ax ∈ F}` for `F` an intersection of hyperplanes, halfspaces and
/// boxes; `None` when some piece has no linear description or is degenerate.
fn preimage(fix: &FixSet, a: &LinearMap) -> Option<FixSet> {
    let n = a.cols();
    let mut sets = Vec::new();
    let pull = |normal: &Point| a.apply_adjoint(normal).ok();
    for s in fix.sets() {
        match s {
            PrimitiveSet::Hyperplane { normal, offset } => {
                let at = pull(normal)?;
                sets.push(PrimitiveSet::hyperplane(at, *offset).ok()?);
            }
            PrimitiveSet::Halfspace { normal, offset } => {
                let at = pull(normal)?;
                sets.push(PrimitiveSet::halfspace(at, *offset).ok()?);
            }
            PrimitiveSet::Box { lower, upper } => {
                for i in 0..a.rows() {
                    let row = Point::new(a.row(i).to_vec()).ok()?;
                    if row.norm_sq() == 0.0 {
                        if lower[i] <= 0.0 && 0.0 <= upper[i] {
                            continue;
                        }
                        return None;
                    }
                    sets.push(PrimitiveSet::halfspace(row.clone(), upper[i]).ok()?);
                    sets.push(PrimitiveSet::halfspace(-&row, -lower[i]).ok()?);
                }
            }
            PrimitiveSet::Ball { .. } => return None,
        }
    }
    FixSet::intersection(n, sets).ok()
}
