//! Sampling checks of the class inequalities and the explicit constructions
//! showing where the composition rules stop holding.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_positive, Error, Result};
use crate::hilbert::Point;
use crate::operators::{ClassCertificate, OperatorHandle, PrimitiveSet, RelaxationFn};
use crate::params;
use crate::solver::{iterate, Status, StepRule, StoppingRule};

/// Absolute tolerance on inequality slack.
pub const TOL: f64 = 1e-9;
pub const DEFAULT_RADII: [f64; 3] = [0.1, 1.0, 10.0];
const MAX_WITNESSES: usize = 5;

/// Inequality to check.
#[derive(Clone)]
pub enum Property {
    Class(ClassCertificate),
    /// `τ(x)⟨z − x, T(x) − x⟩ ≥ ‖T(x) − x‖²` with a point-dependent τ.
    GeneralizedRelaxedCutter(RelaxationFn),
}

impl Property {
    fn needs_fix_points(&self) -> bool {
        match self {
            Property::Class(c) => !c.is_pair_class(),
            Property::GeneralizedRelaxedCutter(_) => true,
        }
    }
}

impl From<ClassCertificate> for Property {
    fn from(c: ClassCertificate) -> Self {
        Property::Class(c)
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Property::Class(c) => write!(f, "{c}"),
            Property::GeneralizedRelaxedCutter(_) => write!(f, "generalized relaxed cutter"),
        }
    }
}

impl fmt::Debug for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Property({self})")
    }
}

/// Slack of the defining inequality; negative means violated.
///
/// `other` is the second point for pair classes and the fixed point for the
/// others.
pub fn slack(op: &OperatorHandle, property: &Property, x: &Point, other: &Point) -> Result<f64> {
    let tx = op.eval(x)?;
    let a = &tx - x;
    Ok(match property {
        Property::Class(c) if c.is_pair_class() => {
            let y = other;
            let ty = op.eval(y)?;
            let d = x - y;
            let e = &tx - &ty;
            let r = &a - &(&ty - y);
            match *c {
                ClassCertificate::Ne => d.norm_sq() - e.norm_sq(),
                ClassCertificate::Fne => e.inner(&d)? - e.norm_sq(),
                ClassCertificate::Rfne(l) => (-&d).inner(&r)? - r.norm_sq() / l,
                ClassCertificate::Spc(alpha) => d.norm_sq() + alpha * r.norm_sq() - e.norm_sq(),
                _ => unreachable!("pair classes only"),
            }
        }
        Property::Class(c) => {
            let z = other;
            let zx = z - x;
            match *c {
                ClassCertificate::Cutter => zx.inner(&a)? - a.norm_sq(),
                ClassCertificate::RelaxedCutter(l) => l * zx.inner(&a)? - a.norm_sq(),
                ClassCertificate::Demicontraction(alpha) => {
                    zx.norm_sq() + alpha * a.norm_sq() - (&tx - z).norm_sq()
                }
                _ => unreachable!("fixed-point classes only"),
            }
        }
        Property::GeneralizedRelaxedCutter(tau) => {
            let zx = other - x;
            tau(x)? * zx.inner(&a)? - a.norm_sq()
        }
    })
}

/// Gaussian sampler: `center + r·N(0, I)` with the center and radius drawn
/// uniformly from the configured lists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sampler {
    dim: usize,
    centers: Vec<Point>,
    radii: Vec<f64>,
}

impl Sampler {
    pub fn new(centers: Vec<Point>, radii: Vec<f64>) -> Result<Self> {
        let dim = centers.first().ok_or(Error::EmptyPoint)?.dim();
        for c in &centers {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.dim(),
                });
            }
        }
        if radii.is_empty() {
            return Err(Error::InvalidParameter {
                name: "radii",
                value: 0.0,
                reason: "need at least one radius",
            });
        }
        for &r in &radii {
            check_positive("radius", r)?;
        }
        Ok(Sampler {
            dim,
            centers,
            radii,
        })
    }

    /// Centered at the origin with the default radii.
    pub fn origin(dim: usize) -> Self {
        Self::new(vec![Point::zeros(dim)], DEFAULT_RADII.to_vec()).expect("valid")
    }

    /// Centered at the origin and at features of the sets: anchors, ball
    /// boundary points and box corners.
    pub fn around_sets(sets: &[PrimitiveSet]) -> Result<Self> {
        let dim = sets.first().ok_or(Error::EmptyOperatorList)?.dim();
        let mut centers = vec![Point::zeros(dim)];
        for s in sets {
            centers.push(s.anchor());
            match s {
                PrimitiveSet::Ball { center, radius } => {
                    centers.push(center.axpy(*radius, &Point::basis(dim, 0))?);
                }
                PrimitiveSet::Box { lower, upper } => {
                    centers.push(lower.clone());
                    centers.push(upper.clone());
                }
                _ => {}
            }
        }
        Self::new(centers, DEFAULT_RADII.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Point {
        let c = &self.centers[rng.random_range(0..self.centers.len())];
        let r = self.radii[rng.random_range(0..self.radii.len())];
        let v: Vec<f64> = c
            .as_slice()
            .iter()
            .map(|ci| ci + r * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Point::from_raw(v)
    }

    /// A second point: independent half of the time, otherwise a Gaussian
    /// perturbation of `x`.
    fn sample_partner(&self, x: &Point, rng: &mut impl Rng) -> Point {
        if rng.random_bool(0.5) {
            self.sample(rng)
        } else {
            let r = self.radii[rng.random_range(0..self.radii.len())];
            let v: Vec<f64> = x
                .as_slice()
                .iter()
                .map(|xi| xi + r * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Point::from_raw(v)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    PassedSampling,
    ViolationFound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub index: usize,
    pub x: Point,
    /// Second point (pair classes) or fixed point.
    pub other: Point,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub property: String,
    pub samples: usize,
    pub worst_slack: f64,
    pub tolerance: f64,
    /// The samples with the smallest slack, worst first.
    pub witnesses: Vec<Witness>,
    pub verdict: Verdict,
}

/// Evaluates the inequality of `property` on `n` seeded samples.
///
/// Samples are drawn sequentially from a ChaCha stream and evaluated in
/// parallel; the reduction orders by slack and then by sample index, so the
/// report does not depend on the number of threads.
pub fn check_class(
    op: &OperatorHandle,
    property: &Property,
    sampler: &Sampler,
    fix_points: &[Point],
    n: usize,
    seed: u64,
) -> Result<CheckReport> {
    if sampler.dim() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: sampler.dim(),
        });
    }
    let fixed = property.needs_fix_points();
    if fixed && fix_points.is_empty() {
        return Err(Error::MissingFixPoints);
    }
    for z in fix_points {
        if z.dim() != op.dim() {
            return Err(Error::DimensionMismatch {
                expected: op.dim(),
                found: z.dim(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<(Point, Point)> = (0..n)
        .map(|_| {
            let x = sampler.sample(&mut rng);
            let other = if fixed {
                fix_points[rng.random_range(0..fix_points.len())].clone()
            } else {
                sampler.sample_partner(&x, &mut rng)
            };
            (x, other)
        })
        .collect();
    let slacks: Vec<f64> = samples
        .par_iter()
        .map(|(x, o)| slack(op, property, x, o))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| slacks[i].total_cmp(&slacks[j]).then(i.cmp(&j)));
    let witnesses: Vec<Witness> = order
        .iter()
        .take(MAX_WITNESSES)
        .map(|&i| Witness {
            index: i,
            x: samples[i].0.clone(),
            other: samples[i].1.clone(),
            slack: slacks[i],
        })
        .collect();
    let worst_slack = witnesses.first().map_or(f64::INFINITY, |w| w.slack);
    Ok(CheckReport {
        property: property.to_string(),
        samples: n,
        worst_slack,
        tolerance: TOL,
        witnesses,
        verdict: if worst_slack < -TOL {
            Verdict::ViolationFound
        } else {
            Verdict::PassedSampling
        },
    })
}

fn check_optimality_range(lambda: f64, mu: f64) -> Result<(f64, f64)> {
    let nu = params::certified_nu_star(lambda, mu)?;
    let c = lambda + mu - lambda * mu;
    if c <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "lambda + mu - lambda * mu",
            value: c,
            reason: "must be positive",
        });
    }
    Ok((nu, c))
}

/// `h(ρ) = −μ²/(4c) · [ρ(2 − λ) − 2c]² / (ρ − c) + μρ − μ²`, `c = λ + μ − λμ`:
/// the limit of the ρ-relaxed-cutter slack along the sharpness construction.
pub fn optimality_h(lambda: f64, mu: f64, rho: f64) -> Result<f64> {
    let (nu, c) = check_optimality_range(lambda, mu)?;
    if !(rho > c && rho <= nu) {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: rho,
            reason: "must lie in (lambda + mu - lambda * mu, nu*]",
        });
    }
    let q = rho * (2.0 - lambda) - 2.0 * c;
    Ok(-mu * mu / (4.0 * c) * q * q / (rho - c) + mu * rho - mu * mu)
}

/// `ξ*(ρ) = −[ρ(2 − λ) − 2c] μ / (2c(ρ − c))`.
pub fn optimal_xi(lambda: f64, mu: f64, rho: f64) -> f64 {
    let c = lambda + mu - lambda * mu;
    -(rho * (2.0 - lambda) - 2.0 * c) * mu / (2.0 * c * (rho - c))
}

/// The pair `T = (P_H)_λ`, `U_k = (P_{H_k})_μ` in R² with
/// `H = {x₂ = 0}`, `H_k = {x₁ − k x₂ = k}`, and the common fixed point
/// `z_k = (k, 0)`.
pub fn sharpness_pair(lambda: f64, mu: f64, k: f64) -> Result<(OperatorHandle, OperatorHandle, Point)> {
    let h = PrimitiveSet::hyperplane(Point::new(vec![0.0, 1.0])?, 0.0)?;
    let hk = PrimitiveSet::hyperplane(Point::new(vec![1.0, -k])?, k)?;
    let t = OperatorHandle::projection(h).relax(lambda)?;
    let u = OperatorHandle::projection(hk).relax(mu)?;
    Ok((t, u, Point::new(vec![k, 0.0])?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharpnessWitness {
    pub k: u64,
    pub x: Point,
    pub z: Point,
    /// `ρ⟨z_k − x, U_k T x − x⟩ − ‖U_k T x − x‖²`.
    pub slack: f64,
    /// Limiting slack `h(ρ)`.
    pub h: f64,
}

const K_MAX: u64 = 1_000_000;

/// Smallest `k = 2^j ≤ 10^6` for which `U_k T` violates the ρ-relaxed-cutter
/// inequality at `x = (0, ξ*(ρ))`, showing that `ρ < ν*` is not enough.
pub fn sharpness_witness(lambda: f64, mu: f64, rho: f64) -> Result<SharpnessWitness> {
    let (nu, _) = check_optimality_range(lambda, mu)?;
    if rho >= nu {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: rho,
            reason: "must be below nu*",
        });
    }
    let h = optimality_h(lambda, mu, rho)?;
    let x = Point::new(vec![0.0, optimal_xi(lambda, mu, rho)])?;
    let property = Property::Class(ClassCertificate::RelaxedCutter(rho));
    let mut k: u64 = 1;
    while k <= K_MAX {
        let (t, u, z) = sharpness_pair(lambda, mu, k as f64)?;
        let s = slack(&u.compose(&t)?, &property, &x, &z)?;
        if s < 0.0 {
            return Ok(SharpnessWitness {
                k,
                x,
                z,
                slack: s,
                h,
            });
        }
        k *= 2;
    }
    Err(Error::NoWitness { k_max: K_MAX, h })
}

#[derive(Debug, Clone, Serialize)]
pub struct FixCollapse {
    #[serde(skip)]
    pub t: OperatorHandle,
    #[serde(skip)]
    pub u: OperatorHandle,
    pub sigma: f64,
    /// `λ + σμ − λσμ`, zero by construction.
    pub coefficient: f64,
    /// Largest `‖UT(x) − x‖` over the samples.
    pub max_deviation: f64,
    pub samples: usize,
    /// `Fix T ∩ Fix U`.
    pub hyperplane: PrimitiveSet,
}

/// For `λ + μ ≤ λμ`: `T = (P_H)_λ` and `U = (P_H)_{σμ}` with
/// `σ = λ/(μ(λ − 1))` compose to the identity, although both have `Fix = H`.
pub fn fix_collapse_witness(lambda: f64, mu: f64, samples: usize, seed: u64) -> Result<FixCollapse> {
    check_positive("lambda", lambda)?;
    check_positive("mu", mu)?;
    if lambda + mu > lambda * mu {
        return Err(Error::InvalidParameter {
            name: "lambda, mu",
            value: lambda + mu - lambda * mu,
            reason: "need lambda + mu <= lambda * mu",
        });
    }
    let sigma = lambda / (mu * (lambda - 1.0));
    let sm = sigma * mu;
    let h = PrimitiveSet::hyperplane(Point::new(vec![0.0, 1.0])?, 0.0)?;
    let t = OperatorHandle::projection(h.clone()).relax(lambda)?;
    let u = OperatorHandle::projection(h.clone()).relax(sm)?;
    let ut = u.compose(&t)?;
    let sampler = Sampler::origin(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_deviation: f64 = 0.0;
    for _ in 0..samples {
        let x = sampler.sample(&mut rng);
        max_deviation = max_deviation.max(ut.residual(&x)?);
    }
    Ok(FixCollapse {
        t,
        u,
        sigma,
        coefficient: lambda + sm - lambda * sm,
        max_deviation,
        samples,
        hyperplane: h,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutterViolation {
    /// Index of the `H_k` family member; `None` for the same-hyperplane case.
    pub k: Option<u64>,
    pub x: Point,
    pub z: Point,
    /// `⟨z − x, UT(x) − x⟩`, negative.
    pub inner: f64,
}

/// For `λμ > 4`, a λ-RFNE `T` and μ-RFNE `U` with a common fixed point `z`
/// and a point `x` where `⟨z − x, UT(x) − x⟩ < 0`, so `UT` is no relaxed
/// cutter.
///
/// With `λμ > λ + μ` both operators relax the projection onto one hyperplane.
/// With `4 < λμ ≤ λ + μ` the `H_k` family is scanned over `k = 2^j ≤ 10^6`.
pub fn not_relaxed_cutter_witness(lambda: f64, mu: f64) -> Result<CutterViolation> {
    check_positive("lambda", lambda)?;
    check_positive("mu", mu)?;
    let prod = lambda * mu;
    if prod <= 4.0 {
        return Err(Error::InvalidParameter {
            name: "lambda * mu",
            value: prod,
            reason: "must exceed 4",
        });
    }
    let c = lambda + mu - prod;
    if c < 0.0 {
        let h = PrimitiveSet::hyperplane(Point::new(vec![0.0, 1.0])?, 0.0)?;
        let t = OperatorHandle::projection(h.clone()).relax(lambda)?;
        let u = OperatorHandle::projection(h).relax(mu)?;
        let x = Point::new(vec![0.0, 1.0])?;
        let z = Point::zeros(2);
        let inner = (&z - &x).inner(&u.compose(&t)?.displacement(&x)?)?;
        return Ok(CutterViolation {
            k: None,
            x,
            z,
            inner,
        });
    }
    let xi = if c == 0.0 {
        2.0 / (lambda - 2.0)
    } else {
        (lambda - 2.0) * mu / (2.0 * c)
    };
    let x = Point::new(vec![0.0, xi])?;
    let mut k: u64 = 1;
    while k <= K_MAX {
        let (t, u, z) = sharpness_pair(lambda, mu, k as f64)?;
        let inner = (&z - &x).inner(&u.compose(&t)?.displacement(&x)?)?;
        if inner < 0.0 {
            return Ok(CutterViolation {
                k: Some(k),
                x,
                z,
                inner,
            });
        }
        k *= 2;
    }
    let limit = c * xi * xi + (2.0 - lambda) * mu * xi + mu;
    Err(Error::NoWitness {
        k_max: K_MAX,
        h: limit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixVReport {
    pub lambda: f64,
    pub mu: f64,
    pub sum_equals_product: bool,
    pub sets_intersect: bool,
    /// A fixed point of `V = (P_B)_μ (P_A)_λ` from solving the affine system.
    pub fixed_point: Option<Point>,
    /// Status and residuals of the averaged iteration `x + ½(V(x) − x)`.
    pub iteration_status: Status,
    pub iterations: usize,
    pub first_residual: f64,
    pub last_residual: f64,
    pub max_residual_spread: f64,
    /// Distance of `P_A(x̂)` to `A ∩ B` for the iteration limit `x̂`.
    pub projection_violation: Option<f64>,
    /// The closed-form point for disjoint hyperplanes with `λ + μ ≠ λμ`.
    pub constructed_point: Option<Point>,
    pub constructed_residual: Option<f64>,
}

fn hyperplane_parts(s: &PrimitiveSet) -> Result<(&Point, f64)> {
    match s {
        PrimitiveSet::Hyperplane { normal, offset } => Ok((normal, *offset)),
        _ => Err(Error::Unsupported(
            "fixed-point characterization needs two hyperplanes".into(),
        )),
    }
}

/// Whether two hyperplanes meet.
pub fn hyperplanes_intersect(a: &PrimitiveSet, b: &PrimitiveSet) -> Result<bool> {
    let (na, oa) = hyperplane_parts(a)?;
    let (nb, ob) = hyperplane_parts(b)?;
    let cos = na.inner(nb)? / (na.norm() * nb.norm());
    if (cos.abs() - 1.0).abs() > 1e-12 {
        return Ok(true);
    }
    let da = oa / na.norm();
    let db = ob / nb.norm() * cos.signum();
    Ok((da - db).abs() <= 1e-12 * (1.0 + da.abs()))
}

/// Fixed point of an affine operator by solving `(I − M) x = V(0)` with an
/// SVD; `None` when the system is inconsistent.
pub fn affine_fixed_point(v: &OperatorHandle) -> Result<Option<Point>> {
    let n = v.dim();
    let v0 = v.eval(&Point::zeros(n))?;
    let mut m = DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        let col = &v.eval(&Point::basis(n, j))? - &v0;
        for i in 0..n {
            m[(i, j)] -= col[i];
        }
    }
    let rhs = DVector::from_column_slice(v0.as_slice());
    let svd = m.svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Unsupported(e.to_string()))?;
    let x = Point::new(sol.iter().copied().collect())?;
    let r = v.residual(&x)?;
    Ok((r <= 1e-9 * (1.0 + x.norm())).then_some(x))
}

/// Fixed points of `V = (P_B)_μ (P_A)_λ` for two hyperplanes.
pub fn fixv_characterization(
    a: &PrimitiveSet,
    b: &PrimitiveSet,
    lambda: f64,
    mu: f64,
    iterations: usize,
) -> Result<FixVReport> {
    check_positive("lambda", lambda)?;
    check_positive("mu", mu)?;
    let sets_intersect = hyperplanes_intersect(a, b)?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let t = OperatorHandle::projection(a.clone()).relax(lambda)?;
    let u = OperatorHandle::projection(b.clone()).relax(mu)?;
    let v = u.compose(&t)?;
    let fixed_point = affine_fixed_point(&v)?;

    let x0 = a.anchor();
    let stop = StoppingRule::new(1e-12, iterations)?;
    let trace = iterate(&v.relax(0.5)?, &StepRule::default(), &stop, &x0, None)?;
    let residuals: Vec<f64> = trace.rows.iter().map(|r| r.residual).collect();
    let first_residual = residuals[0];
    let last_residual = *residuals.last().expect("nonempty trace");
    let lo = residuals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let projection_violation = if sets_intersect && trace.status == Status::Converged {
        let pa = a.project(trace.final_point().expect("nonempty trace"))?;
        Some(a.violation(&pa)?.max(b.violation(&pa)?))
    } else {
        None
    };

    let sum_equals_product = lambda + mu == lambda * mu;
    let (constructed_point, constructed_residual) = if !sum_equals_product && !sets_intersect {
        let pa = a.anchor();
        let pb = b.project(&pa)?;
        let c = lambda + mu - lambda * mu;
        let x = (lambda - lambda * mu) * &pa;
        let x = x.axpy(mu, &pb)?.scale(1.0 / c);
        let r = v.residual(&x)?;
        (Some(x), Some(r))
    } else {
        (None, None)
    };

    Ok(FixVReport {
        lambda,
        mu,
        sum_equals_product,
        sets_intersect,
        fixed_point,
        iteration_status: trace.status,
        iterations: trace.iterations(),
        first_residual,
        last_residual,
        max_residual_spread: hi - lo,
        projection_violation,
        constructed_point,
        constructed_residual,
    })
}
