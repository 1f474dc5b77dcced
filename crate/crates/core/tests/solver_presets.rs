use fixop::extrapolation;
use fixop::operators::{OperatorHandle, PrimitiveSet};
use fixop::params;
use fixop::solver::{self, EadcStep, Schedule, Sigma, Status, StepRule, StoppingRule};
use fixop::{LinearMap, Point};

fn p(v: &[f64]) -> Point {
    Point::new(v.to_vec()).unwrap()
}

fn h(a: &[f64], b: f64) -> PrimitiveSet {
    PrimitiveSet::hyperplane(p(a), b).unwrap()
}

fn thirty_degrees() -> (PrimitiveSet, PrimitiveSet) {
    let s = 30f64.to_radians();
    (h(&[0.0, 1.0], 0.0), h(&[-s.sin(), s.cos()], 0.0))
}

#[test]
fn dr_on_intersecting_lines_is_fejer_monotone() {
    let (a, b) = thirty_degrees();
    let z = p(&[0.0, 0.0]);
    let dr = solver::preset_dr(&a, &b, StepRule::default()).unwrap();
    let t = dr.run(&StoppingRule::new(1e-10, 1000).unwrap(), &p(&[3.0, 4.0]), Some(&z)).unwrap();
    assert_eq!(t.status, Status::Converged);
    assert!(solver::fejer_check(&t, &z).unwrap() <= 1e-10);
    assert!(t.fejer_violation.unwrap() <= 1e-10);
}

#[test]
fn constant_trace_has_no_fejer_violation() {
    let t = solver::iterate(
        &OperatorHandle::identity(2),
        &StepRule::default(),
        &StoppingRule::new(1e-12, 10).unwrap(),
        &p(&[1.0, 1.0]),
        None,
    )
    .unwrap();
    assert_eq!(solver::fejer_check(&t, &p(&[0.0, 0.0])).unwrap(), 0.0);
}

#[test]
fn broken_schedule_is_reported() {
    assert!(StepRule::new(Schedule::Constant(3.0), 0.05).is_err());
    let (a, _) = thirty_degrees();
    let z = p(&[0.0, 0.0]);
    let v = OperatorHandle::projection(a);
    let rule = StepRule::unvalidated(Schedule::Constant(3.0));
    let t = solver::iterate(&v, &rule, &StoppingRule::new(1e-10, 50).unwrap(), &p(&[1.0, 1.0]), Some(&z)).unwrap();
    assert!(solver::fejer_check(&t, &z).unwrap() > 0.1);
    assert_eq!(t.status, Status::Diverged);
}

#[test]
fn parallel_lines_keep_dr_residual_at_gap() {
    let a = h(&[0.0, 1.0], 0.0);
    let b = h(&[0.0, 1.0], 2.0);
    let dr = solver::preset_dr(&a, &b, StepRule::default()).unwrap();
    let t = dr.run(&StoppingRule::new(1e-10, 200).unwrap(), &p(&[0.3, 0.7]), None).unwrap();
    assert_eq!(t.status, Status::MaxIters);
    // The residual equals the gap between the lines at every iterate.
    for row in &t.rows {
        assert!((row.residual - 2.0).abs() < 1e-12);
    }
}

#[test]
fn squared_residuals_are_summable_for_sqne_composition() {
    let (lambda, mu) = (1.5, 1.2);
    let alpha = params::rfne_to_spc(lambda).unwrap();
    let beta = params::rfne_to_spc(mu).unwrap();
    let rho = -params::gamma_star(alpha, beta).unwrap();
    assert!(rho > 0.0);
    let (a, _) = thirty_degrees();
    let b = PrimitiveSet::ball(p(&[0.0, 0.5]), 1.0).unwrap();
    let t = OperatorHandle::projection(a).relax(lambda).unwrap();
    let u = OperatorHandle::projection(b).relax(mu).unwrap();
    let v = u.compose(&t).unwrap();
    let z = p(&[0.0, 0.0]);
    let x0 = p(&[7.0, -3.0]);
    let trace = solver::iterate(&v, &StepRule::default(), &StoppingRule::new(1e-12, 5000).unwrap(), &x0, Some(&z)).unwrap();
    assert_eq!(trace.status, Status::Converged);
    let sum: f64 = trace.rows.iter().map(|r| r.residual * r.residual).sum();
    let bound = x0.dist(&z).unwrap().powi(2) / rho;
    assert!(sum <= bound * (1.0 + 1e-12), "{sum} > {bound}");
}

#[test]
fn raspc_with_sum_four_converges_on_intersecting_lines() {
    let (a, b) = thirty_degrees();
    for lambda in [1.0, 1.5, 3.0] {
        let mu = 4.0 - lambda;
        if lambda * mu >= 4.0 {
            continue;
        }
        let preset = solver::preset_raspc(&a, &b, lambda, mu, StepRule::default()).unwrap();
        let t = preset.run(&StoppingRule::new(1e-10, 5000).unwrap(), &p(&[4.0, 2.0]), None).unwrap();
        assert_eq!(t.status, Status::Converged, "λ = {lambda}");
        assert!(t.final_point().unwrap().norm() < 1e-8);
    }
}

#[test]
fn eadc_iterates_satisfy_cutter_inequality_and_step_bounds() {
    let (a, b) = thirty_degrees();
    let z = p(&[0.0, 0.0]);
    for (lambda, mu) in [(3.0, 1.0), (1.0, 1.0), (1.5, 2.0)] {
        let nu = params::certified_nu_star(lambda, mu).unwrap();
        let preset = solver::preset_eadc(&a, &b, lambda, mu, EadcStep::Common, StepRule::default()).unwrap();
        let (t, u) = preset.factors.clone().unwrap();
        let trace = preset.run(&StoppingRule::new(1e-10, 2000).unwrap(), &p(&[5.0, 3.0]), Some(&z)).unwrap();
        assert_eq!(trace.status, Status::Converged);
        for row in &trace.rows {
            assert!(row.step >= 1.0 / nu * (1.0 - 1e-15));
            let tau = extrapolation::tau_star_common(&t, &u, lambda, mu, &row.x).unwrap();
            let d = preset.v_base.displacement(&row.x).unwrap();
            let lhs = tau * (&z - &row.x).inner(&d).unwrap();
            assert!(lhs >= d.norm_sq() - 1e-9);
        }
        let raspc = solver::preset_raspc(&a, &b, lambda, mu, StepRule::default()).unwrap();
        let r = raspc.run(&StoppingRule::new(1e-10, 2000).unwrap(), &p(&[5.0, 3.0]), Some(&z)).unwrap();
        assert!(trace.iterations() <= r.iterations(), "({lambda}, {mu})");
    }
}

#[test]
fn eadc_ball_affine_converges_to_tangency_point() {
    let ball = PrimitiveSet::ball(p(&[0.0, 1.0]), 1.0).unwrap();
    let line = h(&[0.0, 1.0], 0.0);
    let z = p(&[0.0, 0.0]);
    let preset = solver::preset_eadc(&ball, &line, 3.0, 1.0, EadcStep::BallAffine, StepRule::default()).unwrap();
    let t = preset.run(&StoppingRule::new(1e-14, 10_000).unwrap(), &p(&[2.0, 0.0]), Some(&z)).unwrap();
    // On B the quotient collapses to λ, so this is the plain (UT)_{1/λ} step:
    // the iterates approach the tangency point, but only sublinearly.
    for row in &t.rows {
        assert!((row.step - 1.0 / 3.0).abs() < 1e-9);
    }
    let dists: Vec<f64> = t.rows.iter().map(|r| r.dist_to_ref.unwrap()).collect();
    assert!(dists.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(*dists.last().unwrap() < 0.02);
    let common = solver::preset_eadc(&ball, &line, 3.0, 1.0, EadcStep::Common, StepRule::default()).unwrap();
    let c = common.run(&StoppingRule::new(1e-14, 10_000).unwrap(), &p(&[2.0, 0.0]), Some(&z)).unwrap();
    assert!(c.first_within(1e-3).unwrap() < 50);
    assert!(solver::preset_eadc(&ball, &line, 3.0, 1.2, EadcStep::BallAffine, StepRule::default()).is_err());
}

#[test]
fn moudafi_limit_is_feasible() {
    let c = PrimitiveSet::cube(p(&[0.0, 0.0]), p(&[2.0, 2.0])).unwrap();
    let q = PrimitiveSet::cube(p(&[1.0, 1.0]), p(&[3.0, 3.0])).unwrap();
    let mut a = LinearMap::diagonal(&[1.0, 2.0]).unwrap();
    a.estimate_norm_default().unwrap();
    let preset = solver::preset_moudafi(
        &OperatorHandle::projection(q.clone()),
        &OperatorHandle::projection(c.clone()),
        &a,
        1.5,
        1.0,
        StepRule::default(),
    )
    .unwrap();
    let t = preset.run(&StoppingRule::new(1e-8, 500).unwrap(), &p(&[-6.0, 9.0]), None).unwrap();
    assert_eq!(t.status, Status::Converged);
    let x = t.final_point().unwrap();
    assert!(c.violation(x).unwrap() <= 1e-6);
    assert!(q.violation(&a.apply(x).unwrap()).unwrap() <= 1e-6);
}

#[test]
fn moudafi_constants_examples() {
    // γ + δ = γδ = 0 is not strict.
    assert!(solver::moudafi_constants(0.0, 0.0, 1.0, 1.0).is_err());
    let k = solver::moudafi_constants(-1.0, -1.0, 1.0, 1.0).unwrap();
    assert!((k.tau - 2.0 * (-2.0) / (-2.0 - 1.0)).abs() < 1e-15);
}

#[test]
fn stall_detection_stops_slow_runs() {
    let a = h(&[0.0, 1.0], 0.0);
    let b = h(&[0.0, 1.0], 2.0);
    let dr = solver::preset_dr(&a, &b, StepRule::default()).unwrap();
    let stop = StoppingRule::new(1e-10, 1000).unwrap().with_stall(10, 1e-6).unwrap();
    let t = dr.run(&stop, &p(&[0.0, 0.0]), None).unwrap();
    assert_eq!(t.status, Status::Stalled);
}

#[test]
fn csv_and_json_are_stable() {
    let (a, b) = thirty_degrees();
    let preset = solver::preset_raspc(&a, &b, 3.0, 1.0, StepRule::default()).unwrap();
    let stop = StoppingRule::new(1e-8, 500).unwrap();
    let z = p(&[0.0, 0.0]);
    let t1 = preset.run(&stop, &p(&[5.0, 3.0]), Some(&z)).unwrap();
    let t2 = preset.run(&stop, &p(&[5.0, 3.0]), Some(&z)).unwrap();
    let csv = t1.to_csv();
    assert_eq!(csv, t2.to_csv());
    assert!(csv.starts_with("k,residual,step,dist_to_ref,x_0,x_1\n"));
    assert_eq!(csv.lines().count(), t1.rows.len() + 1);
    let cfg = serde_json::json!({"method": "raspc"});
    let json: serde_json::Value = serde_json::from_str(&t1.to_json(&cfg)).unwrap();
    assert_eq!(json["status"], "Converged");
    assert_eq!(json["config"]["method"], "raspc");
}

#[test]
fn sigma_must_be_positive() {
    let rule = StepRule::default().with_sigma(Sigma::Constant(-1.0));
    assert!(rule.step(0, &p(&[0.0])).is_err());
}
