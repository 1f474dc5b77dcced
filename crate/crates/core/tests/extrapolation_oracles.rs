use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fixop::extrapolation::{self, ExtrapolationState};
use fixop::operators::{OperatorHandle, PrimitiveSet};
use fixop::params;
use fixop::Point;

fn p(v: &[f64]) -> Point {
    Point::new(v.to_vec()).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Point {
    let v = (0..dim)
        .map(|_| scale * rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    Point::new(v).unwrap()
}

/// Exact τ*(x, z) for `T = (P_A)_λ`, `U = P_B`, x ∈ B, with `d = z − P_A(z)`.
fn tau1_oracle(a: &Point, b: &Point, d: &Point, lambda: f64) -> f64 {
    let num = (a + b).norm_sq();
    let den = a.norm_sq() / lambda + b.norm_sq() + a.inner(b).unwrap() + lambda * d.norm_sq()
        - 2.0 * b.inner(d).unwrap();
    num / den
}

#[test]
fn ball_affine_matches_exact_tau_and_bounds_it() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // Ball above the line {x₂ = 0} at distance 1: the only fixed point of P_B P_A is 0.
    let ball = PrimitiveSet::ball(p(&[0.0, 2.0]), 1.0).unwrap();
    let line = PrimitiveSet::hyperplane(p(&[0.0, 1.0]), 0.0).unwrap();
    let z = p(&[0.0, 0.0]);
    let d = &z - &ball.project(&z).unwrap();
    for lambda in [1.0, 1.5, 3.0, 3.9] {
        let t = OperatorHandle::projection(ball.clone()).relax(lambda).unwrap();
        let u = OperatorHandle::projection(line.clone());
        assert!(u.eval(&t.eval(&z).unwrap()).unwrap().dist(&z).unwrap() < 1e-15);
        let nu = params::certified_nu_star(lambda, 1.0).unwrap();
        for _ in 0..2000 {
            let x = p(&[rng.random_range(-20.0..20.0), 0.0]);
            if x.norm() < 1e-6 {
                continue;
            }
            let state = ExtrapolationState::at(&t, &u, lambda, 1.0, &x, &z).unwrap();
            let oracle = tau1_oracle(&state.a1, &state.b1, &d, lambda);
            let pair = extrapolation::tau_star_pair(&state).unwrap();
            assert!((pair - oracle.min(nu)).abs() <= 1e-10 * oracle, "{pair} vs {oracle}");
            let bar = extrapolation::tau_ball_affine(&ball, &line, lambda, &x).unwrap();
            assert!(bar.tau_bar >= oracle * (1.0 - 1e-12), "{} < {oracle}", bar.tau_bar);
            assert!(bar.tau_hat <= nu);
        }
    }
}

#[test]
fn tangent_ball_has_zero_gap() {
    let ball = PrimitiveSet::ball(p(&[0.0, 1.0]), 1.0).unwrap();
    let line = PrimitiveSet::hyperplane(p(&[0.0, 1.0]), 0.0).unwrap();
    let t = OperatorHandle::projection(ball.clone()).relax(3.0).unwrap();
    let u = OperatorHandle::projection(line.clone());
    let z = p(&[0.0, 0.0]);
    for x0 in [0.3, 1.0, 2.0, 7.5] {
        let x = p(&[x0, 0.0]);
        let state = ExtrapolationState::at(&t, &u, 3.0, 1.0, &x, &z).unwrap();
        let oracle = tau1_oracle(&state.a1, &state.b1, &p(&[0.0, 0.0]), 3.0);
        let common = extrapolation::tau_star_common(&t, &u, 3.0, 1.0, &x).unwrap();
        assert!((common - oracle.min(4.0)).abs() <= 1e-12 * oracle);
    }
}

#[test]
fn thirty_degree_lines_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let s = 30f64.to_radians();
    let a = PrimitiveSet::hyperplane(p(&[0.0, 1.0]), 0.0).unwrap();
    let b = PrimitiveSet::hyperplane(p(&[-s.sin(), s.cos()]), 0.0).unwrap();
    let z = p(&[0.0, 0.0]);
    for (lambda, mu) in [(1.0, 1.0), (3.0, 1.0), (1.5, 2.0), (0.7, 3.5)] {
        let t = OperatorHandle::projection(a.clone()).relax(lambda).unwrap();
        let u = OperatorHandle::projection(b.clone()).relax(mu).unwrap();
        let nu = params::certified_nu_star(lambda, mu).unwrap();
        for _ in 0..2000 {
            let x = gaussian(&mut rng, 2, 5.0);
            let tau = extrapolation::tau_star_common(&t, &u, lambda, mu, &x).unwrap();
            assert!(tau > 0.0 && tau <= nu);
            assert!(1.0 / tau >= 1.0 / nu);
            // The common-point formula is τ*(x, z) at the intersection point.
            let state = ExtrapolationState::at(&t, &u, lambda, mu, &x, &z).unwrap();
            let pair = extrapolation::tau_star_pair(&state).unwrap();
            assert!((tau - pair).abs() <= 1e-12 * nu);
            // Brute force: the largest admissible τ over a grid never undercuts τ*.
            let utx = u.eval(&t.eval(&x).unwrap()).unwrap();
            let step = &utx - &x;
            let ip = (&z - &x).inner(&step).unwrap();
            let ok = |c: f64| c * ip >= step.norm_sq() - 1e-9;
            assert!(ok(tau), "τ = {tau} fails the cutter inequality at {x:?}");
            let grid_max = (1..=400).map(|i| i as f64 * nu / 400.0).filter(|&c| ok(c)).fold(0.0, f64::max);
            assert!(grid_max + nu / 400.0 >= tau);
        }
    }
}

#[test]
fn common_tau_stays_in_range_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let dim = 3;
        let c = gaussian(&mut rng, dim, 1.0);
        let a = PrimitiveSet::ball(&c + &gaussian(&mut rng, dim, 0.3), 1.0).unwrap();
        let normal = gaussian(&mut rng, dim, 1.0);
        let b = PrimitiveSet::halfspace(normal.clone(), normal.inner(&c).unwrap() + 0.5).unwrap();
        let lambda: f64 = rng.random_range(0.1..3.9);
        let mu = rng.random_range(0.1..(4.0 / lambda).min(3.9));
        if lambda * mu >= 4.0 {
            continue;
        }
        let t = OperatorHandle::projection(a).relax(lambda).unwrap();
        let u = OperatorHandle::projection(b).relax(mu).unwrap();
        let nu = params::certified_nu_star(lambda, mu).unwrap();
        for _ in 0..50 {
            let x = gaussian(&mut rng, dim, 4.0);
            let tau = extrapolation::tau_star_common(&t, &u, lambda, mu, &x).unwrap();
            assert!(tau > 0.0 && tau <= nu);
        }
    }
}
