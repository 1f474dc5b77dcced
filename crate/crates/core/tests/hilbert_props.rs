use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fixop::{LinearMap, Point};

fn point(n: usize) -> impl Strategy<Value = Point> {
    prop::collection::vec(-1e3f64..1e3, n).prop_map(|v| Point::new(v).unwrap())
}

/// Largest singular value by one-sided Jacobi rotations on the columns.
fn jacobi_spectral_norm(rows: &[Vec<f64>]) -> f64 {
    let m = rows.len();
    let n = rows[0].len();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| rows[i][j]).collect()).collect();
    for _sweep in 0..100 {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (cols[p][i], cols[q][i]);
                    cols[p][i] = c * x - s * y;
                    cols[q][i] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    cols.iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

#[test]
fn power_iteration_matches_jacobi_svd() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..5).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let oracle = jacobi_spectral_norm(&rows);
        let mut a = LinearMap::from_rows(&rows).unwrap();
        let est = a.estimate_norm(2000, 0).unwrap();
        assert!((est - oracle).abs() <= 1e-6 * oracle, "{est} vs {oracle}");
        assert_eq!(a.norm(), Some(est));
    }
}

#[test]
fn jacobi_oracle_on_known_matrix() {
    let rows = vec![vec![3.0, 0.0], vec![4.0, 5.0]];
    // Singular values of [[3,0],[4,5]] are 3√5 and √5.
    assert!((jacobi_spectral_norm(&rows) - 3.0 * 5f64.sqrt()).abs() < 1e-12);
    let mut a = LinearMap::from_rows(&rows).unwrap();
    assert!((a.estimate_norm_default().unwrap() - 3.0 * 5f64.sqrt()).abs() < 1e-9);
}

#[test]
fn cached_norm_bounds_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rows: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut a = LinearMap::from_rows(&rows).unwrap();
    let norm = a.estimate_norm(500, 1).unwrap();
    for _ in 0..1000 {
        let x = Point::new((0..6).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap();
        assert!(a.apply(&x).unwrap().norm() <= norm * x.norm() * (1.0 + 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn cauchy_schwarz(x in point(6), y in point(6)) {
        let ip = x.inner(&y).unwrap();
        prop_assert!(ip.abs() <= x.norm() * y.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn parallelogram(x in point(5), y in point(5)) {
        let lhs = (&x + &y).norm_sq() + (&x - &y).norm_sq();
        let rhs = 2.0 * (x.norm_sq() + y.norm_sq());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
    }

    #[test]
    fn adjoint_identity(
        entries in prop::collection::vec(-10.0f64..10.0, 12),
        x in point(4),
        y in point(3),
    ) {
        let rows: Vec<Vec<f64>> = entries.chunks(4).map(|c| c.to_vec()).collect();
        let a = LinearMap::from_rows(&rows).unwrap();
        let lhs = a.apply(&x).unwrap().inner(&y).unwrap();
        let rhs = x.inner(&a.apply_adjoint(&y).unwrap()).unwrap();
        let scale = a.apply(&x).unwrap().norm() * y.norm() + x.norm() * a.apply_adjoint(&y).unwrap().norm();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300));
        prop_assert_eq!(a.transpose().apply(&y).unwrap(), a.apply_adjoint(&y).unwrap());
    }
}

#[test]
fn rejects_bad_points() {
    assert!(Point::new(vec![]).is_err());
    assert!(Point::new(vec![1.0, f64::NAN]).is_err());
    assert!(Point::new(vec![f64::INFINITY]).is_err());
    let x = Point::new(vec![1.0, 2.0]).unwrap();
    let y = Point::new(vec![1.0]).unwrap();
    assert!(x.inner(&y).is_err());
    assert!(x.try_sub(&y).is_err());
}
