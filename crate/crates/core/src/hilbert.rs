//! Finite-dimensional real inner-product space primitives.
//!
//! [`Point`] is a dense vector in R^n with every coordinate finite. [`LinearMap`]
//! is a dense row-major matrix with an adjoint and a cached spectral-norm
//! estimate obtained by power iteration.

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of R^n.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyPoint);
        }
        if let Some((index, &value)) = coords.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Point(coords))
    }

    /// Builds a point without validating finiteness. Used internally by
    /// iteration code that detects divergence itself.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty());
        Point(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Point(vec![0.0; dim])
    }

    /// The `i`-th standard basis vector of R^dim.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut p = Self::zeros(dim);
        p.0[i] = 1.0;
        p
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn inner(&self, other: &Point) -> Result<f64> {
        same_dim(self, other)?;
        Ok(dot(&self.0, &other.0))
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &Point) -> Result<f64> {
        same_dim(self, other)?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// `self + t * dir`.
    pub fn axpy(&self, t: f64, dir: &Point) -> Result<Point> {
        same_dim(self, dir)?;
        Ok(Point(
            self.0.iter().zip(&dir.0).map(|(x, d)| x + t * d).collect(),
        ))
    }

    pub fn scale(&self, t: f64) -> Point {
        Point(self.0.iter().map(|x| t * x).collect())
    }

    pub fn try_sub(&self, other: &Point) -> Result<Point> {
        same_dim(self, other)?;
        Ok(self - other)
    }

    pub fn try_add(&self, other: &Point) -> Result<Point> {
        same_dim(self, other)?;
        Ok(self + other)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Inner product ⟨x, y⟩.
pub fn inner(x: &Point, y: &Point) -> Result<f64> {
    x.inner(y)
}

pub(crate) fn same_dim(x: &Point, y: &Point) -> Result<()> {
    if x.dim() == y.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

// The operator impls panic on dimension mismatch; use the `try_*` methods when
// dimensions are not already known to agree.
impl Add for &Point {
    type Output = Point;
    fn add(self, rhs: &Point) -> Point {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        Point(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Point {
    type Output = Point;
    fn sub(self, rhs: &Point) -> Point {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        Point(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<&Point> for f64 {
    type Output = Point;
    fn mul(self, rhs: &Point) -> Point {
        rhs.scale(self)
    }
}

impl Neg for &Point {
    type Output = Point;
    fn neg(self) -> Point {
        self.scale(-1.0)
    }
}

/// Dense real matrix acting as a map R^cols → R^rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    cached_norm: Option<f64>,
}

impl LinearMap {
    /// Builds a map from its rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        if nrows == 0 || rows[0].is_empty() {
            return Err(Error::EmptyPoint);
        }
        let ncols = rows[0].len();
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in rows {
            if row.len() != ncols {
                return Err(Error::DimensionMismatch {
                    expected: ncols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(LinearMap {
            rows: nrows,
            cols: ncols,
            data,
            cached_norm: None,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n]).expect("identity is valid")
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r = vec![0.0; n];
                r[i] = diag[i];
                r
            })
            .collect();
        Self::from_rows(&rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// `A x`.
    pub fn apply(&self, x: &Point) -> Result<Point> {
        if x.dim() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: x.dim(),
            });
        }
        Ok(Point::from_raw(
            (0..self.rows).map(|i| dot(self.row(i), x.as_slice())).collect(),
        ))
    }

    /// `A* y`, the adjoint (transpose) applied to `y`.
    pub fn apply_adjoint(&self, y: &Point) -> Result<Point> {
        if y.dim() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: y.dim(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let yi = y[i];
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        Ok(Point::from_raw(out))
    }

    pub fn transpose(&self) -> LinearMap {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.entry(i, j));
            }
        }
        LinearMap {
            rows: self.cols,
            cols: self.rows,
            data,
            cached_norm: self.cached_norm,
        }
    }

    /// The cached spectral-norm estimate, if one has been computed or set.
    pub fn norm(&self) -> Option<f64> {
        self.cached_norm
    }

    /// Sets the spectral norm explicitly (e.g. when it is known in closed form).
    pub fn with_norm(mut self, norm: f64) -> Result<Self> {
        crate::error::check_positive("norm", norm)?;
        self.cached_norm = Some(norm);
        Ok(self)
    }

    /// Power iteration on A*A. The estimate is the running maximum of ‖A v‖
    /// over the normalized iterates, so it never decreases as `iters` grows
    /// for a fixed `seed`. The result is cached on the map.
    pub fn estimate_norm(&mut self, iters: usize, seed: u64) -> Result<f64> {
        if self.is_zero() {
            return Err(Error::ZeroMap);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = random_unit(self.cols, &mut rng);
        let mut best = 0.0f64;
        for _ in 0..iters.max(1) {
            let av = self.apply(&v)?;
            best = best.max(av.norm());
            let w = self.apply_adjoint(&av)?;
            let wn = w.norm();
            v = if wn > 0.0 {
                w.scale(1.0 / wn)
            } else {
                random_unit(self.cols, &mut rng)
            };
        }
        best = best.max(self.apply(&v)?.norm());
        self.cached_norm = Some(best);
        Ok(best)
    }

    /// [`estimate_norm`](Self::estimate_norm) with `10 * max(rows, cols)`
    /// iterations and seed 0.
    pub fn estimate_norm_default(&mut self) -> Result<f64> {
        let iters = 10 * self.rows.max(self.cols);
        self.estimate_norm(iters, 0)
    }
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Point {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let p = Point::from_raw(v);
        let nrm = p.norm();
        if nrm > 0.0 {
            return p.scale(1.0 / nrm);
        }
    }
}
