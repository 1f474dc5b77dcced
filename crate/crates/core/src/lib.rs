//! Fixed-point operator algebra in R^n.
//!
//! Operators are built from metric projections onto a few primitive sets and
//! combined by relaxation, composition, convex combination and the Landweber
//! transform. Each combinator propagates a class certificate (relaxed firmly
//! nonexpansive, strict pseudocontraction, relaxed cutter, demicontraction)
//! along the closed-form rules in [`params`], and the [`verify`] module checks
//! those claims by sampling the defining inequalities.
//!
//! ```
//! use fixop::{operators::{OperatorHandle, PrimitiveSet}, ClassCertificate, Point};
//!
//! let a = PrimitiveSet::hyperplane(Point::new(vec![0.0, 1.0]).unwrap(), 0.0).unwrap();
//! let b = PrimitiveSet::hyperplane(Point::new(vec![1.0, 1.0]).unwrap(), 0.0).unwrap();
//! let t = OperatorHandle::projection(a).relax(3.0).unwrap();
//! let u = OperatorHandle::projection(b);
//! let ut = u.compose(&t).unwrap();
//! assert_eq!(ut.certificate(), Some(ClassCertificate::Rfne(4.0)));
//! ```

pub mod error;
pub mod extrapolation;
pub mod hilbert;
pub mod operators;
pub mod params;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use hilbert::{LinearMap, Point};
pub use operators::{ClassCertificate, FixSet, OperatorHandle, PrimitiveSet};
