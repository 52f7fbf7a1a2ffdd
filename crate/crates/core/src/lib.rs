//! Partial eigenvalue assignment for polynomial vector fields via nonlinear
//! Sylvester equations.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases
//! below cover the common case.

pub mod eigen;
pub mod expr;
pub mod poly;
pub mod region;
pub mod scalar;
pub mod sim;
pub mod sylvester;
pub mod synthesis;

pub use poly::{Monomial, PolyError, PolyMatrix, PolyVec, Polynomial};
pub use scalar::Scalar;

pub type Polynomial64 = Polynomial<f64>;
pub type PolyVec64 = PolyVec<f64>;
pub type PolyMatrix64 = PolyMatrix<f64>;
pub type EigenPair64 = eigen::EigenPair<f64>;
pub type ProblemSpec64 = expr::ProblemSpec<f64>;

pub type Polynomial32 = Polynomial<f32>;
pub type PolyVec32 = PolyVec<f32>;
pub type PolyMatrix32 = PolyMatrix<f32>;
