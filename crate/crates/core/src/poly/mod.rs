//! Sparse multivariate polynomials with complex coefficients.
//!
//! Every vector field, feedback law, eigenvalue and eigenvector handled by the
//! crate is a [`Polynomial`], a [`PolyVec`] or a [`PolyMatrix`]. Arithmetic is
//! exact up to floating-point rounding; after each operation coefficients whose
//! modulus falls below `PRUNE_REL * (1 + scale)` are dropped, where `scale` is
//! the largest coefficient modulus among the operands and the result.

mod matrix;
mod monomial;
mod polynomial;
mod vector;

pub use matrix::PolyMatrix;
pub use monomial::{monomials_of_degree, Monomial};
pub use polynomial::Polynomial;
pub use vector::PolyVec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("variable-count mismatch: {left} vs {right}")]
    VarCountMismatch { left: usize, right: usize },
    #[error("substitution arity mismatch: polynomial has {expected} variables, got {got} substitutions")]
    Arity { expected: usize, got: usize },
    #[error("variable index {index} out of range for {num_vars} variables")]
    IndexOutOfRange { index: usize, num_vars: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("exponent vector has length {got}, expected {expected}")]
    ExponentLength { expected: usize, got: usize },
    #[error("empty polynomial vector")]
    Empty,
}
