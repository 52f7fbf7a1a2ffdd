//! Linear Sylvester equations and truncated power-series solutions of the
//! nonlinear and dual nonlinear Sylvester PDEs.

mod linear;
mod operator;
mod series;

pub use linear::{feedback_from_embedding, solve_linear_sylvester, LinearSylvesterProblem};
pub use operator::{predicted_operator_spectrum, DegreeOperator, LinearConstraint};
pub use series::{
    dual_residual, right_residual, solve_dual_sylvester_series, solve_nonlinear_sylvester_series,
    solution_residual, sylvester_residual, DualSylvesterData, ResidualReport, RightSylvesterData,
    SeriesOptions, SylvesterProblem, SylvesterSolution,
};

use nalgebra::DMatrix;
use num_complex::Complex;
use thiserror::Error;

use crate::poly::PolyError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SylvesterError<T: crate::Scalar> {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("degree-{degree} operator is resonant (smallest singular value {margin:e})")]
    Resonance { degree: u32, margin: T },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("spectra of A and S overlap: {lambda_a} ~ {lambda_s}")]
    SpectraOverlap {
        lambda_a: Complex<T>,
        lambda_s: Complex<T>,
        /// Least-squares solution returned despite non-uniqueness.
        least_squares: DMatrix<T>,
    },
    #[error("embedding is rank deficient (smallest singular value {smallest:e})")]
    RankDeficient { smallest: T },
}
