use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::SynthesisError;
use crate::scalar::{modulus, Scalar};
use crate::sylvester::{feedback_from_embedding, solve_linear_sylvester, LinearSylvesterProblem};

/// Result of linear partial eigenvalue assignment `A Pi + B L = Pi S`,
/// `K = L Pi^+`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LinearAssignmentReport<T: Scalar> {
    pub pi: DMatrix<T>,
    pub k: DMatrix<T>,
    pub targets: Vec<Complex<T>>,
    pub closed_loop: Vec<Complex<T>>,
    /// Largest distance from an eigenvalue of `S` to the closed-loop spectrum.
    pub max_mismatch: T,
    pub tolerance: T,
    pub verdict: bool,
}

pub fn assign_linear<T: Scalar>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    s: &DMatrix<T>,
    l: &DMatrix<T>,
    tol: T,
) -> Result<LinearAssignmentReport<T>, SynthesisError<T>> {
    let prob = LinearSylvesterProblem::new(a.clone(), b.clone(), l.clone(), s.clone())?;
    let pi = solve_linear_sylvester(&prob)?;
    let k = feedback_from_embedding(l, &pi)?;
    let closed: Vec<Complex<T>> = (a + b * &k).complex_eigenvalues().iter().cloned().collect();
    let targets: Vec<Complex<T>> = s.complex_eigenvalues().iter().cloned().collect();
    let mut max_mismatch = T::zero();
    for t in &targets {
        let d = closed.iter().map(|c| modulus(&(c - t))).reduce(|m, x| if x < m { x } else { m });
        let d = d.unwrap_or(T::lit(f64::INFINITY));
        if d > max_mismatch {
            max_mismatch = d;
        }
    }
    Ok(LinearAssignmentReport {
        pi,
        k,
        targets,
        closed_loop: closed,
        max_mismatch,
        tolerance: tol,
        verdict: max_mismatch <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_integrator() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let s = DMatrix::from_element(1, 1, -1.0);
        let l = DMatrix::from_element(1, 1, 1.0);
        let rep = assign_linear::<f64>(&a, &b, &s, &l, 1e-6).unwrap();
        assert!(rep.verdict, "{rep:?}");
        assert!((rep.k[(0, 0)] - 0.5).abs() < 1e-12 && (rep.k[(0, 1)] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn overlapping_spectra_are_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let s = DMatrix::from_element(1, 1, -1.0);
        let l = DMatrix::from_element(1, 1, 1.0);
        assert!(assign_linear::<f64>(&a, &b, &s, &l, 1e-6).is_err());
    }
}
