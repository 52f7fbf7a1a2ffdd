use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::SylvesterError;
use crate::scalar::{modulus, Scalar};

/// Data of `A Pi + B L = Pi S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LinearSylvesterProblem<T: Scalar> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub l: DMatrix<T>,
    pub s: DMatrix<T>,
}

impl<T: Scalar> LinearSylvesterProblem<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, l: DMatrix<T>, s: DMatrix<T>) -> Result<Self, SylvesterError<T>> {
        let n = a.nrows();
        let nu = s.nrows();
        if !a.is_square() || !s.is_square() {
            return Err(SylvesterError::Dimension("A and S must be square".into()));
        }
        if b.nrows() != n || l.nrows() != b.ncols() || l.ncols() != nu {
            return Err(SylvesterError::Dimension(format!(
                "A {}x{}, B {}x{}, L {}x{}, S {}x{}",
                n,
                n,
                b.nrows(),
                b.ncols(),
                l.nrows(),
                l.ncols(),
                nu,
                nu
            )));
        }
        Ok(LinearSylvesterProblem { a, b, l, s })
    }
}

/// Solves `A Pi + B L = Pi S` through the vectorized system
/// `(I (x) A - S^T (x) I) vec(Pi) = -vec(B L)`.
pub fn solve_linear_sylvester<T: Scalar>(prob: &LinearSylvesterProblem<T>) -> Result<DMatrix<T>, SylvesterError<T>> {
    let n = prob.a.nrows();
    let nu = prob.s.nrows();
    let op = DMatrix::<T>::identity(nu, nu).kronecker(&prob.a)
        - prob.s.transpose().kronecker(&DMatrix::<T>::identity(n, n));
    let rhs = -(&prob.b * &prob.l);
    let rhs_vec = DMatrix::from_column_slice(n * nu, 1, rhs.as_slice());

    let svd = op.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let eps = T::lit(T::RESONANCE_REL) * smax.max(T::one());
    let x = svd.solve(&rhs_vec, eps).map_err(|e| SylvesterError::Precondition(e.to_string()))?;
    let pi = DMatrix::from_column_slice(n, nu, x.as_slice());

    let ea = prob.a.complex_eigenvalues();
    let es = prob.s.complex_eigenvalues();
    let scale = T::one() + prob.a.norm() + prob.s.norm();
    let gap_tol = T::lit(T::RESONANCE_REL) * scale;
    for la in ea.iter() {
        for ls in es.iter() {
            if modulus(&(la - ls)) <= gap_tol {
                return Err(SylvesterError::SpectraOverlap {
                    lambda_a: *la,
                    lambda_s: *ls,
                    least_squares: pi,
                });
            }
        }
    }
    Ok(pi)
}

/// `K = L Pi^+`, the minimum-norm solution of `K Pi = L`.
pub fn feedback_from_embedding<T: Scalar>(l: &DMatrix<T>, pi: &DMatrix<T>) -> Result<DMatrix<T>, SylvesterError<T>> {
    if l.ncols() != pi.ncols() {
        return Err(SylvesterError::Dimension(format!(
            "L has {} columns, Pi has {}",
            l.ncols(),
            pi.ncols()
        )));
    }
    if pi.ncols() > pi.nrows() {
        return Err(SylvesterError::RankDeficient { smallest: T::zero() });
    }
    let sv = pi.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let smin = sv.iter().copied().fold(T::lit(f64::INFINITY), |a, b| a.min(b));
    let rank_tol = T::lit(T::IDENTITY_REL) * smax.max(T::one());
    if !(smin > rank_tol) {
        return Err(SylvesterError::RankDeficient { smallest: smin });
    }
    let pinv = pi
        .clone()
        .pseudo_inverse(rank_tol)
        .map_err(|e| SylvesterError::Precondition(e.to_string()))?;
    Ok(l * pinv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    #[test]
    fn double_integrator_embedding() {
        let p = LinearSylvesterProblem::new(m(2, 2, &[0., 1., 0., 0.]), m(2, 1, &[0., 1.]), m(1, 1, &[1.]), m(1, 1, &[-1.]))
            .unwrap();
        let pi = solve_linear_sylvester(&p).unwrap();
        assert!((pi[(0, 0)] - 1.0).abs() < 1e-12 && (pi[(1, 0)] + 1.0).abs() < 1e-12);
        let k = feedback_from_embedding(&p.l, &pi).unwrap();
        assert!((k[(0, 0)] - 0.5).abs() < 1e-12 && (k[(0, 1)] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_l_gives_zero() {
        let p = LinearSylvesterProblem::new(m(2, 2, &[-1., 0., 0., -3.]), m(2, 1, &[1., 1.]), m(1, 1, &[0.]), m(1, 1, &[2.]))
            .unwrap();
        assert!(solve_linear_sylvester(&p).unwrap().amax() < 1e-14);
    }

    #[test]
    fn overlap_reported_with_least_squares() {
        let p = LinearSylvesterProblem::new(m(2, 2, &[-1., 0., 0., 1.]), m(2, 1, &[0., 1.]), m(1, 1, &[1.]), m(1, 1, &[-1.]))
            .unwrap();
        match solve_linear_sylvester(&p) {
            Err(SylvesterError::SpectraOverlap { least_squares, .. }) => {
                // second row is determined: Pi_2 = -1/2
                assert!((least_squares[(1, 0)] + 0.5).abs() < 1e-12);
                assert!(least_squares[(0, 0)].abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identity_embedding_gives_l() {
        let l = m(1, 2, &[3., -4.]);
        let k = feedback_from_embedding(&l, &DMatrix::identity(2, 2)).unwrap();
        assert!((k - l).amax() < 1e-14);
    }

    #[test]
    fn rank_deficient_embedding() {
        let pi = m(2, 2, &[1., 2., 2., 4.]);
        assert!(matches!(
            feedback_from_embedding(&m(1, 2, &[1., 1.]), &pi),
            Err(SylvesterError::RankDeficient { .. })
        ));
    }

    #[test]
    fn dimension_checks() {
        assert!(LinearSylvesterProblem::new(m(2, 2, &[0.; 4]), m(3, 1, &[0.; 3]), m(1, 1, &[1.]), m(1, 1, &[1.])).is_err());
    }
}
