use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::poly::{monomials_of_degree, Monomial, PolyError, PolyVec, Polynomial};
use crate::scalar::{modulus, Scalar};

/// Matrix of `p |-> M p - (dp/dw) (Q w)` restricted to vector fields whose
/// entries are homogeneous of degree `k` in `Q.nrows()` variables.
///
/// Unknowns are ordered component-major: index `i * monomials.len() + j`
/// holds the coefficient of `monomials[j]` in component `i`.
#[derive(Clone, Debug)]
pub struct DegreeOperator<T: Scalar> {
    pub degree: u32,
    pub components: usize,
    pub num_vars: usize,
    pub monomials: Vec<Monomial>,
    index: BTreeMap<Monomial, usize>,
    pub matrix: DMatrix<Complex<T>>,
}

impl<T: Scalar> DegreeOperator<T> {
    pub fn assemble(m: &DMatrix<Complex<T>>, q: &DMatrix<Complex<T>>, degree: u32) -> Self {
        let components = m.nrows();
        let num_vars = q.nrows();
        let monomials = monomials_of_degree(num_vars, degree);
        let index: BTreeMap<Monomial, usize> = monomials.iter().cloned().enumerate().map(|(j, m)| (m, j)).collect();
        let nm = monomials.len();
        let size = components * nm;
        let mut matrix = DMatrix::<Complex<T>>::zeros(size, size);
        for i in 0..components {
            for (j, mono) in monomials.iter().enumerate() {
                let col = i * nm + j;
                for r in 0..components {
                    matrix[(r * nm + j, col)] += m[(r, i)];
                }
                let exps = mono.exps();
                for a in 0..num_vars {
                    if exps[a] == 0 {
                        continue;
                    }
                    let weight = T::lit(exps[a] as f64);
                    for b in 0..num_vars {
                        let qab = q[(a, b)];
                        if qab.is_zero() {
                            continue;
                        }
                        let mut e = exps.to_vec();
                        e[a] -= 1;
                        e[b] += 1;
                        let row = i * nm + index[&Monomial::new(e)];
                        matrix[(row, col)] -= qab * weight;
                    }
                }
            }
        }
        DegreeOperator {
            degree,
            components,
            num_vars,
            monomials,
            index,
            matrix,
        }
    }

    pub fn size(&self) -> usize {
        self.matrix.ncols()
    }

    /// Coefficient vector of the degree-`k` part of `v`.
    pub fn flatten(&self, v: &PolyVec<T>) -> DVector<Complex<T>> {
        let nm = self.monomials.len();
        let mut out = DVector::zeros(self.size());
        for (i, p) in v.iter().enumerate().take(self.components) {
            for (mono, c) in p.terms() {
                if let Some(&j) = self.index.get(mono) {
                    out[i * nm + j] = *c;
                }
            }
        }
        out
    }

    pub fn unflatten(&self, x: &DVector<Complex<T>>) -> Result<PolyVec<T>, PolyError> {
        let nm = self.monomials.len();
        let entries = (0..self.components)
            .map(|i| {
                Polynomial::from_terms(
                    self.num_vars,
                    self.monomials
                        .iter()
                        .enumerate()
                        .map(|(j, mono)| (mono.exps().to_vec(), x[i * nm + j])),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        PolyVec::new(entries)
    }

    /// Position of the coefficient of `w_j` in component `i` (degree one only).
    pub fn linear_index(&self, i: usize, j: usize) -> usize {
        i * self.monomials.len() + self.index[&Monomial::var(self.num_vars, j)]
    }
}

/// A linear condition `left * X * right = target` on the degree-one
/// coefficient matrix `X` (components x variables).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LinearConstraint<T: Scalar> {
    pub left: DMatrix<Complex<T>>,
    pub right: DMatrix<Complex<T>>,
    pub target: DMatrix<Complex<T>>,
}

impl<T: Scalar> LinearConstraint<T> {
    /// `X a = b`.
    pub fn align(a: DVector<Complex<T>>, b: DVector<Complex<T>>) -> Self {
        let n = b.len();
        LinearConstraint {
            left: DMatrix::identity(n, n),
            right: DMatrix::from_column_slice(a.len(), 1, a.as_slice()),
            target: DMatrix::from_column_slice(n, 1, b.as_slice()),
        }
    }

    /// `X ~ seed` in the least-squares sense.
    pub fn seed(seed: DMatrix<Complex<T>>) -> Self {
        LinearConstraint {
            left: DMatrix::identity(seed.nrows(), seed.nrows()),
            right: DMatrix::identity(seed.ncols(), seed.ncols()),
            target: seed,
        }
    }

    /// `K X = L`.
    pub fn left_multiple(k: DMatrix<Complex<T>>, l: DMatrix<Complex<T>>) -> Self {
        let cols = l.ncols();
        LinearConstraint {
            left: k,
            right: DMatrix::identity(cols, cols),
            target: l,
        }
    }

    fn shape_ok(&self, rows: usize, cols: usize) -> bool {
        self.left.ncols() == rows
            && self.right.nrows() == cols
            && self.target.nrows() == self.left.nrows()
            && self.target.ncols() == self.right.ncols()
    }
}

pub(crate) struct SolveOutcome<T: Scalar> {
    pub x: DVector<Complex<T>>,
    pub sigma_min: T,
    pub singular: bool,
    pub consistency_residual: T,
    pub constraint_residual: Option<T>,
}

fn max_abs<T: Scalar>(v: &DVector<Complex<T>>) -> T {
    v.iter().map(modulus).fold(T::zero(), |a, b| a.max(b))
}

impl<T: Scalar> DegreeOperator<T> {
    /// Minimum-norm solution of `matrix x = rhs`; for degree one, the
    /// null-space component is chosen to satisfy `constraints` in the
    /// least-squares sense.
    pub(crate) fn solve(
        &self,
        rhs: &DVector<Complex<T>>,
        resonance_rel: T,
        constraints: &[LinearConstraint<T>],
    ) -> Result<SolveOutcome<T>, PolyError> {
        let size = self.size();
        if size == 0 {
            return Ok(SolveOutcome {
                x: DVector::zeros(0),
                sigma_min: T::lit(f64::INFINITY),
                singular: false,
                consistency_residual: T::zero(),
                constraint_residual: None,
            });
        }
        let svd = self.matrix.clone().svd(true, true);
        let u = svd.u.as_ref().expect("requested U");
        let vt = svd.v_t.as_ref().expect("requested V^T");
        let sv = &svd.singular_values;
        let sigma_max = sv.iter().copied().fold(T::zero(), |a, b| a.max(b));
        let sigma_min = sv.iter().copied().fold(T::lit(f64::INFINITY), |a, b| a.min(b));
        let thr = resonance_rel * sigma_max;
        let singular = !(sigma_min > thr);

        let uh_b = u.adjoint() * rhs;
        let mut y = DVector::<Complex<T>>::zeros(size);
        let mut null = Vec::new();
        for k in 0..sv.len() {
            if sv[k] > thr {
                y[k] = uh_b[k] / Complex::new(sv[k], T::zero());
            } else {
                null.push(k);
            }
        }
        let mut x = vt.adjoint() * y;
        let consistency_residual = max_abs(&(&self.matrix * &x - rhs));

        let mut constraint_residual = None;
        if self.degree == 1 && !constraints.is_empty() {
            let (c, d) = self.constraint_system(constraints)?;
            if !null.is_empty() {
                let basis = DMatrix::from_fn(size, null.len(), |r, j| vt[(null[j], r)].conj());
                let cn = &c * &basis;
                let target = &d - &c * &x;
                let csvd = cn.svd(true, true);
                let cmax = csvd.singular_values.iter().copied().fold(T::zero(), |a, b| a.max(b));
                let eps = T::lit(T::RESONANCE_REL) * cmax.max(T::one());
                if let Ok(z) = csvd.solve(&target, eps) {
                    x += basis * z;
                }
            }
            constraint_residual = Some(max_abs(&(&c * &x - d)));
        }
        Ok(SolveOutcome {
            x,
            sigma_min,
            singular,
            consistency_residual,
            constraint_residual,
        })
    }

    fn constraint_system(
        &self,
        constraints: &[LinearConstraint<T>],
    ) -> Result<(DMatrix<Complex<T>>, DVector<Complex<T>>), PolyError> {
        let rows: usize = constraints.iter().map(|c| c.target.len()).sum();
        let mut c = DMatrix::zeros(rows, self.size());
        let mut d = DVector::zeros(rows);
        let mut row = 0;
        for con in constraints {
            if !con.shape_ok(self.components, self.num_vars) {
                return Err(PolyError::Dimension(format!(
                    "constraint {}x{} * X * {}x{} = {}x{} does not fit a {}x{} coefficient matrix",
                    con.left.nrows(),
                    con.left.ncols(),
                    con.right.nrows(),
                    con.right.ncols(),
                    con.target.nrows(),
                    con.target.ncols(),
                    self.components,
                    self.num_vars
                )));
            }
            for p in 0..con.target.nrows() {
                for q in 0..con.target.ncols() {
                    for i in 0..self.components {
                        for j in 0..self.num_vars {
                            let w = con.left[(p, i)] * con.right[(j, q)];
                            if !w.is_zero() {
                                c[(row, self.linear_index(i, j))] += w;
                            }
                        }
                    }
                    d[row] = con.target[(p, q)];
                    row += 1;
                }
            }
        }
        Ok((c, d))
    }
}

/// Eigenvalues of the degree-`k` operator predicted from the spectra:
/// `lambda_i(M) - sum_j m_j mu_j(Q)` over multi-indices of weight `k`.
pub fn predicted_operator_spectrum<T: Scalar>(
    m_eigs: &[Complex<T>],
    q_eigs: &[Complex<T>],
    degree: u32,
) -> Vec<Complex<T>> {
    let mut out = Vec::new();
    for mono in monomials_of_degree(q_eigs.len(), degree) {
        let mut sum = Complex::<T>::zero();
        for (e, mu) in mono.exps().iter().zip(q_eigs) {
            sum += *mu * Complex::new(T::lit(*e as f64), T::zero());
        }
        for l in m_eigs {
            out.push(*l - sum);
        }
    }
    out
}
