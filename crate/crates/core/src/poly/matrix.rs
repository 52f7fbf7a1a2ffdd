use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{PolyError, PolyVec, Polynomial};
use crate::scalar::Scalar;

/// Rectangular grid of polynomials, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PolyMatrix<T: Scalar> {
    rows: usize,
    cols: usize,
    entries: Vec<Polynomial<T>>,
}

impl<T: Scalar> PolyMatrix<T> {
    pub fn new(rows: usize, cols: usize, entries: Vec<Polynomial<T>>) -> Result<Self, PolyError> {
        if rows * cols != entries.len() || rows == 0 || cols == 0 {
            return Err(PolyError::Dimension(format!(
                "{} entries do not form a nonempty {rows}x{cols} matrix",
                entries.len()
            )));
        }
        let n = entries[0].num_vars();
        if let Some(bad) = entries.iter().find(|p| p.num_vars() != n) {
            return Err(PolyError::VarCountMismatch {
                left: n,
                right: bad.num_vars(),
            });
        }
        Ok(PolyMatrix { rows, cols, entries })
    }

    pub fn from_rows(rows: Vec<Vec<Polynomial<T>>>) -> Result<Self, PolyError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(PolyError::Dimension("ragged matrix rows".into()));
        }
        Self::new(r, c, rows.into_iter().flatten().collect())
    }

    /// Column matrix built from a vector.
    pub fn from_column(v: &PolyVec<T>) -> Self {
        PolyMatrix {
            rows: v.len(),
            cols: 1,
            entries: v.entries().to_vec(),
        }
    }

    pub fn constant(m: &DMatrix<Complex<T>>, num_vars: usize) -> Self {
        let entries = (0..m.nrows())
            .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
            .map(|(r, c)| Polynomial::constant(num_vars, m[(r, c)]))
            .collect();
        Self::new(m.nrows(), m.ncols(), entries).expect("nonempty matrix")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn num_vars(&self) -> usize {
        self.entries[0].num_vars()
    }

    pub fn get(&self, r: usize, c: usize) -> &Polynomial<T> {
        &self.entries[r * self.cols + c]
    }

    pub fn entries(&self) -> &[Polynomial<T>] {
        &self.entries
    }

    pub fn column(&self, c: usize) -> PolyVec<T> {
        PolyVec::new((0..self.rows).map(|r| self.get(r, c).clone()).collect()).expect("nonempty")
    }

    pub fn transpose(&self) -> Self {
        let entries = (0..self.cols)
            .flat_map(|c| (0..self.rows).map(move |r| (r, c)))
            .map(|(r, c)| self.get(r, c).clone())
            .collect();
        PolyMatrix {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    /// Matrix-vector product `M v`.
    pub fn mul_vec(&self, v: &PolyVec<T>) -> Result<PolyVec<T>, PolyError> {
        if v.len() != self.cols {
            return Err(PolyError::Dimension(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let rows = (0..self.rows)
            .map(|r| {
                let mut acc = Polynomial::zero(self.num_vars());
                for c in 0..self.cols {
                    acc = acc.try_add(&self.get(r, c).try_mul(&v[c])?)?;
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>, PolyError>>()?;
        PolyVec::new(rows)
    }

    /// Row-vector product `v^T M`, returned as a vector of length `cols`.
    pub fn vec_mul(&self, v: &PolyVec<T>) -> Result<PolyVec<T>, PolyError> {
        self.transpose().mul_vec(v)
    }

    pub fn compose(&self, subst: &PolyVec<T>) -> Result<Self, PolyError> {
        let entries = self
            .entries
            .iter()
            .map(|p| p.compose(subst))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(self.rows, self.cols, entries)
    }

    pub fn compose_truncated(&self, subst: &PolyVec<T>, max_degree: u32) -> Result<Self, PolyError> {
        let entries = self
            .entries
            .iter()
            .map(|p| p.compose_truncated(subst, max_degree))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(self.rows, self.cols, entries)
    }

    pub fn eval(&self, point: &[Complex<T>]) -> Result<DMatrix<Complex<T>>, PolyError> {
        let vals = self
            .entries
            .iter()
            .map(|p| p.eval(point))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &vals))
    }

    pub fn constant_part(&self) -> DMatrix<Complex<T>> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| self.get(r, c).constant_term())
    }

    pub fn max_coeff_residual(&self) -> T {
        self.entries
            .iter()
            .map(Polynomial::max_coeff_residual)
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }
}
