use std::ops::{Add, Index, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{Monomial, PolyError, PolyMatrix, Polynomial};
use crate::scalar::Scalar;

/// Ordered, nonempty list of polynomials sharing one variable count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(try_from = "Vec<Polynomial<T>>", into = "Vec<Polynomial<T>>")]
pub struct PolyVec<T: Scalar> {
    entries: Vec<Polynomial<T>>,
}

impl<T: Scalar> TryFrom<Vec<Polynomial<T>>> for PolyVec<T> {
    type Error = PolyError;
    fn try_from(v: Vec<Polynomial<T>>) -> Result<Self, PolyError> {
        PolyVec::new(v)
    }
}

impl<T: Scalar> From<PolyVec<T>> for Vec<Polynomial<T>> {
    fn from(v: PolyVec<T>) -> Self {
        v.entries
    }
}

impl<T: Scalar> PolyVec<T> {
    pub fn new(entries: Vec<Polynomial<T>>) -> Result<Self, PolyError> {
        let first = entries.first().ok_or(PolyError::Empty)?;
        let n = first.num_vars();
        if let Some(bad) = entries.iter().find(|p| p.num_vars() != n) {
            return Err(PolyError::VarCountMismatch {
                left: n,
                right: bad.num_vars(),
            });
        }
        Ok(PolyVec { entries })
    }

    pub fn zeros(len: usize, num_vars: usize) -> Self {
        assert!(len > 0, "PolyVec must be nonempty");
        PolyVec {
            entries: vec![Polynomial::zero(num_vars); len],
        }
    }

    /// The identity map `[x1, ..., xn]`.
    pub fn identity(num_vars: usize) -> Self {
        PolyVec {
            entries: (0..num_vars).map(|i| Polynomial::var(num_vars, i)).collect(),
        }
    }

    /// Constant vector field.
    pub fn constant(values: &[Complex<T>], num_vars: usize) -> Self {
        PolyVec::new(values.iter().map(|&c| Polynomial::constant(num_vars, c)).collect())
            .expect("nonempty constant vector")
    }

    /// Linear field `M x` for a `rows x num_vars` matrix.
    pub fn linear(m: &DMatrix<Complex<T>>) -> Self {
        let n = m.ncols();
        let entries = (0..m.nrows())
            .map(|r| {
                Polynomial::from_terms(n, (0..n).map(|c| (Monomial::var(n, c).exps().to_vec(), m[(r, c)])))
                    .expect("consistent exponents")
            })
            .collect();
        PolyVec::new(entries).expect("nonempty")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_vars(&self) -> usize {
        self.entries[0].num_vars()
    }

    pub fn entries(&self) -> &[Polynomial<T>] {
        &self.entries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Polynomial<T>> {
        self.entries.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Polynomial::is_zero)
    }

    pub fn degree(&self) -> i64 {
        self.entries.iter().map(Polynomial::degree).max().unwrap_or(-1)
    }

    pub fn max_coeff_residual(&self) -> T {
        self.entries
            .iter()
            .map(Polynomial::max_coeff_residual)
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    fn check_shape(&self, other: &Self) -> Result<(), PolyError> {
        if self.len() != other.len() {
            return Err(PolyError::Dimension(format!(
                "vector lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        if self.num_vars() != other.num_vars() {
            return Err(PolyError::VarCountMismatch {
                left: self.num_vars(),
                right: other.num_vars(),
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, PolyError> {
        self.check_shape(other)?;
        self.zip_with(other, Polynomial::try_add)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, PolyError> {
        self.check_shape(other)?;
        self.zip_with(other, Polynomial::try_sub)
    }

    fn zip_with<F>(&self, other: &Self, f: F) -> Result<Self, PolyError>
    where
        F: Fn(&Polynomial<T>, &Polynomial<T>) -> Result<Polynomial<T>, PolyError>,
    {
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PolyVec { entries })
    }

    /// Multiplies every entry by the scalar polynomial `p`.
    pub fn mul_scalar_poly(&self, p: &Polynomial<T>) -> Result<Self, PolyError> {
        let entries = self
            .entries
            .iter()
            .map(|e| e.try_mul(p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PolyVec { entries })
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        self.map(|p| p.scale(c))
    }

    pub fn map<F: Fn(&Polynomial<T>) -> Polynomial<T>>(&self, f: F) -> Self {
        PolyVec {
            entries: self.entries.iter().map(f).collect(),
        }
    }

    /// `sum_i self[i] * other[i]`.
    pub fn dot(&self, other: &Self) -> Result<Polynomial<T>, PolyError> {
        self.check_shape(other)?;
        let mut acc = Polynomial::zero(self.num_vars());
        for (a, b) in self.entries.iter().zip(&other.entries) {
            acc = acc.try_add(&a.try_mul(b)?)?;
        }
        Ok(acc)
    }

    /// Entry `(i, j)` is `d self[i] / d x_j`.
    pub fn jacobian(&self) -> PolyMatrix<T> {
        let n = self.num_vars();
        let entries = self
            .entries
            .iter()
            .flat_map(|p| (0..n).map(move |j| p.partial(j).expect("index in range")))
            .collect();
        PolyMatrix::new(self.len(), n, entries).expect("consistent shape")
    }

    pub fn compose(&self, subst: &PolyVec<T>) -> Result<Self, PolyError> {
        let entries = self
            .entries
            .iter()
            .map(|p| p.compose(subst))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PolyVec { entries })
    }

    pub fn compose_truncated(&self, subst: &PolyVec<T>, max_degree: u32) -> Result<Self, PolyError> {
        let entries = self
            .entries
            .iter()
            .map(|p| p.compose_truncated(subst, max_degree))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PolyVec { entries })
    }

    pub fn eval(&self, point: &[Complex<T>]) -> Result<Vec<Complex<T>>, PolyError> {
        self.entries.iter().map(|p| p.eval(point)).collect()
    }

    pub fn eval_real(&self, point: &[T]) -> Result<Vec<Complex<T>>, PolyError> {
        self.entries.iter().map(|p| p.eval_real(point)).collect()
    }

    pub fn homogeneous_part(&self, k: u32) -> Self {
        self.map(|p| p.homogeneous_part(k))
    }

    pub fn truncate(&self, max_degree: u32) -> Self {
        self.map(|p| p.truncate(max_degree))
    }

    pub fn embed(&self, num_vars: usize, offset: usize) -> Result<Self, PolyError> {
        let entries = self
            .entries
            .iter()
            .map(|p| p.embed(num_vars, offset))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PolyVec { entries })
    }

    pub fn constant_part(&self) -> Vec<Complex<T>> {
        self.entries.iter().map(Polynomial::constant_term).collect()
    }

    /// Degree-one coefficients as a `len x num_vars` matrix.
    pub fn linear_part(&self) -> DMatrix<Complex<T>> {
        let n = self.num_vars();
        DMatrix::from_fn(self.len(), n, |r, c| self.entries[r].coeff(&Monomial::var(n, c)))
    }

    pub fn is_real(&self, rel: T) -> bool {
        self.entries.iter().all(|p| p.is_real(rel))
    }

    /// Concatenation `[self; other]`.
    pub fn concat(&self, other: &Self) -> Result<Self, PolyError> {
        if self.num_vars() != other.num_vars() {
            return Err(PolyError::VarCountMismatch {
                left: self.num_vars(),
                right: other.num_vars(),
            });
        }
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().cloned());
        Ok(PolyVec { entries })
    }

    pub fn to_expr<S: AsRef<str>>(&self, names: &[S]) -> Vec<String> {
        self.entries.iter().map(|p| p.to_expr(names)).collect()
    }
}

impl<T: Scalar> Index<usize> for PolyVec<T> {
    type Output = Polynomial<T>;
    fn index(&self, i: usize) -> &Polynomial<T> {
        &self.entries[i]
    }
}

impl<'a, T: Scalar> Add<&'a PolyVec<T>> for &'a PolyVec<T> {
    type Output = PolyVec<T>;
    fn add(self, rhs: &'a PolyVec<T>) -> PolyVec<T> {
        self.try_add(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl<'a, T: Scalar> Sub<&'a PolyVec<T>> for &'a PolyVec<T> {
    type Output = PolyVec<T>;
    fn sub(self, rhs: &'a PolyVec<T>) -> PolyVec<T> {
        self.try_sub(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl<T: Scalar> Neg for &PolyVec<T> {
    type Output = PolyVec<T>;
    fn neg(self) -> PolyVec<T> {
        self.map(|p| -p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    type P = Polynomial<f64>;

    #[test]
    fn jacobian_of_embedding() {
        let w = P::var(1, 0);
        let pi = PolyVec::new(vec![w.clone(), w.clone()]).unwrap();
        let j = pi.jacobian();
        assert_eq!((j.rows(), j.cols()), (2, 1));
        assert_eq!(j.get(0, 0), &P::one(1));
        assert_eq!(j.get(1, 0), &P::one(1));
    }

    #[test]
    fn jacobian_of_constant_is_zero() {
        let v = PolyVec::constant(&[cplx(1.0, 0.0), cplx(0.0, 2.0)], 3);
        assert!(v.jacobian().entries().iter().all(P::is_zero));
    }

    #[test]
    fn jacobian_of_exo_field() {
        // d/dw (-w - w^2/2) = -1 - w
        let w = P::var(1, 0);
        let s = PolyVec::new(vec![&(-&w) - &(&w * &w).scale_real(0.5)]).unwrap();
        assert_eq!(s.jacobian().get(0, 0), &(&(-&P::one(1)) - &w));
    }

    #[test]
    fn rejects_mixed_var_counts() {
        assert!(PolyVec::new(vec![P::var(1, 0), P::var(2, 0)]).is_err());
        assert!(matches!(PolyVec::<f64>::new(vec![]), Err(PolyError::Empty)));
    }

    #[test]
    fn linear_part_roundtrip() {
        let m = DMatrix::from_row_slice(2, 2, &[cplx::<f64>(1.0, 0.0), cplx(2.0, 0.0), cplx(0.0, 1.0), cplx(-3.0, 0.0)]);
        let v = PolyVec::linear(&m);
        assert_eq!(v.linear_part(), m);
    }
}
