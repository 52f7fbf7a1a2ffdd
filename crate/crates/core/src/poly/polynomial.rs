use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Monomial, PolyError, PolyVec};
use crate::scalar::{modulus, Scalar};

/// Sparse multivariate polynomial over `Complex<T>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial<T: Scalar> {
    num_vars: usize,
    terms: BTreeMap<Monomial, Complex<T>>,
}

fn max_modulus<T: Scalar>(terms: &BTreeMap<Monomial, Complex<T>>) -> T {
    terms
        .values()
        .map(modulus)
        .fold(T::zero(), |a, b| if b > a { b } else { a })
}

impl<T: Scalar> Polynomial<T> {
    /// Builds a polynomial and prunes it relative to `scale_hint` and its own
    /// largest coefficient.
    fn finish(num_vars: usize, mut terms: BTreeMap<Monomial, Complex<T>>, scale_hint: T) -> Self {
        let own = max_modulus(&terms);
        let scale = if own > scale_hint { own } else { scale_hint };
        let thr = T::lit(T::PRUNE_REL) * (T::one() + scale);
        // NaN coefficients are kept so that they surface in residuals.
        terms.retain(|_, c| !(modulus(c) < thr));
        Polynomial { num_vars, terms }
    }

    pub fn zero(num_vars: usize) -> Self {
        Polynomial {
            num_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(num_vars: usize) -> Self {
        Self::constant(num_vars, Complex::one())
    }

    pub fn constant(num_vars: usize, c: Complex<T>) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::one(num_vars), c);
        Self::finish(num_vars, terms, T::zero())
    }

    pub fn real_constant(num_vars: usize, c: T) -> Self {
        Self::constant(num_vars, Complex::new(c, T::zero()))
    }

    /// The coordinate function `x_i`.
    ///
    /// # Panics
    /// If `i >= num_vars`.
    pub fn var(num_vars: usize, i: usize) -> Self {
        assert!(i < num_vars, "variable index {i} out of range for {num_vars} variables");
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::var(num_vars, i), Complex::one());
        Polynomial { num_vars, terms }
    }

    pub fn from_terms<I>(num_vars: usize, terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (Vec<u32>, Complex<T>)>,
    {
        let mut map = BTreeMap::new();
        for (exps, c) in terms {
            if exps.len() != num_vars {
                return Err(PolyError::ExponentLength {
                    expected: num_vars,
                    got: exps.len(),
                });
            }
            *map.entry(Monomial::new(exps)).or_insert_with(Complex::zero) += c;
        }
        Ok(Self::finish(num_vars, map, T::zero()))
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Complex<T>)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `-1` for the zero polynomial.
    pub fn degree(&self) -> i64 {
        self.terms
            .keys()
            .map(|m| m.degree() as i64)
            .max()
            .unwrap_or(-1)
    }

    pub fn coeff(&self, m: &Monomial) -> Complex<T> {
        self.terms.get(m).copied().unwrap_or_else(Complex::zero)
    }

    pub fn constant_term(&self) -> Complex<T> {
        self.coeff(&Monomial::one(self.num_vars))
    }

    /// Largest coefficient modulus; zero for the zero polynomial.
    pub fn max_coeff_residual(&self) -> T {
        max_modulus(&self.terms)
    }

    fn check_vars(&self, other: &Self) -> Result<(), PolyError> {
        if self.num_vars != other.num_vars {
            return Err(PolyError::VarCountMismatch {
                left: self.num_vars,
                right: other.num_vars,
            });
        }
        Ok(())
    }

    fn combine(&self, other: &Self, sign: T) -> Result<Self, PolyError> {
        self.check_vars(other)?;
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            *terms.entry(m.clone()).or_insert_with(Complex::zero) += c.scale(sign);
        }
        let hint = self.max_coeff_residual().max(other.max_coeff_residual());
        Ok(Self::finish(self.num_vars, terms, hint))
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, PolyError> {
        self.combine(other, T::one())
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, PolyError> {
        self.combine(other, -T::one())
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, PolyError> {
        self.mul_impl(other, None)
    }

    /// Product with all terms of total degree above `max_degree` discarded.
    pub fn try_mul_truncated(&self, other: &Self, max_degree: u32) -> Result<Self, PolyError> {
        self.mul_impl(other, Some(max_degree))
    }

    fn mul_impl(&self, other: &Self, max_degree: Option<u32>) -> Result<Self, PolyError> {
        self.check_vars(other)?;
        let mut terms: BTreeMap<Monomial, Complex<T>> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            let da = ma.degree();
            for (mb, cb) in &other.terms {
                if let Some(maxd) = max_degree {
                    if da + mb.degree() > maxd {
                        continue;
                    }
                }
                *terms.entry(ma.mul(mb)).or_insert_with(Complex::zero) += *ca * *cb;
            }
        }
        let hint = self.max_coeff_residual().max(other.max_coeff_residual());
        Ok(Self::finish(self.num_vars, terms, hint))
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        let terms = self.terms.iter().map(|(m, a)| (m.clone(), *a * c)).collect();
        Self::finish(self.num_vars, terms, T::zero())
    }

    pub fn scale_real(&self, c: T) -> Self {
        self.scale(Complex::new(c, T::zero()))
    }

    pub fn pow(&self, e: u32) -> Self {
        self.pow_impl(e, None)
    }

    fn pow_impl(&self, mut e: u32, max_degree: Option<u32>) -> Self {
        let mut acc = Self::one(self.num_vars);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_impl(&base, max_degree).expect("same variable count");
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_impl(&base, max_degree).expect("same variable count");
            }
        }
        acc
    }

    /// Substitutes `subst[i]` for variable `i` and expands.
    pub fn compose(&self, subst: &PolyVec<T>) -> Result<Self, PolyError> {
        self.compose_impl(subst, None)
    }

    /// Like [`compose`](Self::compose) but discards terms above `max_degree`
    /// in the result's variables.
    pub fn compose_truncated(&self, subst: &PolyVec<T>, max_degree: u32) -> Result<Self, PolyError> {
        self.compose_impl(subst, Some(max_degree))
    }

    fn compose_impl(&self, subst: &PolyVec<T>, max_degree: Option<u32>) -> Result<Self, PolyError> {
        if subst.len() != self.num_vars {
            return Err(PolyError::Arity {
                expected: self.num_vars,
                got: subst.len(),
            });
        }
        let out_vars = subst.num_vars();
        let mut max_exp = vec![0u32; self.num_vars];
        for m in self.terms.keys() {
            for (i, &e) in m.exps().iter().enumerate() {
                max_exp[i] = max_exp[i].max(e);
            }
        }
        // powers[i][e] = subst[i]^e
        let powers: Vec<Vec<Polynomial<T>>> = max_exp
            .iter()
            .enumerate()
            .map(|(i, &emax)| {
                let mut v = Vec::with_capacity(emax as usize + 1);
                v.push(Polynomial::one(out_vars));
                for e in 1..=emax {
                    let next = v[e as usize - 1]
                        .mul_impl(&subst[i], max_degree)
                        .expect("uniform variable count");
                    v.push(next);
                }
                v
            })
            .collect();

        let mut acc: BTreeMap<Monomial, Complex<T>> = BTreeMap::new();
        for (m, c) in &self.terms {
            let mut prod = Polynomial::constant(out_vars, *c);
            for (i, &e) in m.exps().iter().enumerate() {
                if e > 0 {
                    prod = prod.mul_impl(&powers[i][e as usize], max_degree)?;
                }
            }
            for (pm, pc) in prod.terms {
                *acc.entry(pm).or_insert_with(Complex::zero) += pc;
            }
        }
        Ok(Self::finish(out_vars, acc, self.max_coeff_residual()))
    }

    /// Formal partial derivative with respect to variable `i`.
    pub fn partial(&self, i: usize) -> Result<Self, PolyError> {
        if i >= self.num_vars {
            return Err(PolyError::IndexOutOfRange {
                index: i,
                num_vars: self.num_vars,
            });
        }
        let mut terms = BTreeMap::new();
        for (m, c) in &self.terms {
            if let Some((e, lowered)) = m.derive(i) {
                *terms.entry(lowered).or_insert_with(Complex::zero) += c.scale(T::lit(e as f64));
            }
        }
        Ok(Self::finish(self.num_vars, terms, T::zero()))
    }

    pub fn eval(&self, point: &[Complex<T>]) -> Result<Complex<T>, PolyError> {
        if point.len() != self.num_vars {
            return Err(PolyError::Dimension(format!(
                "point has {} coordinates, polynomial has {} variables",
                point.len(),
                self.num_vars
            )));
        }
        let mut acc = Complex::zero();
        for (m, c) in &self.terms {
            let mut t = *c;
            for (x, &e) in point.iter().zip(m.exps()) {
                if e > 0 {
                    t *= x.powu(e);
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    pub fn eval_real(&self, point: &[T]) -> Result<Complex<T>, PolyError> {
        let p: Vec<Complex<T>> = point.iter().map(|&x| Complex::new(x, T::zero())).collect();
        self.eval(&p)
    }

    /// Sum of the terms of total degree exactly `k`.
    pub fn homogeneous_part(&self, k: u32) -> Self {
        Polynomial {
            num_vars: self.num_vars,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() == k)
                .map(|(m, c)| (m.clone(), *c))
                .collect(),
        }
    }

    /// Sum of the terms of total degree at most `max_degree`.
    pub fn truncate(&self, max_degree: u32) -> Self {
        Polynomial {
            num_vars: self.num_vars,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() <= max_degree)
                .map(|(m, c)| (m.clone(), *c))
                .collect(),
        }
    }

    /// Re-expresses the polynomial in `num_vars` variables, mapping variable
    /// `j` to `offset + j`.
    pub fn embed(&self, num_vars: usize, offset: usize) -> Result<Self, PolyError> {
        if offset + self.num_vars > num_vars {
            return Err(PolyError::Dimension(format!(
                "cannot embed {} variables at offset {offset} into {num_vars}",
                self.num_vars
            )));
        }
        Ok(Polynomial {
            num_vars,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.embed(num_vars, offset), *c))
                .collect(),
        })
    }

    /// Whether every imaginary part is below `rel * (1 + scale)`.
    pub fn is_real(&self, rel: T) -> bool {
        let thr = rel * (T::one() + self.max_coeff_residual());
        self.terms.values().all(|c| c.im.abs() <= thr)
    }

    pub fn conj(&self) -> Self {
        Polynomial {
            num_vars: self.num_vars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c.conj())).collect(),
        }
    }

    /// Renders the polynomial with the given variable names, in the grammar
    /// accepted by [`crate::expr::parse_poly`].
    pub fn to_expr<S: AsRef<str>>(&self, names: &[S]) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        // Highest degree first reads more naturally.
        for (idx, (m, c)) in self.terms.iter().rev().enumerate() {
            let mono: Vec<String> = m
                .exps()
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(j, &e)| {
                    let name = names.get(j).map(|s| s.as_ref().to_string()).unwrap_or_else(|| format!("x{}", j + 1));
                    if e == 1 {
                        name
                    } else {
                        format!("{name}^{e}")
                    }
                })
                .collect();
            let (negative, coeff) = if c.im == T::zero() {
                let neg = c.re < T::zero();
                let mag = c.re.abs();
                (neg, if mag == T::one() && !mono.is_empty() { String::new() } else { format!("{mag}") })
            } else if c.re == T::zero() {
                (false, format!("{}*i", c.im))
            } else {
                (false, format!("({} + {}*i)", c.re, c.im))
            };
            if idx == 0 {
                if negative {
                    out.push('-');
                }
            } else {
                out.push_str(if negative { " - " } else { " + " });
            }
            match (coeff.is_empty(), mono.is_empty()) {
                (true, _) => out.push_str(&mono.join("*")),
                (false, true) => out.push_str(&coeff),
                (false, false) => {
                    out.push_str(&coeff);
                    out.push('*');
                    out.push_str(&mono.join("*"));
                }
            }
        }
        out
    }
}

impl<T: Scalar> fmt::Display for Polynomial<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (1..=self.num_vars).map(|i| format!("x{i}")).collect();
        f.write_str(&self.to_expr(&names))
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $call:ident) => {
        impl<'a, T: Scalar> $tr<&'a Polynomial<T>> for &'a Polynomial<T> {
            type Output = Polynomial<T>;
            /// # Panics
            /// On variable-count mismatch; use the `try_*` methods to handle it.
            fn $method(self, rhs: &'a Polynomial<T>) -> Polynomial<T> {
                self.$call(rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl<T: Scalar> $tr<Polynomial<T>> for Polynomial<T> {
            type Output = Polynomial<T>;
            fn $method(self, rhs: Polynomial<T>) -> Polynomial<T> {
                self.$call(&rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
    };
}

binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);
binop!(Mul, mul, try_mul);

impl<T: Scalar> Neg for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn neg(self) -> Polynomial<T> {
        Polynomial {
            num_vars: self.num_vars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -*c)).collect(),
        }
    }
}

impl<T: Scalar> Neg for Polynomial<T> {
    type Output = Polynomial<T>;
    fn neg(self) -> Polynomial<T> {
        -&self
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    exp: Vec<u32>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct PolyRepr {
    num_vars: usize,
    terms: Vec<TermRepr>,
}

impl<T: Scalar> Serialize for Polynomial<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PolyRepr {
            num_vars: self.num_vars,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| TermRepr {
                    exp: m.exps().to_vec(),
                    re: c.re.as_f64(),
                    im: c.im.as_f64(),
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Polynomial<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = PolyRepr::deserialize(deserializer)?;
        Polynomial::from_terms(
            repr.num_vars,
            repr.terms
                .into_iter()
                .map(|t| (t.exp, Complex::new(T::lit(t.re), T::lit(t.im)))),
        )
        .map_err(serde::de::Error::custom)
    }
}
