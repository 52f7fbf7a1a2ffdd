//! Lie brackets and exact verification of nonlinear eigenpairs.
//!
//! A right eigenpair `(lambda, v)` of `w' = s(w)` satisfies
//! `[v, s] = lambda v` with `[v, s] = (ds/dw) v - (dv/dw) s`; a left eigenpair
//! satisfies `v^T (ds/dw) + ((dv/dw) s)^T = lambda v^T`. Both identities are
//! checked coefficient-by-coefficient, so a passing verdict holds globally.
//! Sign and rank conditions that genuinely depend on a domain are sampled on
//! a [`SampleRegion`].

use nalgebra::DMatrix;
use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{PolyError, PolyMatrix, PolyVec, Polynomial};
use crate::region::SampleRegion;
use crate::scalar::{modulus, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigenError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("expected a {expected:?} eigenpair")]
    WrongSide { expected: Side },
    #[error("eigenvector is identically zero")]
    ZeroVector,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Right,
    Left,
}

/// A nonlinear eigenvalue together with its eigenvector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EigenPair<T: Scalar> {
    pub side: Side,
    pub value: Polynomial<T>,
    pub vector: PolyVec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl<T: Scalar> EigenPair<T> {
    pub fn new(side: Side, value: Polynomial<T>, vector: PolyVec<T>) -> Result<Self, EigenError> {
        if vector.is_zero() {
            return Err(EigenError::ZeroVector);
        }
        if value.num_vars() != vector.num_vars() {
            return Err(PolyError::VarCountMismatch {
                left: value.num_vars(),
                right: vector.num_vars(),
            }
            .into());
        }
        Ok(EigenPair {
            side,
            value,
            vector,
            label: None,
        })
    }

    pub fn right(value: Polynomial<T>, vector: PolyVec<T>) -> Result<Self, EigenError> {
        Self::new(Side::Right, value, vector)
    }

    pub fn left(value: Polynomial<T>, vector: PolyVec<T>) -> Result<Self, EigenError> {
        Self::new(Side::Left, value, vector)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    fn scale(&self) -> T {
        self.value.max_coeff_residual().max(self.vector.max_coeff_residual())
    }
}

/// Pointwise modulus of a residual at a sample point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SampleRecord<T: Scalar> {
    pub point: Vec<T>,
    pub value: T,
}

/// Outcome of checking a polynomial identity `residual == 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct IdentityReport<T: Scalar> {
    pub label: String,
    pub residual: PolyVec<T>,
    pub max_residual: T,
    pub tolerance: T,
    pub verdict: bool,
    pub samples: Vec<SampleRecord<T>>,
}

pub type EigenReport<T> = IdentityReport<T>;

/// Absolute tolerance `rel * (1 + scale)`.
pub fn identity_tolerance<T: Scalar>(rel: T, scale: T) -> T {
    rel * (T::one() + scale)
}

/// Default relative tolerance for identity checks at precision `T`.
pub fn default_rel_tol<T: Scalar>() -> T {
    T::lit(T::IDENTITY_REL)
}

impl<T: Scalar> IdentityReport<T> {
    /// Builds a report; `scale` is the largest coefficient modulus among the
    /// identity's inputs.
    pub fn from_residual(label: impl Into<String>, residual: PolyVec<T>, scale: T, rel_tol: T) -> Self {
        let max_residual = residual.max_coeff_residual();
        let tolerance = identity_tolerance(rel_tol, scale);
        let samples = sample_points(residual.num_vars())
            .into_iter()
            .map(|p| {
                let value = residual
                    .eval_real(&p)
                    .map(|v| v.iter().map(modulus).fold(T::zero(), |a, b| a.max(b)))
                    .unwrap_or_else(|_| T::lit(f64::NAN));
                SampleRecord { point: p, value }
            })
            .collect();
        IdentityReport {
            label: label.into(),
            verdict: max_residual <= tolerance,
            residual,
            max_residual,
            tolerance,
            samples,
        }
    }

    /// Restricts the identity to total degree `<= max_degree` (for truncated
    /// series objects) and re-derives the verdict.
    pub fn truncated(&self, max_degree: u32, rel_tol: T, scale: T) -> Self {
        Self::from_residual(self.label.clone(), self.residual.truncate(max_degree), scale, rel_tol)
    }
}

fn sample_points<T: Scalar>(n: usize) -> Vec<Vec<T>> {
    let alt: Vec<T> = (0..n)
        .map(|i| if i % 2 == 0 { T::lit(0.5) } else { T::lit(-0.5) })
        .collect();
    vec![vec![T::zero(); n], vec![T::one(); n], alt]
}

/// `[v, s] = (ds/dw) v - (dv/dw) s`.
pub fn lie_bracket<T: Scalar>(v: &PolyVec<T>, s: &PolyVec<T>) -> Result<PolyVec<T>, EigenError> {
    if v.len() != s.len() || v.num_vars() != s.num_vars() || v.len() != v.num_vars() {
        return Err(EigenError::Dimension(format!(
            "Lie bracket needs two fields on the same space: {}x{} vs {}x{}",
            v.len(),
            v.num_vars(),
            s.len(),
            s.num_vars()
        )));
    }
    let a = s.jacobian().mul_vec(v)?;
    let b = v.jacobian().mul_vec(s)?;
    Ok(a.try_sub(&b)?)
}

/// `v^T (ds/dw) + ((dv/dw) s)^T`, the left-eigen operator applied to `v`.
pub fn left_action<T: Scalar>(v: &PolyVec<T>, s: &PolyVec<T>) -> Result<PolyVec<T>, EigenError> {
    if v.len() != s.len() || v.num_vars() != s.num_vars() {
        return Err(EigenError::Dimension(format!(
            "left action needs matching covector and field: {}x{} vs {}x{}",
            v.len(),
            v.num_vars(),
            s.len(),
            s.num_vars()
        )));
    }
    if s.num_vars() != s.len() {
        return Err(EigenError::Dimension("field must map R^n to R^n".into()));
    }
    let a = s.jacobian().vec_mul(v)?;
    let b = v.jacobian().mul_vec(s)?;
    Ok(a.try_add(&b)?)
}

pub fn check_right_eigenpair<T: Scalar>(
    s: &PolyVec<T>,
    pair: &EigenPair<T>,
    rel_tol: T,
) -> Result<EigenReport<T>, EigenError> {
    if pair.side != Side::Right {
        return Err(EigenError::WrongSide { expected: Side::Right });
    }
    let bracket = lie_bracket(&pair.vector, s)?;
    let residual = bracket.try_sub(&pair.vector.mul_scalar_poly(&pair.value)?)?;
    let scale = pair.scale().max(s.max_coeff_residual());
    let label = pair.label.clone().unwrap_or_else(|| "right eigenpair".into());
    Ok(IdentityReport::from_residual(label, residual, scale, rel_tol))
}

pub fn check_left_eigenpair<T: Scalar>(
    s: &PolyVec<T>,
    pair: &EigenPair<T>,
    rel_tol: T,
) -> Result<EigenReport<T>, EigenError> {
    if pair.side != Side::Left {
        return Err(EigenError::WrongSide { expected: Side::Left });
    }
    let action = left_action(&pair.vector, s)?;
    let residual = action.try_sub(&pair.vector.mul_scalar_poly(&pair.value)?)?;
    let scale = pair.scale().max(s.max_coeff_residual());
    let label = pair.label.clone().unwrap_or_else(|| "left eigenpair".into());
    Ok(IdentityReport::from_residual(label, residual, scale, rel_tol))
}

/// Dispatches on the pair's side.
pub fn check_eigenpair<T: Scalar>(
    s: &PolyVec<T>,
    pair: &EigenPair<T>,
    rel_tol: T,
) -> Result<EigenReport<T>, EigenError> {
    match pair.side {
        Side::Right => check_right_eigenpair(s, pair, rel_tol),
        Side::Left => check_left_eigenpair(s, pair, rel_tol),
    }
}

/// Preservation condition for state feedback: `[v, g k] = 0`.
pub fn check_right_preservation<T: Scalar>(
    v: &PolyVec<T>,
    g: &PolyMatrix<T>,
    k: &PolyVec<T>,
    rel_tol: T,
) -> Result<EigenReport<T>, EigenError> {
    if g.cols() != k.len() || g.rows() != v.len() {
        return Err(EigenError::Dimension(format!(
            "g is {}x{}, k has {} entries, v has {}",
            g.rows(),
            g.cols(),
            k.len(),
            v.len()
        )));
    }
    let gk = g.mul_vec(k)?;
    let residual = lie_bracket(v, &gk)?;
    let scale = v
        .max_coeff_residual()
        .max(g.max_coeff_residual())
        .max(k.max_coeff_residual());
    Ok(IdentityReport::from_residual("right preservation [v, g k]", residual, scale, rel_tol))
}

/// Preservation condition for output injection:
/// `v^T dq/dz + ((dv/dz) q)^T = 0` with `q = q(z, H(z))` already composed.
pub fn check_left_preservation<T: Scalar>(
    v: &PolyVec<T>,
    q_of_z: &PolyVec<T>,
    rel_tol: T,
) -> Result<EigenReport<T>, EigenError> {
    let residual = left_action(v, q_of_z)?;
    let scale = v.max_coeff_residual().max(q_of_z.max_coeff_residual());
    Ok(IdentityReport::from_residual("left preservation", residual, scale, rel_tol))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StabilityOptions<T: Scalar> {
    /// Smallest admissible singular value of `[v_1(w) ... v_nu(w)]`.
    pub rank_tol: T,
    /// Largest admissible `Re lambda`; absorbs rounding on the boundary.
    pub sign_slack: T,
    /// A grid point with `Re lambda < -witness` certifies "not identically zero".
    pub witness: T,
    pub rel_tol: T,
}

impl<T: Scalar> Default for StabilityOptions<T> {
    fn default() -> Self {
        StabilityOptions {
            rank_tol: T::lit(1e-8),
            sign_slack: T::lit(1e-9),
            witness: T::lit(1e-6),
            rel_tol: default_rel_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CommutationRecord<T: Scalar> {
    pub i: usize,
    pub j: usize,
    pub max_residual: T,
    pub commute: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SignRecord<T: Scalar> {
    pub pair: usize,
    pub max_real_part: T,
    pub violations: Vec<Vec<T>>,
    pub witness: Option<Vec<T>>,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StabilityReport<T: Scalar> {
    pub grid_points: usize,
    pub commutation: Vec<CommutationRecord<T>>,
    pub commutation_ok: bool,
    pub min_singular_value: T,
    pub rank_failures: Vec<Vec<T>>,
    pub span_ok: bool,
    pub signs: Vec<SignRecord<T>>,
    pub sign_ok: bool,
    pub failures: Vec<String>,
    pub verdict: bool,
}

const MAX_LISTED_POINTS: usize = 10;

/// Checks pairwise commutation of the eigenvectors (as an identity), full
/// span of the eigenvectors and `Re lambda_i <= 0` with a strict witness on
/// the sampled region.
pub fn check_stability_conditions<T: Scalar>(
    pairs: &[EigenPair<T>],
    s: &PolyVec<T>,
    region: &SampleRegion<T>,
    grid: usize,
    opts: &StabilityOptions<T>,
) -> StabilityReport<T> {
    let nu = s.len();
    let mut failures = Vec::new();
    if pairs.len() != nu {
        failures.push(format!("expected {nu} eigenpairs, got {}", pairs.len()));
    }
    if region.dim() != s.num_vars() {
        failures.push(format!(
            "region has dimension {}, field has {} variables",
            region.dim(),
            s.num_vars()
        ));
    }

    let mut commutation = Vec::new();
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let rec = match lie_bracket(&pairs[i].vector, &pairs[j].vector) {
                Ok(b) => {
                    let scale = pairs[i].scale().max(pairs[j].scale());
                    let tol = identity_tolerance(opts.rel_tol, scale);
                    let m = b.max_coeff_residual();
                    CommutationRecord {
                        i,
                        j,
                        max_residual: m,
                        commute: m <= tol,
                    }
                }
                Err(_) => CommutationRecord {
                    i,
                    j,
                    max_residual: T::lit(f64::INFINITY),
                    commute: false,
                },
            };
            if !rec.commute {
                failures.push(format!("eigenvectors {i} and {j} do not commute"));
            }
            commutation.push(rec);
        }
    }
    let commutation_ok = commutation.iter().all(|c| c.commute);

    let points = if failures.is_empty() { region.grid(grid) } else { Vec::new() };
    let mut min_sv = T::lit(f64::INFINITY);
    let mut rank_failures = Vec::new();
    let mut signs: Vec<SignRecord<T>> = (0..pairs.len())
        .map(|pair| SignRecord {
            pair,
            max_real_part: T::lit(f64::NEG_INFINITY),
            violations: Vec::new(),
            witness: None,
            ok: true,
        })
        .collect();

    for p in &points {
        let cp: Vec<Complex<T>> = p.iter().map(|&x| Complex::new(x, T::zero())).collect();
        let mut cols = Vec::with_capacity(pairs.len());
        for pair in pairs {
            cols.push(pair.vector.eval(&cp).unwrap_or_else(|_| vec![Complex::zero(); nu]));
        }
        let m = DMatrix::from_fn(nu, pairs.len(), |r, c| cols[c][r]);
        let sv = m.singular_values();
        let smallest = sv.iter().copied().fold(T::lit(f64::INFINITY), |a, b| a.min(b));
        if smallest < min_sv {
            min_sv = smallest;
        }
        if !(smallest > opts.rank_tol) {
            rank_failures.push(p.clone());
        }
        for (rec, pair) in signs.iter_mut().zip(pairs) {
            let re = pair.value.eval(&cp).map(|v| v.re).unwrap_or_else(|_| T::lit(f64::NAN));
            if re > rec.max_real_part {
                rec.max_real_part = re;
            }
            if !(re <= opts.sign_slack) {
                rec.violations.push(p.clone());
            }
            if rec.witness.is_none() && re < -opts.witness {
                rec.witness = Some(p.clone());
            }
        }
    }
    if points.is_empty() && failures.is_empty() {
        failures.push("sampling region contains no grid points".into());
    }
    let span_ok = rank_failures.is_empty() && !points.is_empty();
    if !rank_failures.is_empty() {
        failures.push(format!(
            "eigenvectors lose rank at {} grid points (first {:?})",
            rank_failures.len(),
            rank_failures[0].iter().map(|v| v.as_f64()).collect::<Vec<_>>()
        ));
    }
    rank_failures.truncate(MAX_LISTED_POINTS);
    for rec in signs.iter_mut() {
        rec.ok = rec.violations.is_empty() && rec.witness.is_some();
        if !rec.violations.is_empty() {
            failures.push(format!(
                "Re lambda_{} > 0 at {} grid points (first {:?})",
                rec.pair,
                rec.violations.len(),
                rec.violations[0].iter().map(|v| v.as_f64()).collect::<Vec<_>>()
            ));
        } else if rec.witness.is_none() {
            failures.push(format!("Re lambda_{} is not certified nonzero on the region", rec.pair));
        }
        rec.violations.truncate(MAX_LISTED_POINTS);
    }
    let sign_ok = signs.iter().all(|r| r.ok) && !points.is_empty();
    StabilityReport {
        grid_points: points.len(),
        commutation,
        commutation_ok,
        min_singular_value: min_sv,
        rank_failures,
        span_ok,
        signs,
        sign_ok,
        verdict: failures.is_empty(),
        failures,
    }
}
