use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::operator::{DegreeOperator, LinearConstraint};
use super::SylvesterError;
use crate::poly::{PolyMatrix, PolyVec};
use crate::scalar::{modulus, Scalar};

/// `f(pi) + g(pi) l = (dpi/dw) s` for `pi: R^nu -> R^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RightSylvesterData<T: Scalar> {
    pub f: PolyVec<T>,
    pub g: PolyMatrix<T>,
    pub l: PolyVec<T>,
    pub s: PolyVec<T>,
}

/// `-s(-rho) = (drho/dz) F + r(-rho, H)` for `rho: R^N -> R^nu`; `r` has
/// `nu + M` variables ordered `(w, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DualSylvesterData<T: Scalar> {
    pub f: PolyVec<T>,
    pub h: PolyVec<T>,
    pub r: PolyVec<T>,
    pub s: PolyVec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", tag = "kind", rename_all = "lowercase")]
pub enum SylvesterProblem<T: Scalar> {
    Right(RightSylvesterData<T>),
    Dual(DualSylvesterData<T>),
}

fn nonzero_constant<T: Scalar>(v: &PolyVec<T>) -> bool {
    v.constant_part().iter().any(|c| modulus(c) > T::zero())
}

impl<T: Scalar> RightSylvesterData<T> {
    pub fn validate(&self) -> Result<(), SylvesterError<T>> {
        let n = self.f.len();
        let nu = self.s.len();
        let dim = |msg: String| Err(SylvesterError::Dimension(msg));
        if self.f.num_vars() != n {
            return dim(format!("f has {} entries in {} variables", n, self.f.num_vars()));
        }
        if self.s.num_vars() != nu {
            return dim(format!("s has {} entries in {} variables", nu, self.s.num_vars()));
        }
        if self.g.rows() != n || self.g.num_vars() != n {
            return dim(format!("g is {}x{} in {} variables, expected {n} rows in {n} variables", self.g.rows(), self.g.cols(), self.g.num_vars()));
        }
        if self.l.len() != self.g.cols() || self.l.num_vars() != nu {
            return dim(format!("l has {} entries in {} variables, expected {} in {nu}", self.l.len(), self.l.num_vars(), self.g.cols()));
        }
        if nonzero_constant(&self.f) || nonzero_constant(&self.l) || nonzero_constant(&self.s) {
            return Err(SylvesterError::Precondition("f(0), l(0) and s(0) must vanish".into()));
        }
        Ok(())
    }

    pub fn scale(&self) -> T {
        self.f
            .max_coeff_residual()
            .max(self.g.max_coeff_residual())
            .max(self.l.max_coeff_residual())
            .max(self.s.max_coeff_residual())
    }
}

impl<T: Scalar> DualSylvesterData<T> {
    pub fn validate(&self) -> Result<(), SylvesterError<T>> {
        let nz = self.f.len();
        let nu = self.s.len();
        let dim = |msg: String| Err(SylvesterError::Dimension(msg));
        if self.f.num_vars() != nz {
            return dim(format!("F has {} entries in {} variables", nz, self.f.num_vars()));
        }
        if self.s.num_vars() != nu {
            return dim(format!("s has {} entries in {} variables", nu, self.s.num_vars()));
        }
        if self.h.num_vars() != nz {
            return dim(format!("H is in {} variables, expected {nz}", self.h.num_vars()));
        }
        if self.r.len() != nu || self.r.num_vars() != nu + self.h.len() {
            return dim(format!(
                "r has {} entries in {} variables, expected {nu} in {}",
                self.r.len(),
                self.r.num_vars(),
                nu + self.h.len()
            ));
        }
        if nonzero_constant(&self.f) || nonzero_constant(&self.h) || nonzero_constant(&self.r) || nonzero_constant(&self.s) {
            return Err(SylvesterError::Precondition("F(0), H(0), r(0,0) and s(0) must vanish".into()));
        }
        Ok(())
    }

    pub fn scale(&self) -> T {
        self.f
            .max_coeff_residual()
            .max(self.h.max_coeff_residual())
            .max(self.r.max_coeff_residual())
            .max(self.s.max_coeff_residual())
    }
}

impl<T: Scalar> SylvesterProblem<T> {
    pub fn validate(&self) -> Result<(), SylvesterError<T>> {
        match self {
            SylvesterProblem::Right(d) => d.validate(),
            SylvesterProblem::Dual(d) => d.validate(),
        }
    }

    pub fn scale(&self) -> T {
        match self {
            SylvesterProblem::Right(d) => d.scale(),
            SylvesterProblem::Dual(d) => d.scale(),
        }
    }

    fn unknown_shape(&self) -> (usize, usize) {
        match self {
            SylvesterProblem::Right(d) => (d.f.len(), d.s.len()),
            SylvesterProblem::Dual(d) => (d.s.len(), d.f.len()),
        }
    }
}

/// `f(pi) + g(pi) l - (dpi/dw) s`, optionally truncated at total degree `trunc`.
pub fn right_residual<T: Scalar>(
    d: &RightSylvesterData<T>,
    pi: &PolyVec<T>,
    trunc: Option<u32>,
) -> Result<PolyVec<T>, SylvesterError<T>> {
    if pi.len() != d.f.len() || pi.num_vars() != d.s.len() {
        return Err(SylvesterError::Dimension(format!(
            "pi has {} entries in {} variables, expected {} in {}",
            pi.len(),
            pi.num_vars(),
            d.f.len(),
            d.s.len()
        )));
    }
    let out = match trunc {
        Some(k) => {
            let fp = d.f.compose_truncated(pi, k)?;
            let gp = d.g.compose_truncated(pi, k)?.mul_vec(&d.l)?.truncate(k);
            let jp = pi.truncate(k).jacobian().mul_vec(&d.s)?.truncate(k);
            fp.try_add(&gp)?.try_sub(&jp)?
        }
        None => {
            let fp = d.f.compose(pi)?;
            let gp = d.g.compose(pi)?.mul_vec(&d.l)?;
            let jp = pi.jacobian().mul_vec(&d.s)?;
            fp.try_add(&gp)?.try_sub(&jp)?
        }
    };
    Ok(out)
}

/// `-s(-rho) - (drho/dz) F - r(-rho, H)`, optionally truncated.
pub fn dual_residual<T: Scalar>(
    d: &DualSylvesterData<T>,
    rho: &PolyVec<T>,
    trunc: Option<u32>,
) -> Result<PolyVec<T>, SylvesterError<T>> {
    if rho.len() != d.s.len() || rho.num_vars() != d.f.len() {
        return Err(SylvesterError::Dimension(format!(
            "rho has {} entries in {} variables, expected {} in {}",
            rho.len(),
            rho.num_vars(),
            d.s.len(),
            d.f.len()
        )));
    }
    let neg = -rho;
    let args = neg.concat(&d.h)?;
    let out = match trunc {
        Some(k) => {
            let sp = d.s.compose_truncated(&neg, k)?;
            let jp = rho.truncate(k).jacobian().mul_vec(&d.f)?.truncate(k);
            let rp = d.r.compose_truncated(&args, k)?;
            (-&sp).try_sub(&jp)?.try_sub(&rp)?
        }
        None => {
            let sp = d.s.compose(&neg)?;
            let jp = rho.jacobian().mul_vec(&d.f)?;
            let rp = d.r.compose(&args)?;
            (-&sp).try_sub(&jp)?.try_sub(&rp)?
        }
    };
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SeriesOptions<T: Scalar> {
    pub degree: u32,
    /// Relative singular-value threshold of the per-degree operators.
    pub resonance_rel: T,
    /// Selects the free part of the degree-one coefficients when the
    /// degree-one operator is singular. Empty means minimum norm.
    #[serde(default)]
    pub degree_one: Vec<LinearConstraint<T>>,
    /// Accept a singular operator at degree >= 2 when the right-hand side is
    /// consistent (minimum-norm solution, flagged non-unique).
    pub accept_consistent_resonance: bool,
}

impl<T: Scalar> SeriesOptions<T> {
    pub fn new(degree: u32) -> Self {
        SeriesOptions {
            degree,
            resonance_rel: T::lit(T::RESONANCE_REL),
            degree_one: Vec::new(),
            accept_consistent_resonance: true,
        }
    }

    pub fn with_constraint(mut self, c: LinearConstraint<T>) -> Self {
        self.degree_one.push(c);
        self
    }

    pub fn strict(mut self) -> Self {
        self.accept_consistent_resonance = false;
        self
    }
}

impl<T: Scalar> Default for SeriesOptions<T> {
    fn default() -> Self {
        Self::new(5)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SylvesterSolution<T: Scalar> {
    pub pi: PolyVec<T>,
    pub truncation_degree: u32,
    /// Entry `k - 1` is the max coefficient of the degree-`k` residual.
    pub per_degree_residual: Vec<T>,
    /// Smallest singular value over all per-degree solves.
    pub resonance_margin: T,
    pub nonunique: bool,
    pub nonunique_degrees: Vec<u32>,
    /// Residual of the degree-one selection constraints, when given.
    pub constraint_residual: Option<T>,
}

impl<T: Scalar> SylvesterSolution<T> {
    pub fn max_residual(&self) -> T {
        self.per_degree_residual.iter().copied().fold(T::zero(), |a, b| a.max(b))
    }

    /// Degree-one coefficient matrix.
    pub fn linear_part(&self) -> DMatrix<Complex<T>> {
        self.pi.linear_part()
    }
}

fn per_degree<T: Scalar>(res: &PolyVec<T>, n: u32) -> Vec<T> {
    (1..=n).map(|k| res.homogeneous_part(k).max_coeff_residual()).collect()
}

fn solve_series<T, R>(
    m: DMatrix<Complex<T>>,
    q: DMatrix<Complex<T>>,
    shape: (usize, usize),
    scale: T,
    opts: &SeriesOptions<T>,
    residual: R,
) -> Result<SylvesterSolution<T>, SylvesterError<T>>
where
    T: Scalar,
    R: Fn(&PolyVec<T>, u32) -> Result<PolyVec<T>, SylvesterError<T>>,
{
    if opts.degree == 0 {
        return Err(SylvesterError::Precondition("truncation degree must be at least 1".into()));
    }
    let mut pi = PolyVec::zeros(shape.0, shape.1);
    let mut margin = T::lit(f64::INFINITY);
    let mut nonunique_degrees = Vec::new();
    let mut constraint_residual = None;
    for k in 1..=opts.degree {
        let e = residual(&pi, k)?.homogeneous_part(k);
        let op = DegreeOperator::assemble(&m, &q, k);
        let rhs = -op.flatten(&e);
        let constraints: &[LinearConstraint<T>] = if k == 1 { &opts.degree_one } else { &[] };
        let out = op.solve(&rhs, opts.resonance_rel, constraints)?;
        margin = margin.min(out.sigma_min);
        if out.singular {
            if k >= 2 {
                let rhs_scale = rhs.iter().map(modulus).fold(T::zero(), |a, b| a.max(b));
                let tol = T::lit(T::IDENTITY_REL) * (T::one() + rhs_scale + scale);
                if !opts.accept_consistent_resonance || !(out.consistency_residual <= tol) {
                    return Err(SylvesterError::Resonance {
                        degree: k,
                        margin: out.sigma_min,
                    });
                }
            }
            nonunique_degrees.push(k);
        }
        if k == 1 {
            constraint_residual = out.constraint_residual;
        }
        pi = pi.try_add(&op.unflatten(&out.x)?)?;
    }
    let res = residual(&pi, opts.degree)?;
    Ok(SylvesterSolution {
        pi,
        truncation_degree: opts.degree,
        per_degree_residual: per_degree(&res, opts.degree),
        resonance_margin: margin,
        nonunique: !nonunique_degrees.is_empty(),
        nonunique_degrees,
        constraint_residual,
    })
}

/// Degree-by-degree series solution of `f(pi) + g(pi) l = (dpi/dw) s`.
///
/// At degree `k` the new component solves `A pi_k - (dpi_k/dw) S w = -E_k`
/// where `E_k` is the degree-`k` residual of the lower-degree truncation.
pub fn solve_nonlinear_sylvester_series<T: Scalar>(
    data: &RightSylvesterData<T>,
    opts: &SeriesOptions<T>,
) -> Result<SylvesterSolution<T>, SylvesterError<T>> {
    data.validate()?;
    let a = data.f.linear_part();
    let s = data.s.linear_part();
    let shape = (data.f.len(), data.s.len());
    solve_series(a, s, shape, data.scale(), opts, |pi, k| right_residual(data, pi, Some(k)))
}

/// Degree-by-degree series solution of `-s(-rho) = (drho/dz) F + r(-rho, H)`.
///
/// The degree-`k` operator is `rho_k |-> (S + R) rho_k - (drho_k/dz) A z`
/// with `S`, `A` the linearizations of `s`, `F` and `R = dr/dw (0, 0)`.
pub fn solve_dual_sylvester_series<T: Scalar>(
    data: &DualSylvesterData<T>,
    opts: &SeriesOptions<T>,
) -> Result<SylvesterSolution<T>, SylvesterError<T>> {
    data.validate()?;
    let nu = data.s.len();
    let s = data.s.linear_part();
    let r_full = data.r.linear_part();
    let m = s + r_full.columns(0, nu);
    let a = data.f.linear_part();
    let shape = (nu, data.f.len());
    solve_series(m, a, shape, data.scale(), opts, |rho, k| dual_residual(data, rho, Some(k)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ResidualReport<T: Scalar> {
    pub residual: PolyVec<T>,
    pub max_residual: T,
    pub per_degree_residual: Vec<T>,
    pub tolerance: T,
    pub verdict: bool,
}

/// Substitutes a candidate `pi` (or `rho`) into the PDE. With `trunc`, only
/// terms of total degree `<= trunc` are kept.
pub fn sylvester_residual<T: Scalar>(
    candidate: &PolyVec<T>,
    problem: &SylvesterProblem<T>,
    trunc: Option<u32>,
) -> Result<ResidualReport<T>, SylvesterError<T>> {
    let (rows, vars) = problem.unknown_shape();
    if candidate.len() != rows || candidate.num_vars() != vars {
        return Err(SylvesterError::Dimension(format!(
            "candidate has {} entries in {} variables, expected {rows} in {vars}",
            candidate.len(),
            candidate.num_vars()
        )));
    }
    let residual = match problem {
        SylvesterProblem::Right(d) => right_residual(d, candidate, trunc)?,
        SylvesterProblem::Dual(d) => dual_residual(d, candidate, trunc)?,
    };
    let top = trunc.unwrap_or_else(|| residual.degree().max(1) as u32);
    let max_residual = residual.max_coeff_residual();
    let scale = problem.scale().max(candidate.max_coeff_residual());
    let tolerance = T::lit(T::IDENTITY_REL) * (T::one() + scale);
    Ok(ResidualReport {
        per_degree_residual: per_degree(&residual, top),
        verdict: max_residual <= tolerance,
        residual,
        max_residual,
        tolerance,
    })
}

pub fn solution_residual<T: Scalar>(
    sol: &SylvesterSolution<T>,
    problem: &SylvesterProblem<T>,
) -> Result<ResidualReport<T>, SylvesterError<T>> {
    sylvester_residual(&sol.pi, problem, Some(sol.truncation_degree))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use crate::scalar::cplx;
    use crate::sylvester::{solve_linear_sylvester, LinearSylvesterProblem};
    use nalgebra::DVector;

    type P = Polynomial<f64>;

    fn x(n: usize, i: usize) -> P {
        P::var(n, i)
    }

    fn pv(e: Vec<P>) -> PolyVec<f64> {
        PolyVec::new(e).unwrap()
    }

    fn example_data() -> RightSylvesterData<f64> {
        let (x1, x2) = (x(2, 0), x(2, 1));
        let f = pv(vec![
            &(&(&(&(-&x1) - &(&x1 * &x1).scale_real(0.5)) + &(&x1 * &x2)) + &x2.scale_real(2.0)) - &(&x2 * &x2),
            &x2 - &(&x2 * &x2).scale_real(0.5),
        ]);
        let w = x(1, 0);
        RightSylvesterData {
            f,
            g: PolyMatrix::from_column(&PolyVec::constant(&[cplx(1.0, 0.0), cplx(1.0, 0.0)], 2)),
            l: pv(vec![w.scale_real(-2.0)]),
            s: pv(vec![&(-&w) - &(&w * &w).scale_real(0.5)]),
        }
    }

    fn align_ones() -> LinearConstraint<f64> {
        LinearConstraint::align(
            DVector::from_vec(vec![cplx(1.0, 0.0)]),
            DVector::from_vec(vec![cplx(1.0, 0.0), cplx(1.0, 0.0)]),
        )
    }

    fn observer_data() -> DualSylvesterData<f64> {
        let z = |i| x(4, i);
        let f = pv(vec![
            &(&(-&z(0)) - &z(1).scale_real(2.0)) - &(&z(1) * &z(1)).scale_real(3.0),
            z(1),
            &(&(&(-&z(2)) - &z(3).scale_real(2.0)) - &(&z(1) * &z(3)).scale_real(6.0)) - &(&z(3) * &z(3)).scale_real(3.0),
            z(3),
        ]);
        let h = pv(vec![z(1), P::zero(4)]);
        let wy = |i| x(6, i);
        let r = pv(vec![
            P::zero(6),
            P::zero(6),
            &(&wy(4) * &wy(3)).scale_real(-6.0) - &wy(3).scale_real(2.0),
            wy(3).scale_real(2.0),
        ]);
        let s = -&PolyVec::identity(4);
        DualSylvesterData { f, h, r, s }
    }

    fn observer_rho() -> PolyVec<f64> {
        let z = |i| x(4, i);
        pv(vec![P::zero(4), P::zero(4), &z(2) + &(&z(3) * &z(3)), z(3)])
    }

    fn observer_seed() -> LinearConstraint<f64> {
        LinearConstraint::seed(observer_rho().linear_part())
    }

    #[test]
    fn example_series_with_alignment_terminates() {
        let sol = solve_nonlinear_sylvester_series(&example_data(), &SeriesOptions::new(5).with_constraint(align_ones())).unwrap();
        let w = x(1, 0);
        let want = pv(vec![w.clone(), w]);
        assert!(sol.pi.try_sub(&want).unwrap().max_coeff_residual() <= 1e-10);
        assert_eq!(sol.per_degree_residual.len(), 5);
        assert!(sol.max_residual() <= 1e-10);
        assert_eq!(sol.nonunique_degrees, vec![1]);
        assert!(sol.constraint_residual.unwrap() < 1e-12);
    }

    #[test]
    fn example_series_min_norm_is_a_different_solution() {
        let sol = solve_nonlinear_sylvester_series(&example_data(), &SeriesOptions::new(5)).unwrap();
        let lin = sol.linear_part();
        assert!(lin[(0, 0)].norm() < 1e-12 && (lin[(1, 0)].re - 1.0).abs() < 1e-12);
        assert!(sol.nonunique);
        assert!(sol.max_residual() <= 1e-10);
    }

    #[test]
    fn closed_form_residuals() {
        let d = SylvesterProblem::Right(example_data());
        let w = x(1, 0);
        let good = sylvester_residual(&pv(vec![w.clone(), w.clone()]), &d, None).unwrap();
        assert_eq!(good.max_residual, 0.0);
        let bad = sylvester_residual(&pv(vec![w.clone(), w.scale_real(2.0)]), &d, None).unwrap();
        assert!(!bad.verdict);
        assert!(bad.per_degree_residual[0] > 0.5);
    }

    #[test]
    fn linear_reduction_agrees_with_kronecker() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let lm = DMatrix::from_row_slice(1, 1, &[1.0]);
        let sm = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let pi = solve_linear_sylvester(&LinearSylvesterProblem::new(a.clone(), b.clone(), lm.clone(), sm.clone()).unwrap()).unwrap();
        let c = |m: &DMatrix<f64>| m.map(|v| cplx::<f64>(v, 0.0));
        let data = RightSylvesterData {
            f: PolyVec::linear(&c(&a)),
            g: PolyMatrix::constant(&c(&b), 2),
            l: PolyVec::linear(&c(&lm)),
            s: PolyVec::linear(&c(&sm)),
        };
        let sol = solve_nonlinear_sylvester_series(&data, &SeriesOptions::new(3)).unwrap();
        assert!(!sol.nonunique);
        assert_eq!(sol.pi.degree(), 1);
        let lin = sol.linear_part();
        for i in 0..2 {
            let diff: f64 = lin[(i, 0)].re - pi[(i, 0)];
            assert!(diff.abs() < 1e-10);
        }
    }

    #[test]
    fn degree_two_resonance_raises() {
        let (x1, x2) = (x(2, 0), x(2, 1));
        let w = x(1, 0);
        let data = RightSylvesterData {
            f: pv(vec![&x1.scale_real(-2.0) + &(&x2 * &x2), x2.scale_real(-3.0)]),
            g: PolyMatrix::from_column(&PolyVec::constant(&[cplx(0.0, 0.0), cplx(1.0, 0.0)], 2)),
            l: pv(vec![w.clone()]),
            s: pv(vec![-&w]),
        };
        match solve_nonlinear_sylvester_series(&data, &SeriesOptions::new(4)) {
            Err(SylvesterError::Resonance { degree, margin }) => {
                assert_eq!(degree, 2);
                assert!(margin < 1e-10);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_terms_rejected() {
        let mut d = example_data();
        d.l = pv(vec![&x(1, 0) + &P::one(1)]);
        assert!(matches!(
            solve_nonlinear_sylvester_series(&d, &SeriesOptions::new(2)),
            Err(SylvesterError::Precondition(_))
        ));
    }

    #[test]
    fn observer_closed_form_satisfies_dual_equation() {
        let rep = sylvester_residual(&observer_rho(), &SylvesterProblem::Dual(observer_data()), None).unwrap();
        assert_eq!(rep.max_residual, 0.0);
    }

    #[test]
    fn observer_dual_series_with_seed() {
        for n in [3, 5] {
            let sol = solve_dual_sylvester_series(&observer_data(), &SeriesOptions::new(n).with_constraint(observer_seed())).unwrap();
            assert!(sol.pi.try_sub(&observer_rho()).unwrap().max_coeff_residual() <= 1e-10, "{}", n);
            assert!(sol.max_residual() <= 1e-10);
            // degree one and degree three are both singular here
            assert!(sol.nonunique_degrees.contains(&1) && sol.nonunique_degrees.contains(&3));
        }
    }

    #[test]
    fn observer_dual_strict_mode_reports_degree_three() {
        let opts = SeriesOptions::new(3).with_constraint(observer_seed()).strict();
        assert!(matches!(
            solve_dual_sylvester_series(&observer_data(), &opts),
            Err(SylvesterError::Resonance { degree: 3, .. })
        ));
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let mut d = observer_data();
        d.r = PolyVec::zeros(4, 6);
        let sol = solve_dual_sylvester_series(&d, &SeriesOptions::new(3)).unwrap();
        assert!(sol.pi.is_zero());
    }

    #[test]
    fn truncation_consistency() {
        let opts3 = SeriesOptions::new(3);
        let opts5 = SeriesOptions::new(5);
        let a = solve_nonlinear_sylvester_series(&example_data(), &opts3).unwrap();
        let b = solve_nonlinear_sylvester_series(&example_data(), &opts5).unwrap();
        assert!(a.pi.try_sub(&b.pi.truncate(3)).unwrap().max_coeff_residual() < 1e-12);
    }
}
