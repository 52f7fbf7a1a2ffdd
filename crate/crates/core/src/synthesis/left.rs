use serde::{Deserialize, Serialize};

use super::{jacobian_rank, nonvanishing, AssignmentReport, ExoSystem, PreservationRecord, SynthesisError, Validity};
use crate::eigen::{check_left_eigenpair, check_left_preservation, EigenPair, IdentityReport, Side};
use crate::poly::PolyVec;
use crate::region::SampleRegion;
use crate::scalar::{modulus, Scalar};
use crate::sylvester::{
    solve_dual_sylvester_series, sylvester_residual, DualSylvesterData, SeriesOptions, SylvesterError,
    SylvesterProblem,
};

/// Plant `x' = f(x), y = h(x)` and observer `xi' = f(xi) + p(xi, y)`; `p`
/// has `n + m` variables ordered `(xi, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ObserverProblem<T: Scalar> {
    pub f: PolyVec<T>,
    pub h: PolyVec<T>,
    pub p: PolyVec<T>,
}

impl<T: Scalar> ObserverProblem<T> {
    /// Validates dimensions, `f(0) = 0`, `h(0) = 0` and `p(x, h(x)) = 0`.
    pub fn new(f: PolyVec<T>, h: PolyVec<T>, p: PolyVec<T>) -> Result<Self, SynthesisError<T>> {
        let n = f.len();
        let m = h.len();
        if f.num_vars() != n || h.num_vars() != n || p.len() != n || p.num_vars() != n + m {
            return Err(SynthesisError::Dimension(format!(
                "f: {} entries in {} vars, h: {} in {}, p: {} in {} (expected {n} in {})",
                n,
                f.num_vars(),
                m,
                h.num_vars(),
                p.len(),
                p.num_vars(),
                n + m
            )));
        }
        let nz = |v: &PolyVec<T>| v.constant_part().iter().any(|c| modulus(c) > T::zero());
        if nz(&f) || nz(&h) {
            return Err(SynthesisError::Precondition("f(0) and h(0) must vanish".into()));
        }
        let prob = ObserverProblem { f, h, p };
        let r = prob.injection_on_plant()?;
        let scale = prob.p.max_coeff_residual().max(prob.h.max_coeff_residual());
        if r.max_coeff_residual() > T::lit(T::IDENTITY_REL) * (T::one() + scale) {
            return Err(SynthesisError::Precondition(format!(
                "p(x, h(x)) does not vanish identically (max coefficient {:e})",
                r.max_coeff_residual().as_f64()
            )));
        }
        Ok(prob)
    }

    pub fn state_dim(&self) -> usize {
        self.f.len()
    }

    pub fn output_dim(&self) -> usize {
        self.h.len()
    }

    /// `p(x, h(x))`.
    pub fn injection_on_plant(&self) -> Result<PolyVec<T>, SynthesisError<T>> {
        let args = PolyVec::identity(self.f.len()).concat(&self.h)?;
        Ok(self.p.compose(&args)?)
    }

    /// Observer vector field in `(xi, y)`: `f(xi) + p(xi, y)`.
    pub fn observer_field(&self) -> Result<PolyVec<T>, SynthesisError<T>> {
        let n = self.f.len();
        let fx = self.f.embed(n + self.h.len(), 0)?;
        Ok(fx.try_add(&self.p)?)
    }
}

/// Error coordinates `z = (x, e)`, `e = xi - x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ErrorSystem<T: Scalar> {
    /// `F(z) = [f(x); f(x + e) - f(x)]`.
    pub f: PolyVec<T>,
    /// `q(z, H(z)) = [0; p(x + e, h(x))]`.
    pub q: PolyVec<T>,
    /// `H(z) = [h(x); 0]`.
    pub h: PolyVec<T>,
    /// `F + q`.
    pub closed: PolyVec<T>,
}

pub fn build_error_system<T: Scalar>(prob: &ObserverProblem<T>) -> Result<ErrorSystem<T>, SynthesisError<T>> {
    let n = prob.state_dim();
    let m = prob.output_dim();
    let nz = 2 * n;
    let x = PolyVec::new((0..n).map(|i| crate::poly::Polynomial::var(nz, i)).collect())?;
    let e = PolyVec::new((0..n).map(|i| crate::poly::Polynomial::var(nz, n + i)).collect())?;
    let xi = x.try_add(&e)?;
    let fx = prob.f.compose(&x)?;
    let fxi = prob.f.compose(&xi)?;
    let f = fx.concat(&fxi.try_sub(&fx)?)?;
    let hx = prob.h.compose(&x)?;
    let h = hx.concat(&PolyVec::zeros(m, nz))?;
    let pz = prob.p.compose(&xi.concat(&hx)?)?;
    let q = PolyVec::zeros(n, nz).concat(&pz)?;
    let closed = f.try_add(&q)?;
    Ok(ErrorSystem { f, q, h, closed })
}

/// `lambda~(z) = lambda(-rho(z))`, `v~(z)^T = -v(-rho(z))^T (drho/dz)`.
pub fn construct_left_candidate<T: Scalar>(
    rho: &PolyVec<T>,
    target: &EigenPair<T>,
) -> Result<EigenPair<T>, SynthesisError<T>> {
    if target.side != Side::Left {
        return Err(SynthesisError::Precondition("target must be a left eigenpair".into()));
    }
    if target.vector.len() != rho.len() || target.vector.num_vars() != rho.len() {
        return Err(SynthesisError::Dimension(format!(
            "target lives on R^{}, rho maps into R^{}",
            target.vector.len(),
            rho.len()
        )));
    }
    let neg = -rho;
    let value = target.value.compose(&neg)?;
    let v_at = target.vector.compose(&neg)?;
    let vector = -&rho.jacobian().vec_mul(&v_at)?;
    if vector.is_zero() {
        return Err(SynthesisError::ZeroCandidate);
    }
    Ok(EigenPair::left(value, vector)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LeftOptions<T: Scalar> {
    pub series: SeriesOptions<T>,
    /// Closed-form `rho` to certify instead of solving.
    #[serde(default)]
    pub rho: Option<PolyVec<T>>,
    /// `r(w, y)` in `nu + M` variables. Without it the dual equation is
    /// solved against the closed loop `F + q` with `r = 0`, which is the
    /// dual equation with `r` defined by the injection condition.
    #[serde(default)]
    pub r: Option<PolyVec<T>>,
    /// Closed-loop left pairs claimed by the user, checked as stated.
    #[serde(default)]
    pub stated: Vec<EigenPair<T>>,
    pub rel_tol: T,
    #[serde(default)]
    pub region: Option<SampleRegion<T>>,
    pub grid: usize,
}

impl<T: Scalar> Default for LeftOptions<T> {
    fn default() -> Self {
        LeftOptions {
            series: SeriesOptions::default(),
            rho: None,
            r: None,
            stated: Vec::new(),
            rel_tol: T::lit(T::IDENTITY_REL),
            region: None,
            grid: 5,
        }
    }
}

/// Partial left eigenvalue assignment for the observer error system.
pub fn assign_left<T: Scalar>(
    prob: &ObserverProblem<T>,
    exo: &ExoSystem<T>,
    preserve: &[EigenPair<T>],
    opts: &LeftOptions<T>,
) -> Result<AssignmentReport<T>, SynthesisError<T>> {
    let es = build_error_system(prob)?;
    let nu = exo.dim();
    let nz = es.f.len();
    for t in &exo.targets {
        if t.side != Side::Left {
            return Err(SynthesisError::Precondition("exo-system targets must be left pairs".into()));
        }
    }
    for c in opts.stated.iter().chain(preserve) {
        if c.side != Side::Left || c.vector.len() != nz || c.vector.num_vars() != nz {
            return Err(SynthesisError::Dimension(format!(
                "stated and preserved pairs must be left pairs on R^{nz}"
            )));
        }
    }
    let mut report = AssignmentReport::empty(Side::Left);
    let region = opts.region.clone().unwrap_or_else(|| SampleRegion::cube(nz, T::one()));

    let data = match &opts.r {
        Some(r) => DualSylvesterData {
            f: es.f.clone(),
            h: es.h.clone(),
            r: r.clone(),
            s: exo.s.clone(),
        },
        None => DualSylvesterData {
            f: es.closed.clone(),
            h: es.h.clone(),
            r: PolyVec::zeros(nu, nu + es.h.len()),
            s: exo.s.clone(),
        },
    };
    data.validate()?;
    let problem = SylvesterProblem::Dual(data.clone());

    let (rho, trunc) = match &opts.rho {
        Some(rho) => {
            report.solution_source = "closed-form".into();
            (rho.clone(), None)
        }
        None => {
            report.solution_source = "series".into();
            match solve_dual_sylvester_series(&data, &opts.series) {
                Ok(sol) => {
                    let rho = sol.pi.clone();
                    let n = sol.truncation_degree;
                    report.solution = Some(sol);
                    (rho, Some(n))
                }
                Err(SylvesterError::Resonance { degree, margin }) => {
                    report.failures.push(format!(
                        "dual Sylvester equation: resonance at degree {degree} (margin {:e})",
                        margin.as_f64()
                    ));
                    report.finish();
                    return Ok(report);
                }
                Err(e) => return Err(e.into()),
            }
        }
    };
    report.embedding = Some(rho.clone());

    let res = sylvester_residual(&rho, &problem, trunc)?;
    let scale = problem.scale().max(rho.max_coeff_residual());
    let syl = IdentityReport::from_residual("dual Sylvester equation", res.residual, scale, opts.rel_tol);
    if !syl.verdict {
        report.failures.push(format!("dual Sylvester equation residual {:e}", syl.max_residual.as_f64()));
    }
    report.sylvester_check = Some(syl);

    if let Some(r) = &opts.r {
        let args = (-&rho).concat(&es.h)?;
        let (lhs, rhs) = match trunc {
            Some(n) => (
                r.compose_truncated(&args, n)?,
                rho.jacobian().mul_vec(&es.q)?.truncate(n),
            ),
            None => (r.compose(&args)?, rho.jacobian().mul_vec(&es.q)?),
        };
        let scale = r.max_coeff_residual().max(rho.max_coeff_residual()).max(es.q.max_coeff_residual());
        let rep = IdentityReport::from_residual(
            "injection consistency r(-rho, H) = (drho/dz) q",
            lhs.try_sub(&rhs)?,
            scale,
            opts.rel_tol,
        );
        if !rep.verdict {
            report.failures.push(format!("injection consistency residual {:e}", rep.max_residual.as_f64()));
        }
        report.feedback_check = Some(rep);
    }

    let mut constructed_ok = true;
    for (i, t) in exo.targets.iter().enumerate() {
        match construct_left_candidate(&rho, t) {
            Ok(c) => {
                let nv = nonvanishing(&c.vector, &region, opts.grid);
                if !nv.ok {
                    report.failures.push(format!(
                        "constructed eigenvector #{i} vanishes on the sampled region (min norm {:e})",
                        nv.min_norm.as_f64()
                    ));
                }
                let mut rep = check_left_eigenpair(&es.closed, &c, opts.rel_tol)?;
                rep.label = format!("constructed candidate #{i}");
                constructed_ok &= rep.verdict;
                report.candidate_checks.push(rep);
                report.constructed.push(c.with_label(format!("constructed #{i}")));
            }
            Err(SynthesisError::ZeroCandidate) => {
                constructed_ok = false;
                report.failures.push(format!("constructed eigenvector #{i} is identically zero"));
            }
            Err(e) => return Err(e),
        }
    }

    for (i, c) in opts.stated.iter().enumerate() {
        let mut rep = check_left_eigenpair(&es.closed, c, opts.rel_tol)?;
        rep.label = c.label.clone().unwrap_or_else(|| format!("stated pair #{i}"));
        if !rep.verdict {
            report.failures.push(format!(
                "{} is not a closed-loop left eigenpair (residual {:e})",
                rep.label,
                rep.max_residual.as_f64()
            ));
        }
        report.candidate_checks.push(rep);
    }

    for (i, p) in preserve.iter().enumerate() {
        let label = p.label.clone().unwrap_or_else(|| format!("preserved pair #{i}"));
        let open_loop = check_left_eigenpair(&es.f, p, opts.rel_tol)?;
        let preservation = check_left_preservation(&p.vector, &es.q, opts.rel_tol)?;
        let closed_loop = check_left_eigenpair(&es.closed, p, opts.rel_tol)?;
        let verdict = open_loop.verdict && preservation.verdict && closed_loop.verdict;
        if !verdict {
            report.failures.push(format!("{label}: preservation fails"));
        }
        report.preservation_checks.push(PreservationRecord {
            label,
            open_loop,
            preservation,
            closed_loop,
            verdict,
        });
    }

    // Full rank of drho/dz is only sufficient for v~ != 0, which is checked
    // directly above, so the rank record is informational here.
    report.rank_check = Some(jacobian_rank(&rho, nu, &region, opts.grid));
    report.closed_loop = Some(es.closed);

    report.validity = if constructed_ok && !exo.targets.is_empty() {
        Validity::Global
    } else if report.failures.is_empty() {
        Validity::OnImage
    } else {
        Validity::Failed
    };
    report.finish();
    Ok(report)
}
