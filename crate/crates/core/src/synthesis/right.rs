use serde::{Deserialize, Serialize};

use super::{
    jacobian_rank, nonvanishing, scalar_vec, AssignmentReport, ExoSystem, PreservationRecord, PushforwardRecord,
    SynthesisError, Validity,
};
use crate::eigen::{check_right_eigenpair, check_right_preservation, EigenPair, IdentityReport, Side};
use crate::poly::{PolyMatrix, PolyVec};
use crate::region::SampleRegion;
use crate::scalar::{modulus, Scalar};
use crate::sylvester::{
    solve_nonlinear_sylvester_series, sylvester_residual, LinearConstraint, RightSylvesterData, SeriesOptions,
    SylvesterError, SylvesterProblem,
};

/// `x' = f(x) + g(x) u`, optionally closed with `u = k(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ControlSystem<T: Scalar> {
    pub f: PolyVec<T>,
    pub g: PolyMatrix<T>,
    #[serde(default)]
    pub k: Option<PolyVec<T>>,
}

fn has_constant<T: Scalar>(v: &PolyVec<T>) -> bool {
    v.constant_part().iter().any(|c| modulus(c) > T::zero())
}

impl<T: Scalar> ControlSystem<T> {
    pub fn new(f: PolyVec<T>, g: PolyMatrix<T>) -> Result<Self, SynthesisError<T>> {
        let n = f.len();
        if f.num_vars() != n || g.rows() != n || g.num_vars() != n {
            return Err(SynthesisError::Dimension(format!(
                "f has {} entries in {} variables, g is {}x{} in {} variables",
                n,
                f.num_vars(),
                g.rows(),
                g.cols(),
                g.num_vars()
            )));
        }
        if has_constant(&f) {
            return Err(SynthesisError::Precondition("f(0) must vanish".into()));
        }
        Ok(ControlSystem { f, g, k: None })
    }

    pub fn with_feedback(mut self, k: PolyVec<T>) -> Result<Self, SynthesisError<T>> {
        self.check_feedback(&k)?;
        self.k = Some(k);
        Ok(self)
    }

    pub fn state_dim(&self) -> usize {
        self.f.len()
    }

    pub fn input_dim(&self) -> usize {
        self.g.cols()
    }

    fn check_feedback(&self, k: &PolyVec<T>) -> Result<(), SynthesisError<T>> {
        if k.len() != self.g.cols() || k.num_vars() != self.f.len() {
            return Err(SynthesisError::Dimension(format!(
                "k has {} entries in {} variables, expected {} in {}",
                k.len(),
                k.num_vars(),
                self.g.cols(),
                self.f.len()
            )));
        }
        if has_constant(k) {
            return Err(SynthesisError::Precondition(
                "k(0) must vanish; constant inputs belong to open-loop simulation".into(),
            ));
        }
        Ok(())
    }
}

/// `f + g k`.
pub fn build_closed_loop<T: Scalar>(sys: &ControlSystem<T>) -> Result<PolyVec<T>, SynthesisError<T>> {
    let k = sys.k.as_ref().ok_or(SynthesisError::MissingFeedback)?;
    sys.check_feedback(k)?;
    Ok(sys.f.try_add(&sys.g.mul_vec(k)?)?)
}

/// Residual of `k(pi(w)) = l(w)`.
pub fn verify_feedback_matching<T: Scalar>(
    k: &PolyVec<T>,
    pi: &PolyVec<T>,
    l: &PolyVec<T>,
    trunc: Option<u32>,
    rel_tol: T,
) -> Result<IdentityReport<T>, SynthesisError<T>> {
    if k.len() != l.len() || k.num_vars() != pi.len() || pi.num_vars() != l.num_vars() {
        return Err(SynthesisError::Dimension(format!(
            "k: {} entries in {} vars, pi: {} entries in {} vars, l: {} entries in {} vars",
            k.len(),
            k.num_vars(),
            pi.len(),
            pi.num_vars(),
            l.len(),
            l.num_vars()
        )));
    }
    let kp = match trunc {
        Some(n) => k.compose_truncated(pi, n)?,
        None => k.compose(pi)?,
    };
    let l = match trunc {
        Some(n) => l.truncate(n),
        None => l.clone(),
    };
    let scale = k.max_coeff_residual().max(pi.max_coeff_residual()).max(l.max_coeff_residual());
    Ok(IdentityReport::from_residual("feedback matching k(pi) = l", kp.try_sub(&l)?, scale, rel_tol))
}

/// Residuals of `lambda~(pi(w)) = lambda(w)` and `v~(pi(w)) = (dpi/dw) v(w)`,
/// plus nonvanishing of `v~(pi(w))` on the sampled region.
///
/// With `trunc = Some(N)` (a degree-`N` series for `pi`) the eigenvalue
/// identity is compared through degree `N` and the eigenvector identity
/// through degree `N - 1`, the orders that `pi`'s truncation determines.
#[allow(clippy::too_many_arguments)]
pub fn check_pushforward_right<T: Scalar>(
    index: usize,
    pi: &PolyVec<T>,
    target: &EigenPair<T>,
    candidate: &EigenPair<T>,
    trunc: Option<u32>,
    rel_tol: T,
    region: &SampleRegion<T>,
    grid: usize,
) -> Result<PushforwardRecord<T>, SynthesisError<T>> {
    if target.vector.len() != pi.num_vars() || candidate.vector.len() != pi.len() {
        return Err(SynthesisError::Dimension(format!(
            "target vector has {} entries, candidate {}, embedding maps R^{} to R^{}",
            target.vector.len(),
            candidate.vector.len(),
            pi.num_vars(),
            pi.len()
        )));
    }
    let lam_pi = scalar_vec(match trunc {
        Some(n) => candidate.value.compose_truncated(pi, n)?,
        None => candidate.value.compose(pi)?,
    });
    let lam = scalar_vec(target.value.clone());
    let vec_trunc = trunc.map(|n| n.saturating_sub(1));
    let v_pi = match vec_trunc {
        Some(n) => candidate.vector.compose_truncated(pi, n)?,
        None => candidate.vector.compose(pi)?,
    };
    let mut jv = pi.jacobian().mul_vec(&target.vector)?;
    if let Some(n) = vec_trunc {
        jv = jv.truncate(n);
    }
    let lam = match trunc {
        Some(n) => lam.truncate(n),
        None => lam,
    };
    let scale = pi
        .max_coeff_residual()
        .max(target.value.max_coeff_residual())
        .max(target.vector.max_coeff_residual())
        .max(candidate.value.max_coeff_residual())
        .max(candidate.vector.max_coeff_residual());
    let eigenvalue = IdentityReport::from_residual(
        format!("pushforward #{index}: lambda~(pi) = lambda"),
        lam_pi.try_sub(&lam)?,
        scale,
        rel_tol,
    );
    let eigenvector = IdentityReport::from_residual(
        format!("pushforward #{index}: v~(pi) = (dpi/dw) v"),
        v_pi.try_sub(&jv)?,
        scale,
        rel_tol,
    );
    let nonvanishing = nonvanishing(&v_pi, region, grid);
    Ok(PushforwardRecord {
        candidate: index,
        verdict: eigenvalue.verdict && eigenvector.verdict && nonvanishing.ok,
        eigenvalue,
        eigenvector,
        nonvanishing,
    })
}

/// Feedback laws for embeddings with an identity block: if `pi_{block[j]}(w) = w_j`
/// then `k(x) = l(psi(x)) + phi(x - pi(psi(x)))` with `psi(x) = x_block`
/// matches `l` on the graph of `pi` for every `phi` with `phi(0) = 0`.
pub fn feedback_from_identity_block<T: Scalar>(
    pi: &PolyVec<T>,
    l: &PolyVec<T>,
    block: &[usize],
    phi: Option<&PolyVec<T>>,
) -> Result<PolyVec<T>, SynthesisError<T>> {
    let n = pi.len();
    let nu = pi.num_vars();
    if block.len() != nu || block.iter().any(|&b| b >= n) {
        return Err(SynthesisError::Dimension(format!("block {block:?} does not select {nu} of {n} components")));
    }
    for (j, &b) in block.iter().enumerate() {
        let want = crate::poly::Polynomial::var(nu, j);
        if pi[b].try_sub(&want)?.max_coeff_residual() > T::lit(T::PRUNE_REL) {
            return Err(SynthesisError::Precondition(format!(
                "component {b} of the embedding is not w{}",
                j + 1
            )));
        }
    }
    let psi = PolyVec::new(block.iter().map(|&b| crate::poly::Polynomial::var(n, b)).collect())?;
    let graph = pi.compose(&psi)?;
    let resid = PolyVec::identity(n).try_sub(&graph)?;
    let mut k = l.compose(&psi)?;
    if let Some(phi) = phi {
        if phi.len() != l.len() || phi.num_vars() != n {
            return Err(SynthesisError::Dimension(format!(
                "phi has {} entries in {} variables, expected {} in {n}",
                phi.len(),
                phi.num_vars(),
                l.len()
            )));
        }
        if has_constant(phi) {
            return Err(SynthesisError::Precondition("phi(0) must vanish".into()));
        }
        k = k.try_add(&phi.compose(&resid)?)?;
    }
    Ok(k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RightOptions<T: Scalar> {
    pub series: SeriesOptions<T>,
    /// Closed-form embedding to certify instead of solving.
    #[serde(default)]
    pub pi: Option<PolyVec<T>>,
    /// Pin the free degree-one coefficients with `Pi_1 v(0) = v~(0)` for every
    /// candidate/target pair and `K_0 Pi_1 = L`.
    pub derive_constraints: bool,
    pub rel_tol: T,
    #[serde(default)]
    pub region: Option<SampleRegion<T>>,
    pub grid: usize,
}

impl<T: Scalar> Default for RightOptions<T> {
    fn default() -> Self {
        RightOptions {
            series: SeriesOptions::default(),
            pi: None,
            derive_constraints: true,
            rel_tol: T::lit(T::IDENTITY_REL),
            region: None,
            grid: 11,
        }
    }
}

/// Degree-one selection constraints derived from the design: the embedding
/// maps each target eigenvector to its candidate at the origin, and
/// `K_0 Pi_1 = L_1`.
pub fn degree_one_constraints<T: Scalar>(
    exo: &ExoSystem<T>,
    k: &PolyVec<T>,
    l: &PolyVec<T>,
    candidates: &[EigenPair<T>],
) -> Vec<LinearConstraint<T>> {
    let mut out = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        if let Some(t) = exo.target_for(i) {
            let a = nalgebra::DVector::from_vec(t.vector.constant_part());
            let b = nalgebra::DVector::from_vec(c.vector.constant_part());
            if a.iter().any(|x| modulus(x) > T::zero()) {
                out.push(LinearConstraint::align(a, b));
            }
        }
    }
    out.push(LinearConstraint::left_multiple(k.linear_part(), l.linear_part()));
    out
}

/// Partial right eigenvalue assignment: exo-system design, nonlinear
/// Sylvester equation, feedback matching, pushforward of the target pairs
/// and closed-loop re-verification.
pub fn assign_right<T: Scalar>(
    sys: &ControlSystem<T>,
    exo: &ExoSystem<T>,
    l: &PolyVec<T>,
    k: &PolyVec<T>,
    candidates: &[EigenPair<T>],
    preserve: &[EigenPair<T>],
    opts: &RightOptions<T>,
) -> Result<AssignmentReport<T>, SynthesisError<T>> {
    let nu = exo.dim();
    let n = sys.state_dim();
    sys.check_feedback(k)?;
    if l.len() != sys.input_dim() || l.num_vars() != nu {
        return Err(SynthesisError::Dimension(format!(
            "l has {} entries in {} variables, expected {} in {nu}",
            l.len(),
            l.num_vars(),
            sys.input_dim()
        )));
    }
    for c in candidates.iter().chain(preserve) {
        if c.side != Side::Right || c.vector.len() != n || c.vector.num_vars() != n {
            return Err(SynthesisError::Dimension("candidates must be right pairs on the state space".into()));
        }
    }
    let mut report = AssignmentReport::empty(Side::Right);
    let data = RightSylvesterData {
        f: sys.f.clone(),
        g: sys.g.clone(),
        l: l.clone(),
        s: exo.s.clone(),
    };
    let problem = SylvesterProblem::Right(data.clone());
    let region = opts.region.clone().unwrap_or_else(|| SampleRegion::cube(nu, T::one()));

    let (pi, trunc) = match &opts.pi {
        Some(pi) => {
            report.solution_source = "closed-form".into();
            (pi.clone(), None)
        }
        None => {
            report.solution_source = "series".into();
            let mut series = opts.series.clone();
            if opts.derive_constraints {
                series.degree_one.extend(degree_one_constraints(exo, k, l, candidates));
            }
            match solve_nonlinear_sylvester_series(&data, &series) {
                Ok(sol) => {
                    let pi = sol.pi.clone();
                    let n = sol.truncation_degree;
                    report.solution = Some(sol);
                    (pi, Some(n))
                }
                Err(SylvesterError::Resonance { degree, margin }) => {
                    report.failures.push(format!(
                        "nonlinear Sylvester equation: resonance at degree {degree} (margin {:e})",
                        margin.as_f64()
                    ));
                    report.finish();
                    return Ok(report);
                }
                Err(e) => return Err(e.into()),
            }
        }
    };

    report.embedding = Some(pi.clone());
    let res = sylvester_residual(&pi, &problem, trunc)?;
    let scale = problem.scale().max(pi.max_coeff_residual());
    let syl = IdentityReport::from_residual("nonlinear Sylvester equation", res.residual, scale, opts.rel_tol);
    if !syl.verdict {
        report.failures.push(format!("nonlinear Sylvester equation residual {:e}", syl.max_residual.as_f64()));
    }
    report.sylvester_check = Some(syl);

    let fb = verify_feedback_matching(k, &pi, l, trunc, opts.rel_tol)?;
    if !fb.verdict {
        report.failures.push(format!("feedback matching k(pi) = l residual {:e}", fb.max_residual.as_f64()));
    }
    report.feedback_check = Some(fb);

    for (i, c) in candidates.iter().enumerate() {
        let Some(t) = exo.target_for(i) else {
            report.failures.push(format!("candidate {i} has no exo-system target"));
            continue;
        };
        let rec = check_pushforward_right(i, &pi, t, c, trunc, opts.rel_tol, &region, opts.grid)?;
        if !rec.verdict {
            report.failures.push(format!("pushforward of target onto candidate {i} fails"));
        }
        report.pushforward_checks.push(rec);
    }

    let closed = build_closed_loop(&ControlSystem {
        f: sys.f.clone(),
        g: sys.g.clone(),
        k: Some(k.clone()),
    })?;
    for (i, c) in candidates.iter().enumerate() {
        let mut rep = check_right_eigenpair(&closed, c, opts.rel_tol)?;
        rep.label = format!("closed-loop candidate #{i}");
        report.candidate_checks.push(rep);
    }

    for (i, p) in preserve.iter().enumerate() {
        let label = p.label.clone().unwrap_or_else(|| format!("preserved pair #{i}"));
        let open_loop = check_right_eigenpair(&sys.f, p, opts.rel_tol)?;
        let preservation = check_right_preservation(&p.vector, &sys.g, k, opts.rel_tol)?;
        let closed_loop = check_right_eigenpair(&closed, p, opts.rel_tol)?;
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

    let rank = jacobian_rank(&pi, nu, &region, opts.grid);
    if !rank.ok {
        report.failures.push(format!(
            "embedding Jacobian loses rank (min singular value {:e})",
            rank.min_singular_value.as_f64()
        ));
    }
    report.rank_check = Some(rank);
    report.closed_loop = Some(closed);

    let hypotheses_ok = report.failures.is_empty();
    let all_candidates = !report.candidate_checks.is_empty() && report.candidate_checks.iter().all(|c| c.verdict);
    report.validity = if all_candidates {
        Validity::Global
    } else if hypotheses_ok {
        Validity::OnImage
    } else {
        Validity::Failed
    };
    report.finish();
    Ok(report)
}
