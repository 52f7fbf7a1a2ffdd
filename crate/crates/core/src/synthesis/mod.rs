//! Design pipelines: partial right eigenvalue assignment by state feedback
//! and partial left eigenvalue assignment by output injection (observers).

mod left;
mod linear;
mod right;

pub use left::{
    assign_left, build_error_system, construct_left_candidate, ErrorSystem, LeftOptions, ObserverProblem,
};
pub use linear::{assign_linear, LinearAssignmentReport};
pub use right::{
    assign_right, build_closed_loop, degree_one_constraints, check_pushforward_right, feedback_from_identity_block,
    verify_feedback_matching, ControlSystem, RightOptions,
};

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::{check_eigenpair, EigenError, EigenPair, IdentityReport, Side};
use crate::poly::{PolyError, PolyMatrix, PolyVec};
use crate::region::SampleRegion;
use crate::scalar::{modulus, Scalar};
use crate::sylvester::{SylvesterError, SylvesterSolution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError<T: Scalar> {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Sylvester(#[from] SylvesterError<T>),
    #[error("closed loop requires a feedback law")]
    MissingFeedback,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("exo-system target {index} is not an eigenpair of s (max residual {max_residual:e})")]
    InvalidTarget { index: usize, max_residual: T },
    #[error("constructed eigenvector is identically zero")]
    ZeroCandidate,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// `w' = s(w)` with the eigenpairs to be assigned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ExoSystem<T: Scalar> {
    pub s: PolyVec<T>,
    pub targets: Vec<EigenPair<T>>,
}

impl<T: Scalar> ExoSystem<T> {
    /// Checks `s(0) = 0` and that every target is an eigenpair of `s`.
    pub fn new(s: PolyVec<T>, targets: Vec<EigenPair<T>>, rel_tol: T) -> Result<Self, SynthesisError<T>> {
        if s.len() != s.num_vars() {
            return Err(SynthesisError::Dimension(format!(
                "s has {} entries in {} variables",
                s.len(),
                s.num_vars()
            )));
        }
        if s.constant_part().iter().any(|c| modulus(c) > T::zero()) {
            return Err(SynthesisError::Precondition("s(0) must vanish".into()));
        }
        for (index, t) in targets.iter().enumerate() {
            let rep = check_eigenpair(&s, t, rel_tol)?;
            if !rep.verdict {
                return Err(SynthesisError::InvalidTarget {
                    index,
                    max_residual: rep.max_residual,
                });
            }
        }
        Ok(ExoSystem { s, targets })
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }

    pub(crate) fn target_for(&self, i: usize) -> Option<&EigenPair<T>> {
        match self.targets.len() {
            0 => None,
            1 => self.targets.first(),
            _ => self.targets.get(i),
        }
    }
}

/// Where a verified eigenpair is known to hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Validity {
    /// Closed-loop identity verified at the coefficient level.
    Global,
    /// Assignment hypotheses hold; the pair is only certified on the image of the embedding.
    OnImage,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NonvanishingRecord<T: Scalar> {
    pub grid_points: usize,
    pub min_norm: T,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RankRecord<T: Scalar> {
    pub grid_points: usize,
    pub expected_rank: usize,
    pub min_singular_value: T,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PushforwardRecord<T: Scalar> {
    pub candidate: usize,
    pub eigenvalue: IdentityReport<T>,
    pub eigenvector: IdentityReport<T>,
    pub nonvanishing: NonvanishingRecord<T>,
    pub verdict: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PreservationRecord<T: Scalar> {
    pub label: String,
    pub open_loop: IdentityReport<T>,
    pub preservation: IdentityReport<T>,
    pub closed_loop: IdentityReport<T>,
    pub verdict: bool,
}

/// One row of the human-readable summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub verdict: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AssignmentReport<T: Scalar> {
    pub side: Side,
    /// "series" or "closed-form".
    pub solution_source: String,
    pub solution: Option<SylvesterSolution<T>>,
    /// The embedding (pi or rho) the checks were run on.
    pub embedding: Option<PolyVec<T>>,
    pub sylvester_check: Option<IdentityReport<T>>,
    /// Matching condition on the graph of the embedding (`k(pi) = l`) or
    /// the injection consistency condition for left problems.
    pub feedback_check: Option<IdentityReport<T>>,
    pub pushforward_checks: Vec<PushforwardRecord<T>>,
    pub constructed: Vec<EigenPair<T>>,
    pub candidate_checks: Vec<IdentityReport<T>>,
    pub preservation_checks: Vec<PreservationRecord<T>>,
    pub rank_check: Option<RankRecord<T>>,
    pub closed_loop: Option<PolyVec<T>>,
    pub validity: Validity,
    pub failures: Vec<String>,
    pub verdict: bool,
}

impl<T: Scalar> AssignmentReport<T> {
    pub(crate) fn empty(side: Side) -> Self {
        AssignmentReport {
            side,
            solution_source: String::new(),
            solution: None,
            embedding: None,
            sylvester_check: None,
            feedback_check: None,
            pushforward_checks: Vec::new(),
            constructed: Vec::new(),
            candidate_checks: Vec::new(),
            preservation_checks: Vec::new(),
            rank_check: None,
            closed_loop: None,
            validity: Validity::Failed,
            failures: Vec::new(),
            verdict: false,
        }
    }

    /// Flattened (stage, residual, tolerance, verdict) rows.
    pub fn stages(&self) -> Vec<StageRecord> {
        let mut rows = Vec::new();
        let mut push = |stage: String, r: &IdentityReport<T>| {
            rows.push(StageRecord {
                stage,
                max_residual: r.max_residual.as_f64(),
                tolerance: r.tolerance.as_f64(),
                verdict: r.verdict,
            })
        };
        if let Some(r) = &self.sylvester_check {
            push(r.label.clone(), r);
        }
        if let Some(r) = &self.feedback_check {
            push(r.label.clone(), r);
        }
        for p in &self.pushforward_checks {
            push(format!("pushforward #{} eigenvalue", p.candidate), &p.eigenvalue);
            push(format!("pushforward #{} eigenvector", p.candidate), &p.eigenvector);
        }
        for c in &self.candidate_checks {
            push(c.label.clone(), c);
        }
        for p in &self.preservation_checks {
            push(format!("{} (open loop)", p.label), &p.open_loop);
            push(format!("{} (condition)", p.label), &p.preservation);
            push(format!("{} (closed loop)", p.label), &p.closed_loop);
        }
        if let Some(r) = &self.rank_check {
            let suffix = if self.side == Side::Left { " (informational)" } else { "" };
            rows.push(StageRecord {
                stage: format!("rank of embedding Jacobian = {}{suffix}", r.expected_rank),
                max_residual: r.min_singular_value.as_f64(),
                tolerance: f64::NAN,
                verdict: r.ok,
            });
        }
        rows
    }

    pub(crate) fn finish(&mut self) {
        self.verdict = self.failures.is_empty();
    }
}

pub(crate) fn nonvanishing<T: Scalar>(v: &PolyVec<T>, region: &SampleRegion<T>, grid: usize) -> NonvanishingRecord<T> {
    let points = region.grid(grid);
    let mut min_norm = T::lit(f64::INFINITY);
    for p in &points {
        let val = v
            .eval_real(p)
            .map(|e| e.iter().map(|c| c.norm_sqr()).fold(T::zero(), |a, b| a + b).sqrt())
            .unwrap_or_else(|_| T::zero());
        min_norm = min_norm.min(val);
    }
    let tol = T::lit(T::IDENTITY_REL);
    NonvanishingRecord {
        grid_points: points.len(),
        min_norm,
        ok: !points.is_empty() && min_norm > tol,
    }
}

/// Smallest singular value of the Jacobian of `map` over the region.
pub(crate) fn jacobian_rank<T: Scalar>(
    map: &PolyVec<T>,
    expected_rank: usize,
    region: &SampleRegion<T>,
    grid: usize,
) -> RankRecord<T> {
    let jac: PolyMatrix<T> = map.jacobian();
    let points = region.grid(grid);
    let mut min_sv = T::lit(f64::INFINITY);
    for p in &points {
        let cp: Vec<Complex<T>> = p.iter().map(|&x| Complex::new(x, T::zero())).collect();
        let m: DMatrix<Complex<T>> = match jac.eval(&cp) {
            Ok(m) => m,
            Err(_) => continue,
        };
        let sv = m.singular_values();
        let mut s: Vec<T> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        let k = s.get(expected_rank.saturating_sub(1)).copied().unwrap_or(T::zero());
        min_sv = min_sv.min(k);
    }
    RankRecord {
        grid_points: points.len(),
        expected_rank,
        min_singular_value: min_sv,
        ok: !points.is_empty() && min_sv > T::lit(1e-8),
    }
}

pub(crate) fn scalar_vec<T: Scalar>(p: crate::poly::Polynomial<T>) -> PolyVec<T> {
    PolyVec::new(vec![p]).expect("single entry")
}
