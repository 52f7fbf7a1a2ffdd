//! Fixed-step RK4 simulation of polynomial vector fields and trajectory
//! metrics.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{PolyVec, Polynomial};
use crate::region::SampleRegion;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("field has {vars} variables but the initial state has {dim} entries")]
    Dimension { vars: usize, dim: usize },
    #[error("field has non-real coefficients (max imaginary part {0:e})")]
    NonReal(f64),
    #[error("invalid integration parameters: {0}")]
    Parameters(String),
}

/// Real polynomial field flattened for fast repeated evaluation.
#[derive(Clone, Debug)]
pub struct CompiledField<T: Scalar> {
    dim: usize,
    components: Vec<Vec<(T, Vec<(usize, u32)>)>>,
}

impl<T: Scalar> CompiledField<T> {
    pub fn new(field: &PolyVec<T>) -> Result<Self, SimError> {
        if field.len() != field.num_vars() {
            return Err(SimError::Dimension {
                vars: field.num_vars(),
                dim: field.len(),
            });
        }
        let scale = field.max_coeff_residual();
        let limit = T::lit(T::PRUNE_REL) * (T::one() + scale);
        let mut worst = T::zero();
        let components = field
            .iter()
            .map(|p| {
                p.terms()
                    .map(|(m, c)| {
                        worst = worst.max(c.im.abs());
                        let factors = m
                            .exps()
                            .iter()
                            .enumerate()
                            .filter(|(_, &e)| e > 0)
                            .map(|(i, &e)| (i, e))
                            .collect();
                        (c.re, factors)
                    })
                    .collect()
            })
            .collect();
        if worst > limit {
            return Err(SimError::NonReal(worst.as_f64()));
        }
        Ok(CompiledField {
            dim: field.len(),
            components,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval_into(&self, x: &[T], out: &mut [T]) {
        for (o, terms) in out.iter_mut().zip(&self.components) {
            let mut acc = T::zero();
            for (c, factors) in terms {
                let mut t = *c;
                for &(i, e) in factors {
                    t *= x[i].powi(e as i32);
                }
                acc += t;
            }
            *o = acc;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SimTrace<T: Scalar> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub field_id: String,
    /// Set when a non-finite or exploding state truncated the trace.
    pub diverged: bool,
}

impl<T: Scalar> SimTrace<T> {
    pub fn final_state(&self) -> &[T] {
        self.states.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, |s| s.len());
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=n).map(|i| format!("x{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (t, x) in self.times.iter().zip(&self.states) {
            write!(w, "{}", t.as_f64())?;
            for v in x {
                write!(w, ",{:e}", v.as_f64())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

const DIVERGENCE_NORM: f64 = 1e12;

fn norm<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |a, &b| a + b * b).sqrt()
}

fn check_params<T: Scalar>(horizon: T, step: T) -> Result<usize, SimError> {
    if !(step > T::zero()) || !(horizon >= T::zero()) {
        return Err(SimError::Parameters(format!(
            "horizon {} and step {} must be nonnegative and positive",
            horizon, step
        )));
    }
    let ratio = (horizon / step).as_f64();
    let n = ratio.round();
    if (ratio - n).abs() > 1e-6 * n.max(1.0) {
        return Err(SimError::Parameters(format!(
            "step {step} does not divide the horizon {horizon}"
        )));
    }
    if n > 1e8 {
        return Err(SimError::Parameters(format!("{n} steps is too many")));
    }
    Ok(n as usize)
}

/// Classical RK4 with fixed step `step` over `[0, horizon]`; `step` must
/// divide `horizon`.
pub fn integrate<T: Scalar>(
    field: &PolyVec<T>,
    x0: &[T],
    horizon: T,
    step: T,
    field_id: &str,
) -> Result<SimTrace<T>, SimError> {
    let compiled = CompiledField::new(field)?;
    integrate_compiled(&compiled, x0, horizon, step, field_id)
}

pub fn integrate_compiled<T: Scalar>(
    f: &CompiledField<T>,
    x0: &[T],
    horizon: T,
    step: T,
    field_id: &str,
) -> Result<SimTrace<T>, SimError> {
    if x0.len() != f.dim() {
        return Err(SimError::Dimension {
            vars: f.dim(),
            dim: x0.len(),
        });
    }
    let steps = check_params(horizon, step)?;
    let n = f.dim();
    let h = step;
    let half = h * T::lit(0.5);
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]);
    times.push(T::zero());
    states.push(x.clone());
    let mut diverged = false;
    for i in 1..=steps {
        f.eval_into(&x, &mut k1);
        for j in 0..n {
            tmp[j] = x[j] + half * k1[j];
        }
        f.eval_into(&tmp, &mut k2);
        for j in 0..n {
            tmp[j] = x[j] + half * k2[j];
        }
        f.eval_into(&tmp, &mut k3);
        for j in 0..n {
            tmp[j] = x[j] + h * k3[j];
        }
        f.eval_into(&tmp, &mut k4);
        for j in 0..n {
            x[j] += sixth * (k1[j] + two * k2[j] + two * k3[j] + k4[j]);
        }
        let nx = norm(&x);
        if !nx.is_finite() || nx > T::lit(DIVERGENCE_NORM) {
            diverged = true;
            break;
        }
        times.push(T::lit(i as f64) * h);
        states.push(x.clone());
    }
    Ok(SimTrace {
        times,
        states,
        field_id: field_id.to_string(),
        diverged,
    })
}

/// Largest state difference between steps `h` and `h/2` on the common grid.
pub fn halving_error<T: Scalar>(coarse: &SimTrace<T>, fine: &SimTrace<T>) -> T {
    let mut worst = T::zero();
    for (i, xc) in coarse.states.iter().enumerate() {
        match fine.states.get(2 * i) {
            Some(xf) => {
                let d: Vec<T> = xc.iter().zip(xf).map(|(a, b)| *a - *b).collect();
                worst = worst.max(norm(&d));
            }
            None => return T::lit(f64::INFINITY),
        }
    }
    worst
}

/// Integrates with `step` and `step / 2`; returns the coarse trace and the
/// step-halving discrepancy.
pub fn integrate_validated<T: Scalar>(
    field: &PolyVec<T>,
    x0: &[T],
    horizon: T,
    step: T,
    field_id: &str,
) -> Result<(SimTrace<T>, T), SimError> {
    let compiled = CompiledField::new(field)?;
    let coarse = integrate_compiled(&compiled, x0, horizon, step, field_id)?;
    let fine = integrate_compiled(&compiled, x0, horizon, step * T::lit(0.5), field_id)?;
    let err = halving_error(&coarse, &fine);
    Ok((coarse, err))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SimMetrics<T: Scalar> {
    pub peak_norm: T,
    /// `None` when the trace never settles inside the band or diverged.
    pub settling_time: Option<T>,
    pub final_norm: T,
    pub converged: bool,
    pub diverged: bool,
}

pub const DEFAULT_BAND: f64 = 0.02;
pub const DEFAULT_CONV_TOL: f64 = 1e-3;

pub fn metrics<T: Scalar>(trace: &SimTrace<T>, band: T, conv_tol: T) -> SimMetrics<T> {
    let norms: Vec<T> = trace.states.iter().map(|x| norm(x)).collect();
    let peak_norm = norms.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let final_norm = norms.last().copied().unwrap_or(T::zero());
    let limit = band * norms.first().copied().unwrap_or(T::zero());
    let settling_time = if trace.diverged {
        None
    } else {
        match norms.iter().rposition(|&v| v > limit) {
            None => Some(T::zero()),
            Some(i) => trace.times.get(i + 1).copied(),
        }
    };
    SimMetrics {
        peak_norm,
        settling_time,
        final_norm,
        converged: !trace.diverged && final_norm <= conv_tol,
        diverged: trace.diverged,
    }
}

/// Substitutes `param` for the last variable of a family in `n + 1` variables.
pub fn instantiate<T: Scalar>(family: &PolyVec<T>, param: T) -> Result<PolyVec<T>, SimError> {
    let n = family.len();
    if family.num_vars() != n + 1 {
        return Err(SimError::Dimension {
            vars: family.num_vars(),
            dim: n + 1,
        });
    }
    let mut subst: Vec<Polynomial<T>> = (0..n).map(|i| Polynomial::var(n, i)).collect();
    subst.push(Polynomial::real_constant(n, param));
    let subst = PolyVec::new(subst).map_err(|e| SimError::Parameters(e.to_string()))?;
    family.compose(&subst).map_err(|e| SimError::Parameters(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SweepRow<T: Scalar> {
    pub param: T,
    pub metrics: Option<SimMetrics<T>>,
    pub halving_error: Option<T>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SweepOptions<T: Scalar> {
    pub horizon: T,
    pub step: T,
    pub band: T,
    pub conv_tol: T,
}

impl<T: Scalar> Default for SweepOptions<T> {
    fn default() -> Self {
        SweepOptions {
            horizon: T::lit(10.0),
            step: T::lit(1e-3),
            band: T::lit(DEFAULT_BAND),
            conv_tol: T::lit(DEFAULT_CONV_TOL),
        }
    }
}

/// One validated simulation per parameter value; failing rows carry the
/// error and the sweep continues.
pub fn sweep<T: Scalar>(family: &PolyVec<T>, values: &[T], x0: &[T], opts: &SweepOptions<T>) -> Vec<SweepRow<T>> {
    values
        .par_iter()
        .map(|&param| {
            let run = instantiate(family, param)
                .and_then(|field| integrate_validated(&field, x0, opts.horizon, opts.step, "sweep"));
            match run {
                Ok((trace, err)) => SweepRow {
                    param,
                    metrics: Some(metrics(&trace, opts.band, opts.conv_tol)),
                    halving_error: Some(err),
                    error: None,
                },
                Err(e) => SweepRow {
                    param,
                    metrics: None,
                    halving_error: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

pub fn write_sweep_csv<T: Scalar, W: Write>(rows: &[SweepRow<T>], name: &str, mut w: W) -> io::Result<()> {
    writeln!(w, "{name},peak_norm,settling_time,final_norm,converged,halving_error")?;
    for r in rows {
        match &r.metrics {
            Some(m) => writeln!(
                w,
                "{},{:e},{},{:e},{},{:e}",
                r.param.as_f64(),
                m.peak_norm.as_f64(),
                m.settling_time.map_or("nan".to_string(), |t| format!("{:e}", t.as_f64())),
                m.final_norm.as_f64(),
                m.converged,
                r.halving_error.map_or(f64::NAN, |e| e.as_f64())
            )?,
            None => writeln!(w, "{},nan,nan,nan,false,nan", r.param.as_f64())?,
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BasinReport<T: Scalar> {
    pub points: usize,
    pub converged: usize,
    pub fraction: f64,
    pub failures: Vec<Vec<T>>,
}

/// Integrates from every grid point of `region` and counts convergence.
pub fn basin_probe<T: Scalar>(
    field: &PolyVec<T>,
    region: &SampleRegion<T>,
    grid: usize,
    horizon: T,
    step: T,
    conv_tol: T,
) -> Result<BasinReport<T>, SimError> {
    let compiled = CompiledField::new(field)?;
    if region.dim() != compiled.dim() {
        return Err(SimError::Dimension {
            vars: compiled.dim(),
            dim: region.dim(),
        });
    }
    check_params(horizon, step)?;
    let points = region.grid(grid);
    let flags: Vec<bool> = points
        .par_iter()
        .map(|p| {
            integrate_compiled(&compiled, p, horizon, step, "basin")
                .map(|tr| !tr.diverged && norm(tr.final_state()) <= conv_tol)
                .unwrap_or(false)
        })
        .collect();
    let converged = flags.iter().filter(|&&b| b).count();
    let failures = points
        .iter()
        .zip(&flags)
        .filter(|(_, &ok)| !ok)
        .map(|(p, _)| p.clone())
        .collect();
    Ok(BasinReport {
        points: points.len(),
        converged,
        fraction: if points.is_empty() { 0.0 } else { converged as f64 / points.len() as f64 },
        failures,
    })
}
