//! Pipelines behind each verb. Every function appends summary rows to the
//! sink; the process exit code is derived from those rows only.

use std::io;

use serde::Serialize;

use nlsylv::eigen::check_eigenpair;
use nlsylv::expr::{ProblemKind, ProblemSpec};
use nlsylv::sim::{self, SweepOptions};
use nlsylv::sylvester::{
    solution_residual, solve_dual_sylvester_series, solve_nonlinear_sylvester_series, sylvester_residual,
    DualSylvesterData, ResidualReport, RightSylvesterData, SylvesterProblem, SylvesterSolution,
};
use nlsylv::synthesis::{assign_left, assign_linear, assign_right, degree_one_constraints};
use nlsylv::PolyVec;

use crate::output::{Row, Sink};

type Spec = ProblemSpec<f64>;

/// Step-halving discrepancy accepted for reported simulations, relative to
/// `max(1, peak norm)` so that unstable plants with large states are judged
/// on their significant digits.
const HALVING_TOL: f64 = 1e-6;

fn halving_tol(peak: f64) -> f64 {
    HALVING_TOL * peak.max(1.0)
}

#[derive(Debug)]
pub enum CliError {
    /// Bad input: unreadable or malformed problem, unsupported verb for the
    /// problem kind, or a pipeline precondition.
    Input(String),
    Io(io::Error),
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Serialize)]
struct Meta<'a> {
    tool: &'a str,
    version: &'a str,
    problem: &'a str,
    command: &'a str,
}

#[derive(Serialize)]
struct Summary<'a> {
    metadata: Meta<'a>,
    stages: &'a [Row],
    files: &'a [String],
    verdict: bool,
}

pub fn write_summary(sink: &mut Sink, spec: &Spec, command: &str) -> io::Result<()> {
    let rows = sink.rows.clone();
    let mut files = sink.files.clone();
    files.push(format!("{}-summary.json", spec.name));
    let summary = Summary {
        metadata: Meta {
            tool: "nlsylv",
            version: env!("CARGO_PKG_VERSION"),
            problem: &spec.name,
            command,
        },
        stages: &rows,
        files: &files,
        verdict: sink.verdict(),
    };
    sink.json("summary.json", &summary)
}

pub fn verify_eig(spec: &Spec, sink: &mut Sink) -> Result<(), CliError> {
    let instances = spec.check_instances().map_err(input)?;
    if instances.is_empty() {
        return Err(CliError::Input("problem has no eigenpair checks".into()));
    }
    let mut reports = Vec::new();
    for c in &instances {
        let r = check_eigenpair(&c.field, &c.pair, spec.options.tol).map_err(|e| input(format!("{}: {e}", c.label)))?;
        sink.row(Row::new(format!("eigenpair: {}", c.label), r.max_residual, r.tolerance, r.verdict));
        reports.push(r);
    }
    sink.json("eigen.json", &reports)?;
    Ok(())
}

#[derive(Serialize)]
struct SylvesterOutput {
    problem: SylvesterProblem<f64>,
    solution: Option<SylvesterSolution<f64>>,
    error: Option<String>,
    residual: Option<ResidualReport<f64>>,
    closed_form: Option<ResidualReport<f64>>,
    /// Largest coefficient of the series minus the truncated closed form.
    closed_form_deviation: Option<f64>,
}

fn sylvester_problem(spec: &Spec) -> Result<(SylvesterProblem<f64>, nlsylv::sylvester::SeriesOptions<f64>, Option<PolyVec<f64>>), CliError> {
    let mut opts = spec.series_options();
    match spec.kind {
        ProblemKind::RightAssign => {
            let sys = spec.control_system().map_err(input)?;
            let exo = spec.exo_system().map_err(input)?;
            let l = spec.design.l.clone().ok_or_else(|| input("design.l missing"))?;
            if let (Some(k), true) = (&spec.design.k, spec.design.derive_constraints) {
                opts.degree_one.extend(degree_one_constraints(&exo, k, &l, &spec.design.candidates));
            }
            let data = RightSylvesterData {
                f: sys.f,
                g: sys.g,
                l,
                s: exo.s,
            };
            Ok((SylvesterProblem::Right(data), opts, spec.design.pi.clone()))
        }
        ProblemKind::LeftAssign => {
            let es = spec.error_system().map_err(input)?;
            let exo = spec.exo_system().map_err(input)?;
            let nu = exo.dim();
            let data = match &spec.design.r {
                Some(r) => DualSylvesterData {
                    f: es.f,
                    h: es.h,
                    r: r.clone(),
                    s: exo.s,
                },
                None => DualSylvesterData {
                    f: es.closed,
                    r: PolyVec::zeros(nu, nu + es.h.len()),
                    h: es.h,
                    s: exo.s,
                },
            };
            Ok((SylvesterProblem::Dual(data), opts, spec.design.rho.clone()))
        }
        _ => Err(CliError::Input("solve-sylvester needs a linear_partial_assign, right_assign or left_assign problem".into())),
    }
}

pub fn solve_sylvester(spec: &Spec, sink: &mut Sink) -> Result<(), CliError> {
    if spec.kind == ProblemKind::LinearPartialAssign {
        return assign_linear_cmd(spec, sink);
    }
    let (problem, opts, closed) = sylvester_problem(spec)?;
    let solved = match &problem {
        SylvesterProblem::Right(d) => solve_nonlinear_sylvester_series(d, &opts),
        SylvesterProblem::Dual(d) => solve_dual_sylvester_series(d, &opts),
    };
    let mut out = SylvesterOutput {
        problem: problem.clone(),
        solution: None,
        error: None,
        residual: None,
        closed_form: None,
        closed_form_deviation: None,
    };
    match solved {
        Ok(sol) => {
            let res = solution_residual(&sol, &problem).map_err(input)?;
            sink.row(Row::new(
                format!("series solution through degree {}", sol.truncation_degree),
                res.max_residual,
                res.tolerance,
                res.verdict,
            ));
            if let Some(c) = &sol.constraint_residual {
                let tol = spec.options.tol;
                sink.row(Row::new("degree-one selection constraints", *c, tol, *c <= tol));
            }
            if let Some(pi) = &closed {
                let dev = sol
                    .pi
                    .try_sub(&pi.truncate(sol.truncation_degree))
                    .map_err(input)?
                    .max_coeff_residual();
                let tol = spec.options.tol * (1.0 + pi.max_coeff_residual());
                sink.row(Row::new("series matches closed form", dev, tol, dev <= tol));
                out.closed_form_deviation = Some(dev);
            }
            out.residual = Some(res);
            out.solution = Some(sol);
        }
        Err(e) => {
            sink.row(Row::new(format!("series solution: {e}"), f64::NAN, f64::NAN, false));
            out.error = Some(e.to_string());
        }
    }
    if let Some(pi) = &closed {
        let r = sylvester_residual(pi, &problem, None).map_err(input)?;
        sink.row(Row::new("closed form satisfies the PDE", r.max_residual, r.tolerance, r.verdict));
        out.closed_form = Some(r);
    }
    sink.json("sylvester.json", &out)?;
    Ok(())
}

pub fn assign_right_cmd(spec: &Spec, sink: &mut Sink) -> Result<(), CliError> {
    if spec.kind != ProblemKind::RightAssign {
        return Err(CliError::Input("assign-right needs a right_assign problem".into()));
    }
    let sys = spec.control_system().map_err(input)?;
    let exo = spec.exo_system().map_err(input)?;
    let l = spec.design.l.clone().ok_or_else(|| input("design.l missing"))?;
    let k = spec.design.k.clone().ok_or_else(|| input("design.k missing"))?;
    let report = assign_right(
        &sys,
        &exo,
        &l,
        &k,
        &spec.design.candidates,
        &spec.design.preserve,
        &spec.right_options(),
    )
    .map_err(input)?;
    push_assignment(sink, &report.stages(), &report.failures, report.verdict);
    sink.json("assignment.json", &report)?;
    basin(spec, sink)
}

pub fn assign_left_cmd(spec: &Spec, sink: &mut Sink) -> Result<(), CliError> {
    if spec.kind != ProblemKind::LeftAssign {
        return Err(CliError::Input("assign-left needs a left_assign problem".into()));
    }
    let prob = spec.observer_problem().map_err(input)?;
    let exo = spec.exo_system().map_err(input)?;
    let report = assign_left(&prob, &exo, &spec.design.preserve, &spec.left_options()).map_err(input)?;
    push_assignment(sink, &report.stages(), &report.failures, report.verdict);
    sink.json("assignment.json", &report)?;
    Ok(())
}

fn push_assignment(sink: &mut Sink, stages: &[nlsylv::synthesis::StageRecord], failures: &[String], verdict: bool) {
    for s in stages {
        // The left rank check is informational and never decides the verdict.
        let informational = s.stage.ends_with("(informational)");
        sink.row(Row::new(s.stage.clone(), s.max_residual, s.tolerance, s.verdict || informational));
    }
    for f in failures {
        if !stages.iter().any(|s| !s.verdict && f.contains(&s.stage)) {
            sink.row(Row::new(format!("failure: {f}"), f64::NAN, f64::NAN, false));
        }
    }
    sink.row(Row::new("assignment verdict", f64::NAN, f64::NAN, verdict));
}

pub fn assign_linear_cmd(spec: &Spec, sink: &mut Sink) -> Result<(), CliError> {
    let lin = spec.linear.as_ref().ok_or_else(|| input("linear data missing"))?;
    let tol = spec.options.tol.max(1e-6);
    match assign_linear(&lin.a, &lin.b, &lin.s, &lin.l, tol) {
        Ok(rep) => {
            sink.row(Row::new("eigenvalues of S placed in A + BK", rep.max_mismatch, rep.tolerance, rep.verdict));
            sink.json("linear.json", &rep)?;
        }
        Err(e) => {
            sink.row(Row::new(format!("linear assignment: {e}"), f64::NAN, f64::NAN, false));
            sink.json("linear.json", &e.to_string())?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulationOutput {
    field: String,
    x0: Vec<f64>,
    horizon: f64,
    step: f64,
    metrics: Option<sim::SimMetrics<f64>>,
    halving_error: Option<f64>,
    sweep: Option<Vec<sim::SweepRow<f64>>>,
}

pub fn simulate(spec: &Spec, sink: &mut Sink) -> Result<(), CliError> {
    let s = spec
        .options
        .simulate
        .as_ref()
        .ok_or_else(|| input("options.simulate missing"))?;
    let field = spec.field(&s.field).map_err(input)?.field;
    let x0 = spec.initial_state().expect("simulate present");
    let o = &spec.options;
    let mut out = SimulationOutput {
        field: s.field.clone(),
        x0: x0.clone(),
        horizon: o.horizon,
        step: o.step,
        metrics: None,
        halving_error: None,
        sweep: None,
    };
    if let Some(param) = &spec.parameter {
        let opts = SweepOptions {
            horizon: o.horizon,
            step: o.step,
            band: o.band,
            conv_tol: o.conv_tol,
        };
        let rows = sim::sweep(&field, &param.values, &x0, &opts);
        for r in &rows {
            let stage = format!("simulation {}={}", param.name, r.param);
            match (&r.metrics, r.halving_error, &r.error) {
                (Some(m), Some(h), _) => {
                    let tol = halving_tol(m.peak_norm);
                    sink.row(Row::new(stage, h, tol, !m.diverged && h <= tol))
                }
                (_, _, e) => sink.row(Row::new(
                    format!("{stage}: {}", e.clone().unwrap_or_default()),
                    f64::NAN,
                    f64::NAN,
                    false,
                )),
            }
        }
        sink.csv("sweep.csv", |w| sim::write_sweep_csv(&rows, &param.name, w))?;
        for &b in &param.values {
            let inst = sim::instantiate(&field, b).map_err(input)?;
            let trace = sim::integrate(&inst, &x0, o.horizon, o.step, &format!("{}={b}", param.name)).map_err(input)?;
            sink.csv(&format!("trace-{}{b}.csv", param.name), |w| trace.write_csv(w))?;
        }
        out.sweep = Some(rows);
    } else {
        let (trace, h) = sim::integrate_validated(&field, &x0, o.horizon, o.step, &s.field).map_err(input)?;
        let m = sim::metrics(&trace, o.band, o.conv_tol);
        let tol = halving_tol(m.peak_norm);
        sink.row(Row::new(
            format!("simulation of {} (step halving)", s.field),
            h,
            tol,
            !m.diverged && h <= tol,
        ));
        sink.csv("trace.csv", |w| trace.write_csv(w))?;
        if s.xi0.is_some() {
            // Plant and observer coordinates (x, xi = x + e) as plotted.
            let n = spec.state_dim();
            sink.csv("observer.csv", |w| {
                use std::io::Write;
                let xs: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
                let xis: Vec<String> = (1..=n).map(|i| format!("xi{i}")).collect();
                writeln!(w, "t,{},{}", xs.join(","), xis.join(","))?;
                for (t, z) in trace.times.iter().zip(&trace.states) {
                    let cells: Vec<String> = z[..n]
                        .iter()
                        .map(|v| format!("{v:e}"))
                        .chain((0..n).map(|i| format!("{:e}", z[i] + z[n + i])))
                        .collect();
                    writeln!(w, "{t:e},{}", cells.join(","))?;
                }
                Ok(())
            })?;
        }
        out.metrics = Some(m);
        out.halving_error = Some(h);
    }
    sink.json("simulation.json", &out)?;
    Ok(())
}

pub fn basin(spec: &Spec, sink: &mut Sink) -> Result<(), CliError> {
    let Some(b) = &spec.options.basin else {
        return Ok(());
    };
    let field = spec.field(&b.field).map_err(input)?.field;
    let rep = sim::basin_probe(&field, &b.region, b.grid, b.horizon, spec.options.step, b.conv_tol).map_err(input)?;
    sink.row(Row::new(
        format!("basin probe: {}/{} grid points converge", rep.converged, rep.points),
        1.0 - rep.fraction,
        0.0,
        rep.points > 0 && rep.converged == rep.points,
    ));
    sink.json("basin.json", &rep)?;
    Ok(())
}

/// Everything a problem file describes: checks, the kind's pipeline, and
/// any configured simulation or basin probe.
pub fn run_all(spec: &Spec, sink: &mut Sink) -> Result<(), CliError> {
    if !spec.checks.is_empty() {
        verify_eig(spec, sink)?;
    }
    match spec.kind {
        ProblemKind::RightAssign => assign_right_cmd(spec, sink)?,
        ProblemKind::LeftAssign => {
            solve_sylvester(spec, sink)?;
            assign_left_cmd(spec, sink)?;
        }
        ProblemKind::LinearPartialAssign => assign_linear_cmd(spec, sink)?,
        ProblemKind::VerifyOnly | ProblemKind::Simulate => {}
    }
    if spec.options.simulate.is_some() {
        simulate(spec, sink)?;
    }
    Ok(())
}
