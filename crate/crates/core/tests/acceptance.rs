//! Acceptance suite: one PASS/FAIL line per criterion, with the individual
//! measurements underneath.
//!
//! Some eigenpairs bundled with the example problems, and the left
//! preservation identity for one of them, do not hold as given (see
//! README). Those items are marked `documented` and still print FAIL.
//! The process exits non-zero only when something else fails, or when
//! `ACCEPTANCE_STRICT=1` is set.

mod common;

#[path = "common/linear.rs"]
mod linear;

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::TestRunner;
use rand::Rng;

use nlsylv::eigen::{check_eigenpair, check_left_preservation, check_right_eigenpair, check_right_preservation, lie_bracket};
use nlsylv::expr::{load_problem_str, parse_poly, ProblemSpec};
use nlsylv::sim::{basin_probe, integrate, integrate_validated, sweep, SweepOptions};
use nlsylv::sylvester::{
    feedback_from_embedding, solve_dual_sylvester_series, solve_linear_sylvester, solve_nonlinear_sylvester_series,
    sylvester_residual, DualSylvesterData, LinearSylvesterProblem, RightSylvesterData, SeriesOptions, SylvesterError,
    SylvesterProblem,
};
use nlsylv::synthesis::{assign_left, degree_one_constraints, LeftOptions};
use nlsylv::region::SampleRegion;
use nlsylv::{PolyVec, Polynomial};

use common::*;
use linear::*;

const MOTIVATING: &str = include_str!("../../cli/problems/motivating.json");
const EXAMPLE1: &str = include_str!("../../cli/problems/example1.json");
const EXAMPLE1_PRESERVE: &str = include_str!("../../cli/problems/example1-preserve.json");
const OBSERVER: &str = include_str!("../../cli/problems/observer.json");

struct Item {
    text: String,
    ok: bool,
    /// Failure is a known defect in the stated data, not in the code.
    documented: bool,
}

struct Criterion {
    id: u32,
    title: &'static str,
    items: Vec<Item>,
}

impl Criterion {
    fn new(id: u32, title: &'static str) -> Self {
        Criterion { id, title, items: Vec::new() }
    }

    fn check(&mut self, ok: bool, text: impl Into<String>) {
        self.items.push(Item { text: text.into(), ok, documented: false });
    }

    fn documented(&mut self, ok: bool, text: impl Into<String>) {
        self.items.push(Item { text: text.into(), ok, documented: true });
    }

    fn pass(&self) -> bool {
        !self.items.is_empty() && self.items.iter().all(|i| i.ok)
    }

    fn unexpected(&self) -> bool {
        self.items.is_empty() || self.items.iter().any(|i| !i.ok && !i.documented)
    }
}

fn load(text: &str) -> ProblemSpec<f64> {
    load_problem_str(text).expect("bundled problem loads")
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok  "
    } else {
        "FAIL"
    }
}

fn eigenpair_suite() -> Criterion {
    let mut c = Criterion::new(1, "eigenpair identity suite (coefficient residual <= 1e-9)");
    let defective = |problem: &str, label: &str| match problem {
        "motivating" => true,
        "observer" => !label.contains("pair 2"),
        _ => false,
    };
    for (name, text) in [
        ("motivating", MOTIVATING),
        ("example1", EXAMPLE1),
        ("example1-preserve", EXAMPLE1_PRESERVE),
        ("observer", OBSERVER),
    ] {
        let spec = load(text);
        for inst in spec.check_instances().expect("checks expand") {
            let r = check_eigenpair(&inst.field, &inst.pair, 1e-9).expect("pair matches field");
            let ok = r.max_residual <= 1e-9;
            let text = format!("{name}: {} residual {:.3e}", inst.label, r.max_residual);
            if defective(name, &inst.label) {
                c.documented(ok, text);
            } else {
                c.check(ok, text);
            }
        }
    }
    c
}

fn example1_right_data(spec: &ProblemSpec<f64>) -> RightSylvesterData<f64> {
    let sys = spec.control_system().unwrap();
    RightSylvesterData {
        f: sys.f,
        g: sys.g,
        l: spec.design.l.clone().unwrap(),
        s: spec.exo_system().unwrap().s,
    }
}

fn observer_dual_data(spec: &ProblemSpec<f64>) -> DualSylvesterData<f64> {
    let es = spec.error_system().unwrap();
    DualSylvesterData {
        f: es.f,
        h: es.h,
        r: spec.design.r.clone().unwrap(),
        s: spec.exo_system().unwrap().s,
    }
}

fn pi_ww() -> PolyVec<f64> {
    let w = Polynomial::var(1, 0);
    PolyVec::new(vec![w.clone(), w]).unwrap()
}

fn closed_forms() -> Criterion {
    let mut c = Criterion::new(2, "Sylvester closed forms");
    let ex1 = load(EXAMPLE1);
    let r = sylvester_residual(&pi_ww(), &SylvesterProblem::Right(example1_right_data(&ex1)), None).unwrap();
    c.check(r.max_residual == 0.0, format!("pi = [w, w] residual {:.3e} (must be exactly 0)", r.max_residual));

    let obs = load(OBSERVER);
    let rho = obs.design.rho.clone().unwrap();
    let problem = SylvesterProblem::Dual(observer_dual_data(&obs));
    let r3 = sylvester_residual(&rho, &problem, Some(3)).unwrap();
    c.check(r3.max_residual <= 1e-10, format!("rho residual through degree 3 {:.3e} (<= 1e-10)", r3.max_residual));
    let full = sylvester_residual(&rho, &problem, None).unwrap();
    c.check(full.max_residual <= 1e-10, format!("rho residual, all degrees {:.3e}", full.max_residual));
    c
}

fn series_recovery() -> Criterion {
    let mut c = Criterion::new(3, "series-solver recovery at N = 5");
    let ex1 = load(EXAMPLE1);
    let data = example1_right_data(&ex1);
    let exo = ex1.exo_system().unwrap();
    let mut opts = SeriesOptions::new(5);
    opts.degree_one = degree_one_constraints(
        &exo,
        ex1.design.k.as_ref().unwrap(),
        ex1.design.l.as_ref().unwrap(),
        &ex1.design.candidates,
    );
    match solve_nonlinear_sylvester_series(&data, &opts) {
        Ok(sol) => {
            let dev = sol.pi.try_sub(&pi_ww()).unwrap().max_coeff_residual();
            c.check(dev <= 1e-10, format!("right: deviation from [w, w] {dev:.3e} (<= 1e-10)"));
            let worst = sol.max_residual();
            c.check(worst <= 1e-10, format!("right: worst per-degree residual {worst:.3e} (<= 1e-10)"));
        }
        Err(e) => c.check(false, format!("right: solver error {e}")),
    }

    let obs = load(OBSERVER);
    let rho = obs.design.rho.clone().unwrap();
    let data = observer_dual_data(&obs);
    let mut opts = obs.series_options();
    opts.degree = 5;
    match solve_dual_sylvester_series(&data, &opts) {
        Ok(sol) => {
            let dev = sol.pi.try_sub(&rho.truncate(5)).unwrap().max_coeff_residual();
            c.check(dev <= 1e-10, format!("dual: deviation from closed-form rho {dev:.3e} (<= 1e-10)"));
            let worst = sol.max_residual();
            c.check(worst <= 1e-10, format!("dual: worst per-degree residual {worst:.3e} (<= 1e-10)"));
        }
        Err(e) => c.check(false, format!("dual: solver error {e}")),
    }
    c
}

fn preservation() -> Criterion {
    let mut c = Criterion::new(4, "preservation identities (residual <= 1e-9)");
    let ex = load(EXAMPLE1_PRESERVE);
    let pair = ex.design.preserve[0].clone();
    let g = ex.plant.g.clone().unwrap();
    let k = ex.design.k.clone().unwrap();
    let r = check_right_preservation(&pair.vector, &g, &k, 1e-9).unwrap();
    c.check(r.max_residual <= 1e-9, format!("[v, g k] for v = [1, 0], k = -2 x2: {:.3e}", r.max_residual));
    let closed = ex.field("closed").unwrap().field;
    let r = check_right_eigenpair(&closed, &pair, 1e-9).unwrap();
    c.check(r.max_residual <= 1e-9, format!("preserved pair on the closed loop: {:.3e}", r.max_residual));

    let obs = load(OBSERVER);
    let es = obs.error_system().unwrap();
    let v = &obs.design.preserve[0].vector;
    let r = check_left_preservation(v, &es.q, 1e-9).unwrap();
    c.documented(r.max_residual <= 1e-9, format!("left preservation for the stated pair: {:.3e}", r.max_residual));
    c
}

fn controllable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let m = b.ncols();
    let mut ctrb = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        ctrb.columns_mut(i * m, m).copy_from(&block);
        block = a * block;
    }
    ctrb.rank(1e-9) == n
}

fn linear_baseline() -> Criterion {
    let mut c = Criterion::new(5, "linear baseline, 50 random instances (eigenvalue error <= 1e-6)");
    let mut r = rng(0xacce_0005);
    let (mut done, mut worst, mut failures) = (0, 0.0f64, 0);
    while done < 50 {
        let n = r.gen_range(2..=6);
        let m = r.gen_range(1..=3.min(n));
        let nu = r.gen_range(1..=3.min(n));
        let a = random_matrix(&mut r, n, n) * 2.0;
        let b = random_matrix(&mut r, n, m);
        let mus = distinct(&mut r, nu, -3.0, -0.5, 0.2);
        let s = DMatrix::from_diagonal(&DVector::from_vec(mus.clone()));
        let l = random_matrix(&mut r, m, nu);
        let eig_a = a.complex_eigenvalues();
        let gap = eig_a
            .iter()
            .flat_map(|x| mus.iter().map(move |y| (x - y).norm()))
            .fold(f64::INFINITY, f64::min);
        if gap < 0.05 || !controllable(&a, &b) {
            continue;
        }
        done += 1;
        let k = LinearSylvesterProblem::new(a.clone(), b.clone(), l.clone(), s)
            .and_then(|p| solve_linear_sylvester(&p))
            .and_then(|pi| feedback_from_embedding(&l, &pi));
        let Ok(k) = k else {
            failures += 1;
            continue;
        };
        let eig = (&a + &b * &k).complex_eigenvalues();
        for mu in &mus {
            let err = eig.iter().map(|x| (x - mu).norm()).fold(f64::INFINITY, f64::min);
            worst = worst.max(err);
            if err > 1e-6 {
                failures += 1;
            }
        }
    }
    c.check(failures == 0, format!("{done} instances, worst eigenvalue error {worst:.3e}, {failures} misses"));
    c
}

fn resonant_data(mu: f64, detune: f64) -> RightSylvesterData<f64> {
    // A = diag(2 mu + detune, 1), B = [1, 1], s = mu w, l = w, f1 carries x1^2.
    let x1 = Polynomial::<f64>::var(2, 0);
    let x2 = Polynomial::<f64>::var(2, 1);
    let f = PolyVec::new(vec![&x1.scale_real(2.0 * mu + detune) + &(&x1 * &x1), x2]).unwrap();
    let b = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
    RightSylvesterData {
        f,
        g: constant_matrix(&b, 2),
        l: PolyVec::new(vec![Polynomial::var(1, 0)]).unwrap(),
        s: PolyVec::new(vec![Polynomial::var(1, 0).scale_real(mu)]).unwrap(),
    }
}

fn resonance() -> Criterion {
    let mut c = Criterion::new(6, "resonance detection");
    let mut raised = 0;
    let mut solved = 0;
    for j in 0..10 {
        let mu = -0.5 - 0.15 * j as f64;
        if let Err(SylvesterError::Resonance { degree: 2, .. }) =
            solve_nonlinear_sylvester_series(&resonant_data(mu, 0.0), &SeriesOptions::new(4))
        {
            raised += 1;
        }
        let data = resonant_data(mu, 0.3);
        if let Ok(sol) = solve_nonlinear_sylvester_series(&data, &SeriesOptions::new(4)) {
            if !sol.nonunique && sol.max_residual() <= 1e-9 * (1.0 + data.scale()) {
                solved += 1;
            }
        }
    }
    c.check(raised == 10, format!("lambda_A = 2 mu: {raised}/10 raise resonance at degree 2"));
    c.check(solved == 10, format!("detuned controls: {solved}/10 solve"));
    c
}

fn sweep_reproduction() -> Criterion {
    let mut c = Criterion::new(7, "parameter sweep b = 0..4 (halving <= 1e-6, monotone metrics)");
    let spec = load(MOTIVATING);
    let family = spec.field("closed_b").unwrap().field;
    let opts = SweepOptions {
        horizon: 10.0,
        step: 1e-3,
        band: 0.02,
        conv_tol: 1e-3,
    };
    let rows = sweep(&family, &[0.0, 1.0, 2.0, 3.0, 4.0], &[1.0, 1.0], &opts);
    let mut peaks = Vec::new();
    let mut settle = Vec::new();
    for row in &rows {
        match (&row.metrics, row.halving_error) {
            (Some(m), Some(h)) => {
                c.check(
                    h <= 1e-6,
                    format!(
                        "b = {}: peak {:.6}, settling {:?}, halving {h:.3e}",
                        row.param, m.peak_norm, m.settling_time
                    ),
                );
                peaks.push(m.peak_norm);
                settle.push(m.settling_time.unwrap_or(f64::INFINITY));
            }
            _ => c.check(false, format!("b = {}: {}", row.param, row.error.clone().unwrap_or_default())),
        }
    }
    c.check(peaks.windows(2).all(|w| w[1] > w[0]), "peak norm strictly increasing in b");
    c.check(settle.windows(2).all(|w| w[1] <= w[0]), "2% settling time non-increasing in b");
    c
}

fn observer_error_dynamics() -> Criterion {
    let mut c = Criterion::new(8, "observer error dynamics from assign_left");
    let spec = load(OBSERVER);
    let prob = spec.observer_problem().unwrap();
    let exo = spec.exo_system().unwrap();
    let opts = LeftOptions {
        stated: Vec::new(),
        ..spec.left_options()
    };
    let rep = match assign_left(&prob, &exo, &[], &opts) {
        Ok(r) => r,
        Err(e) => {
            c.check(false, format!("assign_left: {e}"));
            return c;
        }
    };
    c.check(rep.verdict, format!("assign_left verdict ({} failures)", rep.failures.len()));
    let Some(closed) = rep.closed_loop else {
        c.check(false, "no closed loop in the report");
        return c;
    };
    let n = spec.state_dim();
    let e_part = PolyVec::new(closed.entries()[n..].to_vec()).unwrap();
    let free_of_x = e_part.iter().all(|p| (0..n).all(|i| p.partial(i).unwrap().is_zero()));
    c.check(free_of_x, "error dynamics do not depend on x");
    let onto_e = PolyVec::new(
        (0..n)
            .map(|_| Polynomial::zero(n))
            .chain((0..n).map(|i| Polynomial::var(n, i)))
            .collect(),
    )
    .unwrap();
    let e_field = e_part.compose(&onto_e).unwrap();
    let vars = ["e1", "e2"];
    let expected = PolyVec::new(vec![
        parse_poly("-e1 + e2^2", &vars).unwrap(),
        parse_poly("-e2", &vars).unwrap(),
    ])
    .unwrap();
    c.check(e_field == expected, format!("e' = [{}]", e_field.to_expr(&vars).join(", ")));

    let (trace, halving) = integrate_validated(&e_field, &[1.0, 1.0], 10.0, 1e-3, "error").unwrap();
    let last = trace.final_state();
    let final_norm = last.iter().map(|x| x * x).sum::<f64>().sqrt();
    c.check(final_norm <= 1e-3, format!("|e(10)| = {final_norm:.3e} (<= 1e-3)"));
    // e2 = e^{-t}; e1' = -e1 + e^{-2t} gives e1 = 2 e^{-t} - e^{-2t}.
    let worst = trace
        .times
        .iter()
        .zip(&trace.states)
        .map(|(&t, x)| {
            let e2 = (-t).exp();
            let e1 = 2.0 * e2 - e2 * e2;
            (x[0] - e1).abs().max((x[1] - e2).abs())
        })
        .fold(0.0, f64::max);
    c.check(worst <= 1e-6, format!("max deviation from closed form {worst:.3e} (<= 1e-6)"));
    c.check(halving <= 1e-6, format!("step-halving discrepancy {halving:.3e}"));
    c
}

fn basin() -> Criterion {
    let mut c = Criterion::new(9, "partial-stability probe, 21 x 21 grid");
    let spec = load(EXAMPLE1_PRESERVE);
    let closed = spec.field("closed").unwrap().field;
    let vars = ["x1", "x2"];
    let region = SampleRegion::new(vec![0.0, -0.9], vec![1.0, 0.9])
        .with_constraint(parse_poly("x2 + 1", &vars).unwrap())
        .with_constraint(parse_poly("1 + x1 - x2", &vars).unwrap());
    match basin_probe(&closed, &region, 21, 20.0, 1e-3, 1e-3) {
        Ok(r) => c.check(
            r.points == 441 && r.converged == r.points,
            format!("{}/{} converged ({:.1}%)", r.converged, r.points, 100.0 * r.fraction),
        ),
        Err(e) => c.check(false, format!("basin probe: {e}")),
    }
    c
}

fn property(c: &mut Criterion, name: &str, seed: u64, run: impl FnOnce(&mut TestRunner) -> Result<(), String>) {
    let mut runner = TestRunner::new(config(256, seed));
    match run(&mut runner) {
        Ok(()) => c.check(true, format!("{name}: 256 cases")),
        Err(e) => c.check(false, format!("{name}: {e}")),
    }
}

fn decay_error(rates: [f64; 2], x0: [f64; 2], h: f64) -> f64 {
    // Decoupled modes, so the leading error terms of the two components
    // cannot cancel in the norm.
    let f = PolyVec::new((0..2).map(|i| Polynomial::<f64>::var(2, i).scale_real(rates[i])).collect()).unwrap();
    let tr = integrate(&f, &x0, 2.0, h, "decay").unwrap();
    let last = tr.final_state();
    (0..2).map(|i| (last[i] - x0[i] * (2.0 * rates[i]).exp()).powi(2)).sum::<f64>().sqrt()
}

fn property_suites() -> Criterion {
    let mut c = Criterion::new(10, "property suites, fixed seeds");
    property(&mut c, "bracket antisymmetry", 0xacce_1001, |r| {
        r.run(&(field(2, 2, 4), field(2, 2, 4)), |(v, s)| {
            prop_assert!((&lie_bracket(&v, &s).unwrap() + &lie_bracket(&s, &v).unwrap()).is_zero());
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    property(&mut c, "bracket bilinearity", 0xacce_1002, |r| {
        r.run(&(field(2, 2, 3), field(2, 2, 3), field(2, 2, 3), grid_coeff(), grid_coeff()), |(u, v, s, a, b)| {
            let lhs = lie_bracket(&(&u.scale(a) + &v.scale(b)), &s).unwrap();
            let rhs = &lie_bracket(&u, &s).unwrap().scale(a) + &lie_bracket(&v, &s).unwrap().scale(b);
            prop_assert_eq!(lhs, rhs);
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    property(&mut c, "bracket Leibniz rule", 0xacce_1003, |r| {
        r.run(&(field(2, 2, 3), field(2, 2, 3), poly(2, 2, 3)), |(v, s, phi)| {
            let lhs = lie_bracket(&v, &s.mul_scalar_poly(&phi).unwrap()).unwrap();
            let grad = PolyVec::new((0..2).map(|i| phi.partial(i).unwrap()).collect()).unwrap();
            let rhs = &lie_bracket(&v, &s).unwrap().mul_scalar_poly(&phi).unwrap()
                + &s.mul_scalar_poly(&grad.dot(&v).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    property(&mut c, "compose-eval commutation", 0xacce_1004, |r| {
        r.run(&(poly(2, 3, 4), field(2, 2, 3), point(2)), |(p, s, x)| {
            let inner = s.eval(&x).unwrap();
            let direct = p.eval(&inner).unwrap();
            let composed = p.compose(&s).unwrap().eval(&x).unwrap();
            let scale = 1e3 * (1.0 + inner.iter().map(|c| c.norm()).fold(0.0, f64::max)).powi(9);
            prop_assert!(close(direct, composed, scale));
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    property(&mut c, "RK4 error ratio in [14, 18]", 0xacce_1005, |r| {
        let start = || prop_oneof![-1.0..-0.2f64, 0.2..1.0f64];
        r.run(&(-2.0..-0.5f64, -2.0..-0.5f64, start(), start(), 20u32..=80), |(a, b, x0, y0, steps)| {
            // Steps that divide the horizon, so both runs end at t = 2.
            let h = 2.0 / steps as f64;
            let ratio = decay_error([a, b], [x0, y0], h) / decay_error([a, b], [x0, y0], h / 2.0);
            prop_assert!((14.0..=18.0).contains(&ratio), "ratio {}", ratio);
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    property(&mut c, "parse/serialize round trip", 0xacce_1006, |r| {
        let vars = ["x1", "x2", "e1"];
        r.run(&poly(3, 4, 7), |p| {
            let text = p.to_expr(&vars);
            prop_assert_eq!(parse_poly::<f64, _>(&text, &vars).unwrap(), p);
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    c
}

fn main() -> ExitCode {
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let suites: [fn() -> Criterion; 10] = [
        eigenpair_suite,
        closed_forms,
        series_recovery,
        preservation,
        linear_baseline,
        resonance,
        sweep_reproduction,
        observer_error_dynamics,
        basin,
        property_suites,
    ];
    let mut passed = 0;
    let mut unexpected = false;
    let mut any_fail = false;
    println!();
    for suite in suites {
        let start = Instant::now();
        let c = suite();
        let secs = start.elapsed().as_secs_f64();
        let verdict = if c.pass() { "PASS" } else { "FAIL" };
        println!("{verdict} [{:>2}] {} ({secs:.1}s)", c.id, c.title);
        for item in &c.items {
            let note = if !item.ok && item.documented { "  (documented defect in the stated data)" } else { "" };
            println!("       {} {}{note}", mark(item.ok), item.text);
        }
        passed += usize::from(c.pass());
        any_fail |= !c.pass();
        unexpected |= c.unexpected();
    }
    println!("\nacceptance: {passed}/10 criteria pass");
    if unexpected {
        println!("acceptance: unexpected failures");
        ExitCode::FAILURE
    } else if strict && any_fail {
        println!("acceptance: failing criteria in strict mode");
        ExitCode::FAILURE
    } else {
        if any_fail {
            println!("acceptance: every failing item is a documented defect in the stated data");
        }
        ExitCode::SUCCESS
    }
}
