//! Problem files: one JSON document per problem with polynomial expressions
//! as strings. See `docs/problem-format.md` for the schema.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::Deserialize;
use thiserror::Error;

use super::parser::{parse_poly, ParseError};
use crate::eigen::{EigenPair, Side};
use crate::poly::{PolyMatrix, PolyVec, Polynomial};
use crate::region::SampleRegion;
use crate::scalar::Scalar;
use crate::sim;
use crate::sylvester::SeriesOptions;
use crate::synthesis::{
    build_closed_loop, build_error_system, ControlSystem, ExoSystem, LeftOptions, ObserverProblem, RightOptions,
    SynthesisError,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("dimension mismatch in `{field}`: {message}")]
pub struct DimensionError {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoadError {
    #[error("cannot read problem file: {0}")]
    Io(String),
    #[error("malformed problem JSON: {0}")]
    Json(String),
    #[error("in `{field}`: {error}")]
    Parse { field: String, error: ParseError },
    #[error(transparent)]
    Dimension(#[from] DimensionError),
    #[error("in `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn dim_err(field: impl Into<String>, message: impl Into<String>) -> LoadError {
    LoadError::Dimension(DimensionError {
        field: field.into(),
        message: message.into(),
    })
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> LoadError {
    LoadError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    LinearPartialAssign,
    RightAssign,
    LeftAssign,
    VerifyOnly,
    Simulate,
}

// ---------------------------------------------------------------------------
// Raw file layout

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawVariables {
    #[serde(default)]
    x: Vec<String>,
    #[serde(default)]
    w: Vec<String>,
    #[serde(default)]
    z: Vec<String>,
    #[serde(default)]
    y: Vec<String>,
    #[serde(default)]
    xi: Vec<String>,
    #[serde(default)]
    yh: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParameter {
    name: String,
    values: Vec<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPlant {
    f: Option<Vec<String>>,
    g: Option<Vec<Vec<String>>>,
    h: Option<Vec<String>>,
    p: Option<Vec<String>>,
    #[serde(rename = "F")]
    big_f: Option<Vec<String>>,
    #[serde(rename = "H")]
    big_h: Option<Vec<String>>,
}

#[derive(Deserialize, Clone)]
#[serde(deny_unknown_fields)]
struct RawPair {
    #[serde(default)]
    label: Option<String>,
    side: Side,
    lambda: String,
    v: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExo {
    s: Vec<String>,
    #[serde(default)]
    targets: Vec<RawPair>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDesign {
    l: Option<Vec<String>>,
    k: Option<Vec<String>>,
    #[serde(default)]
    candidates: Vec<RawPair>,
    #[serde(default)]
    preserve: Vec<RawPair>,
    #[serde(default)]
    stated: Vec<RawPair>,
    pi: Option<Vec<String>>,
    rho: Option<Vec<String>>,
    r: Option<Vec<String>>,
    seed: Option<Vec<Vec<f64>>>,
    derive_constraints: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLinear {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "S")]
    s: Vec<Vec<f64>>,
    #[serde(rename = "L")]
    l: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    vars: String,
    exprs: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCheck {
    label: String,
    field: String,
    side: Side,
    lambda: String,
    v: Vec<String>,
    #[serde(default)]
    params: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    lower: Vec<f64>,
    upper: Vec<f64>,
    #[serde(default)]
    constraints: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulate {
    field: String,
    x0: Vec<f64>,
    xi0: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBasin {
    field: String,
    lower: Vec<f64>,
    upper: Vec<f64>,
    #[serde(default)]
    constraints: Vec<String>,
    grid: usize,
    horizon: Option<f64>,
    conv_tol: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOptions {
    degree: Option<u32>,
    tol: Option<f64>,
    grid: Option<usize>,
    horizon: Option<f64>,
    step: Option<f64>,
    band: Option<f64>,
    conv_tol: Option<f64>,
    strict_resonance: Option<bool>,
    region: Option<RawRegion>,
    simulate: Option<RawSimulate>,
    basin: Option<RawBasin>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    kind: ProblemKind,
    #[serde(default)]
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    variables: RawVariables,
    parameter: Option<RawParameter>,
    #[serde(default)]
    plant: RawPlant,
    exo: Option<RawExo>,
    #[serde(default)]
    design: RawDesign,
    linear: Option<RawLinear>,
    #[serde(default)]
    fields: BTreeMap<String, RawField>,
    #[serde(default)]
    checks: Vec<RawCheck>,
    #[serde(default)]
    options: RawOptions,
}

// ---------------------------------------------------------------------------
// Parsed problem

#[derive(Clone, Debug, PartialEq)]
pub struct Variables {
    pub x: Vec<String>,
    pub w: Vec<String>,
    /// Error-system coordinates, `x1..xn, e1..en` unless overridden.
    pub z: Vec<String>,
    pub y: Vec<String>,
    pub xi: Vec<String>,
    /// Names for the entries of `H(z)`, the output arguments of `r(w, .)`.
    pub yh: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T: Scalar> {
    pub name: String,
    pub values: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Plant<T: Scalar> {
    pub f: Option<PolyVec<T>>,
    pub g: Option<PolyMatrix<T>>,
    pub h: Option<PolyVec<T>>,
    /// Observer injection `p(xi, y)`.
    pub p: Option<PolyVec<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Exo<T: Scalar> {
    pub s: PolyVec<T>,
    pub targets: Vec<EigenPair<T>>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Design<T: Scalar> {
    pub l: Option<PolyVec<T>>,
    pub k: Option<PolyVec<T>>,
    pub candidates: Vec<EigenPair<T>>,
    pub preserve: Vec<EigenPair<T>>,
    pub stated: Vec<EigenPair<T>>,
    pub pi: Option<PolyVec<T>>,
    pub rho: Option<PolyVec<T>>,
    pub r: Option<PolyVec<T>>,
    /// Degree-one coefficients to pin in a resonant degree-one solve.
    pub seed: Option<DMatrix<Complex<T>>>,
    pub derive_constraints: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearData<T: Scalar> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub s: DMatrix<T>,
    pub l: DMatrix<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarSet {
    X,
    W,
    Z,
}

impl VarSet {
    fn parse(s: &str, field: &str) -> Result<Self, LoadError> {
        match s {
            "x" => Ok(VarSet::X),
            "w" => Ok(VarSet::W),
            "z" => Ok(VarSet::Z),
            other => Err(invalid(field, format!("unknown variable set `{other}` (use x, w or z)"))),
        }
    }
}

/// A vector field together with the coordinates it is written in. With a
/// declared parameter the parameter is the last variable.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedField<T: Scalar> {
    pub vars: VarSet,
    pub field: PolyVec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckSpec<T: Scalar> {
    pub label: String,
    pub field: String,
    pub pair: EigenPair<T>,
    /// Parameter values to check at; empty without a parameter.
    pub params: Vec<T>,
}

/// One concrete eigenpair check with the parameter substituted.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckInstance<T: Scalar> {
    pub label: String,
    pub field: PolyVec<T>,
    pub pair: EigenPair<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimSpec<T: Scalar> {
    pub field: String,
    pub x0: Vec<T>,
    pub xi0: Option<Vec<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasinSpec<T: Scalar> {
    pub field: String,
    pub region: SampleRegion<T>,
    pub grid: usize,
    pub horizon: T,
    pub conv_tol: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Options<T: Scalar> {
    pub degree: u32,
    pub tol: T,
    pub grid: usize,
    pub horizon: T,
    pub step: T,
    pub band: T,
    pub conv_tol: T,
    pub strict_resonance: bool,
    pub region: Option<SampleRegion<T>>,
    pub simulate: Option<SimSpec<T>>,
    pub basin: Option<BasinSpec<T>>,
}

/// Command-line overrides applied after loading.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides<T: Scalar> {
    pub degree: Option<u32>,
    pub tol: Option<T>,
    pub grid: Option<usize>,
    pub horizon: Option<T>,
    pub step: Option<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec<T: Scalar> {
    pub kind: ProblemKind,
    pub name: String,
    pub description: String,
    pub variables: Variables,
    pub parameter: Option<Parameter<T>>,
    pub plant: Plant<T>,
    pub exo: Option<Exo<T>>,
    pub design: Design<T>,
    pub linear: Option<LinearData<T>>,
    pub fields: BTreeMap<String, NamedField<T>>,
    pub checks: Vec<CheckSpec<T>>,
    pub options: Options<T>,
}

// ---------------------------------------------------------------------------
// Loading

struct Ctx<'a> {
    vars: &'a Variables,
    param: Option<&'a str>,
}

impl Ctx<'_> {
    fn names(&self, set: VarSet) -> Vec<String> {
        let mut v = match set {
            VarSet::X => self.vars.x.clone(),
            VarSet::W => self.vars.w.clone(),
            VarSet::Z => self.vars.z.clone(),
        };
        v.extend(self.param.map(str::to_string));
        v
    }
}

fn parse_expr<T: Scalar>(src: &str, vars: &[String], field: &str) -> Result<Polynomial<T>, LoadError> {
    parse_poly(src, vars).map_err(|error| LoadError::Parse {
        field: field.to_string(),
        error,
    })
}

fn parse_vec<T: Scalar>(srcs: &[String], vars: &[String], field: &str) -> Result<PolyVec<T>, LoadError> {
    if srcs.is_empty() {
        return Err(dim_err(field, "empty vector"));
    }
    let entries = srcs
        .iter()
        .enumerate()
        .map(|(i, s)| parse_expr(s, vars, &format!("{field}[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    PolyVec::new(entries).map_err(|e| invalid(field, e.to_string()))
}

fn parse_mat<T: Scalar>(rows: &[Vec<String>], vars: &[String], field: &str) -> Result<PolyMatrix<T>, LoadError> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(dim_err(field, "empty matrix"));
    }
    let cols = rows[0].len();
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(dim_err(format!("{field}[{i}]"), format!("{} columns, expected {cols}", row.len())));
        }
        out.push(
            row.iter()
                .enumerate()
                .map(|(j, s)| parse_expr(s, vars, &format!("{field}[{i}][{j}]")))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    PolyMatrix::from_rows(out).map_err(|e| invalid(field, e.to_string()))
}

fn parse_pair<T: Scalar>(raw: &RawPair, vars: &[String], field: &str) -> Result<EigenPair<T>, LoadError> {
    let value = parse_expr(&raw.lambda, vars, &format!("{field}.lambda"))?;
    let vector = parse_vec(&raw.v, vars, &format!("{field}.v"))?;
    let pair = EigenPair::new(raw.side, value, vector).map_err(|e| invalid(field, e.to_string()))?;
    Ok(match &raw.label {
        Some(l) => pair.with_label(l.clone()),
        None => pair,
    })
}

fn real_matrix<T: Scalar>(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<T>, LoadError> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(dim_err(field, "empty matrix"));
    }
    let cols = rows[0].len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(dim_err(format!("{field}[{i}]"), format!("{} columns, expected {cols}", r.len())));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| T::lit(rows[i][j])))
}

fn expect_len(field: &str, got: usize, want: usize, what: &str) -> Result<(), LoadError> {
    if got != want {
        return Err(dim_err(field, format!("{got} entries, expected {want} ({what})")));
    }
    Ok(())
}

fn lits<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

fn parse_region<T: Scalar>(raw: &RawRegion, vars: &[String], field: &str) -> Result<SampleRegion<T>, LoadError> {
    if raw.lower.len() != vars.len() || raw.upper.len() != vars.len() {
        return Err(dim_err(
            field,
            format!("box has {}/{} bounds, expected {}", raw.lower.len(), raw.upper.len(), vars.len()),
        ));
    }
    if raw.lower.iter().zip(&raw.upper).any(|(l, u)| l > u) {
        return Err(invalid(field, "lower bound exceeds upper bound"));
    }
    let mut region = SampleRegion::new(lits(&raw.lower), lits(&raw.upper));
    for (i, c) in raw.constraints.iter().enumerate() {
        region = region.with_constraint(parse_expr(c, vars, &format!("{field}.constraints[{i}]"))?);
    }
    Ok(region)
}

fn default_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Loads a problem from a file on disk.
pub fn load_problem<T: Scalar>(path: &Path) -> Result<ProblemSpec<T>, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(format!("{}: {e}", path.display())))?;
    load_problem_str(&text)
}

/// Loads a problem from JSON text.
pub fn load_problem_str<T: Scalar>(text: &str) -> Result<ProblemSpec<T>, LoadError> {
    let raw: RawProblem = serde_json::from_str(text).map_err(|e| LoadError::Json(e.to_string()))?;
    build(raw)
}

fn build<T: Scalar>(raw: RawProblem) -> Result<ProblemSpec<T>, LoadError> {
    let kind = raw.kind;
    let rv = raw.variables;
    if rv.x.is_empty() && kind != ProblemKind::LinearPartialAssign {
        return Err(invalid("variables.x", "state variable names are required"));
    }
    let n = rv.x.len();

    if let Some(p) = &raw.parameter {
        if !matches!(kind, ProblemKind::VerifyOnly | ProblemKind::Simulate) {
            return Err(invalid("parameter", "a parameter is only allowed in verify_only and simulate problems"));
        }
        if p.values.is_empty() {
            return Err(invalid("parameter.values", "no values given"));
        }
    }
    let parameter = raw.parameter.as_ref().map(|p| Parameter {
        name: p.name.clone(),
        values: lits(&p.values),
    });

    // Output dimension is needed for the default names of y and yh.
    let m_out = raw.plant.h.as_ref().map_or(0, Vec::len);
    let y = if rv.y.is_empty() {
        if m_out == 1 {
            vec!["y".to_string()]
        } else {
            default_names("y", m_out)
        }
    } else {
        rv.y
    };
    let variables = Variables {
        z: if rv.z.is_empty() {
            rv.x.iter().cloned().chain(default_names("e", n)).collect()
        } else {
            rv.z
        },
        xi: if rv.xi.is_empty() { default_names("xi", n) } else { rv.xi },
        yh: if rv.yh.is_empty() { default_names("yh", 2 * m_out) } else { rv.yh },
        y,
        x: rv.x,
        w: rv.w,
    };
    if variables.z.len() != 2 * n && kind == ProblemKind::LeftAssign {
        return Err(dim_err("variables.z", format!("{} names, expected {}", variables.z.len(), 2 * n)));
    }
    if let Some(p) = &parameter {
        for set in [&variables.x, &variables.w, &variables.z] {
            if set.contains(&p.name) {
                return Err(invalid("parameter.name", format!("`{}` clashes with a variable", p.name)));
            }
        }
    }
    let ctx_vars = variables.clone();
    let ctx_param = parameter.as_ref().map(|p| p.name.clone());
    let ctx = Ctx {
        vars: &ctx_vars,
        param: ctx_param.as_deref(),
    };
    let xs = ctx.names(VarSet::X);
    let ws = ctx.names(VarSet::W);
    let zs = ctx.names(VarSet::Z);

    // Plant.
    let f = raw.plant.f.as_ref().map(|v| parse_vec::<T>(v, &xs, "plant.f")).transpose()?;
    if let Some(f) = &f {
        expect_len("plant.f", f.len(), n, "one per state variable")?;
    }
    let g = raw.plant.g.as_ref().map(|m| parse_mat::<T>(m, &xs, "plant.g")).transpose()?;
    if let Some(g) = &g {
        if g.rows() != n {
            return Err(dim_err("plant.g", format!("{} rows, expected {n} (entries of plant.f)", g.rows())));
        }
    }
    let h = raw.plant.h.as_ref().map(|v| parse_vec::<T>(v, &xs, "plant.h")).transpose()?;
    let pvars: Vec<String> = variables.xi.iter().chain(&variables.y).cloned().collect();
    let p = raw.plant.p.as_ref().map(|v| parse_vec::<T>(v, &pvars, "plant.p")).transpose()?;
    if let Some(p) = &p {
        expect_len("plant.p", p.len(), n, "one per state variable")?;
    }
    let plant = Plant { f, g, h, p };

    // Exo-system.
    let exo = match &raw.exo {
        None => None,
        Some(e) => {
            if variables.w.is_empty() {
                return Err(invalid("variables.w", "exo-system variable names are required"));
            }
            let s = parse_vec::<T>(&e.s, &ws, "exo.s")?;
            expect_len("exo.s", s.len(), variables.w.len(), "one per exo-system variable")?;
            let mut targets = Vec::new();
            for (i, t) in e.targets.iter().enumerate() {
                let field = format!("exo.targets[{i}]");
                let pair = parse_pair::<T>(t, &ws, &field)?;
                expect_len(&format!("{field}.v"), pair.vector.len(), s.len(), "exo-system dimension")?;
                targets.push(pair);
            }
            Some(Exo { s, targets })
        }
    };
    let nu = variables.w.len();

    // Design.
    let rd = &raw.design;
    let m_in = plant.g.as_ref().map_or(0, PolyMatrix::cols);
    let l = rd.l.as_ref().map(|v| parse_vec::<T>(v, &ws, "design.l")).transpose()?;
    if let Some(l) = &l {
        expect_len("design.l", l.len(), m_in, "one per input (columns of plant.g)")?;
    }
    let k = rd.k.as_ref().map(|v| parse_vec::<T>(v, &xs, "design.k")).transpose()?;
    if let Some(k) = &k {
        expect_len("design.k", k.len(), m_in, "one per input (columns of plant.g)")?;
    }
    let pair_space = if kind == ProblemKind::LeftAssign { &zs } else { &xs };
    let pair_dim = pair_space.len() - usize::from(parameter.is_some());
    let parse_pairs = |list: &[RawPair], name: &str| -> Result<Vec<EigenPair<T>>, LoadError> {
        list.iter()
            .enumerate()
            .map(|(i, r)| {
                let field = format!("design.{name}[{i}]");
                let pair = parse_pair::<T>(r, pair_space, &field)?;
                expect_len(&format!("{field}.v"), pair.vector.len(), pair_dim, "state dimension")?;
                Ok(pair)
            })
            .collect()
    };
    let candidates = parse_pairs(&rd.candidates, "candidates")?;
    let preserve = parse_pairs(&rd.preserve, "preserve")?;
    let stated = parse_pairs(&rd.stated, "stated")?;
    let pi = rd.pi.as_ref().map(|v| parse_vec::<T>(v, &ws, "design.pi")).transpose()?;
    if let Some(pi) = &pi {
        expect_len("design.pi", pi.len(), n, "one per state variable")?;
    }
    let rho = rd.rho.as_ref().map(|v| parse_vec::<T>(v, &zs, "design.rho")).transpose()?;
    if let Some(rho) = &rho {
        expect_len("design.rho", rho.len(), nu, "one per exo-system variable")?;
    }
    let rvars: Vec<String> = variables.w.iter().chain(&variables.yh).cloned().collect();
    let r = rd.r.as_ref().map(|v| parse_vec::<T>(v, &rvars, "design.r")).transpose()?;
    if let Some(r) = &r {
        expect_len("design.r", r.len(), nu, "one per exo-system variable")?;
    }
    let seed = match &rd.seed {
        None => None,
        Some(rows) => {
            let m = real_matrix::<T>(rows, "design.seed")?;
            let want = match kind {
                ProblemKind::LeftAssign => (nu, 2 * n),
                _ => (n, nu),
            };
            if (m.nrows(), m.ncols()) != want {
                return Err(dim_err(
                    "design.seed",
                    format!("{}x{}, expected {}x{}", m.nrows(), m.ncols(), want.0, want.1),
                ));
            }
            Some(m.map(|x| Complex::new(x, T::zero())))
        }
    };
    let design = Design {
        l,
        k,
        candidates,
        preserve,
        stated,
        pi,
        rho,
        r,
        seed,
        derive_constraints: rd.derive_constraints.unwrap_or(true),
    };

    // Linear data.
    let linear = match &raw.linear {
        None => None,
        Some(lin) => {
            let a = real_matrix::<T>(&lin.a, "linear.A")?;
            let b = real_matrix::<T>(&lin.b, "linear.B")?;
            let s = real_matrix::<T>(&lin.s, "linear.S")?;
            let l = real_matrix::<T>(&lin.l, "linear.L")?;
            if a.nrows() != a.ncols() {
                return Err(dim_err("linear.A", "not square"));
            }
            if b.nrows() != a.nrows() {
                return Err(dim_err("linear.B", format!("{} rows, expected {}", b.nrows(), a.nrows())));
            }
            if s.nrows() != s.ncols() {
                return Err(dim_err("linear.S", "not square"));
            }
            if (l.nrows(), l.ncols()) != (b.ncols(), s.nrows()) {
                return Err(dim_err(
                    "linear.L",
                    format!("{}x{}, expected {}x{}", l.nrows(), l.ncols(), b.ncols(), s.nrows()),
                ));
            }
            Some(LinearData { a, b, s, l })
        }
    };

    // Named fields.
    let mut fields = BTreeMap::new();
    for (name, rf) in &raw.fields {
        let path = format!("fields.{name}");
        if BUILTIN_FIELDS.contains(&name.as_str()) {
            return Err(invalid(&path, "name is reserved for a built-in field"));
        }
        let vars = VarSet::parse(&rf.vars, &format!("{path}.vars"))?;
        let names = ctx.names(vars);
        let field = parse_vec::<T>(&rf.exprs, &names, &path)?;
        expect_len(&path, field.len(), names.len() - usize::from(parameter.is_some()), "square vector field")?;
        fields.insert(name.clone(), NamedField { vars, field });
    }

    let mut spec = ProblemSpec {
        kind,
        name: raw.name,
        description: raw.description,
        variables,
        parameter,
        plant,
        exo,
        design,
        linear,
        fields,
        checks: Vec::new(),
        options: Options {
            degree: 5,
            tol: T::lit(T::IDENTITY_REL),
            grid: 11,
            horizon: T::lit(10.0),
            step: T::lit(1e-3),
            band: T::lit(sim::DEFAULT_BAND),
            conv_tol: T::lit(sim::DEFAULT_CONV_TOL),
            strict_resonance: false,
            region: None,
            simulate: None,
            basin: None,
        },
    };

    // Checks, resolved against named and built-in fields.
    for (i, c) in raw.checks.iter().enumerate() {
        let path = format!("checks[{i}]");
        let nf = spec.field(&c.field).map_err(|e| invalid(format!("{path}.field"), e))?;
        let names = ctx.names(nf.vars);
        let raw_pair = RawPair {
            label: Some(c.label.clone()),
            side: c.side,
            lambda: c.lambda.clone(),
            v: c.v.clone(),
        };
        let pair = parse_pair::<T>(&raw_pair, &names, &path)?;
        expect_len(&format!("{path}.v"), pair.vector.len(), nf.field.len(), "field dimension")?;
        let params = match (&spec.parameter, &c.params) {
            (None, None) => Vec::new(),
            (None, Some(_)) => return Err(invalid(format!("{path}.params"), "no parameter declared")),
            (Some(p), None) => p.values.clone(),
            (Some(_), Some(v)) => lits(v),
        };
        spec.checks.push(CheckSpec {
            label: c.label.clone(),
            field: c.field.clone(),
            pair,
            params,
        });
    }

    // Options.
    let ro = &raw.options;
    let o = &mut spec.options;
    if let Some(d) = ro.degree {
        if d == 0 {
            return Err(invalid("options.degree", "truncation degree must be at least 1"));
        }
        o.degree = d;
    }
    if let Some(t) = ro.tol {
        if !(t > 0.0) {
            return Err(invalid("options.tol", "tolerance must be positive"));
        }
        o.tol = T::lit(t);
    }
    if let Some(g) = ro.grid {
        o.grid = g;
    }
    if let Some(h) = ro.horizon {
        o.horizon = T::lit(h);
    }
    if let Some(h) = ro.step {
        if !(h > 0.0) {
            return Err(invalid("options.step", "step must be positive"));
        }
        o.step = T::lit(h);
    }
    if let Some(b) = ro.band {
        o.band = T::lit(b);
    }
    if let Some(c) = ro.conv_tol {
        o.conv_tol = T::lit(c);
    }
    o.strict_resonance = ro.strict_resonance.unwrap_or(false);
    let state_names = if kind == ProblemKind::LeftAssign {
        spec.variables.z.clone()
    } else {
        spec.variables.x.clone()
    };
    if let Some(rr) = &ro.region {
        spec.options.region = Some(parse_region(rr, &state_names, "options.region")?);
    }
    if let Some(rs) = &ro.simulate {
        let nf = spec.field(&rs.field).map_err(|e| invalid("options.simulate.field", e))?;
        let x0 = lits::<T>(&rs.x0);
        let xi0 = rs.xi0.as_ref().map(|v| lits::<T>(v));
        match &xi0 {
            None => expect_len("options.simulate.x0", x0.len(), nf.field.len(), "field dimension")?,
            Some(xi) => {
                expect_len("options.simulate.x0", x0.len(), n, "plant dimension")?;
                expect_len("options.simulate.xi0", xi.len(), n, "plant dimension")?;
                if nf.field.len() != 2 * n {
                    return Err(dim_err("options.simulate.field", "xi0 requires an error-system field"));
                }
            }
        }
        spec.options.simulate = Some(SimSpec {
            field: rs.field.clone(),
            x0,
            xi0,
        });
    }
    if let Some(rb) = &ro.basin {
        let nf = spec.field(&rb.field).map_err(|e| invalid("options.basin.field", e))?;
        let names = match nf.vars {
            VarSet::X => &spec.variables.x,
            VarSet::W => &spec.variables.w,
            VarSet::Z => &spec.variables.z,
        };
        let region = parse_region(
            &RawRegion {
                lower: rb.lower.clone(),
                upper: rb.upper.clone(),
                constraints: rb.constraints.clone(),
            },
            names,
            "options.basin",
        )?;
        spec.options.basin = Some(BasinSpec {
            field: rb.field.clone(),
            region,
            grid: rb.grid,
            horizon: rb.horizon.map_or(spec.options.horizon, T::lit),
            conv_tol: rb.conv_tol.map_or(spec.options.conv_tol, T::lit),
        });
    }

    spec.validate_kind(&raw.plant)?;
    Ok(spec)
}

/// Substitutes `value` for the last variable.
fn fix_last<T: Scalar>(v: &PolyVec<T>, value: T) -> Result<PolyVec<T>, String> {
    let k = v.num_vars();
    if k == 0 {
        return Err("no parameter variable".into());
    }
    let mut subst: Vec<Polynomial<T>> = (0..k - 1).map(|i| Polynomial::var(k - 1, i)).collect();
    subst.push(Polynomial::real_constant(k - 1, value));
    let subst = PolyVec::new(subst).map_err(|e| e.to_string())?;
    v.compose(&subst).map_err(|e| e.to_string())
}

/// Field names resolved by [`ProblemSpec::field`] without a `fields` entry.
pub const BUILTIN_FIELDS: [&str; 5] = ["f", "closed", "s", "F", "closed_z"];

impl<T: Scalar> ProblemSpec<T> {
    fn validate_kind(&self, raw_plant: &RawPlant) -> Result<(), LoadError> {
        let need = |ok: bool, field: &str| {
            if ok {
                Ok(())
            } else {
                Err(invalid(field, format!("required for {:?} problems", self.kind)))
            }
        };
        match self.kind {
            ProblemKind::LinearPartialAssign => need(self.linear.is_some(), "linear"),
            ProblemKind::RightAssign => {
                need(self.plant.f.is_some(), "plant.f")?;
                need(self.plant.g.is_some(), "plant.g")?;
                need(self.exo.is_some(), "exo")?;
                need(self.design.l.is_some(), "design.l")?;
                need(self.design.k.is_some(), "design.k")?;
                let exo = self.exo.as_ref().expect("checked");
                if exo.targets.iter().any(|t| t.side != Side::Right) {
                    return Err(invalid("exo.targets", "right assignment needs right pairs"));
                }
                if self.design.candidates.iter().chain(&self.design.preserve).any(|c| c.side != Side::Right) {
                    return Err(invalid("design.candidates", "right assignment needs right pairs"));
                }
                Ok(())
            }
            ProblemKind::LeftAssign => {
                need(self.plant.f.is_some(), "plant.f")?;
                need(self.plant.h.is_some(), "plant.h")?;
                need(self.plant.p.is_some(), "plant.p")?;
                need(self.exo.is_some(), "exo")?;
                if self.exo.as_ref().expect("checked").targets.iter().any(|t| t.side != Side::Left) {
                    return Err(invalid("exo.targets", "left assignment needs left pairs"));
                }
                let es = self.error_system().map_err(|e| invalid("plant", e.to_string()))?;
                let zs = self.variables.z.clone();
                if let Some(v) = &raw_plant.big_f {
                    let given = parse_vec::<T>(v, &zs, "plant.F")?;
                    expect_len("plant.F", given.len(), es.f.len(), "error-system dimension")?;
                    let d = given.try_sub(&es.f).map_err(|e| invalid("plant.F", e.to_string()))?;
                    if d.max_coeff_residual() > self.options.tol * (T::one() + es.f.max_coeff_residual()) {
                        return Err(invalid("plant.F", "does not match the error system built from f, h and p"));
                    }
                }
                if let Some(v) = &raw_plant.big_h {
                    let given = parse_vec::<T>(v, &zs, "plant.H")?;
                    expect_len("plant.H", given.len(), es.h.len(), "twice the output dimension")?;
                    let d = given.try_sub(&es.h).map_err(|e| invalid("plant.H", e.to_string()))?;
                    if d.max_coeff_residual() > self.options.tol * (T::one() + es.h.max_coeff_residual()) {
                        return Err(invalid("plant.H", "does not match [h(x); 0]"));
                    }
                }
                Ok(())
            }
            ProblemKind::VerifyOnly => need(!self.checks.is_empty(), "checks"),
            ProblemKind::Simulate => need(self.options.simulate.is_some(), "options.simulate"),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.variables.x.len()
    }

    pub fn input_dim(&self) -> usize {
        self.plant.g.as_ref().map_or(0, PolyMatrix::cols)
    }

    pub fn output_dim(&self) -> usize {
        self.plant.h.as_ref().map_or(0, PolyVec::len)
    }

    pub fn exo_dim(&self) -> usize {
        self.variables.w.len()
    }

    /// Resolves a field by name: user-declared `fields` first, then the
    /// built-ins `f`, `closed` (f + g k), `s`, `F` (open error system) and
    /// `closed_z` (error system with injection).
    pub fn field(&self, name: &str) -> Result<NamedField<T>, String> {
        if let Some(f) = self.fields.get(name) {
            return Ok(f.clone());
        }
        let missing = |what: &str| format!("field `{name}` needs {what}");
        match name {
            "f" => Ok(NamedField {
                vars: VarSet::X,
                field: self.plant.f.clone().ok_or_else(|| missing("plant.f"))?,
            }),
            "closed" => {
                let sys = self.control_system().map_err(|e| e.to_string())?;
                let k = self.design.k.clone().ok_or_else(|| missing("design.k"))?;
                let sys = sys.with_feedback(k).map_err(|e| e.to_string())?;
                Ok(NamedField {
                    vars: VarSet::X,
                    field: build_closed_loop(&sys).map_err(|e| e.to_string())?,
                })
            }
            "s" => Ok(NamedField {
                vars: VarSet::W,
                field: self.exo.as_ref().map(|e| e.s.clone()).ok_or_else(|| missing("exo.s"))?,
            }),
            "F" | "closed_z" => {
                let es = self.error_system().map_err(|e| e.to_string())?;
                Ok(NamedField {
                    vars: VarSet::Z,
                    field: if name == "F" { es.f } else { es.closed },
                })
            }
            _ => Err(format!("unknown field `{name}`")),
        }
    }

    pub fn control_system(&self) -> Result<ControlSystem<T>, SynthesisError<T>> {
        let f = self.plant.f.clone().ok_or_else(|| SynthesisError::Precondition("plant.f missing".into()))?;
        let g = self.plant.g.clone().ok_or_else(|| SynthesisError::Precondition("plant.g missing".into()))?;
        ControlSystem::new(f, g)
    }

    pub fn observer_problem(&self) -> Result<ObserverProblem<T>, SynthesisError<T>> {
        let get = |v: &Option<PolyVec<T>>, name: &str| {
            v.clone().ok_or_else(|| SynthesisError::Precondition(format!("plant.{name} missing")))
        };
        ObserverProblem::new(get(&self.plant.f, "f")?, get(&self.plant.h, "h")?, get(&self.plant.p, "p")?)
    }

    pub fn error_system(&self) -> Result<crate::synthesis::ErrorSystem<T>, SynthesisError<T>> {
        build_error_system(&self.observer_problem()?)
    }

    pub fn exo_system(&self) -> Result<ExoSystem<T>, SynthesisError<T>> {
        let e = self.exo.as_ref().ok_or_else(|| SynthesisError::Precondition("exo missing".into()))?;
        ExoSystem::new(e.s.clone(), e.targets.clone(), self.options.tol)
    }

    pub fn series_options(&self) -> SeriesOptions<T> {
        let mut s = SeriesOptions::new(self.options.degree);
        if self.options.strict_resonance {
            s = s.strict();
        }
        if let Some(seed) = &self.design.seed {
            s = s.with_constraint(crate::sylvester::LinearConstraint::seed(seed.clone()));
        }
        s
    }

    pub fn right_options(&self) -> RightOptions<T> {
        RightOptions {
            series: self.series_options(),
            pi: self.design.pi.clone(),
            derive_constraints: self.design.derive_constraints,
            rel_tol: self.options.tol,
            region: self.options.region.clone(),
            grid: self.options.grid,
        }
    }

    pub fn left_options(&self) -> LeftOptions<T> {
        LeftOptions {
            series: self.series_options(),
            rho: self.design.rho.clone(),
            r: self.design.r.clone(),
            stated: self.design.stated.clone(),
            rel_tol: self.options.tol,
            region: self.options.region.clone(),
            grid: self.options.grid,
        }
    }

    pub fn apply_overrides(&mut self, o: &Overrides<T>) {
        if let Some(d) = o.degree {
            self.options.degree = d.max(1);
        }
        if let Some(t) = o.tol {
            self.options.tol = t;
        }
        if let Some(g) = o.grid {
            self.options.grid = g;
        }
        if let Some(h) = o.horizon {
            self.options.horizon = h;
        }
        if let Some(h) = o.step {
            self.options.step = h;
        }
    }

    /// Expands `checks` into concrete instances, one per parameter value.
    pub fn check_instances(&self) -> Result<Vec<CheckInstance<T>>, LoadError> {
        let mut out = Vec::new();
        for (i, c) in self.checks.iter().enumerate() {
            let nf = self.field(&c.field).map_err(|e| invalid(format!("checks[{i}].field"), e))?;
            if c.params.is_empty() {
                out.push(CheckInstance {
                    label: c.label.clone(),
                    field: nf.field,
                    pair: c.pair.clone(),
                });
                continue;
            }
            for &b in &c.params {
                let inst = |v: &PolyVec<T>| fix_last(v, b).map_err(|e| invalid(format!("checks[{i}]"), e));
                let field = inst(&nf.field)?;
                let value = inst(&PolyVec::new(vec![c.pair.value.clone()]).expect("one entry"))?[0].clone();
                let vector = inst(&c.pair.vector)?;
                let pair = EigenPair::new(c.pair.side, value, vector)
                    .map_err(|e| invalid(format!("checks[{i}]"), format!("at parameter {b}: {e}")))?;
                let label = format!("{} [{}={b}]", c.label, self.parameter.as_ref().map_or("b", |p| p.name.as_str()));
                out.push(CheckInstance {
                    label: label.clone(),
                    field,
                    pair: pair.with_label(label),
                });
            }
        }
        Ok(out)
    }

    /// Initial state for `options.simulate`, mapping `(x0, xi0)` to the
    /// error coordinates `(x0, xi0 - x0)` when `xi0` is given.
    pub fn initial_state(&self) -> Option<Vec<T>> {
        let s = self.options.simulate.as_ref()?;
        Some(match &s.xi0 {
            None => s.x0.clone(),
            Some(xi) => s.x0.iter().cloned().chain(xi.iter().zip(&s.x0).map(|(a, b)| *a - *b)).collect(),
        })
    }
}
