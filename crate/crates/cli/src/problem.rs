//! Problem files: JSON with a mandatory `schema_version`, a `task` name and
//! the fields that task needs. Complex scalars are `[re, im]` pairs and
//! matrices are row-major nested arrays.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use qsdp::estimation::{Dataset, InfeasibilityCertificate, MeasurementRecord};
use qsdp::marginal::{MarginalSpec, Pair};
use qsdp::operator::{DensityOperator, HermitianOperator, SubsystemShape};
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

/// Largest tolerated `|a_ij − conj(a_ji)|` in a matrix literal.
const HERMITIAN_TOL: f64 = 1e-8;

pub type MatrixLiteral = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskName {
    Feasibility,
    Intervals,
    RelaxLinf,
    RelaxL1,
    Certificate,
    VerifyCertificate,
    TraceDistance,
    FidelityPure,
    FidelityMixed,
    PropertyRange,
    Marginal,
    MarginalEps,
    MarginalPurefid,
    MarginalDual,
}

impl TaskName {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskName::Feasibility => "feasibility",
            TaskName::Intervals => "intervals",
            TaskName::RelaxLinf => "relax-linf",
            TaskName::RelaxL1 => "relax-l1",
            TaskName::Certificate => "certificate",
            TaskName::VerifyCertificate => "verify-certificate",
            TaskName::TraceDistance => "trace-distance",
            TaskName::FidelityPure => "fidelity-pure",
            TaskName::FidelityMixed => "fidelity-mixed",
            TaskName::PropertyRange => "property-range",
            TaskName::Marginal => "marginal",
            TaskName::MarginalEps => "marginal-eps",
            TaskName::MarginalPurefid => "marginal-purefid",
            TaskName::MarginalDual => "marginal-dual",
        }
    }

    /// Fields the task reads besides `schema_version` and `task`, each
    /// with whether it is required.
    fn fields(self) -> &'static [(&'static str, bool)] {
        use TaskName::*;
        match self {
            Feasibility | Intervals | RelaxLinf | RelaxL1 | Certificate => &[("records", true)],
            VerifyCertificate => &[("records", true), ("certificate", true)],
            TraceDistance | FidelityPure => &[("records", true), ("target", true)],
            FidelityMixed => &[("records", false), ("state", false), ("target", true)],
            PropertyRange => &[("records", true), ("observable", true)],
            Marginal | MarginalPurefid | MarginalDual => &[("marginal", true)],
            MarginalEps => &[("marginal", true), ("eps", true)],
        }
    }
}

impl fmt::Display for TaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    schema_version: u32,
    task: TaskName,
    records: Option<Vec<RawRecord>>,
    certificate: Option<RawCertificate>,
    target: Option<MatrixLiteral>,
    state: Option<MatrixLiteral>,
    observable: Option<MatrixLiteral>,
    marginal: Option<RawMarginal>,
    eps: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    observable: MatrixLiteral,
    value: f64,
    half_width: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCertificate {
    z: f64,
    t: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarginal {
    #[serde(default = "three_qubits")]
    dims: Vec<usize>,
    targets: BTreeMap<String, MatrixLiteral>,
}

fn three_qubits() -> Vec<usize> {
    vec![2, 2, 2]
}

/// A schema or validation failure, prefixed by the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    pub field: String,
    pub message: String,
}

impl SchemaError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for SchemaError {}

#[derive(Clone, Debug)]
pub enum FidelityInput {
    Data(Dataset),
    State(DensityOperator),
}

#[derive(Clone, Debug)]
pub enum Task {
    Feasibility(Dataset),
    Intervals(Dataset),
    RelaxLinf(Dataset),
    RelaxL1(Dataset),
    Certificate(Dataset),
    VerifyCertificate(Dataset, InfeasibilityCertificate),
    TraceDistance(Dataset, DensityOperator),
    FidelityPure(Dataset, DensityOperator),
    FidelityMixed(FidelityInput, DensityOperator),
    PropertyRange(Dataset, HermitianOperator),
    Marginal(MarginalSpec),
    MarginalEps(MarginalSpec, f64),
    MarginalPurefid(MarginalSpec),
    MarginalDual(MarginalSpec),
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub name: TaskName,
    pub task: Task,
}

impl Problem {
    /// One-line summary for `validate`.
    pub fn summary(&self) -> String {
        let detail = match &self.task {
            Task::Feasibility(d)
            | Task::Intervals(d)
            | Task::RelaxLinf(d)
            | Task::RelaxL1(d)
            | Task::Certificate(d)
            | Task::VerifyCertificate(d, _)
            | Task::TraceDistance(d, _)
            | Task::FidelityPure(d, _)
            | Task::FidelityMixed(FidelityInput::Data(d), _)
            | Task::PropertyRange(d, _) => {
                format!("{} records, dimension {}", d.len(), d.dim())
            }
            Task::FidelityMixed(FidelityInput::State(s), _) => format!("dimension {}", s.dim()),
            Task::Marginal(s)
            | Task::MarginalEps(s, _)
            | Task::MarginalPurefid(s)
            | Task::MarginalDual(s) => {
                let pairs: Vec<&str> = s.targets().iter().map(|(p, _)| p.label()).collect();
                format!("dims {:?}, pairs {}", s.shape().dims(), pairs.join(" "))
            }
        };
        format!("task {}, {}", self.name, detail)
    }
}

/// Parses and validates a problem file without running any solver.
pub fn parse(text: &str) -> Result<Problem, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawProblem = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { String::new() } else { path };
        SchemaError::new(field, e.into_inner().to_string())
    })?;
    if raw.schema_version != SCHEMA_VERSION {
        return Err(SchemaError::new(
            "schema_version",
            format!("unsupported version {}, expected {SCHEMA_VERSION}", raw.schema_version),
        ));
    }
    check_fields(&raw)?;
    let name = raw.task;
    let task = match name {
        TaskName::Feasibility => Task::Feasibility(records(&raw)?),
        TaskName::Intervals => {
            let data = records(&raw)?;
            if let Some(i) = data.records().iter().position(|r| r.half_width.is_none()) {
                return Err(SchemaError::new(
                    format!("records[{i}].half_width"),
                    "required by task intervals",
                ));
            }
            Task::Intervals(data)
        }
        TaskName::RelaxLinf => Task::RelaxLinf(records(&raw)?),
        TaskName::RelaxL1 => Task::RelaxL1(records(&raw)?),
        TaskName::Certificate => Task::Certificate(records(&raw)?),
        TaskName::VerifyCertificate => {
            let data = records(&raw)?;
            let c = raw.certificate.as_ref().expect("checked");
            if c.t.len() != data.len() {
                return Err(SchemaError::new(
                    "certificate.t",
                    format!("has {} entries for {} records", c.t.len(), data.len()),
                ));
            }
            Task::VerifyCertificate(
                data,
                InfeasibilityCertificate {
                    z: c.z,
                    t: c.t.clone(),
                },
            )
        }
        TaskName::TraceDistance => {
            let data = records(&raw)?;
            let target = state_matching(&raw.target, "target", data.dim())?;
            Task::TraceDistance(data, target)
        }
        TaskName::FidelityPure => {
            let data = records(&raw)?;
            let target = state_matching(&raw.target, "target", data.dim())?;
            Task::FidelityPure(data, target)
        }
        TaskName::FidelityMixed => {
            let input = match (&raw.records, &raw.state) {
                (Some(_), None) => FidelityInput::Data(records(&raw)?),
                (None, Some(m)) => FidelityInput::State(density(m, "state")?),
                _ => {
                    return Err(SchemaError::new(
                        "",
                        "task fidelity-mixed needs exactly one of `records` and `state`",
                    ))
                }
            };
            let dim = match &input {
                FidelityInput::Data(d) => d.dim(),
                FidelityInput::State(s) => s.dim(),
            };
            let target = state_matching(&raw.target, "target", dim)?;
            Task::FidelityMixed(input, target)
        }
        TaskName::PropertyRange => {
            let data = records(&raw)?;
            let obs = hermitian(raw.observable.as_ref().expect("checked"), "observable")?;
            if obs.dim() != data.dim() {
                return Err(SchemaError::new(
                    "observable",
                    format!("has dimension {}, records have dimension {}", obs.dim(), data.dim()),
                ));
            }
            Task::PropertyRange(data, obs)
        }
        TaskName::Marginal => Task::Marginal(marginal(&raw)?),
        TaskName::MarginalEps => {
            let eps = raw.eps.expect("checked");
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(SchemaError::new("eps", format!("{eps} must be finite and nonnegative")));
            }
            Task::MarginalEps(marginal(&raw)?, eps)
        }
        TaskName::MarginalPurefid => Task::MarginalPurefid(pure_pair(&raw)?),
        TaskName::MarginalDual => Task::MarginalDual(pure_pair(&raw)?),
    };
    Ok(Problem { name, task })
}

fn check_fields(raw: &RawProblem) -> Result<(), SchemaError> {
    let present = [
        ("records", raw.records.is_some()),
        ("certificate", raw.certificate.is_some()),
        ("target", raw.target.is_some()),
        ("state", raw.state.is_some()),
        ("observable", raw.observable.is_some()),
        ("marginal", raw.marginal.is_some()),
        ("eps", raw.eps.is_some()),
    ];
    let wanted = raw.task.fields();
    for (field, is_present) in present {
        match wanted.iter().find(|(f, _)| *f == field) {
            Some((_, true)) if !is_present => {
                return Err(SchemaError::new(field, format!("required by task {}", raw.task)))
            }
            None if is_present => {
                return Err(SchemaError::new(field, format!("not used by task {}", raw.task)))
            }
            _ => {}
        }
    }
    Ok(())
}

/// Converts a literal, naming the first ragged row or asymmetric entry.
pub fn hermitian(m: &MatrixLiteral, field: &str) -> Result<HermitianOperator, SchemaError> {
    let n = m.len();
    if n == 0 {
        return Err(SchemaError::new(field, "matrix is empty"));
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != n {
            return Err(SchemaError::new(
                field,
                format!("row {i} has {} entries, expected {n}", row.len()),
            ));
        }
        for (j, v) in row.iter().enumerate() {
            if !(v[0].is_finite() && v[1].is_finite()) {
                return Err(SchemaError::new(field, format!("entry ({i}, {j}) is not finite")));
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let a = Complex64::new(m[i][j][0], m[i][j][1]);
            let b = Complex64::new(m[j][i][0], m[j][i][1]);
            let dev = (a - b.conj()).norm();
            if dev > HERMITIAN_TOL {
                return Err(SchemaError::new(
                    field,
                    format!(
                        "not Hermitian: entry ({i}, {j}) differs from the conjugate of ({j}, {i}) by {dev:.3e}"
                    ),
                ));
            }
        }
    }
    let rows: Vec<Vec<Complex64>> = m
        .iter()
        .map(|r| r.iter().map(|v| Complex64::new(v[0], v[1])).collect())
        .collect();
    HermitianOperator::from_rows(&rows).map_err(|e| SchemaError::new(field, e.to_string()))
}

fn density(m: &MatrixLiteral, field: &str) -> Result<DensityOperator, SchemaError> {
    DensityOperator::new(hermitian(m, field)?).map_err(|e| SchemaError::new(field, e.to_string()))
}

fn state_matching(
    m: &Option<MatrixLiteral>,
    field: &str,
    dim: usize,
) -> Result<DensityOperator, SchemaError> {
    let state = density(m.as_ref().expect("checked"), field)?;
    if state.dim() != dim {
        return Err(SchemaError::new(
            field,
            format!("has dimension {}, records have dimension {dim}", state.dim()),
        ));
    }
    Ok(state)
}

fn records(raw: &RawProblem) -> Result<Dataset, SchemaError> {
    let list = raw.records.as_ref().expect("checked");
    if list.is_empty() {
        return Err(SchemaError::new("records", "at least one record is required"));
    }
    let mut out = Vec::with_capacity(list.len());
    let mut first_dim = 0;
    for (i, r) in list.iter().enumerate() {
        let obs = hermitian(&r.observable, &format!("records[{i}].observable"))?;
        if i == 0 {
            first_dim = obs.dim();
        } else if obs.dim() != first_dim {
            return Err(SchemaError::new(
                format!("records[{i}]"),
                format!(
                    "dimension mismatch: records[{i}] has dimension {}, records[0] has dimension {first_dim}",
                    obs.dim()
                ),
            ));
        }
        if !r.value.is_finite() {
            return Err(SchemaError::new(format!("records[{i}].value"), "must be finite"));
        }
        out.push(match r.half_width {
            Some(h) if !(h >= 0.0 && h.is_finite()) => {
                return Err(SchemaError::new(
                    format!("records[{i}].half_width"),
                    format!("{h} must be finite and nonnegative"),
                ))
            }
            Some(h) => MeasurementRecord::with_half_width(obs, r.value, h),
            None => MeasurementRecord::new(obs, r.value),
        });
    }
    Dataset::new(out).map_err(|e| SchemaError::new("records", e.to_string()))
}

fn marginal(raw: &RawProblem) -> Result<MarginalSpec, SchemaError> {
    let m = raw.marginal.as_ref().expect("checked");
    let shape = SubsystemShape::new(m.dims.clone())
        .map_err(|e| SchemaError::new("marginal.dims", e.to_string()))?;
    if m.dims.len() != 3 {
        return Err(SchemaError::new(
            "marginal.dims",
            format!("expected three parties, got {}", m.dims.len()),
        ));
    }
    let mut targets = Vec::new();
    for (label, lit) in &m.targets {
        let field = format!("marginal.targets.{label}");
        let pair = Pair::parse(label)
            .ok_or_else(|| SchemaError::new(&field, "pair label must be XY, XZ or YZ"))?;
        targets.push((pair, density(lit, &field)?));
    }
    if targets.is_empty() {
        return Err(SchemaError::new("marginal.targets", "at least one pair is required"));
    }
    MarginalSpec::new(shape, targets).map_err(|e| SchemaError::new("marginal", e.to_string()))
}

/// A spec with pure targets on exactly `XY` and `YZ`.
fn pure_pair(raw: &RawProblem) -> Result<MarginalSpec, SchemaError> {
    let spec = marginal(raw)?;
    let labels: Vec<Pair> = spec.targets().iter().map(|(p, _)| *p).collect();
    if labels != [Pair::XY, Pair::YZ] {
        return Err(SchemaError::new(
            "marginal.targets",
            format!("task {} needs exactly the pairs XY and YZ", raw.task),
        ));
    }
    for (pair, rho) in spec.targets() {
        let second = rho.second_eigenvalue();
        if second > qsdp::closeness::PURE_TOL {
            return Err(SchemaError::new(
                format!("marginal.targets.{}", pair.label()),
                format!("target is not pure: second eigenvalue {second:.3e}"),
            ));
        }
    }
    Ok(spec)
}

/// Literal of an operator, for reports.
pub fn literal(op: &HermitianOperator) -> MatrixLiteral {
    op.to_rows()
        .iter()
        .map(|r| r.iter().map(|c| [c.re, c.im]).collect())
        .collect()
}
