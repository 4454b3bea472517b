//! Dispatch from a validated problem to the library, plus the arithmetic
//! rechecks behind `--recheck`.

use std::collections::BTreeMap;
use std::fmt;

use qsdp::closeness::{
    fidelity_pure_range, max_sqrt_fidelity, min_trace_distance, property_range, sqrt_fidelity,
    sqrt_fidelity_closed_form, ClosenessResult,
};
use qsdp::estimation::{
    consistency_problem, extract_certificate, feasibility, feasibility_intervals, relax_l1,
    relax_linf, verify_certificate, Dataset, EstimationOptions, EstimationOutcome,
    InfeasibilityCertificate, Verdict,
};
use qsdp::marginal::{
    marginal_dual_bound, marginal_feasibility_eps, max_avg_fidelity_pure_marginals,
    projector_bound, verify_marginal_certificate, MarginalCertificate, MarginalSpec,
    MarginalVerdict, Pair, MATCH_TOL,
};
use qsdp::operator::DensityOperator;
use qsdp::sdp::{check_feasible, SolveStatus};
use qsdp::Error;

use crate::problem::{literal, FidelityInput, Problem, Task};
use crate::report::{CertificateReport, Diagnostics, Outcome, Recheck, Report, Witness};

/// Slack for states that should satisfy the data up to solver accuracy.
const STATE_TOL: f64 = 1e-6;
/// Slack for recomputed objective values.
const VALUE_TOL: f64 = 1e-6;
/// Slack for trace and positivity of reported density operators.
const DENSITY_TOL: f64 = 1e-9;

#[derive(Debug)]
pub enum RunError {
    /// Bad input or an unsupported request: exit 1.
    Invalid(String),
    /// The solver could not reach a reliable answer: exit 3.
    Numerical(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invalid(_) => 1,
            RunError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Invalid(m) => write!(f, "error: {m}"),
            RunError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Solver {
                status: SolveStatus::NumericalFailure | SolveStatus::MaxIterations,
            }
            | Error::UnverifiedCertificate { .. } => RunError::Numerical(e.to_string()),
            _ => RunError::Invalid(e.to_string()),
        }
    }
}

/// Everything a task produces before timing and provenance are attached.
#[derive(Default)]
pub struct Findings {
    pub verdict: Option<Outcome>,
    pub values: BTreeMap<String, f64>,
    pub witnesses: Vec<Witness>,
    pub certificate: Option<CertificateReport>,
    pub diagnostics: Vec<Diagnostics>,
    pub notes: Vec<String>,
    checks: Vec<(bool, String)>,
}

impl Findings {
    fn value(&mut self, key: &str, v: f64) {
        self.values.insert(key.into(), v);
    }

    fn witness(&mut self, label: &str, state: &DensityOperator) {
        self.witnesses.push(Witness {
            label: label.into(),
            state: literal(state.op()),
        });
    }

    fn check(&mut self, passed: bool, line: String) {
        self.checks.push((passed, line));
    }

    pub fn recheck(&self) -> Recheck {
        Recheck {
            passed: self.checks.iter().all(|(p, _)| *p),
            checks: self
                .checks
                .iter()
                .map(|(p, l)| format!("{} {l}", if *p { "ok  " } else { "FAIL" }))
                .collect(),
        }
    }

    pub fn into_report(self, source: &str, task: &str, seed: Option<u64>, wall: f64, recheck: bool) -> Report {
        let rc = recheck.then(|| self.recheck());
        Report {
            schema_version: crate::problem::SCHEMA_VERSION,
            source: source.into(),
            task: task.into(),
            verdict: self.verdict.unwrap_or(Outcome::Solved),
            values: self.values,
            witnesses: self.witnesses,
            certificate: self.certificate,
            diagnostics: self.diagnostics,
            notes: self.notes,
            recheck: rc,
            seed,
            wall_time_s: wall,
        }
    }
}

pub fn run(problem: &Problem, opts: &EstimationOptions) -> Result<Findings, RunError> {
    let mut f = Findings::default();
    match &problem.task {
        Task::Feasibility(data) => decision(&mut f, data, feasibility(data, opts)?, opts, None),
        Task::Intervals(data) => decision(&mut f, data, feasibility_intervals(data, opts)?, opts, None),
        Task::RelaxLinf(data) => decision(&mut f, data, relax_linf(data, opts)?, opts, Some(linf)),
        Task::RelaxL1(data) => decision(&mut f, data, relax_l1(data, opts)?, opts, Some(half_l1)),
        Task::Certificate(data) => match extract_certificate(data, opts) {
            Ok(cert) => {
                f.verdict = Some(Outcome::Infeasible);
                attach_certificate(&mut f, &cert, data);
            }
            Err(Error::CertificateUnavailable { delta_star }) => {
                f.verdict = Some(Outcome::Feasible);
                f.value("delta_star", delta_star);
                f.notes
                    .push("data are consistent within the threshold; no certificate exists".into());
            }
            Err(e) => return Err(e.into()),
        },
        Task::VerifyCertificate(data, cert) => {
            let check = verify_certificate(cert, data);
            f.verdict = Some(if check.valid {
                Outcome::Infeasible
            } else {
                Outcome::Unverified
            });
            f.value("beta", check.beta);
            f.value("lambda_max", check.lambda_max);
            attach_certificate(&mut f, cert, data);
        }
        Task::TraceDistance(data, target) => {
            let Some(r) = closeness(&mut f, data, min_trace_distance(data, target, opts))? else {
                return Ok(f);
            };
            f.value("trace_distance", r.value);
            closest(&mut f, data, "closest state", &r);
            let direct = 0.5 * r.state.op().sub(target.op())?.trace_norm();
            value_check(&mut f, "half trace norm of (state - target)", direct, r.value);
        }
        Task::FidelityPure(data, target) => {
            let Some((lo, hi)) = closeness(&mut f, data, fidelity_pure_range(data, target, opts))?
            else {
                return Ok(f);
            };
            for (key, label, r) in [("fidelity_min", "argmin", &lo), ("fidelity_max", "argmax", &hi)] {
                f.value(key, r.value);
                closest(&mut f, data, label, r);
                let direct = target.op().inner(r.state.op());
                value_check(&mut f, &format!("overlap at {label}"), direct, r.value);
            }
        }
        Task::FidelityMixed(FidelityInput::Data(data), target) => {
            let Some(r) = closeness(&mut f, data, max_sqrt_fidelity(data, target, opts))? else {
                return Ok(f);
            };
            f.value("sqrt_fidelity_max", r.value);
            f.value("fidelity_max", r.value * r.value);
            closest(&mut f, data, "closest state", &r);
            let direct = sqrt_fidelity_closed_form(&r.state, target)?;
            value_check(&mut f, "closed-form sqrt fidelity at the state", direct, r.value);
        }
        Task::FidelityMixed(FidelityInput::State(state), target) => {
            let sdp = sqrt_fidelity(state, target, &opts.solver)?;
            let closed = sqrt_fidelity_closed_form(state, target)?;
            f.value("sqrt_fidelity", sdp);
            f.value("fidelity", sdp * sdp);
            value_check(&mut f, "closed-form sqrt fidelity", closed, sdp);
        }
        Task::PropertyRange(data, obs) => {
            let Some((lo, hi)) = closeness(&mut f, data, property_range(data, obs, opts))? else {
                return Ok(f);
            };
            for (key, label, r) in [("min", "argmin", &lo), ("max", "argmax", &hi)] {
                f.value(key, r.value);
                closest(&mut f, data, label, r);
                value_check(&mut f, &format!("expectation at {label}"), obs.expectation(r.state.op()), r.value);
            }
        }
        Task::Marginal(spec) => marginal(&mut f, spec, 0.0, opts)?,
        Task::MarginalEps(spec, eps) => marginal(&mut f, spec, *eps, opts)?,
        Task::MarginalPurefid(spec) => {
            let (xy, yz) = pure_pair(spec);
            let (value, state) = max_avg_fidelity_pure_marginals(xy, yz, spec.shape(), opts)?;
            let mu = marginal_dual_bound(xy, yz, spec.shape())?;
            f.value("avg_fidelity_max", value);
            f.value("mu_star", mu);
            f.notes.push(format!("average fidelity bound mu* = {mu:.9}"));
            f.witness("global state", &state);
            density_check(&mut f, "global state", &state);
            let direct = average_fidelity(spec, &state)?;
            value_check(&mut f, "average fidelity at the state", direct, value);
            f.check(
                value <= mu + VALUE_TOL,
                format!("optimum {value:.9} <= mu* {mu:.9}"),
            );
        }
        Task::MarginalDual(spec) => {
            let (xy, yz) = pure_pair(spec);
            let mu = marginal_dual_bound(xy, yz, spec.shape())?;
            let proj = projector_bound(xy, yz, spec.shape())?;
            f.value("mu_star", mu);
            f.value("projector_bound", proj);
            f.notes.push(format!("average fidelity bound mu* = {mu:.9}"));
            f.check(
                (mu - proj).abs() <= 1e-8,
                format!("spectral mu* {mu:.12} matches projector form {proj:.12}"),
            );
        }
    }
    Ok(f)
}

fn pure_pair(spec: &MarginalSpec) -> (&DensityOperator, &DensityOperator) {
    (
        spec.target(Pair::XY).expect("validated"),
        spec.target(Pair::YZ).expect("validated"),
    )
}

fn average_fidelity(spec: &MarginalSpec, state: &DensityOperator) -> qsdp::Result<f64> {
    let mut total = 0.0;
    for (pair, target) in spec.targets() {
        let reduced = qsdp::operator::partial_trace(state.op(), spec.shape(), &pair.parties())?;
        total += target.op().inner(&reduced);
    }
    Ok(total / spec.targets().len() as f64)
}

fn linf(dev: &[f64]) -> f64 {
    dev.iter().fold(0.0, |a: f64, x| a.max(x.abs()))
}

fn half_l1(dev: &[f64]) -> f64 {
    0.5 * dev.iter().map(|x| x.abs()).sum::<f64>()
}

/// Reports a decision. Relaxations pass the norm their `δ*` measures, and
/// their state is checked against it instead of against the data.
fn decision(
    f: &mut Findings,
    data: &Dataset,
    out: EstimationOutcome,
    opts: &EstimationOptions,
    relaxation: Option<fn(&[f64]) -> f64>,
) {
    f.verdict = Some(match out.verdict {
        Verdict::Feasible => Outcome::Feasible,
        Verdict::Infeasible => Outcome::Infeasible,
        Verdict::Marginal => Outcome::Marginal,
    });
    if let Some(d) = out.delta_star {
        f.value("delta_star", d);
    }
    f.diagnostics.push(Diagnostics::from(&out.diagnostics));
    if let Some(cert) = &out.certificate {
        attach_certificate(f, cert, data);
    }
    let Some(state) = &out.state else { return };
    match (relaxation, out.delta_star) {
        (Some(norm), Some(delta)) => {
            f.witness("closest state", state);
            density_check(f, "closest state", state);
            let dev: Vec<f64> = data
                .records()
                .iter()
                .map(|r| r.observable.expectation(state.op()) - r.value)
                .collect();
            let measured = norm(&dev);
            f.check(
                measured <= delta + STATE_TOL,
                format!("deviation {measured:.3e} of the closest state within delta* {delta:.3e}"),
            );
        }
        _ if out.verdict == Verdict::Feasible => {
            f.witness("witness", state);
            consistency_check(f, data, "witness", state, opts.threshold + 1e-8);
        }
        _ => {}
    }
}

fn attach_certificate(f: &mut Findings, cert: &InfeasibilityCertificate, data: &Dataset) {
    let check = verify_certificate(cert, data);
    f.check(
        check.valid,
        format!(
            "certificate: beta {:.3e} > 0, lambda_max(W) {:.3e} <= 1e-9, |t|_1 {:.6} <= 1",
            check.beta, check.lambda_max, check.t_l1
        ),
    );
    f.certificate = Some(CertificateReport::Measurement {
        z: cert.z,
        t: cert.t.clone(),
        beta: check.beta,
        lambda_max: check.lambda_max,
        t_l1: check.t_l1,
        valid: check.valid,
    });
}

fn attach_marginal_certificate(f: &mut Findings, cert: &MarginalCertificate, spec: &MarginalSpec, eps: f64) {
    let check = verify_marginal_certificate(cert, spec, eps);
    f.check(
        check.valid,
        format!(
            "certificate: beta {:.3e} > 0, lambda_max(W) {:.3e} <= 1e-9, sum |H| {:.6} <= 1",
            check.beta, check.lambda_max, check.norm
        ),
    );
    f.certificate = Some(CertificateReport::Marginal {
        z: cert.z,
        terms: cert
            .terms
            .iter()
            .map(|(p, h)| (p.label().to_string(), literal(h)))
            .collect(),
        eps,
        beta: check.beta,
        lambda_max: check.lambda_max,
        norm: check.norm,
        valid: check.valid,
    });
}

/// Unwraps a closeness result, turning inconsistent data into an
/// Infeasible report.
fn closeness<T>(
    f: &mut Findings,
    data: &Dataset,
    result: qsdp::Result<T>,
) -> Result<Option<T>, RunError> {
    match result {
        Ok(v) => {
            f.verdict = Some(Outcome::Solved);
            Ok(Some(v))
        }
        Err(Error::InfeasibleData(cert)) => {
            f.verdict = Some(Outcome::Infeasible);
            f.notes
                .push("data are inconsistent; no state to optimize over".into());
            attach_certificate(f, &cert, data);
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn closest(f: &mut Findings, data: &Dataset, label: &str, r: &ClosenessResult) {
    f.witness(label, &r.state);
    f.diagnostics.push(Diagnostics::from(&r.diagnostics));
    consistency_check(f, data, label, &r.state, STATE_TOL);
}

fn consistency_check(f: &mut Findings, data: &Dataset, label: &str, state: &DensityOperator, tol: f64) {
    let (p, _) = consistency_problem(data);
    match check_feasible(&p, &[state.op().clone()], tol) {
        Ok(r) => f.check(
            r.feasible,
            format!(
                "{label} satisfies the data: worst equality {:.3e}, min eigenvalue {:.3e} (tol {tol:.0e})",
                r.worst_equality, r.worst_lmi
            ),
        ),
        Err(e) => f.check(false, format!("{label}: {e}")),
    }
}

fn density_check(f: &mut Findings, label: &str, state: &DensityOperator) {
    let (p, _) = consistency_problem(&Dataset::empty(state.dim()));
    match check_feasible(&p, &[state.op().clone()], DENSITY_TOL) {
        Ok(r) => f.check(
            r.feasible,
            format!(
                "{label} is a density operator: trace error {:.3e}, min eigenvalue {:.3e}",
                r.worst_equality, r.worst_lmi
            ),
        ),
        Err(e) => f.check(false, format!("{label}: {e}")),
    }
}

fn value_check(f: &mut Findings, what: &str, direct: f64, reported: f64) {
    f.check(
        (direct - reported).abs() <= VALUE_TOL,
        format!("{what} {direct:.9} matches reported {reported:.9}"),
    );
}

fn marginal(f: &mut Findings, spec: &MarginalSpec, eps: f64, opts: &EstimationOptions) -> Result<(), RunError> {
    let out = marginal_feasibility_eps(spec, eps, opts)?;
    f.value("eps_star", out.eps_star);
    if eps > 0.0 {
        f.value("eps", eps);
    }
    f.diagnostics.push(Diagnostics::from(&out.diagnostics));
    if let Some(mu) = out.dual_bound {
        f.value("mu_star", mu);
        f.notes.push(format!("average fidelity bound mu* = {mu:.9}"));
    }
    match out.verdict {
        MarginalVerdict::Feasible => {
            f.verdict = Some(Outcome::Feasible);
            let state = out.global_state.as_ref().expect("feasible outcomes carry a witness");
            f.witness("global state", state);
            density_check(f, "global state", state);
            let mismatch = spec.mismatch(state.op())?;
            f.value("mismatch", mismatch);
            f.check(
                mismatch <= eps + MATCH_TOL,
                format!("marginal mismatch {mismatch:.3e} within eps + {MATCH_TOL:.0e}"),
            );
        }
        MarginalVerdict::Infeasible => {
            f.verdict = Some(Outcome::Infeasible);
            let cert = out.certificate.as_ref().expect("infeasible outcomes carry a certificate");
            attach_marginal_certificate(f, cert, spec, eps);
        }
    }
    Ok(())
}
