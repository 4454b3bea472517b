//! Consistency of measured expectation values with a quantum state.
//!
//! Data are pairs `(M_x, m_x)`, optionally with a half-width `Δ_x` meaning
//! `tr(M_x ρ)` must lie in `[m_x − Δ_x, m_x + Δ_x]`. Half-widths are hard
//! bounds. Every decision goes through the ℓ∞ relaxation
//!
//! ```text
//! minimize δ  s.t.  |tr(M_x ρ) − m_x| ≤ Δ_x + δ,  tr ρ = 1,  ρ ⪰ 0
//! ```
//!
//! which is always feasible. Its optimal value, clipped at zero, is `δ*`:
//! how far the data are from any state.

mod certificate;
mod face;

use crate::error::{Error, Result};
use crate::operator::{DensityOperator, HermitianOperator};
use crate::sdp::{
    self, BlockId, BlockKind, Functional, Lmi, LmiTerm, SdpProblem, SdpSolution, Sense,
    SolveStatus, SolverDiagnostics, SolverOptions,
};

pub(crate) use face::{minimal_face, select_columns, Face};
pub use certificate::{
    data_aligned_certificate, harvest_dual_certificate, verify_certificate, witness,
    CertificateCheck, InfeasibilityCertificate,
};

/// One observable with its reported expectation value.
#[derive(Clone, Debug)]
pub struct MeasurementRecord {
    pub observable: HermitianOperator,
    pub value: f64,
    pub half_width: Option<f64>,
}

impl MeasurementRecord {
    pub fn new(observable: HermitianOperator, value: f64) -> Self {
        Self {
            observable,
            value,
            half_width: None,
        }
    }

    pub fn with_half_width(observable: HermitianOperator, value: f64, half_width: f64) -> Self {
        Self {
            observable,
            value,
            half_width: Some(half_width),
        }
    }
}

/// Measurement records sharing one Hilbert-space dimension.
#[derive(Clone, Debug)]
pub struct Dataset {
    dim: usize,
    records: Vec<MeasurementRecord>,
}

impl Dataset {
    /// Takes the dimension from the first record. Fails on an empty list,
    /// on records of differing dimension, and on negative or non-finite
    /// values.
    pub fn new(records: Vec<MeasurementRecord>) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::InvalidProblem("no measurement records".into()))?;
        let mut data = Self::empty(first.observable.dim());
        for r in records {
            data.push(r)?;
        }
        Ok(data)
    }

    /// A dataset without records; every state of dimension `dim` is consistent.
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, record: MeasurementRecord) -> Result<()> {
        let index = self.records.len();
        if record.observable.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "record {index} has dimension {}, earlier records have dimension {}",
                record.observable.dim(),
                self.dim
            )));
        }
        if !record.value.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "record {index} has a non-finite value"
            )));
        }
        if let Some(h) = record.half_width {
            if !(h >= 0.0 && h.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "record {index} has half-width {h}; it must be finite and nonnegative"
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[MeasurementRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.value).collect()
    }

    /// Copy with every half-width dropped.
    pub fn without_half_widths(&self) -> Self {
        Self {
            dim: self.dim,
            records: self
                .records
                .iter()
                .map(|r| MeasurementRecord::new(r.observable.clone(), r.value))
                .collect(),
        }
    }

    /// Largest `|tr(M_x ρ) − m_x| − Δ_x` over the records, clipped at zero.
    pub fn max_violation(&self, rho: &HermitianOperator) -> f64 {
        self.records
            .iter()
            .map(|r| (r.observable.expectation(rho) - r.value).abs() - r.half_width.unwrap_or(0.0))
            .fold(0.0, f64::max)
    }

    /// Adds `ρ`-constraints for these records to a problem: equalities for
    /// exact records, interval LMIs for records with a half-width.
    pub(crate) fn constrain(&self, p: &mut SdpProblem, rho: BlockId) {
        for (x, r) in self.records.iter().enumerate() {
            match r.half_width {
                None => p.add_equality(Functional::term(rho, r.observable.clone()), r.value),
                Some(h) => {
                    for (sign, side) in [(1.0, "lower"), (-1.0, "upper")] {
                        p.add_lmi(
                            Lmi::new(
                                format!("record {x} {side}"),
                                HermitianOperator::diag(&[-sign * r.value + h]),
                            )
                            .with(LmiTerm::Scalar {
                                block: rho,
                                coeff: r.observable.scale(sign),
                                placement: HermitianOperator::identity(1),
                            }),
                        );
                    }
                }
            }
        }
    }
}

/// The exact consistency problem: `ρ ⪰ 0`, `tr ρ = 1` and every record.
/// Exact records become equalities and records with a half-width become
/// interval constraints. Useful for rechecking a reported state with
/// [`sdp::check_feasible`].
pub fn consistency_problem(data: &Dataset) -> (SdpProblem, BlockId) {
    let d = data.dim();
    let mut p = SdpProblem::new(Sense::Minimize);
    let rho = p.add_block("rho", d, BlockKind::Hermitian);
    p.add_psd(rho);
    p.add_equality(Functional::term(rho, HermitianOperator::identity(d)), 1.0);
    data.constrain(&mut p, rho);
    (p, rho)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Feasible,
    Infeasible,
    /// `δ*` too close to the threshold to call either way.
    Marginal,
}

#[derive(Clone, Debug)]
pub struct EstimationOptions {
    /// `δ*` above this value means the data are inconsistent.
    pub threshold: f64,
    pub solver: SolverOptions,
}

impl Default for EstimationOptions {
    fn default() -> Self {
        Self {
            threshold: 1e-6,
            solver: SolverOptions::default(),
        }
    }
}

impl EstimationOptions {
    fn marginal_band(&self) -> f64 {
        10.0 * self.solver.gap_tol
    }
}

#[derive(Clone, Debug)]
pub struct EstimationOutcome {
    pub verdict: Verdict,
    pub state: Option<DensityOperator>,
    pub delta_star: Option<f64>,
    pub certificate: Option<InfeasibilityCertificate>,
    pub diagnostics: SolverDiagnostics,
}

/// Relaxation norm on the deviation vector `tr(M_x ρ) − m_x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Norm {
    Linf,
    HalfL1,
}

struct Relaxed {
    solution: SdpSolution,
    rho: BlockId,
    delta_star: f64,
    /// Multipliers `(u_x, v_x)` of the lower and upper deviation constraints.
    multipliers: Vec<(f64, f64)>,
}

/// Builds and solves the relaxation. Half-widths are honored when
/// `intervals` is set.
fn solve_relaxed(
    data: &Dataset,
    norm: Norm,
    intervals: bool,
    opts: &SolverOptions,
) -> Result<Relaxed> {
    let d = data.dim();
    let mut p = SdpProblem::new(Sense::Minimize);
    let rho = p.add_block("rho", d, BlockKind::Hermitian);
    p.add_psd(rho);
    p.add_equality(Functional::term(rho, HermitianOperator::identity(d)), 1.0);

    let one = HermitianOperator::identity(1);
    let slacks: Vec<BlockId> = match norm {
        Norm::Linf => {
            let delta = p.add_block("delta", 1, BlockKind::Symmetric);
            p.set_objective(Functional::term(delta, one.clone()));
            vec![delta; data.len()]
        }
        Norm::HalfL1 => {
            let mut obj = Functional::new();
            let blocks: Vec<BlockId> = (0..data.len())
                .map(|x| {
                    let s = p.add_block(format!("s{x}"), 1, BlockKind::Symmetric);
                    obj = std::mem::take(&mut obj).with(s, one.scale(0.5));
                    s
                })
                .collect();
            p.set_objective(obj);
            blocks
        }
    };
    if slacks.is_empty() {
        // no records: a trivial bounded slack so δ* = 0 is attained
        let delta = p.add_block("delta", 1, BlockKind::Symmetric);
        p.set_objective(Functional::term(delta, one.clone()));
        p.add_lmi(
            Lmi::new("delta >= 0", HermitianOperator::zeros(1)).with(LmiTerm::identity(delta, 1)),
        );
    }
    // The paired bounds already force s_x ≥ −Δ_x. A per-record ℓ1 slack
    // still needs s_x ≥ 0 when Δ_x > 0, or one loose record could pay for
    // another's violation. Otherwise the sign constraint is redundant and
    // only makes the optimum degenerate.
    if norm == Norm::HalfL1 && intervals {
        for (x, r) in data.records().iter().enumerate() {
            if r.half_width.unwrap_or(0.0) > 0.0 {
                p.add_lmi(
                    Lmi::new(format!("s{x} >= 0"), HermitianOperator::zeros(1))
                        .with(LmiTerm::identity(slacks[x], 1)),
                );
            }
        }
    }

    let first_record_lmi = p.lmis.len();
    for (x, r) in data.records().iter().enumerate() {
        let h = if intervals {
            r.half_width.unwrap_or(0.0)
        } else {
            0.0
        };
        // u: tr(Mρ) − m + h + s ≥ 0,  v: m + h + s − tr(Mρ) ≥ 0
        for sign in [1.0, -1.0] {
            p.add_lmi(
                Lmi::new(
                    format!("record {x} {}", if sign > 0.0 { "lower" } else { "upper" }),
                    HermitianOperator::diag(&[-sign * r.value + h]),
                )
                .with(LmiTerm::Scalar {
                    block: rho,
                    coeff: r.observable.scale(sign),
                    placement: one.clone(),
                })
                .with(LmiTerm::identity(slacks[x], 1)),
            );
        }
    }

    let solution = sdp::solve(&p, opts)?;
    if solution.status != SolveStatus::Optimal {
        return Err(Error::Solver {
            status: solution.status,
        });
    }
    let multipliers = (0..data.len())
        .map(|x| {
            let u = solution.lmi_duals[first_record_lmi + 2 * x].entry(0, 0).re;
            let v = solution.lmi_duals[first_record_lmi + 2 * x + 1]
                .entry(0, 0)
                .re;
            (u, v)
        })
        .collect();
    let delta_star = solution.objective_value.max(0.0);
    Ok(Relaxed {
        solution,
        rho,
        delta_star,
        multipliers,
    })
}

impl Relaxed {
    fn state(&self) -> Result<DensityOperator> {
        DensityOperator::nearest(self.solution.block(self.rho))
    }

    fn harvested_direction(&self) -> Vec<f64> {
        self.multipliers.iter().map(|(u, v)| u - v).collect()
    }
}

/// Picks a verified certificate: the data-aligned construction when it
/// verifies, otherwise the polished solver multipliers.
fn best_certificate(data: &Dataset, relaxed: &Relaxed) -> Option<InfeasibilityCertificate> {
    let candidates = [
        data_aligned_certificate(data),
        Some(harvest_dual_certificate(
            &relaxed.harvested_direction(),
            data,
        )),
    ];
    candidates
        .into_iter()
        .flatten()
        .find(|c| verify_certificate(c, data).valid)
}

fn classify(delta_star: f64, opts: &EstimationOptions, allow_marginal: bool) -> Verdict {
    if allow_marginal && (delta_star - opts.threshold).abs() <= opts.marginal_band() {
        Verdict::Marginal
    } else if delta_star <= opts.threshold {
        Verdict::Feasible
    } else {
        Verdict::Infeasible
    }
}

fn outcome(
    data: &Dataset,
    relaxed: Relaxed,
    opts: &EstimationOptions,
    allow_marginal: bool,
) -> Result<EstimationOutcome> {
    let verdict = classify(relaxed.delta_star, opts, allow_marginal);
    let certificate = match verdict {
        Verdict::Infeasible => Some(best_certificate(data, &relaxed).ok_or_else(|| {
            let c = harvest_dual_certificate(&relaxed.harvested_direction(), data);
            let check = verify_certificate(&c, data);
            Error::UnverifiedCertificate {
                beta: check.beta,
                lambda_max: check.lambda_max,
            }
        })?),
        _ => None,
    };
    Ok(EstimationOutcome {
        verdict,
        state: Some(relaxed.state()?),
        delta_star: Some(relaxed.delta_star),
        certificate,
        diagnostics: relaxed.solution.diagnostics(),
    })
}

/// Whether some state reproduces the values exactly. Half-widths are ignored.
///
/// Decided by the ℓ∞ relaxation against `opts.threshold`; the outcome is
/// never [`Verdict::Marginal`].
pub fn feasibility(data: &Dataset, opts: &EstimationOptions) -> Result<EstimationOutcome> {
    let exact = data.without_half_widths();
    let relaxed = solve_relaxed(&exact, Norm::Linf, false, &opts.solver)?;
    outcome(&exact, relaxed, opts, false)
}

/// Whether some state has every expectation inside its interval.
pub fn feasibility_intervals(
    data: &Dataset,
    opts: &EstimationOptions,
) -> Result<EstimationOutcome> {
    if let Some(index) = data.records().iter().position(|r| r.half_width.is_none()) {
        return Err(Error::MissingHalfWidth { index });
    }
    let relaxed = solve_relaxed(data, Norm::Linf, true, &opts.solver)?;
    outcome(data, relaxed, opts, false)
}

/// Smallest uniform deviation `δ*` from the data over all states.
pub fn relax_linf(data: &Dataset, opts: &EstimationOptions) -> Result<EstimationOutcome> {
    let exact = data.without_half_widths();
    let relaxed = solve_relaxed(&exact, Norm::Linf, false, &opts.solver)?;
    outcome(&exact, relaxed, opts, true)
}

/// Smallest `½ Σ_x |tr(M_x ρ) − m_x|` over all states, reported as `δ*`.
pub fn relax_l1(data: &Dataset, opts: &EstimationOptions) -> Result<EstimationOutcome> {
    let exact = data.without_half_widths();
    let relaxed = solve_relaxed(&exact, Norm::HalfL1, false, &opts.solver)?;
    outcome(&exact, relaxed, opts, true)
}

/// Certificate that the data are inconsistent.
///
/// Fails with [`Error::CertificateUnavailable`] when `δ*` does not exceed
/// the threshold.
pub fn extract_certificate(
    data: &Dataset,
    opts: &EstimationOptions,
) -> Result<InfeasibilityCertificate> {
    let relaxed = solve_relaxed(data, Norm::Linf, true, &opts.solver)?;
    if relaxed.delta_star <= opts.threshold {
        return Err(Error::CertificateUnavailable {
            delta_star: relaxed.delta_star,
        });
    }
    best_certificate(data, &relaxed).ok_or_else(|| {
        let c = harvest_dual_certificate(&relaxed.harvested_direction(), data);
        let check = verify_certificate(&c, data);
        Error::UnverifiedCertificate {
            beta: check.beta,
            lambda_max: check.lambda_max,
        }
    })
}
