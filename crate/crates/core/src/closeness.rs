//! How close the states consistent with data can get to a target, and the
//! range of an unmeasured expectation value over those states.
//!
//! Every optimization runs over `ρ ⪰ 0, tr ρ = 1` plus the data: exact
//! records as equalities, records with a half-width as interval bounds.
//! Data with no consistent state is reported as
//! [`Error::InfeasibleData`] carrying a verified certificate.
//!
//! Only best-case distance and best-case mixed fidelity are offered. Their
//! worst-case counterparts are not single convex programs.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimation::{
    extract_certificate, minimal_face, select_columns, Dataset, EstimationOptions, Face,
};
use crate::operator::{ComplexMatrix, DensityOperator, HermitianOperator};
use crate::sdp::{
    self, BlockId, BlockKind, Functional, Lmi, LmiTerm, SdpProblem, SdpSolution, Sense,
    SolveStatus, SolverDiagnostics, SolverOptions,
};

/// Second eigenvalue above which a target is not treated as pure.
pub const PURE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuantityKind {
    TraceDistance,
    /// `⟨ψ|ρ|ψ⟩` for a pure target.
    FidelityPure,
    /// `√F(ρ, σ) = tr √(√σ ρ √σ)`.
    SqrtFidelityMixed,
    PropertyMin,
    PropertyMax,
}

#[derive(Clone, Debug)]
pub struct ClosenessResult {
    pub value: f64,
    pub state: DensityOperator,
    pub kind: QuantityKind,
    pub diagnostics: SolverDiagnostics,
}

/// Eigenvalues at or below this are dropped when a fixed operator is
/// restricted to its support.
const SUPPORT_TOL: f64 = 1e-14;

/// Relative eigenvalue cutoff for the range of a variable corner.
const RANGE_TOL: f64 = 1e-9;

/// One diagonal corner of a fidelity LMI, living on the span of `embed`.
///
/// Fixed operators are restricted to their support and variable ones to
/// the face of their data, so that the LMI keeps an interior point.
#[derive(Clone, Debug)]
pub(crate) struct Corner {
    /// Orthonormal columns placing the corner inside the full space.
    embed: ComplexMatrix,
    constant: HermitianOperator,
    /// Congruence terms `(block, map, weight)` into the corner's space.
    terms: Vec<(BlockId, ComplexMatrix, f64)>,
}

impl Corner {
    pub fn fixed(op: &HermitianOperator) -> Self {
        let (w, v) = op.eigh();
        let keep: Vec<usize> = (0..w.len()).filter(|&i| w[i] > SUPPORT_TOL).collect();
        Self {
            embed: select_columns(&v, &keep),
            constant: HermitianOperator::diag(&keep.iter().map(|&i| w[i]).collect::<Vec<_>>()),
            terms: Vec::new(),
        }
    }

    /// `Σ_k M_k ρ_k M_k†` for the given terms, restricted to the joint range
    /// of the maps.
    pub fn variable(terms: Vec<(BlockId, ComplexMatrix)>) -> Result<Self> {
        let out = terms.first().map_or(0, |(_, m)| m.rows());
        let mut reach = ComplexMatrix::zeros(out, out);
        for (_, m) in &terms {
            reach = reach.add(&m.matmul(&m.adjoint())?)?;
        }
        let (w, v) = HermitianOperator::symmetrized(reach).eigh();
        let top = w.last().copied().unwrap_or(0.0);
        let keep: Vec<usize> = (0..w.len()).filter(|&i| w[i] > RANGE_TOL * top).collect();
        let embed = select_columns(&v, &keep);
        let back = embed.adjoint();
        let terms = terms
            .into_iter()
            .map(|(b, m)| Ok((b, back.matmul(&m)?, 1.0)))
            .collect::<Result<_>>()?;
        Ok(Self {
            constant: HermitianOperator::zeros(keep.len()),
            embed,
            terms,
        })
    }

    fn dim(&self) -> usize {
        self.embed.cols()
    }
}

/// `n × r` matrix placing an `r`-dimensional space at `offset`.
fn placement(n: usize, r: usize, k: usize, offset: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n, k);
    for i in 0..r {
        m[(offset + i, i)] = Complex64::new(1.0, 0.0);
    }
    m
}

/// Adds `[[A, Y], [Y†, B]] ⪰ 0` for the two corners, with the off-diagonal
/// block spanned by two fresh Hermitian blocks. Returns the functional
/// `Re tr(Y)` in the full space, whose maximum is `√F(A, B)`.
pub(crate) fn add_fidelity_lmi(p: &mut SdpProblem, a: &Corner, b: &Corner) -> Result<Functional> {
    let (r1, r2) = (a.dim(), b.dim());
    let n = r1 + r2;
    let k = r1.max(r2).max(1);
    let y_re = p.add_block("Y_re", k, BlockKind::Hermitian);
    let y_im = p.add_block("Y_im", k, BlockKind::Hermitian);
    let left = placement(n, r1, k, 0);
    let right = placement(n, r2, k, r1);
    let mut constant = ComplexMatrix::zeros(n, n);
    for i in 0..r1 {
        for j in 0..r1 {
            constant[(i, j)] = a.constant.entry(i, j);
        }
    }
    for i in 0..r2 {
        for j in 0..r2 {
            constant[(r1 + i, r1 + j)] = b.constant.entry(i, j);
        }
    }
    let mut lmi = Lmi::new("fidelity", HermitianOperator::symmetrized(constant))
        .with(LmiTerm::Coupling {
            block: y_re,
            left: left.clone(),
            right: right.clone(),
        })
        .with(LmiTerm::Coupling {
            block: y_im,
            left: left.scale(Complex64::new(0.0, 1.0)),
            right: right.clone(),
        });
    for (corner, offset) in [(a, 0), (b, r1)] {
        let place = placement(n, corner.dim(), corner.dim(), offset);
        for (block, map, weight) in &corner.terms {
            lmi = lmi.with(LmiTerm::Congruence {
                block: *block,
                map: place.matmul(map)?,
                weight: *weight,
            });
        }
    }
    p.add_lmi(lmi);

    // tr(A_emb Y' B_emb†) = tr(Y' N) with N = B_emb† A_emb
    let overlap = b.embed.adjoint().matmul(&a.embed)?;
    let mut padded = ComplexMatrix::zeros(k, k);
    for i in 0..r2 {
        for j in 0..r1 {
            padded[(i, j)] = overlap[(i, j)];
        }
    }
    let half = Complex64::new(0.5, 0.0);
    let re = padded.add(&padded.adjoint())?.scale(half);
    let im = padded.sub(&padded.adjoint())?.scale(Complex64::new(0.0, 0.5));
    Ok(Functional::term(y_re, HermitianOperator::symmetrized(re))
        .with(y_im, HermitianOperator::symmetrized(im)))
}

/// The minimal face of the data, or the certificate that there is none.
fn face_of(data: &Dataset, opts: &EstimationOptions) -> Result<Face> {
    match minimal_face(data, opts)? {
        Some(face) => Ok(face),
        None => Err(infeasible(data, opts, SolveStatus::PrimalInfeasible)),
    }
}

fn infeasible(data: &Dataset, opts: &EstimationOptions, status: SolveStatus) -> Error {
    match extract_certificate(data, opts) {
        Ok(cert) => Error::InfeasibleData(Box::new(cert)),
        Err(Error::CertificateUnavailable { .. }) => Error::Solver { status },
        Err(e) => e,
    }
}

/// A problem over the reduced state `ρ'` on the face, `ρ = V ρ' V†`.
fn state_problem(face: &Face, sense: Sense) -> (SdpProblem, BlockId) {
    let r = face.dim();
    let mut p = SdpProblem::new(sense);
    let rho = p.add_block("rho", r, BlockKind::Hermitian);
    p.add_psd(rho);
    p.add_equality(Functional::term(rho, HermitianOperator::identity(r)), 1.0);
    face.data.constrain(&mut p, rho);
    (p, rho)
}

fn solve_constrained(p: &SdpProblem, data: &Dataset, opts: &EstimationOptions) -> Result<SdpSolution> {
    let sol = sdp::solve(p, &opts.solver)?;
    match sol.status {
        SolveStatus::Optimal => Ok(sol),
        SolveStatus::PrimalInfeasible => Err(infeasible(data, opts, sol.status)),
        status => Err(Error::Solver { status }),
    }
}

fn check_dim(data: &Dataset, d: usize, what: &str) -> Result<()> {
    if data.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "{what} has dimension {d}, data have dimension {}",
            data.dim()
        )));
    }
    Ok(())
}

fn result(
    sol: &SdpSolution,
    face: &Face,
    rho: BlockId,
    kind: QuantityKind,
) -> Result<ClosenessResult> {
    Ok(ClosenessResult {
        value: sol.objective_value,
        state: DensityOperator::nearest(&face.lift(sol.block(rho))?)?,
        kind,
        diagnostics: sol.diagnostics(),
    })
}

/// `min ½‖ρ − σ‖₁` over states consistent with the data, through an
/// auxiliary `X` with `−X ⪯ ρ − σ ⪯ X`.
pub fn min_trace_distance(
    data: &Dataset,
    target: &DensityOperator,
    opts: &EstimationOptions,
) -> Result<ClosenessResult> {
    check_dim(data, target.dim(), "target")?;
    trace_distance_in_view(data, &[ComplexMatrix::identity(data.dim())], target, opts)
}

/// Trace distance between `Σ_k K_k ρ K_k†` and the target, minimized over
/// consistent `ρ`. The reported state is `ρ`.
pub(crate) fn trace_distance_in_view(
    data: &Dataset,
    view: &[ComplexMatrix],
    target: &DensityOperator,
    opts: &EstimationOptions,
) -> Result<ClosenessResult> {
    let d = target.dim();
    let face = face_of(data, opts)?;
    let (mut p, rho) = state_problem(&face, Sense::Minimize);
    let x = p.add_block("X", d, BlockKind::Hermitian);
    p.set_objective(Functional::term(x, HermitianOperator::identity(d).scale(0.5)));
    let maps = view
        .iter()
        .map(|k| k.matmul(&face.basis))
        .collect::<Result<Vec<_>>>()?;
    // X − ρ + σ ⪰ 0 and X + ρ − σ ⪰ 0
    for (sign, name) in [(-1.0, "X - (rho - sigma)"), (1.0, "X + (rho - sigma)")] {
        let mut lmi = Lmi::new(name, target.op().scale(-sign)).with(LmiTerm::identity(x, d));
        for map in &maps {
            lmi = lmi.with(LmiTerm::Congruence {
                block: rho,
                map: map.clone(),
                weight: sign,
            });
        }
        p.add_lmi(lmi);
    }
    let sol = solve_constrained(&p, data, opts)?;
    result(&sol, &face, rho, QuantityKind::TraceDistance)
}

/// Smallest and largest `⟨ψ|ρ|ψ⟩` over states consistent with the data.
///
/// The target must be pure: its second eigenvalue may not exceed
/// [`PURE_TOL`].
pub fn fidelity_pure_range(
    data: &Dataset,
    target: &DensityOperator,
    opts: &EstimationOptions,
) -> Result<(ClosenessResult, ClosenessResult)> {
    check_dim(data, target.dim(), "target")?;
    let second = target.second_eigenvalue();
    if second > PURE_TOL {
        return Err(Error::TargetNotPure {
            second_eigenvalue: second,
        });
    }
    let projector = HermitianOperator::projector(&target.dominant_ket())?;
    linear_range(data, &projector, opts, [QuantityKind::FidelityPure; 2])
}

/// Smallest and largest `tr(M ρ)` over states consistent with the data.
pub fn property_range(
    data: &Dataset,
    observable: &HermitianOperator,
    opts: &EstimationOptions,
) -> Result<(ClosenessResult, ClosenessResult)> {
    check_dim(data, observable.dim(), "observable")?;
    linear_range(
        data,
        observable,
        opts,
        [QuantityKind::PropertyMin, QuantityKind::PropertyMax],
    )
}

pub(crate) fn linear_range(
    data: &Dataset,
    observable: &HermitianOperator,
    opts: &EstimationOptions,
    kinds: [QuantityKind; 2],
) -> Result<(ClosenessResult, ClosenessResult)> {
    let face = face_of(data, opts)?;
    let reduced = face.compress(observable)?;
    let mut out = Vec::with_capacity(2);
    for (sense, kind) in [Sense::Minimize, Sense::Maximize].into_iter().zip(kinds) {
        let (mut p, rho) = state_problem(&face, sense);
        p.set_objective(Functional::term(rho, reduced.clone()));
        let sol = solve_constrained(&p, data, opts)?;
        out.push(result(&sol, &face, rho, kind)?);
    }
    let max = out.pop().expect("two results");
    let min = out.pop().expect("two results");
    Ok((min, max))
}

/// `√F(ρ, σ)` as the optimum of `max Re tr Y` subject to
/// `[[ρ, Y], [Y†, σ]] ⪰ 0`.
pub fn sqrt_fidelity(rho: &DensityOperator, sigma: &DensityOperator, opts: &SolverOptions) -> Result<f64> {
    if sigma.dim() != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "states of dimension {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let mut p = SdpProblem::new(Sense::Maximize);
    let objective = add_fidelity_lmi(&mut p, &Corner::fixed(rho.op()), &Corner::fixed(sigma.op()))?;
    p.set_objective(objective);
    let sol = sdp::solve(&p, opts)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver { status: sol.status });
    }
    Ok(sol.objective_value)
}

/// `tr √(√σ ρ √σ)` from eigen-decompositions, without the solver.
pub fn sqrt_fidelity_closed_form(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    let root = sigma.op().sqrt_psd();
    let inner = rho.op().congruence(root.as_matrix())?;
    Ok(inner.eigenvalues().iter().map(|&l| l.max(0.0).sqrt()).sum())
}

/// Largest `√F(ρ, σ)` over states consistent with the data.
pub fn max_sqrt_fidelity(
    data: &Dataset,
    target: &DensityOperator,
    opts: &EstimationOptions,
) -> Result<ClosenessResult> {
    check_dim(data, target.dim(), "target")?;
    sqrt_fidelity_in_view(data, &[ComplexMatrix::identity(data.dim())], target, opts)
}

/// `√F` between `Σ_k K_k ρ K_k†` and the target, maximized over consistent
/// `ρ`. The reported state is `ρ`.
pub(crate) fn sqrt_fidelity_in_view(
    data: &Dataset,
    view: &[ComplexMatrix],
    target: &DensityOperator,
    opts: &EstimationOptions,
) -> Result<ClosenessResult> {
    let face = face_of(data, opts)?;
    let (mut p, rho) = state_problem(&face, Sense::Maximize);
    let terms = view
        .iter()
        .map(|k| Ok((rho, k.matmul(&face.basis)?)))
        .collect::<Result<Vec<_>>>()?;
    let objective = add_fidelity_lmi(&mut p, &Corner::variable(terms)?, &Corner::fixed(target.op()))?;
    p.set_objective(objective);
    let sol = solve_constrained(&p, data, opts)?;
    result(&sol, &face, rho, QuantityKind::SqrtFidelityMixed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_on_commuting_states() {
        let rho = DensityOperator::new(HermitianOperator::diag(&[0.75, 0.25])).unwrap();
        let sigma = DensityOperator::new(HermitianOperator::diag(&[0.25, 0.75])).unwrap();
        let expected = 2.0 * (0.75f64 * 0.25).sqrt();
        assert!((sqrt_fidelity_closed_form(&rho, &sigma).unwrap() - expected).abs() < 1e-14);
    }
}
