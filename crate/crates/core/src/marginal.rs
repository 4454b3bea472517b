//! The tripartite quantum marginal problem.
//!
//! Given reduced states on some of the pairs `XY`, `XZ`, `YZ`, decide whether
//! a global state `σ_XYZ` reproduces them, exactly or within a trace-norm
//! radius. Both questions are answered through one program, the smallest
//! worst-pair mismatch
//!
//! ```text
//! ε* = min ε  s.t.  σ_p − ρ_p = ω_p − ζ_p,  tr(ω_p + ζ_p) ≤ ε,
//!                   ω_p, ζ_p ⪰ 0,  σ ⪰ 0,  tr σ = 1
//! ```
//!
//! whose multipliers give an infeasibility certificate when `ε*` exceeds
//! the requested radius. Closeness and property questions under marginal
//! constraints reuse [`crate::closeness`].

use std::fmt;

use num_complex::Complex64;

use crate::closeness::{
    linear_range, sqrt_fidelity_in_view, trace_distance_in_view, ClosenessResult, QuantityKind,
    PURE_TOL,
};
use crate::error::{Error, Result};
use crate::estimation::{Dataset, EstimationOptions, MeasurementRecord};
use crate::operator::{
    lift, partial_trace, partial_trace_kraus, ComplexMatrix, DensityOperator, HermitianOperator,
    SubsystemShape,
};
use crate::sdp::{
    self, BlockKind, Functional, Lmi, LmiTerm, SdpProblem, Sense, SolveStatus, SolverDiagnostics,
};

/// Trace-norm slack allowed between a witness's marginals and the targets.
pub const MATCH_TOL: f64 = 1e-7;
const WITNESS_TOL: f64 = 1e-9;
const NORM_TOL: f64 = 1e-9;
/// Largest supported local dimension.
pub const MAX_LOCAL_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pair {
    XY,
    XZ,
    YZ,
}

impl Pair {
    pub const ALL: [Pair; 3] = [Pair::XY, Pair::XZ, Pair::YZ];

    /// Subsystem indices, `X = 0`, `Y = 1`, `Z = 2`.
    pub fn parties(self) -> [usize; 2] {
        match self {
            Pair::XY => [0, 1],
            Pair::XZ => [0, 2],
            Pair::YZ => [1, 2],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Pair::XY => "XY",
            Pair::XZ => "XZ",
            Pair::YZ => "YZ",
        }
    }

    /// Case-insensitive inverse of [`Pair::label`].
    pub fn parse(label: &str) -> Option<Self> {
        Pair::ALL
            .into_iter()
            .find(|p| p.label().eq_ignore_ascii_case(label))
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Which state a marginal closeness question compares with its target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum View {
    Global,
    Pair(Pair),
}

/// Target reduced states on a subset of the three pairs.
#[derive(Clone, Debug)]
pub struct MarginalSpec {
    shape: SubsystemShape,
    targets: Vec<(Pair, DensityOperator)>,
}

impl MarginalSpec {
    /// Fails unless the shape has three parties of dimension at most
    /// [`MAX_LOCAL_DIM`], no pair repeats, and every target has its pair's
    /// dimension. An empty target list is allowed.
    pub fn new(shape: SubsystemShape, mut targets: Vec<(Pair, DensityOperator)>) -> Result<Self> {
        if shape.parties() != 3 {
            return Err(Error::DimensionMismatch(format!(
                "marginal problems need three subsystems, got {}",
                shape.parties()
            )));
        }
        if shape.dims().iter().any(|&d| d > MAX_LOCAL_DIM) {
            return Err(Error::InvalidProblem(format!(
                "local dimensions {:?} exceed {MAX_LOCAL_DIM}",
                shape.dims()
            )));
        }
        targets.sort_by_key(|(p, _)| *p);
        if targets.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidProblem("a pair is specified twice".into()));
        }
        for (pair, rho) in &targets {
            let want = shape.dim_of(&pair.parties());
            if rho.dim() != want {
                return Err(Error::DimensionMismatch(format!(
                    "target {pair} has dimension {}, expected {want}",
                    rho.dim()
                )));
            }
        }
        Ok(Self { shape, targets })
    }

    pub fn qubits(targets: Vec<(Pair, DensityOperator)>) -> Result<Self> {
        Self::new(SubsystemShape::new(vec![2, 2, 2])?, targets)
    }

    /// The marginals of `global` on `pairs`.
    pub fn from_global(global: &DensityOperator, shape: SubsystemShape, pairs: &[Pair]) -> Result<Self> {
        let targets = pairs
            .iter()
            .map(|&p| {
                let m = partial_trace(global.op(), &shape, &p.parties())?;
                Ok((p, DensityOperator::nearest(&m)?))
            })
            .collect::<Result<_>>()?;
        Self::new(shape, targets)
    }

    pub fn shape(&self) -> &SubsystemShape {
        &self.shape
    }

    pub fn targets(&self) -> &[(Pair, DensityOperator)] {
        &self.targets
    }

    pub fn target(&self, pair: Pair) -> Option<&DensityOperator> {
        self.targets.iter().find(|(p, _)| *p == pair).map(|(_, r)| r)
    }

    /// Global dimension.
    pub fn dim(&self) -> usize {
        self.shape.total()
    }

    /// Largest `‖tr_rest(σ) − ρ_p‖₁` over the specified pairs; zero when
    /// nothing is specified.
    pub fn mismatch(&self, global: &HermitianOperator) -> Result<f64> {
        let mut worst = 0.0f64;
        for (pair, rho) in &self.targets {
            let m = partial_trace(global, &self.shape, &pair.parties())?;
            worst = worst.max(m.sub(rho.op())?.trace_norm());
        }
        Ok(worst)
    }

    /// The targets as exact measurement records: one record per real
    /// matrix element of each target, on the lifted observable.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let mut data = Dataset::empty(self.dim());
        for (pair, rho) in &self.targets {
            for unit in hermitian_units(rho.dim()) {
                data.push(MeasurementRecord::new(
                    lift(&unit, &self.shape, &pair.parties())?,
                    unit.expectation(rho.op()),
                ))?;
            }
        }
        Ok(data)
    }
}

/// Basis whose expectation values are the diagonal entries, then the real
/// and imaginary parts of each upper entry `(i, j)`.
fn hermitian_units(d: usize) -> Vec<HermitianOperator> {
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        let mut e = ComplexMatrix::zeros(d, d);
        e[(i, i)] = Complex64::new(1.0, 0.0);
        out.push(HermitianOperator::symmetrized(e));
    }
    for i in 0..d {
        for j in i + 1..d {
            let mut re = ComplexMatrix::zeros(d, d);
            re[(i, j)] = Complex64::new(0.5, 0.0);
            re[(j, i)] = Complex64::new(0.5, 0.0);
            let mut im = ComplexMatrix::zeros(d, d);
            im[(i, j)] = Complex64::new(0.0, 0.5);
            im[(j, i)] = Complex64::new(0.0, -0.5);
            out.push(HermitianOperator::symmetrized(re));
            out.push(HermitianOperator::symmetrized(im));
        }
    }
    out
}

/// Operators `H_p` on the specified pairs and an offset `z` with
/// `W = zI + Σ_p H_p ⊗ I ⪯ 0` and `Σ_p ‖H_p‖∞ ≤ 1`.
///
/// Any `σ` within trace-norm `ε` of every target would give
/// `0 ≥ tr(W σ) ≥ z + Σ_p tr(H_p ρ_p) − ε Σ_p ‖H_p‖∞ = β`, so `β > 0` rules
/// such a `σ` out.
#[derive(Clone, Debug)]
pub struct MarginalCertificate {
    pub z: f64,
    pub terms: Vec<(Pair, HermitianOperator)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarginalCertificateCheck {
    pub beta: f64,
    pub lambda_max: f64,
    /// `Σ_p ‖H_p‖∞`.
    pub norm: f64,
    pub valid: bool,
}

/// `W = zI + Σ_p H_p ⊗ I`.
pub fn marginal_witness(cert: &MarginalCertificate, shape: &SubsystemShape) -> Result<HermitianOperator> {
    let mut w = HermitianOperator::identity(shape.total()).scale(cert.z);
    for (pair, h) in &cert.terms {
        w = w.add(&lift(h, shape, &pair.parties())?)?;
    }
    Ok(w)
}

/// Evaluates `β` at radius `eps`, `λ_max(W)` and `Σ‖H_p‖∞`. Never runs the
/// solver. Valid iff `β > 0`, `λ_max(W) ≤ 1e-9`, the norm is at most
/// `1 + 1e-9`, and every term names a specified pair with its dimension.
pub fn verify_marginal_certificate(
    cert: &MarginalCertificate,
    spec: &MarginalSpec,
    eps: f64,
) -> MarginalCertificateCheck {
    let invalid = MarginalCertificateCheck {
        beta: f64::NAN,
        lambda_max: f64::NAN,
        norm: f64::NAN,
        valid: false,
    };
    let mut beta = cert.z;
    let mut norm = 0.0;
    for (pair, h) in &cert.terms {
        match spec.target(*pair) {
            Some(rho) if rho.dim() == h.dim() => {
                beta += h.expectation(rho.op());
                norm += h.operator_norm();
            }
            _ => return invalid,
        }
    }
    beta -= eps * norm;
    let Ok(w) = marginal_witness(cert, &spec.shape) else {
        return invalid;
    };
    let (_, lambda_max) = w.eig_bounds();
    let valid = beta > 0.0 && lambda_max <= WITNESS_TOL && norm <= 1.0 + NORM_TOL;
    MarginalCertificateCheck {
        beta,
        lambda_max,
        norm,
        valid,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarginalVerdict {
    Feasible,
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct MarginalOutcome {
    pub verdict: MarginalVerdict,
    /// The witness, when feasible.
    pub global_state: Option<DensityOperator>,
    /// Smallest achievable worst-pair trace-norm mismatch.
    pub eps_star: f64,
    /// Worst-pair mismatch of the witness, when feasible.
    pub mismatch: Option<f64>,
    pub certificate: Option<MarginalCertificate>,
    /// Spectral bound on the average fidelity with pure targets; below one
    /// it proves infeasibility on its own.
    pub dual_bound: Option<f64>,
    pub diagnostics: SolverDiagnostics,
}

struct Closest {
    eps_star: f64,
    state: DensityOperator,
    certificate: MarginalCertificate,
    diagnostics: SolverDiagnostics,
}

fn closest_compatible(spec: &MarginalSpec, opts: &EstimationOptions) -> Result<Closest> {
    let d = spec.dim();
    let mut p = SdpProblem::new(Sense::Minimize);
    let sigma = p.add_block("sigma", d, BlockKind::Hermitian);
    p.add_psd(sigma);
    p.add_equality(Functional::term(sigma, HermitianOperator::identity(d)), 1.0);
    let eps = p.add_block("eps", 1, BlockKind::Symmetric);
    p.set_objective(Functional::term(eps, HermitianOperator::identity(1)));

    let mut units = Vec::new();
    for (pair, rho) in &spec.targets {
        let dp = rho.dim();
        let omega = p.add_block(format!("omega_{pair}"), dp, BlockKind::Hermitian);
        let zeta = p.add_block(format!("zeta_{pair}"), dp, BlockKind::Hermitian);
        p.add_psd(omega);
        p.add_psd(zeta);
        let one = HermitianOperator::identity(1);
        p.add_lmi(
            Lmi::new(format!("eps >= tr(omega_{pair} + zeta_{pair})"), HermitianOperator::zeros(1))
                .with(LmiTerm::identity(eps, 1))
                .with(LmiTerm::Scalar {
                    block: omega,
                    coeff: HermitianOperator::identity(dp).scale(-1.0),
                    placement: one.clone(),
                })
                .with(LmiTerm::Scalar {
                    block: zeta,
                    coeff: HermitianOperator::identity(dp).scale(-1.0),
                    placement: one,
                }),
        );
        // σ_p − ω_p + ζ_p = ρ_p, one equality per matrix element
        let basis = hermitian_units(dp);
        for unit in &basis {
            p.add_equality(
                Functional::term(sigma, lift(unit, &spec.shape, &pair.parties())?)
                    .with(omega, unit.scale(-1.0))
                    .with(zeta, unit.clone()),
                unit.expectation(rho.op()),
            );
        }
        units.push((*pair, basis));
    }

    let sol = sdp::solve(&p, &opts.solver)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver { status: sol.status });
    }

    // Stationarity in σ gives y₀ I + Σ_p H_p ⊗ I ⪯ 0 with H_p = Σ_k y_pk B_k,
    // and the ω, ζ, ε rows give Σ_p ‖H_p‖∞ ≤ 1.
    let mut next = 1;
    let mut terms = Vec::with_capacity(units.len());
    for (pair, basis) in units {
        let mut h = HermitianOperator::zeros(basis[0].dim());
        for unit in &basis {
            h = h.add(&unit.scale(sol.equality_duals[next]))?;
            next += 1;
        }
        terms.push((pair, h));
    }
    let norm: f64 = terms.iter().map(|(_, h)| h.operator_norm()).sum();
    let scale = norm.max(1.0);
    for (_, h) in &mut terms {
        *h = h.scale(1.0 / scale);
    }
    let probe = MarginalCertificate { z: 0.0, terms };
    let (_, top) = marginal_witness(&probe, &spec.shape)?.eig_bounds();
    Ok(Closest {
        eps_star: sol.objective_value.max(0.0),
        state: DensityOperator::nearest(sol.block(sigma))?,
        certificate: MarginalCertificate {
            z: -top,
            terms: probe.terms,
        },
        diagnostics: sol.diagnostics(),
    })
}

/// Whether some global state has exactly the given marginals, up to
/// [`MATCH_TOL`] in trace norm.
pub fn marginal_feasibility(spec: &MarginalSpec, opts: &EstimationOptions) -> Result<MarginalOutcome> {
    marginal_feasibility_eps(spec, 0.0, opts)
}

/// Whether some global state has every specified marginal within
/// trace-norm `eps` of its target.
///
/// Feasible outcomes carry a witness whose measured mismatch is at most
/// `eps + MATCH_TOL`. Infeasible outcomes carry a certificate that
/// [`verify_marginal_certificate`] accepts at `eps`.
pub fn marginal_feasibility_eps(
    spec: &MarginalSpec,
    eps: f64,
    opts: &EstimationOptions,
) -> Result<MarginalOutcome> {
    if spec.targets.is_empty() {
        return Err(Error::InvalidProblem("no marginals specified".into()));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidProblem(format!(
            "radius {eps} must be finite and nonnegative"
        )));
    }
    let closest = closest_compatible(spec, opts)?;
    let dual_bound = average_fidelity_bound(spec)?;
    let mismatch = spec.mismatch(closest.state.op())?;
    if mismatch <= eps + MATCH_TOL {
        return Ok(MarginalOutcome {
            verdict: MarginalVerdict::Feasible,
            global_state: Some(closest.state),
            eps_star: closest.eps_star,
            mismatch: Some(mismatch),
            certificate: None,
            dual_bound,
            diagnostics: closest.diagnostics,
        });
    }
    let check = verify_marginal_certificate(&closest.certificate, spec, eps);
    if !check.valid {
        return Err(Error::UnverifiedCertificate {
            beta: check.beta,
            lambda_max: check.lambda_max,
        });
    }
    Ok(MarginalOutcome {
        verdict: MarginalVerdict::Infeasible,
        global_state: None,
        eps_star: closest.eps_star,
        mismatch: None,
        certificate: Some(closest.certificate),
        dual_bound,
        diagnostics: closest.diagnostics,
    })
}

fn pure_projector(state: &DensityOperator) -> Result<HermitianOperator> {
    let second = state.second_eigenvalue();
    if second > PURE_TOL {
        return Err(Error::TargetNotPure {
            second_eigenvalue: second,
        });
    }
    HermitianOperator::projector(&state.dominant_ket())
}

/// `(1/k) λ_max(Σ_p Π_p ⊗ I)` when at least two targets are given and all
/// are pure; `None` otherwise. It bounds the average fidelity of any global
/// state with the targets.
pub fn average_fidelity_bound(spec: &MarginalSpec) -> Result<Option<f64>> {
    if spec.targets.len() < 2 || spec.targets.iter().any(|(_, r)| r.second_eigenvalue() > PURE_TOL) {
        return Ok(None);
    }
    let op = average_projector(spec)?;
    Ok(Some(op.eig_bounds().1))
}

fn average_projector(spec: &MarginalSpec) -> Result<HermitianOperator> {
    let k = spec.targets.len() as f64;
    let mut op = HermitianOperator::zeros(spec.dim());
    for (pair, rho) in &spec.targets {
        op = op.add(&lift(&pure_projector(rho)?, &spec.shape, &pair.parties())?.scale(1.0 / k))?;
    }
    Ok(op)
}

fn pure_pair_spec(
    psi_xy: &DensityOperator,
    psi_yz: &DensityOperator,
    shape: &SubsystemShape,
) -> Result<MarginalSpec> {
    pure_projector(psi_xy)?;
    pure_projector(psi_yz)?;
    MarginalSpec::new(
        shape.clone(),
        vec![(Pair::XY, psi_xy.clone()), (Pair::YZ, psi_yz.clone())],
    )
}

/// `max ½(⟨ψ_XY|σ_XY|ψ_XY⟩ + ⟨ψ_YZ|σ_YZ|ψ_YZ⟩)` over global states, by the
/// solver. Returns the value and an optimal state.
pub fn max_avg_fidelity_pure_marginals(
    psi_xy: &DensityOperator,
    psi_yz: &DensityOperator,
    shape: &SubsystemShape,
    opts: &EstimationOptions,
) -> Result<(f64, DensityOperator)> {
    let spec = pure_pair_spec(psi_xy, psi_yz, shape)?;
    let d = spec.dim();
    let mut p = SdpProblem::new(Sense::Maximize);
    let sigma = p.add_block("sigma", d, BlockKind::Hermitian);
    p.add_psd(sigma);
    p.add_equality(Functional::term(sigma, HermitianOperator::identity(d)), 1.0);
    p.set_objective(Functional::term(sigma, average_projector(&spec)?));
    let sol = sdp::solve(&p, &opts.solver)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver { status: sol.status });
    }
    Ok((sol.objective_value, DensityOperator::nearest(sol.block(sigma))?))
}

/// `μ* = ½ λ_max(|ψ_XY⟩⟨ψ_XY| ⊗ I + I ⊗ |ψ_YZ⟩⟨ψ_YZ|)`, the optimum of the
/// dual program, from the spectrum alone.
pub fn marginal_dual_bound(
    psi_xy: &DensityOperator,
    psi_yz: &DensityOperator,
    shape: &SubsystemShape,
) -> Result<f64> {
    let spec = pure_pair_spec(psi_xy, psi_yz, shape)?;
    Ok(average_projector(&spec)?.eig_bounds().1)
}

/// `½(1 + √‖Π₂ Π₁ Π₂‖∞)` with `Π₁ = |ψ_XY⟩⟨ψ_XY| ⊗ I` and
/// `Π₂ = I ⊗ |ψ_YZ⟩⟨ψ_YZ|`, an upper bound on [`marginal_dual_bound`].
pub fn projector_bound(
    psi_xy: &DensityOperator,
    psi_yz: &DensityOperator,
    shape: &SubsystemShape,
) -> Result<f64> {
    pure_pair_spec(psi_xy, psi_yz, shape)?;
    let p1 = lift(&pure_projector(psi_xy)?, shape, &Pair::XY.parties())?;
    let p2 = lift(&pure_projector(psi_yz)?, shape, &Pair::YZ.parties())?;
    let sandwich = p1.congruence(p2.as_matrix())?;
    Ok(0.5 * (1.0 + sandwich.eig_bounds().1.max(0.0).sqrt()))
}

/// The spec as exact records, after confirming some global state fits it.
fn compatible_data(spec: &MarginalSpec, opts: &EstimationOptions) -> Result<Dataset> {
    if !spec.targets.is_empty() {
        let outcome = marginal_feasibility(spec, opts)?;
        if let Some(cert) = outcome.certificate {
            return Err(Error::InfeasibleSpec(Box::new(cert)));
        }
    }
    spec.to_dataset()
}

fn view_maps(spec: &MarginalSpec, view: View, target_dim: usize) -> Result<Vec<ComplexMatrix>> {
    let maps = match view {
        View::Global => vec![ComplexMatrix::identity(spec.dim())],
        View::Pair(pair) => partial_trace_kraus(&spec.shape, &pair.parties())?,
    };
    let out = maps[0].rows();
    if out != target_dim {
        return Err(Error::DimensionMismatch(format!(
            "target has dimension {target_dim}, the compared state has dimension {out}"
        )));
    }
    Ok(maps)
}

/// Smallest trace distance between the viewed state and the target over
/// global states compatible with the spec. The reported state is global.
pub fn marginal_min_trace_distance(
    spec: &MarginalSpec,
    target: &DensityOperator,
    view: View,
    opts: &EstimationOptions,
) -> Result<ClosenessResult> {
    let maps = view_maps(spec, view, target.dim())?;
    let data = compatible_data(spec, opts)?;
    trace_distance_in_view(&data, &maps, target, opts)
}

/// Largest `√F` between the viewed state and the target over global states
/// compatible with the spec. The reported state is global.
pub fn marginal_max_fidelity(
    spec: &MarginalSpec,
    target: &DensityOperator,
    view: View,
    opts: &EstimationOptions,
) -> Result<ClosenessResult> {
    let maps = view_maps(spec, view, target.dim())?;
    let data = compatible_data(spec, opts)?;
    sqrt_fidelity_in_view(&data, &maps, target, opts)
}

/// Smallest and largest `tr(H σ)` over global states compatible with the
/// spec.
pub fn marginal_property_range(
    spec: &MarginalSpec,
    hamiltonian: &HermitianOperator,
    opts: &EstimationOptions,
) -> Result<(ClosenessResult, ClosenessResult)> {
    if hamiltonian.dim() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian has dimension {}, global dimension is {}",
            hamiltonian.dim(),
            spec.dim()
        )));
    }
    let data = compatible_data(spec, opts)?;
    linear_range(
        &data,
        hamiltonian,
        opts,
        [QuantityKind::PropertyMin, QuantityKind::PropertyMax],
    )
}
