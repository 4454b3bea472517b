//! Semidefinite programs over Hermitian matrix blocks and a dense
//! interior-point solver.
//!
//! A problem is lowered to a real conic program, redundant equalities are
//! removed, and the result is solved through a homogeneous self-dual
//! embedding, so infeasible problems end with a Farkas ray instead of an
//! iteration limit.
//!
//! Dual convention for a minimization `min ⟨C, X⟩` subject to `f_i(X) = b_i`
//! and `F0_j + F_j(X) ⪰ 0`: multipliers `y_i` and `Z_j ⪰ 0` satisfy
//! `C = Σ y_i f_i* + Σ F_j*(Z_j)` and the dual value is
//! `Σ b_i y_i − Σ tr(F0_j Z_j)`. Maximizations are solved as the
//! minimization of `−⟨C, X⟩` and report the multipliers of that problem.

mod embed;
mod hsde;
mod lower;
mod presolve;
mod problem;
mod sdpa;

use nalgebra::DVector;

use crate::operator::HermitianOperator;

pub use embed::{embed_hermitian, embed_matrix, real_embed, unembed_block};
pub use problem::{
    check_feasible, Block, BlockId, BlockKind, Equality, FeasibilityReport, Functional, Lmi,
    LmiTerm, SdpProblem, Sense,
};
pub use sdpa::to_sdpa;

use presolve::Presolved;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Absolute bound on the duality gap and on `tr(S Z)`.
    pub gap_tol: f64,
    /// Relative bound on primal and dual residuals.
    pub feas_tol: f64,
    /// Relative residual bound for accepting a Farkas ray.
    pub infeas_tol: f64,
    pub max_iter: usize,
    /// Print one line of residuals per iteration to stderr.
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-9,
            infeas_tol: 1e-8,
            max_iter: 200,
            verbose: false,
        }
    }
}

/// Improving ray of the dual: `Σ y_i f_i* + Σ F_j*(Z_j) = 0`, `Z_j ⪰ 0`,
/// normalized to `Σ b_i y_i − Σ tr(F0_j Z_j) = 1`. Its existence proves the
/// primal constraints have no common solution.
#[derive(Clone, Debug)]
pub struct DualRay {
    pub y: Vec<f64>,
    pub z: Vec<HermitianOperator>,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Block values; zero when the status is an infeasibility.
    pub primal: Vec<HermitianOperator>,
    pub equality_duals: Vec<f64>,
    pub lmi_duals: Vec<HermitianOperator>,
    /// Objective in the problem's own sense.
    pub objective_value: f64,
    /// Dual bound in the problem's own sense.
    pub dual_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub ray: Option<DualRay>,
}

impl SdpSolution {
    pub fn block(&self, id: BlockId) -> &HermitianOperator {
        &self.primal[id.0]
    }

    pub fn diagnostics(&self) -> SolverDiagnostics {
        SolverDiagnostics {
            status: self.status,
            iterations: self.iterations,
            gap: self.gap,
            primal_residual: self.primal_residual,
            dual_residual: self.dual_residual,
        }
    }
}

/// Summary of a solve, carried into higher-level outcomes and reports.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverDiagnostics {
    pub status: SolveStatus,
    pub iterations: usize,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

fn zero_blocks(p: &SdpProblem) -> Vec<HermitianOperator> {
    p.blocks
        .iter()
        .map(|b| HermitianOperator::zeros(b.dim))
        .collect()
}

/// Solves the problem. Errors only for malformed input; solver outcomes,
/// including failures, are reported through [`SdpSolution::status`].
pub fn solve(p: &SdpProblem, opts: &SolverOptions) -> crate::Result<SdpSolution> {
    p.validate()?;
    let form = lower::lower(p);
    let rows = p.equalities.len();

    let (keep, scale, a, b) = match presolve::presolve(&form.a, &form.b) {
        Presolved::Reduced { keep, scale, a, b } => (keep, scale, a, b),
        Presolved::Inconsistent { y } => {
            let improvement = -form.b.dot(&y);
            let y_nat: Vec<f64> = y.iter().map(|v| -v / improvement).collect();
            return Ok(SdpSolution {
                status: SolveStatus::PrimalInfeasible,
                primal: zero_blocks(p),
                equality_duals: vec![0.0; rows],
                lmi_duals: p
                    .lmis
                    .iter()
                    .map(|l| HermitianOperator::zeros(l.dim()))
                    .collect(),
                objective_value: f64::NAN,
                dual_value: f64::NAN,
                gap: f64::NAN,
                iterations: 0,
                primal_residual: f64::NAN,
                dual_residual: f64::NAN,
                ray: Some(DualRay {
                    y: y_nat,
                    z: p.lmis
                        .iter()
                        .map(|l| HermitianOperator::zeros(l.dim()))
                        .collect(),
                }),
            });
        }
    };

    let out = hsde::solve_hsde(&form, &a, &b, opts);
    let expand_y = |yr: &DVector<f64>, factor: f64| {
        let mut y = vec![0.0; rows];
        for (r, (&k, &s)) in keep.iter().zip(&scale).enumerate() {
            y[k] = factor * yr[r] / s;
        }
        y
    };
    let duals = |factor: f64| -> Vec<HermitianOperator> {
        out.z
            .iter()
            .enumerate()
            .map(|(j, zj)| form.unembed_dual(j, &(zj * factor)))
            .collect()
    };

    let mut sol = SdpSolution {
        status: out.status,
        primal: zero_blocks(p),
        equality_duals: vec![0.0; rows],
        lmi_duals: Vec::new(),
        objective_value: form.sign * out.pcost,
        dual_value: form.sign * out.dcost,
        gap: (out.pcost - out.dcost).abs(),
        iterations: out.iterations,
        primal_residual: out.pres,
        dual_residual: out.dres,
        ray: None,
    };

    match out.status {
        SolveStatus::PrimalInfeasible => {
            let byhz = b.dot(&out.y)
                + form
                    .cones
                    .iter()
                    .zip(&out.z)
                    .map(|(c, z)| c.f0.dot(z))
                    .sum::<f64>();
            let factor = 1.0 / -byhz;
            sol.ray = Some(DualRay {
                y: expand_y(&out.y, -factor),
                z: duals(factor),
            });
            sol.lmi_duals = p
                .lmis
                .iter()
                .map(|l| HermitianOperator::zeros(l.dim()))
                .collect();
        }
        SolveStatus::DualInfeasible => {
            sol.lmi_duals = p
                .lmis
                .iter()
                .map(|l| HermitianOperator::zeros(l.dim()))
                .collect();
        }
        _ => {
            let inv_tau = 1.0 / out.tau;
            sol.primal = form.unpack(p, &(&out.x * inv_tau));
            sol.equality_duals = expand_y(&out.y, -inv_tau);
            sol.lmi_duals = duals(inv_tau);
        }
    }

    if sol.status == SolveStatus::Optimal {
        debug_assert!(
            out.dcost <= out.pcost + opts.gap_tol,
            "weak duality violated at reported optimum: dual {} > primal {}",
            out.dcost,
            out.pcost
        );
    }
    Ok(sol)
}
