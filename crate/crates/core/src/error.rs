use thiserror::Error;

use crate::sdp::SolveStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian at entry ({row}, {col}): asymmetry {deviation:.3e}")]
    NotHermitian {
        row: usize,
        col: usize,
        deviation: f64,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("record {index} has no half-width")]
    MissingHalfWidth { index: usize },

    #[error("no certificate: relaxed distance {delta_star:.3e} does not exceed the threshold")]
    CertificateUnavailable { delta_star: f64 },

    #[error("measurement data is infeasible; a certificate is attached")]
    InfeasibleData(Box<crate::estimation::InfeasibilityCertificate>),

    #[error("marginal specification is infeasible; a certificate is attached")]
    InfeasibleSpec(Box<crate::marginal::MarginalCertificate>),

    #[error("certificate failed verification: beta {beta:.3e}, lambda_max(W) {lambda_max:.3e}")]
    UnverifiedCertificate { beta: f64, lambda_max: f64 },

    #[error("target is not pure: second eigenvalue {second_eigenvalue:.3e}")]
    TargetNotPure { second_eigenvalue: f64 },

    #[error("solver stopped with status {status:?}")]
    Solver { status: SolveStatus },
}

pub type Result<T> = std::result::Result<T, Error>;
