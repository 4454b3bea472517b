//! Semidefinite programming for quantum state estimation.
//!
//! - [`operator`]: Hermitian and density operators, tensor products,
//!   partial traces, Bloch vectors.
//! - [`sdp`]: problem representation and an interior-point solver.
//! - [`estimation`]: feasibility of measurement data, relaxations, and
//!   infeasibility certificates.
//! - [`closeness`]: trace distance, fidelity, and property ranges over the
//!   states consistent with data.
//! - [`marginal`]: the tripartite quantum marginal problem.

pub mod closeness;
pub mod error;
pub mod estimation;
pub mod marginal;
pub mod operator;
pub mod sdp;

pub use error::{Error, Result};
