use num_complex::Complex64;

use super::{ComplexMatrix, HermitianOperator};
use crate::error::{Error, Result};

/// Local dimensions of a multipartite system, leftmost factor first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsystemShape {
    dims: Vec<usize>,
}

impl SubsystemShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::DimensionMismatch(format!(
                "subsystem dimensions must be positive, got {dims:?}"
            )));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn parties(&self) -> usize {
        self.dims.len()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Product of the listed subsystem dimensions.
    pub fn dim_of(&self, parties: &[usize]) -> usize {
        parties.iter().map(|&k| self.dims[k]).product()
    }

    fn validate_keep(&self, keep: &[usize]) -> Result<()> {
        if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= self.dims.len()) {
            return Err(Error::DimensionMismatch(format!(
                "subsystem list {keep:?} must be strictly increasing and below {}",
                self.dims.len()
            )));
        }
        Ok(())
    }

    /// Splits a flat index into (kept index, traced index) with respect to
    /// `keep`, each in the row-major order of its own factors.
    fn split(&self, mut flat: usize, keep: &[usize]) -> (usize, usize) {
        let mut digits = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            digits[k] = flat % self.dims[k];
            flat /= self.dims[k];
        }
        let (mut kept, mut traced) = (0, 0);
        for (k, &d) in self.dims.iter().enumerate() {
            if keep.contains(&k) {
                kept = kept * d + digits[k];
            } else {
                traced = traced * d + digits[k];
            }
        }
        (kept, traced)
    }
}

/// Traces out every subsystem not listed in `keep`.
pub fn partial_trace(
    op: &HermitianOperator,
    shape: &SubsystemShape,
    keep: &[usize],
) -> Result<HermitianOperator> {
    check_total(op, shape)?;
    shape.validate_keep(keep)?;
    let n = shape.total();
    let dk = shape.dim_of(keep);
    let parts: Vec<(usize, usize)> = (0..n).map(|i| shape.split(i, keep)).collect();
    let mut out = ComplexMatrix::zeros(dk, dk);
    for i in 0..n {
        let (ki, ti) = parts[i];
        for j in 0..n {
            let (kj, tj) = parts[j];
            if ti == tj {
                out[(ki, kj)] += op.entry(i, j);
            }
        }
    }
    Ok(HermitianOperator::symmetrized(out))
}

/// Places `op` on the subsystems `on` and the identity elsewhere. This is
/// the adjoint of [`partial_trace`] onto `on`.
pub fn lift(
    op: &HermitianOperator,
    shape: &SubsystemShape,
    on: &[usize],
) -> Result<HermitianOperator> {
    shape.validate_keep(on)?;
    if op.dim() != shape.dim_of(on) {
        return Err(Error::DimensionMismatch(format!(
            "operator of dimension {} placed on subsystems of dimension {}",
            op.dim(),
            shape.dim_of(on)
        )));
    }
    let n = shape.total();
    let parts: Vec<(usize, usize)> = (0..n).map(|i| shape.split(i, on)).collect();
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let (ki, ti) = parts[i];
        for j in 0..n {
            let (kj, tj) = parts[j];
            if ti == tj {
                out[(i, j)] = op.entry(ki, kj);
            }
        }
    }
    Ok(HermitianOperator::symmetrized(out))
}

/// Maps `L_t` with `partial_trace(X) = Σ_t L_t X L_t†`, one per basis
/// state of the traced-out factors.
pub fn partial_trace_kraus(shape: &SubsystemShape, keep: &[usize]) -> Result<Vec<ComplexMatrix>> {
    shape.validate_keep(keep)?;
    let n = shape.total();
    let dk = shape.dim_of(keep);
    let dt = n / dk;
    let mut maps = vec![ComplexMatrix::zeros(dk, n); dt];
    for i in 0..n {
        let (k, t) = shape.split(i, keep);
        maps[t][(k, i)] = Complex64::new(1.0, 0.0);
    }
    Ok(maps)
}

fn check_total(op: &HermitianOperator, shape: &SubsystemShape) -> Result<()> {
    if op.dim() != shape.total() {
        return Err(Error::DimensionMismatch(format!(
            "operator dimension {} does not match subsystem shape {:?}",
            op.dim(),
            shape.dims()
        )));
    }
    Ok(())
}
