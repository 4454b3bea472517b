use crate::error::Result;
use crate::operator::{ComplexMatrix, HermitianOperator};

use super::{solve_relaxed, Dataset, EstimationOptions, MeasurementRecord, Norm};

/// Eigenvalue of `W` below which its direction is excluded from the face.
const FACE_TOL: f64 = 1e-6;

/// The smallest face of the state space holding every consistent state:
/// consistent states are exactly `V ρ' V†` with `ρ'` consistent with the
/// compressed data `V† M_x V`.
#[derive(Clone, Debug)]
pub(crate) struct Face {
    /// Orthonormal columns spanning the face.
    pub basis: ComplexMatrix,
    pub data: Dataset,
}

/// Columns `cols` of `m`.
pub(crate) fn select_columns(m: &ComplexMatrix, cols: &[usize]) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(m.rows(), cols.len());
    for (k, &c) in cols.iter().enumerate() {
        for i in 0..m.rows() {
            out[(i, k)] = m[(i, c)];
        }
    }
    out
}

fn compress(data: &Dataset, v: &ComplexMatrix) -> Result<Dataset> {
    let vt = v.adjoint();
    let mut out = Dataset::empty(v.cols());
    for r in data.records() {
        out.push(MeasurementRecord {
            observable: r.observable.congruence(&vt)?,
            value: r.value,
            half_width: r.half_width,
        })?;
    }
    Ok(out)
}

/// Reduces the data to their minimal face.
///
/// Each round solves the ℓ∞ relaxation. At `δ* = 0` its multipliers give
/// `W = zI + Σ t_x M_x ⪯ 0` with `tr(W ρ) = 0` on every consistent state,
/// so consistent states live in the kernel of `W`. The kernel is spanned
/// by the dominant eigenvectors of the relaxed state. Rounds stop when `W`
/// has no clearly negative eigenvalue. Returns `None` when `δ*` exceeds
/// the threshold.
pub(crate) fn minimal_face(data: &Dataset, opts: &EstimationOptions) -> Result<Option<Face>> {
    let mut face = Face {
        basis: ComplexMatrix::identity(data.dim()),
        data: data.clone(),
    };
    while face.data.dim() > 1 {
        let relaxed = solve_relaxed(&face.data, Norm::Linf, true, &opts.solver)?;
        if relaxed.delta_star > opts.threshold {
            return Ok(None);
        }
        let t = relaxed.harvested_direction();
        let r = face.data.dim();
        let mut direction = HermitianOperator::zeros(r);
        for (tx, rec) in t.iter().zip(face.data.records()) {
            direction = direction.add(&rec.observable.scale(*tx))?;
        }
        let (w, _) = direction.eigh();
        let top = w[r - 1];
        let k = w.iter().filter(|&&l| l >= top - FACE_TOL).count();
        if k == r {
            break;
        }
        // The multipliers fix the face dimension; its basis comes from the
        // relaxed state, which is accurate to δ rather than to √gap.
        let (_, vecs) = relaxed.solution.block(relaxed.rho).eigh();
        let v = select_columns(&vecs, &((r - k)..r).collect::<Vec<_>>());
        face = Face {
            basis: face.basis.matmul(&v)?,
            data: compress(&face.data, &v)?,
        };
    }
    Ok(Some(face))
}

impl Face {
    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    /// `V ρ' V†`.
    pub fn lift(&self, reduced: &HermitianOperator) -> Result<HermitianOperator> {
        reduced.congruence(&self.basis)
    }

    /// `V† M V`.
    pub fn compress(&self, op: &HermitianOperator) -> Result<HermitianOperator> {
        op.congruence(&self.basis.adjoint())
    }
}
