//! Removal of redundant equality rows.
//!
//! Rows are normalized and passed through modified Gram–Schmidt. A row in
//! the span of earlier rows is dropped when its right-hand side agrees with
//! the same combination of earlier right-hand sides, and otherwise yields a
//! Farkas ray `y` with `Aᵀy = 0`, `bᵀy < 0`. Rows negligible next to the
//! largest row count as zero rows.

use nalgebra::{DMatrix, DVector};

const DEPENDENCE_TOL: f64 = 1e-10;
const CONSISTENCY_TOL: f64 = 1e-9;

pub(crate) enum Presolved {
    Reduced {
        /// Original indices of the kept rows.
        keep: Vec<usize>,
        /// Norms the kept rows were divided by.
        scale: Vec<f64>,
        a: DMatrix<f64>,
        b: DVector<f64>,
    },
    /// Ray over the original rows.
    Inconsistent { y: DVector<f64> },
}

pub(crate) fn presolve(a: &DMatrix<f64>, b: &DVector<f64>) -> Presolved {
    let (rows, n) = a.shape();
    // orthonormal rows q_j = Σ_k t[j][k] · row_k / ‖row_k‖ over kept rows k
    let mut q: Vec<DVector<f64>> = Vec::new();
    let mut t: Vec<Vec<f64>> = Vec::new();
    let mut keep = Vec::new();
    let mut scale = Vec::new();
    let largest = (0..rows).map(|i| a.row(i).norm()).fold(0.0, f64::max);

    for i in 0..rows {
        let row: DVector<f64> = a.row(i).transpose();
        let norm = row.norm();
        if norm <= DEPENDENCE_TOL * largest {
            if b[i].abs() > CONSISTENCY_TOL {
                let mut y = DVector::zeros(rows);
                y[i] = -b[i].signum();
                return Presolved::Inconsistent { y };
            }
            continue;
        }
        let unit = &row / norm;
        let mut resid = unit.clone();
        let mut coords = Vec::with_capacity(q.len());
        for qj in &q {
            let h = qj.dot(&resid);
            resid.axpy(-h, qj, 1.0);
            coords.push(h);
        }
        let rn = resid.norm();
        if rn > DEPENDENCE_TOL {
            // new q = (unit − Σ coords_j q_j) / rn
            let mut trow = vec![0.0; keep.len() + 1];
            for (j, &h) in coords.iter().enumerate() {
                for (k, v) in t[j].iter().enumerate() {
                    trow[k] -= h * v / rn;
                }
            }
            trow[keep.len()] = 1.0 / rn;
            for tj in &mut t {
                tj.push(0.0);
            }
            t.push(trow);
            q.push(resid / rn);
            keep.push(i);
            scale.push(norm);
            continue;
        }
        // unit ≈ Σ_j coords_j q_j = Σ_k w_k · kept_unit_k
        let mut w = vec![0.0; keep.len()];
        for (j, &h) in coords.iter().enumerate() {
            for (k, v) in t[j].iter().enumerate() {
                w[k] += h * v;
            }
        }
        let predicted: f64 = keep
            .iter()
            .zip(&scale)
            .zip(&w)
            .map(|((&k, &s), &wk)| wk * b[k] / s)
            .sum();
        let mismatch = b[i] / norm - predicted;
        if mismatch.abs() > CONSISTENCY_TOL * (1.0 + (b[i] / norm).abs()) {
            // y over normalized rows: +1 on row i, −w on kept rows; then
            // rescale to original rows and orient so that bᵀy < 0
            let orient = -mismatch.signum();
            let mut y = DVector::zeros(rows);
            y[i] = orient / norm;
            for ((&k, &s), &wk) in keep.iter().zip(&scale).zip(&w) {
                y[k] -= orient * wk / s;
            }
            return Presolved::Inconsistent { y };
        }
    }

    let ra = DMatrix::from_fn(keep.len(), n, |r, c| a[(keep[r], c)] / scale[r]);
    let rb = DVector::from_fn(keep.len(), |r, _| b[keep[r]] / scale[r]);
    Presolved::Reduced {
        keep,
        scale,
        a: ra,
        b: rb,
    }
}
