//! Complex Hermitian matrix algebra.
//!
//! Tensor-product convention: the leftmost factor is the slowest index, so
//! `tensor(a, b)[(i*db + k, j*db + l)] = a[(i, j)] * b[(k, l)]`, and
//! subsystem `0` of a [`SubsystemShape`] is the leftmost factor.

mod eigen;
mod matrix;
mod subsystem;

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use eigen::hermitian_eigen;
pub use matrix::ComplexMatrix;
pub use subsystem::{lift, partial_trace, partial_trace_kraus, SubsystemShape};

/// Entries further than this from Hermitian symmetry are rejected.
pub const HERMITIAN_REJECT_TOL: f64 = 1e-8;
/// Trace and eigenvalue slack for [`DensityOperator`] validation.
pub const DENSITY_TOL: f64 = 1e-9;

/// Square complex matrix with Hermitian symmetry.
///
/// Construction symmetrizes the input, `(A + A†)/2`, after rejecting any
/// entry pair whose asymmetry exceeds [`HERMITIAN_REJECT_TOL`].
#[derive(Clone, PartialEq)]
pub struct HermitianOperator {
    m: ComplexMatrix,
}

impl HermitianOperator {
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        Self::from_matrix(ComplexMatrix::from_vec(dim, dim, entries)?)
    }

    pub fn from_matrix(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows();
        if n == 0 {
            return Err(Error::DimensionMismatch(
                "operator dimension is zero".into(),
            ));
        }
        let mut worst = (0.0, 0, 0);
        for i in 0..n {
            for j in i..n {
                let dev = (m[(i, j)] - m[(j, i)].conj()).norm();
                if dev > worst.0 {
                    worst = (dev, i, j);
                }
            }
        }
        if worst.0 > HERMITIAN_REJECT_TOL {
            return Err(Error::NotHermitian {
                row: worst.1,
                col: worst.2,
                deviation: worst.0,
            });
        }
        Ok(Self::symmetrized(m))
    }

    /// Builds from row-major nested rows.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(n, data)
    }

    pub fn from_real(dim: usize, entries: &[f64]) -> Result<Self> {
        Self::from_matrix(ComplexMatrix::from_real(dim, dim, entries)?)
    }

    /// `(A + A†)/2` without any tolerance check. For internal results that
    /// are Hermitian up to round-off.
    pub(crate) fn symmetrized(m: ComplexMatrix) -> Self {
        let n = m.rows();
        let mut out = m.clone();
        for i in 0..n {
            out[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
            for j in i + 1..n {
                let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                out[(i, j)] = v;
                out[(j, i)] = v.conj();
            }
        }
        Self { m: out }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: ComplexMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: ComplexMatrix::identity(dim),
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = ComplexMatrix::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        Self { m }
    }

    /// `|ψ⟩⟨ψ|` for the normalized ket.
    pub fn projector(ket: &[Complex64]) -> Result<Self> {
        let norm = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero ket".into()));
        }
        let n = ket.len();
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = ket[i] * ket[j].conj() / (norm * norm);
            }
        }
        Ok(Self::symmetrized(m))
    }

    pub fn sigma_x() -> Self {
        Self::from_real(2, &[0.0, 1.0, 1.0, 0.0]).expect("pauli")
    }

    pub fn sigma_y() -> Self {
        let i = Complex64::new(0.0, 1.0);
        Self::new(
            2,
            vec![Complex64::new(0.0, 0.0), -i, i, Complex64::new(0.0, 0.0)],
        )
        .expect("pauli")
    }

    pub fn sigma_z() -> Self {
        Self::diag(&[1.0, -1.0])
    }

    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.m
    }

    /// Row-major nested rows.
    pub fn to_rows(&self) -> Vec<Vec<Complex64>> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.m[(i, j)]).collect())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    /// `Re tr(self · other)`, the real inner product on Hermitian matrices.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "inner product dimension mismatch");
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = self.m[(i, j)];
                let b = other.m[(j, i)];
                acc += a.re * b.re - a.im * b.im;
            }
        }
        acc
    }

    /// `tr(self · rho)`, the expectation value of `self` in `rho`.
    pub fn expectation(&self, rho: &HermitianOperator) -> f64 {
        self.inner(rho)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            m: self.m.scale(Complex64::new(s, 0.0)),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            m: self.m.add(&other.m)?,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            m: self.m.sub(&other.m)?,
        })
    }

    /// `Σ_k w_k A_k`; all terms must share a dimension.
    pub fn linear_combination(dim: usize, terms: &[(f64, &HermitianOperator)]) -> Result<Self> {
        let mut out = ComplexMatrix::zeros(dim, dim);
        for (w, op) in terms {
            if op.dim() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "term of dimension {} in a combination of dimension {dim}",
                    op.dim()
                )));
            }
            out = out.add(&op.m.scale(Complex64::new(*w, 0.0)))?;
        }
        Ok(Self::symmetrized(out))
    }

    /// `L · self · L†` for a (possibly rectangular) `L`.
    pub fn congruence(&self, l: &ComplexMatrix) -> Result<Self> {
        let lm = l.matmul(&self.m)?;
        Ok(Self::symmetrized(lm.matmul(&l.adjoint())?))
    }

    pub fn tensor(&self, other: &Self) -> Self {
        tensor(self, other)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.m.is_real(tol)
    }

    /// Eigenvalues ascending with unit eigenvectors as columns.
    pub fn eigh(&self) -> (Vec<f64>, ComplexMatrix) {
        hermitian_eigen(self.dim(), self.m.as_slice())
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigh().0
    }

    pub fn eig_bounds(&self) -> (f64, f64) {
        eig_bounds(self)
    }

    /// Applies `f` to the spectrum: `V f(Λ) V†`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Self {
        let (w, v) = self.eigh();
        let n = self.dim();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lam) in w.iter().enumerate() {
            let fl = f(lam);
            if fl == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = v[(i, k)] * fl;
                for j in 0..n {
                    out[(i, j)] += vik * v[(j, k)].conj();
                }
            }
        }
        Self::symmetrized(out)
    }

    /// Principal square root with negative eigenvalues clipped to zero.
    pub fn sqrt_psd(&self) -> Self {
        self.map_spectrum(|x| x.max(0.0).sqrt())
    }

    /// Sum of absolute eigenvalues.
    pub fn trace_norm(&self) -> f64 {
        self.eigenvalues().iter().map(|x| x.abs()).sum()
    }

    /// Largest absolute eigenvalue.
    pub fn operator_norm(&self) -> f64 {
        let (lo, hi) = self.eig_bounds();
        lo.abs().max(hi.abs())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.m
            .as_slice()
            .iter()
            .zip(other.m.as_slice())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hermitian{:?}", self.m)
    }
}

/// Positive semidefinite, unit-trace Hermitian operator.
#[derive(Clone, PartialEq)]
pub struct DensityOperator {
    op: HermitianOperator,
}

impl DensityOperator {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let (lo, _) = op.eig_bounds();
        if lo < -DENSITY_TOL {
            return Err(Error::InvalidState(format!(
                "minimum eigenvalue {lo} is negative"
            )));
        }
        Ok(Self { op })
    }

    /// Closest density operator in the sense of clipping negative
    /// eigenvalues and renormalizing the trace. Used to clean up solver
    /// output, whose deviations are at the level of the solver tolerance.
    pub fn nearest(op: &HermitianOperator) -> Result<Self> {
        let clipped = op.map_spectrum(|x| x.max(0.0));
        let tr = clipped.trace();
        if tr <= 0.0 {
            return Err(Error::InvalidState("operator has no positive part".into()));
        }
        Ok(Self {
            op: clipped.scale(1.0 / tr),
        })
    }

    pub fn pure(ket: &[Complex64]) -> Result<Self> {
        Ok(Self {
            op: HermitianOperator::projector(ket)?,
        })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            op: HermitianOperator::identity(dim).scale(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn into_operator(self) -> HermitianOperator {
        self.op
    }

    /// Second-largest eigenvalue; zero (to round-off) for pure states.
    pub fn second_eigenvalue(&self) -> f64 {
        let w = self.op.eigenvalues();
        if w.len() < 2 {
            0.0
        } else {
            w[w.len() - 2]
        }
    }

    /// Unit eigenvector of the largest eigenvalue.
    pub fn dominant_ket(&self) -> Vec<Complex64> {
        let (_, v) = self.op.eigh();
        let n = self.dim();
        (0..n).map(|i| v[(i, n - 1)]).collect()
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self {
            op: tensor(&self.op, &other.op),
        }
    }
}

impl fmt::Debug for DensityOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Density{:?}", self.op)
    }
}

/// Kronecker product with `a` as the slow index.
pub fn tensor(a: &HermitianOperator, b: &HermitianOperator) -> HermitianOperator {
    HermitianOperator::symmetrized(a.m.kron(&b.m))
}

/// `(λ_min, λ_max)` of a Hermitian operator.
pub fn eig_bounds(op: &HermitianOperator) -> (f64, f64) {
    let w = op.eigenvalues();
    (w[0], w[w.len() - 1])
}

/// `[[tl, tr_block], [tr_block†, br]]`.
pub fn block_embed_2x2(
    tl: &HermitianOperator,
    tr_block: &ComplexMatrix,
    br: &HermitianOperator,
) -> Result<HermitianOperator> {
    let d = tl.dim();
    if br.dim() != d || tr_block.rows() != d || tr_block.cols() != d {
        return Err(Error::DimensionMismatch(format!(
            "block embedding needs equal d x d blocks, got {}, {}x{}, {}",
            d,
            tr_block.rows(),
            tr_block.cols(),
            br.dim()
        )));
    }
    let mut m = ComplexMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = tl.entry(i, j);
            m[(d + i, d + j)] = br.entry(i, j);
            m[(i, d + j)] = tr_block[(i, j)];
            m[(d + j, i)] = tr_block[(i, j)].conj();
        }
    }
    Ok(HermitianOperator::symmetrized(m))
}

/// Real 3-vector parameterizing a qubit operator `(I + r·σ)/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector {
    pub r: [f64; 3],
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { r: [x, y, z] }
    }

    pub fn norm(&self) -> f64 {
        self.r.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// `(I + r·σ)/2`. Not necessarily positive: that holds exactly when `‖r‖ ≤ 1`.
pub fn bloch_to_state(r: &BlochVector) -> HermitianOperator {
    let [x, y, z] = r.r;
    let m = ComplexMatrix::from_vec(
        2,
        2,
        vec![
            Complex64::new((1.0 + z) / 2.0, 0.0),
            Complex64::new(x / 2.0, -y / 2.0),
            Complex64::new(x / 2.0, y / 2.0),
            Complex64::new((1.0 - z) / 2.0, 0.0),
        ],
    )
    .expect("2x2");
    HermitianOperator::symmetrized(m)
}

/// Components `r_i = tr(σ_i ρ)`.
pub fn state_to_bloch(rho: &DensityOperator) -> Result<BlochVector> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "Bloch vectors need a qubit, got dimension {}",
            rho.dim()
        )));
    }
    let op = rho.op();
    Ok(BlochVector::new(
        HermitianOperator::sigma_x().expectation(op),
        HermitianOperator::sigma_y().expectation(op),
        HermitianOperator::sigma_z().expectation(op),
    ))
}
