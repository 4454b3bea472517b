//! Lowering of an [`SdpProblem`] to the real conic form
//!
//! ```text
//! minimize cᵀx  subject to  A x = b,  G x + s = h,  s ⪰ 0
//! ```
//!
//! with `x` the real parameters of all blocks and one real PSD cone per
//! LMI. `G = −F_k` column-wise and `h = F0`. An LMI whose data is real is
//! kept at its size; otherwise it is replaced by the real embedding
//! `H ↦ [[Re H, −Im H], [Im H, Re H]]` of twice the size.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::embed::{embed_dense, unembed_dense};
use super::problem::{BlockKind, Functional, LmiTerm, SdpProblem, Sense};
use crate::operator::{ComplexMatrix, HermitianOperator};

/// One real basis direction of a block.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Basis {
    Diag(usize),
    Re(usize, usize),
    Im(usize, usize),
}

impl Basis {
    /// Entries `(row, col, value)` of the basis matrix.
    fn entries(self) -> Vec<(usize, usize, Complex64)> {
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Basis::Diag(a) => vec![(a, a, one)],
            Basis::Re(a, b) => vec![(a, b, one), (b, a, one)],
            Basis::Im(a, b) => vec![(a, b, i), (b, a, -i)],
        }
    }

    /// `Re tr(C B)` for Hermitian `C`.
    fn coefficient(self, c: &HermitianOperator) -> f64 {
        match self {
            Basis::Diag(a) => c.entry(a, a).re,
            Basis::Re(a, b) => 2.0 * c.entry(a, b).re,
            Basis::Im(a, b) => 2.0 * c.entry(a, b).im,
        }
    }
}

pub(crate) fn block_basis(kind: BlockKind, d: usize) -> Vec<Basis> {
    let mut out: Vec<Basis> = (0..d).map(Basis::Diag).collect();
    for a in 0..d {
        for b in a + 1..d {
            out.push(Basis::Re(a, b));
            if kind == BlockKind::Hermitian {
                out.push(Basis::Im(a, b));
            }
        }
    }
    out
}

/// Sparse symmetric matrix as full `(row, col, value)` triplets.
pub(crate) type Triplets = Vec<(usize, usize, f64)>;

pub(crate) struct Cone {
    /// Size of the real cone.
    pub size: usize,
    /// Whether the LMI was replaced by its real embedding.
    pub embedded: bool,
    pub f0: DMatrix<f64>,
    /// Nonzero columns `F_k` as `(parameter index, triplets)`.
    pub cols: Vec<(usize, Triplets)>,
}

pub(crate) struct ConicForm {
    pub n: usize,
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub cones: Vec<Cone>,
    /// First parameter of each block.
    pub offsets: Vec<usize>,
    pub bases: Vec<Vec<Basis>>,
    /// `+1` for minimization, `−1` when the objective was negated.
    pub sign: f64,
}

impl ConicForm {
    pub fn nu(&self) -> usize {
        self.cones.iter().map(|c| c.size).sum()
    }

    /// Hermitian block values from the parameter vector.
    pub fn unpack(&self, p: &SdpProblem, x: &DVector<f64>) -> Vec<HermitianOperator> {
        p.blocks
            .iter()
            .enumerate()
            .map(|(bi, block)| {
                let mut m = ComplexMatrix::zeros(block.dim, block.dim);
                for (k, basis) in self.bases[bi].iter().enumerate() {
                    let v = x[self.offsets[bi] + k];
                    for (r, c, e) in basis.entries() {
                        m[(r, c)] += e * v;
                    }
                }
                HermitianOperator::symmetrized(m)
            })
            .collect()
    }

    /// Hermitian multiplier of an LMI from its real cone matrix.
    pub fn unembed_dual(&self, cone: usize, z: &DMatrix<f64>) -> HermitianOperator {
        let c = &self.cones[cone];
        if c.embedded {
            unembed_dense(z)
        } else {
            let n = z.nrows();
            let m = ComplexMatrix::from_vec(
                n,
                n,
                (0..n * n)
                    .map(|k| Complex64::new(z[(k / n, k % n)], 0.0))
                    .collect(),
            )
            .expect("square");
            HermitianOperator::symmetrized(m)
        }
    }
}

fn functional_row(
    form_offsets: &[usize],
    bases: &[Vec<Basis>],
    f: &Functional,
    n: usize,
) -> DVector<f64> {
    let mut row = DVector::zeros(n);
    for (b, coeff) in &f.terms {
        for (k, basis) in bases[b.0].iter().enumerate() {
            row[form_offsets[b.0] + k] += basis.coefficient(coeff);
        }
    }
    row
}

/// Image of one basis matrix under an LMI term.
fn apply_term_to_basis(term: &LmiTerm, basis: Basis, m: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(m, m);
    match term {
        LmiTerm::Congruence { map, weight, .. } => {
            for (a, b, v) in basis.entries() {
                let v = v * *weight;
                for r in 0..m {
                    let lr = map[(r, a)] * v;
                    if lr == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for c in 0..m {
                        out[(r, c)] += lr * map[(c, b)].conj();
                    }
                }
            }
        }
        LmiTerm::Coupling { left, right, .. } => {
            for (a, b, v) in basis.entries() {
                for r in 0..m {
                    let lr = left[(r, a)] * v;
                    let rr = right[(r, a)] * v;
                    for c in 0..m {
                        out[(r, c)] += lr * right[(c, b)].conj() + rr * left[(c, b)].conj();
                    }
                }
            }
        }
        LmiTerm::Scalar {
            coeff, placement, ..
        } => {
            let w = basis.coefficient(coeff);
            if w != 0.0 {
                out = placement.as_matrix().scale(Complex64::new(w, 0.0));
            }
        }
    }
    out
}

fn is_real(m: &ComplexMatrix) -> bool {
    let scale = m.max_abs().max(1.0);
    m.is_real(1e-15 * scale)
}

fn to_real_dense(m: &ComplexMatrix, embedded: bool) -> DMatrix<f64> {
    if embedded {
        embed_dense(m)
    } else {
        DMatrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)].re)
    }
}

fn triplets(m: &DMatrix<f64>) -> Triplets {
    let mut out = Vec::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)];
            if v != 0.0 {
                out.push((r, c, v));
            }
        }
    }
    out
}

/// Lowers a validated problem.
pub(crate) fn lower(p: &SdpProblem) -> ConicForm {
    let bases: Vec<Vec<Basis>> = p
        .blocks
        .iter()
        .map(|b| block_basis(b.kind, b.dim))
        .collect();
    let mut offsets = Vec::with_capacity(p.blocks.len());
    let mut n = 0;
    for b in &bases {
        offsets.push(n);
        n += b.len();
    }
    let sign = match p.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let c = functional_row(&offsets, &bases, &p.objective, n) * sign;

    let rows = p.equalities.len();
    let mut a = DMatrix::zeros(rows, n);
    let mut b = DVector::zeros(rows);
    for (i, e) in p.equalities.iter().enumerate() {
        a.set_row(
            i,
            &functional_row(&offsets, &bases, &e.functional, n).transpose(),
        );
        b[i] = e.rhs;
    }

    let mut cones = Vec::with_capacity(p.lmis.len());
    for lmi in &p.lmis {
        let m = lmi.dim();
        let mut columns: Vec<Option<ComplexMatrix>> = vec![None; n];
        for term in &lmi.terms {
            let bi = term.block().0;
            for (k, &basis) in bases[bi].iter().enumerate() {
                let img = apply_term_to_basis(term, basis, m);
                let slot = &mut columns[offsets[bi] + k];
                *slot = Some(match slot.take() {
                    Some(prev) => prev.add(&img).expect("same shape"),
                    None => img,
                });
            }
        }
        let embedded =
            !is_real(lmi.constant.as_matrix()) || columns.iter().flatten().any(|f| !is_real(f));
        let f0 = to_real_dense(lmi.constant.as_matrix(), embedded);
        let cols = columns
            .into_iter()
            .enumerate()
            .filter_map(|(k, f)| {
                let t = triplets(&to_real_dense(&f?, embedded));
                (!t.is_empty()).then_some((k, t))
            })
            .collect();
        cones.push(Cone {
            size: f0.nrows(),
            embedded,
            f0,
            cols,
        });
    }

    ConicForm {
        n,
        c,
        a,
        b,
        cones,
        offsets,
        bases,
        sign,
    }
}
