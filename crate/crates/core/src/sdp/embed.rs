//! Real symmetric embedding `H ↦ [[Re H, −Im H], [Im H, Re H]]`.
//!
//! The map is a real-linear *-homomorphism, so `embed(L X R†) =
//! embed(L) embed(X) embed(R)ᵀ` and every eigenvalue of `H` appears twice
//! in `embed(H)`. Traces double: `tr embed(A) embed(B) = 2 Re tr(A B)`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::problem::{Block, BlockKind, Equality, Functional, Lmi, LmiTerm, SdpProblem};
use crate::operator::{ComplexMatrix, HermitianOperator};

pub(crate) fn embed_dense(m: &ComplexMatrix) -> DMatrix<f64> {
    let (r, c) = (m.rows(), m.cols());
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i, c + j)] = -z.im;
            out[(r + i, j)] = z.im;
            out[(r + i, c + j)] = z.re;
        }
    }
    out
}

/// Inverse of the embedding on its range, extended to all real symmetric
/// `[[A, B], [Bᵀ, D]]` by `(A + D) + i(Bᵀ − B)`. This is the adjoint of the
/// embedding, so `Re tr(H Z) = tr(embed(H) Z_r)` for the result `Z`.
pub(crate) fn unembed_dense(z: &DMatrix<f64>) -> HermitianOperator {
    let n = z.nrows() / 2;
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] =
                Complex64::new(z[(i, j)] + z[(n + i, n + j)], z[(n + i, j)] - z[(i, n + j)]);
        }
    }
    HermitianOperator::symmetrized(m)
}

fn complex_from_real(m: &DMatrix<f64>) -> ComplexMatrix {
    let (r, c) = (m.nrows(), m.ncols());
    ComplexMatrix::from_vec(
        r,
        c,
        (0..r * c)
            .map(|k| Complex64::new(m[(k / c, k % c)], 0.0))
            .collect(),
    )
    .expect("shape")
}

/// Embedding of a (possibly rectangular) complex matrix as a complex matrix
/// with zero imaginary part.
pub fn embed_matrix(m: &ComplexMatrix) -> ComplexMatrix {
    complex_from_real(&embed_dense(m))
}

/// `[[Re H, −Im H], [Im H, Re H]]`, a real symmetric matrix of twice the size.
pub fn embed_hermitian(h: &HermitianOperator) -> HermitianOperator {
    HermitianOperator::symmetrized(embed_matrix(h.as_matrix()))
}

/// Complex Hermitian block value from a real symmetric block of the
/// embedded problem: `((A + D) + i(C − B)) / 2` for `[[A, B], [C, D]]`.
/// Exact inverse of [`embed_hermitian`] on its range.
pub fn unembed_block(x: &HermitianOperator) -> HermitianOperator {
    let n = x.dim() / 2;
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = Complex64::new(
                (x.entry(i, j).re + x.entry(n + i, n + j).re) / 2.0,
                (x.entry(n + i, j).re - x.entry(i, n + j).re) / 2.0,
            );
        }
    }
    HermitianOperator::symmetrized(m)
}

fn real_part(h: &HermitianOperator) -> HermitianOperator {
    let n = h.dim();
    let mut m = h.as_matrix().clone();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = Complex64::new(m[(i, j)].re, 0.0);
        }
    }
    HermitianOperator::symmetrized(m)
}

fn columns(m: &ComplexMatrix, from: usize, to: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(m.rows(), to - from);
    for r in 0..m.rows() {
        for c in from..to {
            out[(r, c - from)] = m[(r, c)];
        }
    }
    out
}

fn lmi_is_real(p: &SdpProblem, lmi: &Lmi) -> bool {
    lmi.constant.is_real(0.0)
        && lmi.terms.iter().all(|t| match t {
            LmiTerm::Scalar { placement, .. } => placement.is_real(0.0),
            LmiTerm::Congruence { block, map, .. } => {
                p.blocks[block.0].kind == BlockKind::Symmetric && map.is_real(0.0)
            }
            LmiTerm::Coupling {
                block, left, right, ..
            } => {
                p.blocks[block.0].kind == BlockKind::Symmetric
                    && left.is_real(0.0)
                    && right.is_real(0.0)
            }
        })
}

/// Equivalent problem over real symmetric blocks only.
///
/// Hermitian blocks of dimension `d` become symmetric blocks of dimension
/// `2d`, functionals on them take the coefficient `embed(C)/2`, and every
/// LMI with complex data is replaced by its embedding. The optimal value
/// is unchanged; recover complex block values with [`unembed_block`].
pub fn real_embed(p: &SdpProblem) -> SdpProblem {
    let hermitian = |b: usize| p.blocks[b].kind == BlockKind::Hermitian;
    let blocks = p
        .blocks
        .iter()
        .map(|b| match b.kind {
            BlockKind::Hermitian => Block {
                name: b.name.clone(),
                dim: 2 * b.dim,
                kind: BlockKind::Symmetric,
            },
            BlockKind::Symmetric => b.clone(),
        })
        .collect();
    let coeff = |b: usize, c: &HermitianOperator| {
        if hermitian(b) {
            embed_hermitian(c).scale(0.5)
        } else {
            real_part(c)
        }
    };
    let functional = |f: &Functional| Functional {
        terms: f.terms.iter().map(|(b, c)| (*b, coeff(b.0, c))).collect(),
    };

    let mut lmis = Vec::with_capacity(p.lmis.len());
    for lmi in &p.lmis {
        if lmi_is_real(p, lmi) {
            let terms = lmi
                .terms
                .iter()
                .map(|t| match t {
                    LmiTerm::Scalar {
                        block,
                        coeff: c,
                        placement,
                    } => LmiTerm::Scalar {
                        block: *block,
                        coeff: coeff(block.0, c),
                        placement: placement.clone(),
                    },
                    other => other.clone(),
                })
                .collect();
            lmis.push(Lmi {
                name: lmi.name.clone(),
                constant: lmi.constant.clone(),
                terms,
            });
            continue;
        }
        let mut terms = Vec::new();
        for t in &lmi.terms {
            let b = t.block();
            let d = p.blocks[b.0].dim;
            match t {
                LmiTerm::Congruence { map, weight, .. } => {
                    let em = embed_matrix(map);
                    if hermitian(b.0) {
                        terms.push(LmiTerm::Congruence {
                            block: b,
                            map: em,
                            weight: *weight,
                        });
                    } else {
                        for (from, to) in [(0, d), (d, 2 * d)] {
                            terms.push(LmiTerm::Congruence {
                                block: b,
                                map: columns(&em, from, to),
                                weight: *weight,
                            });
                        }
                    }
                }
                LmiTerm::Coupling { left, right, .. } => {
                    let (el, er) = (embed_matrix(left), embed_matrix(right));
                    if hermitian(b.0) {
                        terms.push(LmiTerm::Coupling {
                            block: b,
                            left: el,
                            right: er,
                        });
                    } else {
                        for (from, to) in [(0, d), (d, 2 * d)] {
                            terms.push(LmiTerm::Coupling {
                                block: b,
                                left: columns(&el, from, to),
                                right: columns(&er, from, to),
                            });
                        }
                    }
                }
                LmiTerm::Scalar {
                    coeff: c,
                    placement,
                    ..
                } => terms.push(LmiTerm::Scalar {
                    block: b,
                    coeff: coeff(b.0, c),
                    placement: embed_hermitian(placement),
                }),
            }
        }
        lmis.push(Lmi {
            name: lmi.name.clone(),
            constant: embed_hermitian(&lmi.constant),
            terms,
        });
    }

    SdpProblem {
        blocks,
        objective: functional(&p.objective),
        sense: p.sense,
        equalities: p
            .equalities
            .iter()
            .map(|e| Equality {
                functional: functional(&e.functional),
                rhs: e.rhs,
            })
            .collect(),
        lmis,
    }
}
