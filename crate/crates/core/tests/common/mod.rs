#![allow(dead_code)]

use num_complex::Complex64;
use qsdp::estimation::{Dataset, MeasurementRecord};
use qsdp::operator::{ComplexMatrix, DensityOperator, HermitianOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    let data = (0..rows * cols)
        .map(|_| Complex64::new(gaussian(rng), gaussian(rng)))
        .collect();
    ComplexMatrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> HermitianOperator {
    let g = random_matrix(rng, d, d);
    HermitianOperator::from_matrix(g.add(&g.adjoint()).unwrap().scale(Complex64::new(0.5, 0.0)))
        .unwrap()
}

pub fn random_ket(rng: &mut ChaCha8Rng, d: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..d)
        .map(|_| Complex64::new(gaussian(rng), gaussian(rng)))
        .collect();
    let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|c| c / n).collect()
}

/// Full-rank random state from a square Ginibre matrix.
pub fn random_state(rng: &mut ChaCha8Rng, d: usize) -> DensityOperator {
    random_state_of_rank(rng, d, d)
}

pub fn random_state_of_rank(rng: &mut ChaCha8Rng, d: usize, rank: usize) -> DensityOperator {
    let g = random_matrix(rng, d, rank);
    let m = g.matmul(&g.adjoint()).unwrap();
    let tr = m.trace().re;
    let op = HermitianOperator::from_matrix(m.scale(Complex64::new(1.0 / tr, 0.0))).unwrap();
    DensityOperator::new(op).unwrap()
}

pub fn paulis() -> [HermitianOperator; 3] {
    [
        HermitianOperator::sigma_x(),
        HermitianOperator::sigma_y(),
        HermitianOperator::sigma_z(),
    ]
}

/// Exact records on the first `values.len()` Pauli operators.
pub fn pauli_data(values: &[f64]) -> Dataset {
    let ops = paulis();
    Dataset::new(
        values
            .iter()
            .zip(ops)
            .map(|(&m, op)| MeasurementRecord::new(op, m))
            .collect(),
    )
    .unwrap()
}

/// Minimum of `f` over the unit disk by a zooming grid search.
pub fn min_over_disk(f: impl Fn(f64, f64) -> f64) -> f64 {
    let mut center = (0.0, 0.0);
    let mut half = 1.0;
    let mut best = f64::INFINITY;
    let n = 200;
    for _ in 0..40 {
        let mut arg = center;
        for i in 0..=n {
            for j in 0..=n {
                let x = center.0 - half + 2.0 * half * i as f64 / n as f64;
                let y = center.1 - half + 2.0 * half * j as f64 / n as f64;
                let r = (x * x + y * y).sqrt();
                // project onto the disk so boundary optima are sampled exactly
                let (px, py) = if r > 1.0 { (x / r, y / r) } else { (x, y) };
                let v = f(px, py);
                if v < best {
                    best = v;
                    arg = (px, py);
                }
            }
        }
        center = arg;
        half *= 0.1;
    }
    best
}

/// Copies an operator into nalgebra for oracle computations.
pub fn to_nalgebra(op: &HermitianOperator) -> nalgebra::DMatrix<Complex64> {
    let d = op.dim();
    nalgebra::DMatrix::from_fn(d, d, |i, j| op.entry(i, j))
}

/// Eigenvalues from nalgebra's Hermitian eigensolver.
pub fn oracle_eigenvalues(op: &HermitianOperator) -> Vec<f64> {
    let mut w: Vec<f64> = nalgebra::SymmetricEigen::new(to_nalgebra(op))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    w.sort_by(f64::total_cmp);
    w
}

fn oracle_sqrt(op: &HermitianOperator) -> nalgebra::DMatrix<Complex64> {
    let eig = nalgebra::SymmetricEigen::new(to_nalgebra(op));
    let roots = eig
        .eigenvalues
        .map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * nalgebra::DMatrix::from_diagonal(&roots) * eig.eigenvectors.adjoint()
}

/// `√F(ρ, σ) = tr √(√σ ρ √σ)` with nalgebra's eigensolver.
pub fn oracle_sqrt_fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> f64 {
    let root = oracle_sqrt(sigma.op());
    let inner = &root * to_nalgebra(rho.op()) * &root;
    let inner = (&inner + inner.adjoint()) * Complex64::new(0.5, 0.0);
    nalgebra::SymmetricEigen::new(inner)
        .eigenvalues
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum()
}

/// `½ Σ |λ(ρ − σ)|`.
pub fn oracle_trace_distance(rho: &HermitianOperator, sigma: &HermitianOperator) -> f64 {
    0.5 * oracle_eigenvalues(&rho.sub(sigma).unwrap())
        .iter()
        .map(|l| l.abs())
        .sum::<f64>()
}

/// Exact Pauli expectations of a qubit state.
pub fn pauli_values(rho: &DensityOperator) -> [f64; 3] {
    paulis().map(|p| p.expectation(rho.op()))
}
