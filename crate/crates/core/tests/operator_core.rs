mod common;

use common::{oracle_eigenvalues, random_hermitian, random_matrix, random_state, rng};
use num_complex::Complex64;
use proptest::prelude::*;
use qsdp::operator::{
    bloch_to_state, lift, partial_trace, partial_trace_kraus, state_to_bloch, BlochVector,
    DensityOperator, HermitianOperator, SubsystemShape,
};
use rand::Rng;

fn is_hermitian(op: &HermitianOperator) -> bool {
    let d = op.dim();
    (0..d).all(|i| (0..d).all(|j| op.entry(i, j) == op.entry(j, i).conj()))
}

/// Partial trace by explicit multi-index loops over a row-major tensor
/// layout, keeping the listed factors in their original order.
fn loop_partial_trace(op: &HermitianOperator, dims: &[usize], keep: &[usize]) -> Vec<Vec<Complex64>> {
    let n: usize = dims.iter().product();
    let dk: usize = keep.iter().map(|&k| dims[k]).product();
    let digits = |mut idx: usize| {
        let mut out = vec![0; dims.len()];
        for k in (0..dims.len()).rev() {
            out[k] = idx % dims[k];
            idx /= dims[k];
        }
        out
    };
    let kept_index = |d: &[usize]| keep.iter().fold(0, |acc, &k| acc * dims[k] + d[k]);
    let mut out = vec![vec![Complex64::new(0.0, 0.0); dk]; dk];
    for i in 0..n {
        let di = digits(i);
        for j in 0..n {
            let dj = digits(j);
            let traced_match = (0..dims.len())
                .filter(|k| !keep.contains(k))
                .all(|k| di[k] == dj[k]);
            if traced_match {
                out[kept_index(&di)][kept_index(&dj)] += op.entry(i, j);
            }
        }
    }
    out
}

fn max_diff(op: &HermitianOperator, rows: &[Vec<Complex64>]) -> f64 {
    let mut worst = 0.0f64;
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((op.entry(i, j) - v).norm());
        }
    }
    worst
}

#[test]
fn bloch_round_trip_on_a_thousand_vectors() {
    let mut r = rng(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let v = loop {
            let v = [(); 3].map(|_| r.gen_range(-1.0..1.0));
            if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                break v;
            }
        };
        let rho = DensityOperator::new(bloch_to_state(&BlochVector::new(v[0], v[1], v[2]))).unwrap();
        let back = state_to_bloch(&rho).unwrap();
        for k in 0..3 {
            worst = worst.max((back.r[k] - v[k]).abs());
        }
    }
    assert!(worst <= 1e-12, "worst component error {worst:e}");
}

#[test]
fn bloch_vectors_need_a_qubit() {
    assert!(state_to_bloch(&DensityOperator::maximally_mixed(3)).is_err());
}

#[test]
fn partial_trace_matches_index_loops() {
    let mut r = rng(12);
    for dims in [vec![2, 3], vec![3, 2], vec![2, 2, 2], vec![2, 3, 2]] {
        let shape = SubsystemShape::new(dims.clone()).unwrap();
        let op = random_hermitian(&mut r, shape.total());
        let keeps: Vec<Vec<usize>> = match dims.len() {
            2 => vec![vec![0], vec![1]],
            _ => vec![vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![1, 2]],
        };
        for keep in keeps {
            let got = partial_trace(&op, &shape, &keep).unwrap();
            let want = loop_partial_trace(&op, &dims, &keep);
            assert!(max_diff(&got, &want) < 1e-12, "dims {dims:?} keep {keep:?}");
        }
    }
}

#[test]
fn kraus_form_reproduces_partial_trace() {
    let mut r = rng(13);
    let shape = SubsystemShape::new(vec![2, 3, 2]).unwrap();
    let op = random_hermitian(&mut r, 12);
    for keep in [vec![0], vec![1, 2], vec![0, 2]] {
        let maps = partial_trace_kraus(&shape, &keep).unwrap();
        let mut sum = HermitianOperator::zeros(shape.dim_of(&keep));
        for m in &maps {
            sum = sum.add(&op.congruence(m).unwrap()).unwrap();
        }
        let direct = partial_trace(&op, &shape, &keep).unwrap();
        assert!(sum.max_abs_diff(&direct) < 1e-12);
    }
}

#[test]
fn bad_subsystem_requests_are_rejected() {
    let shape = SubsystemShape::new(vec![2, 2]).unwrap();
    assert!(partial_trace(&HermitianOperator::identity(3), &shape, &[0]).is_err());
    assert!(partial_trace(&HermitianOperator::identity(4), &shape, &[2]).is_err());
    assert!(lift(&HermitianOperator::identity(3), &shape, &[0]).is_err());
    assert!(SubsystemShape::new(vec![]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operations_stay_hermitian(seed in any::<u64>(), d in 1usize..6, s in -3.0f64..3.0) {
        let mut r = rng(seed);
        let a = random_hermitian(&mut r, d);
        let b = random_hermitian(&mut r, d);
        let l = random_matrix(&mut r, d + 1, d);
        prop_assert!(is_hermitian(&a.add(&b).unwrap()));
        prop_assert!(is_hermitian(&a.sub(&b).unwrap()));
        prop_assert!(is_hermitian(&a.scale(s)));
        prop_assert!(is_hermitian(&a.congruence(&l).unwrap()));
        prop_assert!(is_hermitian(&a.tensor(&b)));
        prop_assert!(is_hermitian(&a.map_spectrum(f64::exp)));
    }

    #[test]
    fn partial_trace_of_a_product_keeps_the_factor(seed in any::<u64>(), da in 1usize..4, db in 1usize..4) {
        let mut r = rng(seed);
        let a = random_hermitian(&mut r, da);
        let b = random_state(&mut r, db);
        let shape = SubsystemShape::new(vec![da, db]).unwrap();
        let prod = a.tensor(b.op());
        prop_assert!(partial_trace(&prod, &shape, &[0]).unwrap().max_abs_diff(&a) < 1e-12);
        let left = partial_trace(&prod, &shape, &[1]).unwrap();
        prop_assert!(left.max_abs_diff(&b.op().scale(a.trace())) < 1e-12);
    }

    #[test]
    fn lift_is_adjoint_to_partial_trace(seed in any::<u64>()) {
        let mut r = rng(seed);
        let shape = SubsystemShape::new(vec![2, 3, 2]).unwrap();
        let x = random_hermitian(&mut r, 12);
        let a = random_hermitian(&mut r, 4);
        let lhs = lift(&a, &shape, &[0, 2]).unwrap().inner(&x);
        let rhs = a.inner(&partial_trace(&x, &shape, &[0, 2]).unwrap());
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn eigenvalues_match_the_oracle(seed in any::<u64>(), d in 1usize..=8) {
        let mut r = rng(seed);
        let a = random_hermitian(&mut r, d);
        let want = oracle_eigenvalues(&a);
        let got = a.eigenvalues();
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-10 * (1.0 + w.abs()));
        }
        let (lo, hi) = a.eig_bounds();
        prop_assert!((lo - want[0]).abs() < 1e-10 * (1.0 + lo.abs()));
        prop_assert!((hi - want[d - 1]).abs() < 1e-10 * (1.0 + hi.abs()));
        let tn: f64 = want.iter().map(|l| l.abs()).sum();
        prop_assert!((a.trace_norm() - tn).abs() < 1e-10 * (1.0 + tn));
    }

    #[test]
    fn eigenvectors_diagonalize(seed in any::<u64>(), d in 1usize..=6) {
        let mut r = rng(seed);
        let a = random_hermitian(&mut r, d);
        let (w, v) = a.eigh();
        let rebuilt = HermitianOperator::diag(&w).congruence(&v).unwrap();
        prop_assert!(rebuilt.max_abs_diff(&a) < 1e-10);
    }
}
