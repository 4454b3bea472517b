mod common;

use common::{oracle_eigenvalues, oracle_trace_distance, random_ket, random_state, random_state_of_rank, rng};
use num_complex::Complex64;
use proptest::prelude::*;
use qsdp::estimation::EstimationOptions;
use qsdp::marginal::{
    marginal_dual_bound, marginal_feasibility, marginal_feasibility_eps, marginal_max_fidelity,
    marginal_min_trace_distance, marginal_property_range, max_avg_fidelity_pure_marginals,
    projector_bound, verify_marginal_certificate, MarginalCertificate, MarginalSpec,
    MarginalVerdict, Pair, View,
};
use qsdp::operator::{
    bloch_to_state, partial_trace, BlochVector, DensityOperator, HermitianOperator, SubsystemShape,
};
use qsdp::Error;

fn opts() -> EstimationOptions {
    EstimationOptions::default()
}

fn qubits() -> SubsystemShape {
    SubsystemShape::new(vec![2, 2, 2]).unwrap()
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn pure(ket: &[Complex64]) -> DensityOperator {
    DensityOperator::pure(ket).unwrap()
}

fn bell() -> DensityOperator {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    pure(&[c(s), c(0.0), c(0.0), c(s)])
}

fn basis(i: usize, d: usize) -> DensityOperator {
    let mut ket = vec![c(0.0); d];
    ket[i] = c(1.0);
    pure(&ket)
}

/// `Σ √p_i |i⟩|i⟩` on two qubits.
fn schmidt(p: f64) -> DensityOperator {
    pure(&[c(p.sqrt()), c(0.0), c(0.0), c((1.0 - p).sqrt())])
}

fn bell_bell() -> MarginalSpec {
    MarginalSpec::qubits(vec![(Pair::XY, bell()), (Pair::YZ, bell())]).unwrap()
}

/// Smallest eigenvalue of the first-factor reduced state of a two-qubit pure state.
fn min_schmidt(psi: &DensityOperator) -> f64 {
    let shape = SubsystemShape::new(vec![2, 2]).unwrap();
    oracle_eigenvalues(&partial_trace(psi.op(), &shape, &[0]).unwrap())[0]
}

#[test]
fn product_state_marginals_are_feasible() {
    let spec = MarginalSpec::from_global(&basis(0, 8), qubits(), &Pair::ALL).unwrap();
    let out = marginal_feasibility(&spec, &opts()).unwrap();
    assert_eq!(out.verdict, MarginalVerdict::Feasible);
    let witness = out.global_state.unwrap();
    assert!(spec.mismatch(witness.op()).unwrap() <= 1e-7);
    assert!((out.dual_bound.unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn two_bell_pairs_are_infeasible() {
    let spec = bell_bell();
    let out = marginal_feasibility(&spec, &opts()).unwrap();
    assert_eq!(out.verdict, MarginalVerdict::Infeasible);
    let cert = out.certificate.unwrap();
    let check = verify_marginal_certificate(&cert, &spec, 0.0);
    assert!(check.valid, "{check:?}");
    assert!(check.beta > 0.0 && check.lambda_max <= 1e-9);
    assert!((out.dual_bound.unwrap() - 0.75).abs() < 1e-12);
}

#[test]
fn zero_certificate_is_invalid() {
    let cert = MarginalCertificate {
        z: 0.0,
        terms: vec![(Pair::XY, HermitianOperator::zeros(4))],
    };
    assert!(!verify_marginal_certificate(&cert, &bell_bell(), 0.0).valid);
    let unspecified = MarginalCertificate {
        z: -1.0,
        terms: vec![(Pair::XZ, HermitianOperator::identity(4))],
    };
    assert!(!verify_marginal_certificate(&unspecified, &bell_bell(), 0.0).valid);
}

#[test]
fn random_global_states_round_trip() {
    let mut r = rng(21);
    for i in 0..20 {
        let global = if i % 2 == 0 {
            random_state_of_rank(&mut r, 8, 1)
        } else {
            random_state(&mut r, 8)
        };
        let spec = MarginalSpec::from_global(&global, qubits(), &Pair::ALL).unwrap();
        let out = marginal_feasibility(&spec, &opts()).unwrap();
        assert_eq!(out.verdict, MarginalVerdict::Feasible, "state {i}");
        assert!(out.mismatch.unwrap() <= 1e-7, "state {i}: {:?}", out.mismatch);
    }
}

#[test]
fn empty_spec_has_nothing_to_decide() {
    let spec = MarginalSpec::qubits(vec![]).unwrap();
    assert!(matches!(marginal_feasibility(&spec, &opts()), Err(Error::InvalidProblem(_))));
}

#[test]
fn spec_validation() {
    let wrong = MarginalSpec::qubits(vec![(Pair::XY, DensityOperator::maximally_mixed(2))]);
    assert!(matches!(wrong, Err(Error::DimensionMismatch(_))));
    let twice = MarginalSpec::qubits(vec![(Pair::XY, bell()), (Pair::XY, bell())]);
    assert!(matches!(twice, Err(Error::InvalidProblem(_))));
    let big = MarginalSpec::new(SubsystemShape::new(vec![5, 2, 2]).unwrap(), vec![]);
    assert!(matches!(big, Err(Error::InvalidProblem(_))));
}

#[test]
fn radius_two_is_always_feasible() {
    let out = marginal_feasibility_eps(&bell_bell(), 2.0, &opts()).unwrap();
    assert_eq!(out.verdict, MarginalVerdict::Feasible);
    assert!(out.mismatch.unwrap() <= 2.0 + 1e-7);
}

#[test]
fn radius_zero_matches_exact_verdicts() {
    let product = MarginalSpec::from_global(&basis(0, 8), qubits(), &Pair::ALL).unwrap();
    for spec in [product, bell_bell()] {
        let exact = marginal_feasibility(&spec, &opts()).unwrap();
        let relaxed = marginal_feasibility_eps(&spec, 0.0, &opts()).unwrap();
        assert_eq!(exact.verdict, relaxed.verdict);
    }
}

#[test]
fn bisection_threshold_for_two_bell_pairs() {
    let spec = bell_bell();
    let eps_star = marginal_feasibility(&spec, &opts()).unwrap().eps_star;
    let (mut lo, mut hi) = (0.0, 2.0);
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        match marginal_feasibility_eps(&spec, mid, &opts()).unwrap().verdict {
            MarginalVerdict::Feasible => hi = mid,
            MarginalVerdict::Infeasible => lo = mid,
        }
    }
    // the verdict accepts a witness within MATCH_TOL of the radius
    assert!((hi - eps_star).abs() < 2e-7, "bisection {hi} vs direct {eps_star}");
    // regression value of the threshold
    assert!((eps_star - 0.5).abs() < 1e-6, "{eps_star}");
    let below = marginal_feasibility_eps(&spec, eps_star - 1e-4, &opts()).unwrap();
    let check = verify_marginal_certificate(below.certificate.as_ref().unwrap(), &spec, eps_star - 1e-4);
    assert!(check.valid);
}

#[test]
fn average_fidelity_examples() {
    let zero = basis(0, 4);
    let (v, state) = max_avg_fidelity_pure_marginals(&zero, &zero, &qubits(), &opts()).unwrap();
    assert!((v - 1.0).abs() < 1e-7);
    assert!(basis(0, 8).op().inner(state.op()) > 1.0 - 1e-6);

    let (v, _) = max_avg_fidelity_pure_marginals(&bell(), &bell(), &qubits(), &opts()).unwrap();
    let mu = marginal_dual_bound(&bell(), &bell(), &qubits()).unwrap();
    assert!(v <= 0.75 + 1e-6 && (v - mu).abs() < 1e-6, "{v} vs {mu}");

    // ρ_Y = |0⟩⟨0| from |00⟩ but |1⟩⟨1| from |10⟩
    let (v, _) = max_avg_fidelity_pure_marginals(&zero, &basis(2, 4), &qubits(), &opts()).unwrap();
    let mu = marginal_dual_bound(&zero, &basis(2, 4), &qubits()).unwrap();
    assert!(v < 1.0 - 1e-4 && (v - mu).abs() < 1e-6, "{v} vs {mu}");
}

#[test]
fn average_fidelity_rejects_mixed_inputs() {
    let mixed = DensityOperator::maximally_mixed(4);
    assert!(matches!(
        max_avg_fidelity_pure_marginals(&mixed, &bell(), &qubits(), &opts()),
        Err(Error::TargetNotPure { .. })
    ));
    assert!(matches!(
        marginal_dual_bound(&bell(), &mixed, &qubits()),
        Err(Error::TargetNotPure { .. })
    ));
}

#[test]
fn dual_bound_examples() {
    assert!((marginal_dual_bound(&bell(), &bell(), &qubits()).unwrap() - 0.75).abs() < 1e-12);
    let zero = basis(0, 4);
    assert!((marginal_dual_bound(&zero, &zero, &qubits()).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn dual_bound_respects_schmidt_formula() {
    let mut r = rng(22);
    for _ in 0..50 {
        let (p, q) = (rand::Rng::gen::<f64>(&mut r), rand::Rng::gen::<f64>(&mut r));
        let (a, b) = (schmidt(p), schmidt(q));
        let formula = 0.5 * (1.0 + (p * q).sqrt().max(((1.0 - p) * (1.0 - q)).sqrt()));
        let mu = marginal_dual_bound(&a, &b, &qubits()).unwrap();
        assert!(mu <= formula + 1e-8, "{mu} > {formula}");
        let proj = projector_bound(&a, &b, &qubits()).unwrap();
        assert!((proj - formula).abs() < 1e-9, "{proj} vs {formula}");
    }
}

#[test]
fn doubly_entangled_pairs_cannot_both_be_matched() {
    let mut r = rng(23);
    let mut tested = 0;
    while tested < 15 {
        let a = pure(&random_ket(&mut r, 4));
        let b = pure(&random_ket(&mut r, 4));
        if min_schmidt(&a) < 0.1 || min_schmidt(&b) < 0.1 {
            continue;
        }
        tested += 1;
        let (v, _) = max_avg_fidelity_pure_marginals(&a, &b, &qubits(), &opts()).unwrap();
        let mu = marginal_dual_bound(&a, &b, &qubits()).unwrap();
        assert!(v < 1.0 - 1e-4, "{v}");
        assert!(v <= mu + 1e-6 && mu - v <= 1e-6, "{v} vs {mu}");
    }
}

#[test]
fn distance_to_a_valid_extension_is_zero() {
    let global = random_state(&mut rng(24), 8);
    let spec = MarginalSpec::from_global(&global, qubits(), &[Pair::XY, Pair::YZ]).unwrap();
    let res = marginal_min_trace_distance(&spec, &global, View::Global, &opts()).unwrap();
    assert!(res.value.abs() < 1e-6, "{}", res.value);
    assert!(spec.mismatch(res.state.op()).unwrap() < 1e-6);
}

#[test]
fn empty_spec_distance_is_zero() {
    let spec = MarginalSpec::qubits(vec![]).unwrap();
    let target = random_state(&mut rng(25), 4);
    let res = marginal_min_trace_distance(&spec, &target, View::Pair(Pair::XZ), &opts()).unwrap();
    assert!(res.value.abs() < 1e-6);
}

/// `min ½‖I/2 ⊗ τ − Φ⁺‖₁` over qubit states `τ`, by a zooming grid over
/// the Bloch ball.
fn bell_tension_oracle() -> f64 {
    let f = |x: f64, y: f64, z: f64| {
        let tau = bloch_to_state(&BlochVector::new(x, y, z));
        let sigma = DensityOperator::maximally_mixed(2).op().tensor(&tau);
        oracle_trace_distance(&sigma, bell().op())
    };
    let (mut center, mut half, mut best) = ([0.0; 3], 1.0, f64::INFINITY);
    let n = 16;
    for _ in 0..12 {
        let mut arg = center;
        for i in 0..=n {
            for j in 0..=n {
                for k in 0..=n {
                    let mut v = [i, j, k].map(|t| -half + 2.0 * half * t as f64 / n as f64);
                    for (a, c) in v.iter_mut().zip(center) {
                        *a += c;
                    }
                    let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                    if r > 1.0 {
                        v = v.map(|a| a / r);
                    }
                    let val = f(v[0], v[1], v[2]);
                    if val < best {
                        best = val;
                        arg = v;
                    }
                }
            }
        }
        center = arg;
        half *= 0.3;
    }
    best
}

#[test]
fn one_bell_pair_keeps_the_other_pair_away() {
    let spec = MarginalSpec::qubits(vec![(Pair::XY, bell())]).unwrap();
    let t = marginal_min_trace_distance(&spec, &bell(), View::Pair(Pair::YZ), &opts()).unwrap();
    let oracle = bell_tension_oracle();
    assert!(t.value > 0.1);
    assert!((t.value - oracle).abs() < 1e-6, "{} vs {oracle}", t.value);

    let f = marginal_max_fidelity(&spec, &bell(), View::Pair(Pair::YZ), &opts()).unwrap();
    assert!(f.value < 1.0 - 1e-4);
    assert!(1.0 - f.value <= t.value + 1e-5);
    let yz = partial_trace(f.state.op(), &qubits(), &[1, 2]).unwrap();
    let attained = common::oracle_sqrt_fidelity(&DensityOperator::nearest(&yz).unwrap(), &bell());
    assert!((attained - f.value).abs() < 1e-6);
}

#[test]
fn fidelity_examples() {
    let global = random_state(&mut rng(26), 8);
    let spec = MarginalSpec::from_global(&global, qubits(), &[Pair::XY, Pair::XZ]).unwrap();
    let f = marginal_max_fidelity(&spec, &global, View::Global, &opts()).unwrap();
    assert!((f.value - 1.0).abs() < 1e-6, "{}", f.value);

    let mixed = DensityOperator::maximally_mixed(8);
    let f = marginal_max_fidelity(&spec, &mixed, View::Global, &opts()).unwrap();
    assert!(f.value >= 1.0 / 8f64.sqrt() - 1e-8);
}

#[test]
fn property_range_examples() {
    let global = random_state(&mut rng(27), 8);
    let spec = MarginalSpec::from_global(&global, qubits(), &Pair::ALL).unwrap();
    let (lo, hi) = marginal_property_range(&spec, &HermitianOperator::identity(8), &opts()).unwrap();
    assert!((lo.value - 1.0).abs() < 1e-7 && (hi.value - 1.0).abs() < 1e-7);

    // product of single-qubit states: local σ_z terms are fixed by the marginals
    let locals = [
        bloch_to_state(&BlochVector::new(0.3, 0.1, 0.5)),
        bloch_to_state(&BlochVector::new(-0.2, 0.4, -0.6)),
        bloch_to_state(&BlochVector::new(0.0, 0.0, 0.9)),
    ];
    let product = DensityOperator::new(locals[0].tensor(&locals[1]).tensor(&locals[2])).unwrap();
    let spec = MarginalSpec::from_global(&product, qubits(), &Pair::ALL).unwrap();
    let z = HermitianOperator::sigma_z();
    let i2 = HermitianOperator::identity(2);
    let h = z
        .tensor(&i2)
        .tensor(&i2)
        .add(&i2.tensor(&z).tensor(&i2))
        .unwrap()
        .add(&i2.tensor(&i2).tensor(&z))
        .unwrap();
    let (lo, hi) = marginal_property_range(&spec, &h, &opts()).unwrap();
    let expected = 0.5 - 0.6 + 0.9;
    assert!((lo.value - expected).abs() < 1e-6 && (hi.value - expected).abs() < 1e-6);

    let spectrum = HermitianOperator::diag(&[0.5, -1.0, 2.0, 0.0, 0.3, 1.1, -0.2, 0.7]);
    let empty = MarginalSpec::qubits(vec![]).unwrap();
    let (lo, hi) = marginal_property_range(&empty, &spectrum, &opts()).unwrap();
    assert!((lo.value + 1.0).abs() < 1e-6 && (hi.value - 2.0).abs() < 1e-6);
}

#[test]
fn infeasible_spec_carries_certificate() {
    let spec = bell_bell();
    match marginal_property_range(&spec, &HermitianOperator::identity(8), &opts()) {
        Err(Error::InfeasibleSpec(cert)) => {
            assert!(verify_marginal_certificate(&cert, &spec, 0.0).valid)
        }
        other => panic!("expected certificate, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn feasibility_is_monotone_in_radius(a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let (small, large) = (a.min(b), a.max(b));
        let spec = bell_bell();
        let first = marginal_feasibility_eps(&spec, small, &opts()).unwrap();
        let second = marginal_feasibility_eps(&spec, large, &opts()).unwrap();
        if first.verdict == MarginalVerdict::Feasible {
            prop_assert_eq!(second.verdict, MarginalVerdict::Feasible);
        }
    }
}
