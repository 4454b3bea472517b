mod common;

use common::{min_over_disk, pauli_data, paulis, random_hermitian, random_state, rng};
use proptest::prelude::*;
use qsdp::estimation::{
    data_aligned_certificate, extract_certificate, feasibility, feasibility_intervals, relax_l1,
    relax_linf, verify_certificate, witness, Dataset, EstimationOptions, InfeasibilityCertificate,
    MeasurementRecord, Verdict,
};
use qsdp::operator::{bloch_to_state, BlochVector, DensityOperator, HermitianOperator};
use qsdp::Error;

fn opts() -> EstimationOptions {
    EstimationOptions::default()
}

fn example_beta(m: &[f64]) -> f64 {
    let l2 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let l1: f64 = m.iter().map(|x| x.abs()).sum();
    (l2 * l2 - l2) / l1
}

fn interval_data(values: &[(f64, f64)]) -> Dataset {
    Dataset::new(
        values
            .iter()
            .zip(paulis())
            .map(|(&(m, h), op)| MeasurementRecord::with_half_width(op, m, h))
            .collect(),
    )
    .unwrap()
}

#[test]
fn pauli_data_is_infeasible_with_verified_certificate() {
    let data = pauli_data(&[0.9, 0.5]);
    let out = feasibility(&data, &opts()).unwrap();
    assert_eq!(out.verdict, Verdict::Infeasible);
    let cert = out.certificate.expect("certificate");
    let check = verify_certificate(&cert, &data);
    assert!(check.valid, "{check:?}");
    assert!(check.lambda_max <= 1e-9);
    assert!(
        (check.beta - example_beta(&[0.9, 0.5])).abs() <= 1e-6,
        "{}",
        check.beta
    );
}

#[test]
fn origin_is_feasible() {
    let data = pauli_data(&[0.0, 0.0]);
    let out = feasibility(&data, &opts()).unwrap();
    assert_eq!(out.verdict, Verdict::Feasible);
    assert!(out.certificate.is_none());
    let state = out.state.unwrap();
    assert!(data.max_violation(state.op()) <= 1e-8);
    // the feasible set is the σ_z segment; its center is I/2
    let half = DensityOperator::maximally_mixed(2);
    assert!(state.op().max_abs_diff(half.op()) <= 1e-6);
}

#[test]
fn unit_norm_data_forces_the_pure_state() {
    let data = pauli_data(&[0.6, 0.8]);
    let out = feasibility(&data, &opts()).unwrap();
    assert_eq!(out.verdict, Verdict::Feasible);
    let expected = bloch_to_state(&BlochVector::new(0.6, 0.8, 0.0));
    assert!(expected.eig_bounds().0 >= -1e-12);
    let state = out.state.unwrap();
    assert!(state.op().max_abs_diff(&expected) <= 1e-5);
}

#[test]
fn intervals_admit_an_interior_point() {
    let data = interval_data(&[(0.9, 0.2), (0.5, 0.2)]);
    let out = feasibility_intervals(&data, &opts()).unwrap();
    assert_eq!(out.verdict, Verdict::Feasible);
    let state = out.state.unwrap();
    assert!(data.max_violation(state.op()) <= 1e-8);
    // grid oracle: the rectangle meets the disk
    let gap = min_over_disk(|x, y| ((x - 0.9).abs() - 0.2).max((y - 0.5).abs() - 0.2).max(0.0));
    assert_eq!(gap, 0.0);
}

#[test]
fn zero_width_intervals_match_exact_feasibility() {
    let exact = feasibility(&pauli_data(&[0.9, 0.5]), &opts()).unwrap();
    let zero = feasibility_intervals(&interval_data(&[(0.9, 0.0), (0.5, 0.0)]), &opts()).unwrap();
    assert_eq!(exact.verdict, Verdict::Infeasible);
    assert_eq!(zero.verdict, exact.verdict);
    assert!((zero.delta_star.unwrap() - exact.delta_star.unwrap()).abs() < 1e-7);
}

#[test]
fn wide_intervals_are_always_feasible() {
    let data = interval_data(&[(0.9, 2.0), (-1.0, 2.0), (1.0, 2.0)]);
    assert_eq!(
        feasibility_intervals(&data, &opts()).unwrap().verdict,
        Verdict::Feasible
    );
}

#[test]
fn intervals_need_half_widths() {
    let mut data = interval_data(&[(0.1, 0.1)]);
    data.push(MeasurementRecord::new(HermitianOperator::sigma_y(), 0.0))
        .unwrap();
    assert!(matches!(
        feasibility_intervals(&data, &opts()),
        Err(Error::MissingHalfWidth { index: 1 })
    ));
}

#[test]
fn mixed_dimensions_are_rejected() {
    let records = vec![
        MeasurementRecord::new(HermitianOperator::sigma_x(), 0.0),
        MeasurementRecord::new(HermitianOperator::identity(3), 1.0),
    ];
    assert!(matches!(
        Dataset::new(records),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn linf_relaxation_matches_grid_oracle() {
    let data = pauli_data(&[0.9, 0.5]);
    let out = relax_linf(&data, &opts()).unwrap();
    let oracle = min_over_disk(|x, y| (x - 0.9).abs().max((y - 0.5).abs()));
    let delta = out.delta_star.unwrap();
    assert!((delta - oracle).abs() < 1e-7, "{delta} vs {oracle}");
    let state = out.state.unwrap();
    for r in data.records() {
        assert!((r.observable.expectation(state.op()) - r.value).abs() <= delta + 1e-8);
    }
}

#[test]
fn l1_relaxation_matches_grid_oracle() {
    let out = relax_l1(&pauli_data(&[0.9, 0.5]), &opts()).unwrap();
    let oracle = 0.5 * min_over_disk(|x, y| (x - 0.9).abs() + (y - 0.5).abs());
    let delta = out.delta_star.unwrap();
    assert!((delta - oracle).abs() < 1e-7, "{delta} vs {oracle}");
    assert_eq!(out.verdict, Verdict::Infeasible);
}

#[test]
fn conflicting_repeats_split_the_difference() {
    let data = Dataset::new(vec![
        MeasurementRecord::new(HermitianOperator::sigma_x(), 1.0),
        MeasurementRecord::new(HermitianOperator::sigma_x(), -1.0),
    ])
    .unwrap();
    let out = relax_linf(&data, &opts()).unwrap();
    assert!((out.delta_star.unwrap() - 1.0).abs() < 1e-7);
    assert!(
        HermitianOperator::sigma_x()
            .expectation(out.state.unwrap().op())
            .abs()
            < 1e-6
    );
}

#[test]
fn l1_clamps_a_single_overshoot() {
    let data = pauli_data(&[1.5]);
    let out = relax_l1(&data, &opts()).unwrap();
    assert!((out.delta_star.unwrap() - 0.25).abs() < 1e-7);
    let out = relax_linf(&data, &opts()).unwrap();
    assert!((out.delta_star.unwrap() - 0.5).abs() < 1e-7);
}

#[test]
fn consistent_data_has_zero_deviation() {
    let mut r = rng(7);
    let rho = random_state(&mut r, 3);
    let records = (0..4)
        .map(|_| {
            let m = random_hermitian(&mut r, 3);
            let v = m.expectation(rho.op());
            MeasurementRecord::new(m, v)
        })
        .collect();
    let data = Dataset::new(records).unwrap();
    for out in [
        relax_linf(&data, &opts()).unwrap(),
        relax_l1(&data, &opts()).unwrap(),
    ] {
        assert!(out.delta_star.unwrap() <= 1e-7);
        assert_eq!(out.verdict, Verdict::Feasible);
    }
}

#[test]
fn certificate_for_the_example_data() {
    let data = pauli_data(&[0.9, 0.5]);
    let cert = extract_certificate(&data, &opts()).unwrap();
    let check = verify_certificate(&cert, &data);
    assert!(check.valid);
    assert!(check.t_l1 <= 1.0 + 1e-9);
    // the closed-form construction: t = m/‖m‖₁, z = −‖t‖₂
    let t: [f64; 2] = [0.9 / 1.4, 0.5 / 1.4];
    let example = InfeasibilityCertificate {
        z: -(t[0] * t[0] + t[1] * t[1]).sqrt(),
        t: t.to_vec(),
    };
    let example_check = verify_certificate(&example, &data);
    assert!(example_check.valid);
    assert!((example_check.beta - example_beta(&[0.9, 0.5])).abs() < 1e-12);
}

#[test]
fn feasible_data_has_no_certificate() {
    assert!(matches!(
        extract_certificate(&pauli_data(&[0.3, -0.4]), &opts()),
        Err(Error::CertificateUnavailable { .. })
    ));
}

#[test]
fn three_pauli_corner_is_certified() {
    let data = pauli_data(&[1.0, 1.0, 1.0]);
    let cert = extract_certificate(&data, &opts()).unwrap();
    let check = verify_certificate(&cert, &data);
    assert!(check.valid && check.beta > 0.0);
}

#[test]
fn certificate_transfers_to_other_data() {
    let cert = data_aligned_certificate(&pauli_data(&[0.9, 0.5])).unwrap();
    let other = pauli_data(&[0.95, 0.6]);
    let beta = cert.z + 0.95 * cert.t[0] + 0.6 * cert.t[1];
    assert!(beta > 0.0);
    assert!(verify_certificate(&cert, &other).valid);
    assert_eq!(
        feasibility(&other, &opts()).unwrap().verdict,
        Verdict::Infeasible
    );
}

#[test]
fn zero_certificate_is_invalid() {
    let cert = InfeasibilityCertificate {
        z: 0.0,
        t: vec![0.0, 0.0],
    };
    let check = verify_certificate(&cert, &pauli_data(&[0.9, 0.5]));
    assert_eq!(check.beta, 0.0);
    assert!(!check.valid);
}

fn unit_vector(v: &[f64]) -> Option<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (n > 1e-3).then(|| v.iter().map(|x| x / n).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bloch_recovery(dir in prop::collection::vec(-1.0f64..1.0, 2..=3), radius in 0.0f64..1.6) {
        let Some(u) = unit_vector(&dir) else { return Ok(()) };
        prop_assume!((radius - 1.0).abs() > 1e-6);
        let m: Vec<f64> = u.iter().map(|x| x * radius).collect();
        let out = feasibility(&pauli_data(&m), &opts()).unwrap();
        let expected = if radius <= 1.0 { Verdict::Feasible } else { Verdict::Infeasible };
        prop_assert_eq!(out.verdict, expected);
    }

    #[test]
    fn certificates_bound_every_state(
        dir in prop::collection::vec(-1.0f64..1.0, 3),
        radius in 1.01f64..2.0,
        seed in any::<u64>(),
    ) {
        let Some(u) = unit_vector(&dir) else { return Ok(()) };
        let m: Vec<f64> = u.iter().map(|x| x * radius).collect();
        let data = pauli_data(&m);
        let cert = extract_certificate(&data, &opts()).unwrap();
        prop_assert!(verify_certificate(&cert, &data).valid);
        let w = witness(&cert, &data);
        let mut r = rng(seed);
        for _ in 0..1000 {
            let rho = random_state(&mut r, 2);
            prop_assert!(w.expectation(rho.op()) <= 1e-9);
        }
    }

    #[test]
    fn appending_a_record_never_lowers_deviation(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = 2 + (seed % 2) as usize;
        let records: Vec<MeasurementRecord> = (0..3)
            .map(|_| {
                let m = random_hermitian(&mut r, d);
                let v = 1.5 * m.operator_norm() * (2.0 * rand::Rng::gen::<f64>(&mut r) - 1.0);
                MeasurementRecord::new(m, v)
            })
            .collect();
        let base = Dataset::new(records[..2].to_vec()).unwrap();
        let more = Dataset::new(records).unwrap();
        let a = relax_linf(&base, &opts()).unwrap().delta_star.unwrap();
        let b = relax_linf(&more, &opts()).unwrap().delta_star.unwrap();
        prop_assert!(b >= a - 1e-8, "{} < {}", b, a);
    }

    #[test]
    fn feasible_data_form_a_convex_set(seed in any::<u64>(), q in 0.0f64..1.0) {
        let mut r = rng(seed);
        let ops: Vec<HermitianOperator> = (0..3).map(|_| random_hermitian(&mut r, 3)).collect();
        let values = |rho: &DensityOperator| -> Vec<f64> {
            ops.iter().map(|m| m.expectation(rho.op())).collect()
        };
        let m1 = values(&random_state(&mut r, 3));
        let m2 = values(&random_state(&mut r, 3));
        let mix: Vec<f64> = m1.iter().zip(&m2).map(|(a, b)| q * a + (1.0 - q) * b).collect();
        let data = Dataset::new(
            ops.iter().zip(&mix).map(|(m, &v)| MeasurementRecord::new(m.clone(), v)).collect(),
        )
        .unwrap();
        prop_assert_eq!(feasibility(&data, &opts()).unwrap().verdict, Verdict::Feasible);
    }
}
