use crate::operator::HermitianOperator;

use super::Dataset;

const WITNESS_TOL: f64 = 1e-9;
const NORM_TOL: f64 = 1e-9;

/// Dual pair `(z, t)` with `‖t‖₁ ≤ 1` and `W = zI + Σ t_x M_x ⪯ 0`.
///
/// For every state `ρ`, `z + Σ t_x tr(M_x ρ) = tr(W ρ) ≤ 0`, so any data
/// with `β = z + Σ t_x m_x − Σ |t_x| Δ_x > 0` cannot come from a state.
#[derive(Clone, Debug, PartialEq)]
pub struct InfeasibilityCertificate {
    pub z: f64,
    pub t: Vec<f64>,
}

/// Result of checking a certificate against data. Pure arithmetic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertificateCheck {
    pub beta: f64,
    /// Largest eigenvalue of `W`.
    pub lambda_max: f64,
    pub t_l1: f64,
    pub valid: bool,
}

/// `W = zI + Σ t_x M_x`.
pub fn witness(cert: &InfeasibilityCertificate, data: &Dataset) -> HermitianOperator {
    let d = data.dim();
    let mut w = HermitianOperator::identity(d).scale(cert.z);
    for (tx, r) in cert.t.iter().zip(data.records()) {
        w = w
            .add(&r.observable.scale(*tx))
            .expect("dataset dimensions agree");
    }
    w
}

/// Evaluates `β`, `λ_max(W)` and `‖t‖₁`. Never runs the solver.
///
/// Valid iff `β > 0`, `λ_max(W) ≤ 1e-9` and `‖t‖₁ ≤ 1 + 1e-9`. A length
/// mismatch between `t` and the data is reported as invalid.
pub fn verify_certificate(cert: &InfeasibilityCertificate, data: &Dataset) -> CertificateCheck {
    let t_l1: f64 = cert.t.iter().map(|x| x.abs()).sum();
    if cert.t.len() != data.len() || !cert.z.is_finite() || !t_l1.is_finite() {
        return CertificateCheck {
            beta: f64::NAN,
            lambda_max: f64::NAN,
            t_l1,
            valid: false,
        };
    }
    let beta = cert.z
        + cert
            .t
            .iter()
            .zip(data.records())
            .map(|(tx, r)| tx * r.value - tx.abs() * r.half_width.unwrap_or(0.0))
            .sum::<f64>();
    let (_, lambda_max) = witness(cert, data).eig_bounds();
    CertificateCheck {
        beta,
        lambda_max,
        t_l1,
        valid: beta > 0.0 && lambda_max <= WITNESS_TOL && t_l1 <= 1.0 + NORM_TOL,
    }
}

/// Best offset for a direction: `z = −λ_max(Σ t_x M_x)`, which puts the
/// top eigenvalue of `W` at zero.
fn with_optimal_offset(t: Vec<f64>, data: &Dataset) -> InfeasibilityCertificate {
    let probe = InfeasibilityCertificate { z: 0.0, t };
    let (_, top) = witness(&probe, data).eig_bounds();
    InfeasibilityCertificate {
        z: -top,
        t: probe.t,
    }
}

/// Turns raw multiplier differences `t_x = u_x − v_x` into a certificate:
/// rescale onto the ℓ1 ball and recompute `z` from the spectrum.
pub fn harvest_dual_certificate(t_raw: &[f64], data: &Dataset) -> InfeasibilityCertificate {
    let l1: f64 = t_raw.iter().map(|x| x.abs()).sum();
    let scale = l1.max(1.0);
    with_optimal_offset(t_raw.iter().map(|x| x / scale).collect(), data)
}

/// The closed-form candidate `t = m/‖m‖₁`, `z = −λ_max(t·M)`. For Pauli
/// data this gives `β = (‖m‖₂² − ‖m‖₂)/‖m‖₁`. `None` when `m = 0`.
pub fn data_aligned_certificate(data: &Dataset) -> Option<InfeasibilityCertificate> {
    let m = data.values();
    let l1: f64 = m.iter().map(|x| x.abs()).sum();
    if l1 == 0.0 || data.is_empty() {
        return None;
    }
    Some(with_optimal_offset(
        m.iter().map(|x| x / l1).collect(),
        data,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::MeasurementRecord;

    fn paulis(mx: f64, my: f64) -> Dataset {
        Dataset::new(vec![
            MeasurementRecord::new(HermitianOperator::sigma_x(), mx),
            MeasurementRecord::new(HermitianOperator::sigma_y(), my),
        ])
        .unwrap()
    }

    #[test]
    fn zero_certificate_is_invalid() {
        let cert = InfeasibilityCertificate {
            z: 0.0,
            t: vec![0.0, 0.0],
        };
        let check = verify_certificate(&cert, &paulis(0.9, 0.5));
        assert_eq!(check.beta, 0.0);
        assert!(!check.valid);
    }

    #[test]
    fn aligned_certificate_value() {
        let data = paulis(0.9, 0.5);
        let cert = data_aligned_certificate(&data).unwrap();
        let norm = (0.81f64 + 0.25).sqrt();
        let expected = (1.06 - norm) / 1.4;
        let check = verify_certificate(&cert, &data);
        assert!(check.valid);
        assert!((check.beta - expected).abs() < 1e-14);
        assert!((cert.z + norm / 1.4).abs() < 1e-14);
    }

    #[test]
    fn length_mismatch_is_invalid() {
        let cert = InfeasibilityCertificate {
            z: -1.0,
            t: vec![1.0],
        };
        assert!(!verify_certificate(&cert, &paulis(0.9, 0.5)).valid);
    }
}
