//! Linearization at the origin and the small-signal stability verdict.

use crate::field::VectorField;
use crate::linalg::{eigenvalues, LinalgError, Matrix};
use crate::scalar::Real;
use num_complex::Complex;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinearError {
    #[error("eigenvalue computation failed: {0}")]
    EigenSolveFailure(LinalgError),
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
}

/// System matrix and its spectrum.
#[derive(Debug, Clone)]
pub struct LinearModel<F> {
    pub a: Matrix<F>,
    pub eigenvalues: Vec<Complex<F>>,
}

/// Default relative step of the central-difference Jacobian.
pub const DEFAULT_JACOBIAN_STEP: f64 = 1e-6;

/// Central-difference Jacobian of `f` at `x`. The step along coordinate `j`
/// is `h·(1 + |x_j|)`.
pub fn jacobian_at<F: Real, V: VectorField>(
    f: &V,
    x: &[F],
    h: F,
) -> Result<Matrix<F>, LinearError> {
    if !(h > F::zero()) {
        return Err(LinearError::InvalidStep(h.to_f64()));
    }
    let m = f.dim();
    assert_eq!(x.len(), m, "state dimension");
    let mut a = Matrix::zeros(m, m);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for j in 0..m {
        let hj = h * (F::one() + x[j].abs());
        xp[j] = x[j] + hj;
        xm[j] = x[j] - hj;
        let fp = f.eval_real(&xp);
        let fm = f.eval_real(&xm);
        for i in 0..m {
            a[(i, j)] = (fp[i] - fm[i]) / (hj + hj);
        }
        xp[j] = x[j];
        xm[j] = x[j];
    }
    Ok(a)
}

/// Jacobian of `f` at the origin.
pub fn jacobian<F: Real, V: VectorField>(f: &V, h: F) -> Result<Matrix<F>, LinearError> {
    jacobian_at(f, &vec![F::zero(); f.dim()], h)
}

/// `true` iff every eigenvalue of `a` has real part below `-margin`.
pub fn is_asymptotically_stable<F: Real>(
    a: &Matrix<F>,
    margin: F,
) -> Result<(bool, Vec<Complex<F>>), LinearError> {
    let eig = eigenvalues(a).map_err(LinearError::EigenSolveFailure)?;
    let stable = eig.iter().all(|l| l.re < -margin);
    Ok((stable, eig))
}

/// Largest real part of a spectrum.
pub fn spectral_abscissa<F: Real>(eig: &[Complex<F>]) -> F {
    eig.iter()
        .map(|l| l.re)
        .fold(F::c(f64::NEG_INFINITY), F::max)
}

pub fn linearize<F: Real, V: VectorField>(f: &V, h: F) -> Result<LinearModel<F>, LinearError> {
    let a = jacobian(f, h)?;
    let eigenvalues = eigenvalues(&a).map_err(LinearError::EigenSolveFailure)?;
    Ok(LinearModel { a, eigenvalues })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::LinearField;
    use crate::grid::{repair_setpoints, DroopInterface, NetworkModel, NetworkedSystem, Setpoint};

    #[test]
    fn relaxation_jacobian_is_minus_identity() {
        let f = LinearField::scaled_identity(3, -1.0);
        let a = jacobian(&f, 1e-6).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { -1.0 } else { 0.0 };
                assert!((a[(i, j)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn frequency_droop_jacobian() {
        let net = NetworkModel::from_admittance(&[vec![Complex::new(0.0, 0.0)]]).unwrap();
        let ifaces = vec![DroopInterface::FrequencyDroop { m_f: 2.0, d_f: 3.0 }];
        let sps = repair_setpoints(
            &ifaces,
            &[Setpoint {
                delta: 0.0,
                voltage: 1.0,
                p: 0.0,
                q: 0.0,
            }],
            &[],
            &net,
        )
        .unwrap();
        let sys = NetworkedSystem::assemble(ifaces, sps, vec![], net, 1e-8).unwrap();
        let a = jacobian(&sys, 1e-6).unwrap();
        let want = [[0.0, 1.0], [0.0, -1.5]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[(i, j)] - want[i][j]).abs() < 1e-9, "{a:?}");
            }
        }
    }

    #[test]
    fn stability_verdicts() {
        let diag = Matrix::from_diag(&[-1.0, -2.0]);
        assert!(is_asymptotically_stable(&diag, 0.0).unwrap().0);

        let rot = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        assert!(!is_asymptotically_stable(&rot, 0.0).unwrap().0);

        let comp = Matrix::from_rows(&[vec![0.0, 1.0], vec![-2.0, -3.0]]);
        let (ok, eig) = is_asymptotically_stable(&comp, 0.0).unwrap();
        assert!(ok);
        assert!((eig[0].re + 2.0).abs() < 1e-12 && (eig[1].re + 1.0).abs() < 1e-12);
        assert!(eig.iter().all(|l| l.im.abs() < 1e-12));
    }

    #[test]
    fn margin_tightens_the_verdict() {
        let diag = Matrix::from_diag(&[-0.5, -2.0]);
        assert!(is_asymptotically_stable(&diag, 0.4).unwrap().0);
        assert!(!is_asymptotically_stable(&diag, 0.5).unwrap().0);
    }

    #[test]
    fn rejects_nonpositive_step() {
        let f = LinearField::scaled_identity(1, -1.0);
        assert!(matches!(
            jacobian(&f, 0.0),
            Err(LinearError::InvalidStep(_))
        ));
    }
}
