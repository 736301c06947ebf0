//! Fixed-step RK4 integration of `ẋ = f(x)`.

use serde::{Deserialize, Serialize};

use crate::field::VectorField;
use crate::scalar::{norm2, Real};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("state became non-finite at t = {time}")]
    NonFiniteState { time: f64 },
    #[error("need dt > 0 and T >= dt (dt = {dt}, T = {t_end})")]
    InvalidStep { dt: f64, t_end: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<F> {
    pub times: Vec<F>,
    pub states: Vec<Vec<F>>,
    pub converged: bool,
    pub final_norm: F,
}

impl<F: Real> Trajectory<F> {
    pub fn last(&self) -> &[F] {
        self.states
            .last()
            .expect("trajectory has at least the initial state")
    }

    /// CSV with a `t` column followed by one column per state.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("t");
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            out.push_str(&t.to_f64().to_string());
            for v in x {
                out.push(',');
                out.push_str(&v.to_f64().to_string());
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCriterion {
    pub eps: f64,
    /// Trailing fraction of the horizon that must stay within `eps`.
    pub window: f64,
}

impl Default for ConvergenceCriterion {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            window: 0.1,
        }
    }
}

fn rk4_step<F: Real, V: VectorField>(f: &V, x: &[F], dt: F) -> Vec<F> {
    let half = F::c(0.5) * dt;
    let shift =
        |x: &[F], k: &[F], h: F| -> Vec<F> { x.iter().zip(k).map(|(a, b)| *a + h * *b).collect() };
    let k1 = f.eval_real(x);
    let k2 = f.eval_real(&shift(x, &k1, half));
    let k3 = f.eval_real(&shift(x, &k2, half));
    let k4 = f.eval_real(&shift(x, &k3, dt));
    let sixth = dt / F::c(6.0);
    (0..x.len())
        .map(|i| x[i] + sixth * (k1[i] + F::c(2.0) * k2[i] + F::c(2.0) * k3[i] + k4[i]))
        .collect()
}

/// Integrates from `x0` over `[0, t_end]` with step `dt`, recording every
/// step. The last step is shortened to land exactly on `t_end`.
pub fn integrate<F: Real, V: VectorField>(
    f: &V,
    x0: &[F],
    t_end: F,
    dt: F,
    crit: &ConvergenceCriterion,
) -> Result<Trajectory<F>, SimError> {
    if !(dt > F::zero() && t_end >= dt) {
        return Err(SimError::InvalidStep {
            dt: dt.to_f64(),
            t_end: t_end.to_f64(),
        });
    }
    let steps = (t_end / dt).to_f64().round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    times.push(F::zero());
    states.push(x.clone());
    for k in 1..=steps {
        let t_prev = dt * F::c((k - 1) as f64);
        let t = if k == steps {
            t_end
        } else {
            dt * F::c(k as f64)
        };
        x = rk4_step(f, &x, t - t_prev);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(SimError::NonFiniteState { time: t.to_f64() });
        }
        times.push(t);
        states.push(x.clone());
    }
    let mut traj = Trajectory {
        final_norm: norm2(&x),
        times,
        states,
        converged: false,
    };
    traj.converged = converged(&traj, crit.eps, crit.window);
    Ok(traj)
}

/// `‖x(t)‖ ≤ eps` for every sample with `t ≥ (1 − window)·T`.
pub fn converged<F: Real>(traj: &Trajectory<F>, eps: f64, window: f64) -> bool {
    let t_end = match traj.times.last() {
        Some(t) => t.to_f64(),
        None => return false,
    };
    let start = (1.0 - window) * t_end;
    traj.times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| t.to_f64() >= start)
        .all(|(_, x)| norm2(x).to_f64() <= eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::LinearField;
    use crate::linalg::Matrix;

    #[test]
    fn relaxation_matches_exponential() {
        let f = LinearField::scaled_identity(1, -1.0);
        let tr = integrate(&f, &[1.0], 1.0, 1e-3, &ConvergenceCriterion::default()).unwrap();
        assert!((tr.last()[0] - (-1.0f64).exp()).abs() < 1e-6);
        assert_eq!(tr.times.len(), 1001);
        assert!(tr.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn equilibrium_stays_put() {
        let f = LinearField::scaled_identity(3, -2.0);
        let tr = integrate(&f, &[0.0; 3], 2.0, 0.01, &ConvergenceCriterion::default()).unwrap();
        assert!(tr.states.iter().all(|x| x.iter().all(|v| *v == 0.0)));
        assert!(tr.converged);
    }

    #[test]
    fn convergence_flags() {
        let f = LinearField::scaled_identity(1, -1.0);
        let tr = integrate(&f, &[1.0], 20.0, 0.01, &ConvergenceCriterion::default()).unwrap();
        assert!(tr.converged);
        let still = LinearField::scaled_identity(1, 0.0);
        let tr = integrate(&still, &[0.5], 20.0, 0.01, &ConvergenceCriterion::default()).unwrap();
        assert!(!tr.converged);
        let osc = LinearField::new(Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]));
        let tr = integrate(
            &osc,
            &[1.0, 0.0],
            20.0,
            0.01,
            &ConvergenceCriterion::default(),
        )
        .unwrap();
        assert!(!tr.converged);
    }

    #[test]
    fn blow_up_is_reported() {
        let f = LinearField::scaled_identity(1, 800.0);
        let r = integrate(&f, &[1.0], 10.0, 0.1, &ConvergenceCriterion::default());
        assert!(matches!(r, Err(SimError::NonFiniteState { .. })));
    }

    #[test]
    fn rejects_bad_step() {
        let f = LinearField::scaled_identity(1, -1.0);
        assert!(integrate(&f, &[1.0], 1.0, 0.0, &ConvergenceCriterion::default()).is_err());
        assert!(integrate(&f, &[1.0], 0.01, 0.1, &ConvergenceCriterion::default()).is_err());
    }

    #[test]
    fn runs_in_single_precision() {
        let f = LinearField::<f32>::scaled_identity(1, -1.0);
        let tr = integrate(&f, &[1.0f32], 1.0, 1e-2, &ConvergenceCriterion::default()).unwrap();
        assert!((tr.last()[0] - (-1.0f32).exp()).abs() < 1e-5);
    }
}
