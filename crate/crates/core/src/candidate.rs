//! Lyapunov function candidates that the falsifier and region estimator can
//! evaluate over any scalar domain.

use serde::{Deserialize, Serialize};

use crate::field::VectorField;
use crate::linalg::{symmetric_eigenvalues, Matrix};
use crate::net::{NetParams, ShiftedNet};
use crate::scalar::{dot, Real, Scalar};

pub trait Candidate {
    fn dim(&self) -> usize;
    fn value<T: Scalar>(&self, x: &[T]) -> T;
    fn gradient<T: Scalar>(&self, x: &[T]) -> Vec<T>;

    /// Lie derivative `∇V(x) · f(x)`.
    fn lie<T: Scalar, V: VectorField>(&self, x: &[T], f: &V) -> T {
        dot(&self.gradient(x), &f.eval(x))
    }

    /// Global bound on `‖∇V‖₂` over the ball of the given radius, if known.
    fn gradient_bound(&self, _radius: f64) -> Option<f64> {
        None
    }
}

impl<C: Candidate + ?Sized> Candidate for &C {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value<T: Scalar>(&self, x: &[T]) -> T {
        (**self).value(x)
    }
    fn gradient<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        (**self).gradient(x)
    }
    fn gradient_bound(&self, radius: f64) -> Option<f64> {
        (**self).gradient_bound(radius)
    }
}

impl<F: Real> Candidate for NetParams<F> {
    fn dim(&self) -> usize {
        self.m()
    }
    fn value<T: Scalar>(&self, x: &[T]) -> T {
        NetParams::value(self, x)
    }
    fn gradient<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        NetParams::gradient(self, x)
    }
    fn gradient_bound(&self, _radius: f64) -> Option<f64> {
        Some(self.gradient_norm_bound())
    }
}

impl<F: Real> Candidate for ShiftedNet<F> {
    fn dim(&self) -> usize {
        self.net.m()
    }
    fn value<T: Scalar>(&self, x: &[T]) -> T {
        ShiftedNet::value(self, x)
    }
    fn gradient<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        self.net.gradient(x)
    }
    fn gradient_bound(&self, _radius: f64) -> Option<f64> {
        Some(self.net.gradient_norm_bound())
    }
}

/// `V(x) = xᵀ P x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForm<F> {
    pub p: Matrix<F>,
}

impl<F: Real> QuadraticForm<F> {
    pub fn new(p: Matrix<F>) -> Self {
        assert!(p.is_square(), "quadratic form needs a square matrix");
        Self { p }
    }

    pub fn identity(m: usize) -> Self {
        Self::new(Matrix::identity(m))
    }

    pub fn diag(d: &[F]) -> Self {
        Self::new(Matrix::from_diag(d))
    }
}

impl<F: Real> Candidate for QuadraticForm<F> {
    fn dim(&self) -> usize {
        self.p.rows()
    }

    fn value<T: Scalar>(&self, x: &[T]) -> T {
        let m = self.dim();
        let mut acc = T::zero();
        for i in 0..m {
            let pii = self.p[(i, i)].to_f64();
            if pii != 0.0 {
                acc = acc + x[i].clone().sqr().scale(pii);
            }
            for j in (i + 1)..m {
                let s = (self.p[(i, j)] + self.p[(j, i)]).to_f64();
                if s != 0.0 {
                    acc = acc + (x[i].clone() * x[j].clone()).scale(s);
                }
            }
        }
        acc
    }

    fn gradient<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let m = self.dim();
        (0..m)
            .map(|i| {
                (0..m).fold(T::zero(), |acc, j| {
                    let s = (self.p[(i, j)] + self.p[(j, i)]).to_f64();
                    if s == 0.0 {
                        acc
                    } else {
                        acc + x[j].clone().scale(s)
                    }
                })
            })
            .collect()
    }

    fn gradient_bound(&self, radius: f64) -> Option<f64> {
        let sym = Matrix::from_fn(self.dim(), self.dim(), |i, j| {
            (self.p[(i, j)] + self.p[(j, i)]).to_f64()
        });
        let eig = symmetric_eigenvalues(&sym).ok()?;
        let rho = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Some(rho * radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::LinearField;
    use crate::Interval;

    #[test]
    fn quadratic_value_gradient_and_lie() {
        let q = QuadraticForm::new(Matrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 3.0]]));
        let x = [0.5, -1.0];
        // 2·0.25 + 1·(0.5·−1) + 3·1
        assert!((q.value(&x) - 3.0).abs() < 1e-15);
        let g = q.gradient(&x);
        assert!((g[0] - (4.0 * 0.5 - 1.0)).abs() < 1e-15);
        assert!((g[1] - (0.5 - 6.0)).abs() < 1e-15);
        let f = LinearField::scaled_identity(2, -1.0);
        assert!((q.lie(&x, &f) + 2.0 * 3.0).abs() < 1e-14);
    }

    #[test]
    fn quadratic_interval_value_is_nonnegative_for_identity() {
        let q = QuadraticForm::<f64>::identity(2);
        let v = q.value(&[Interval::new(-0.1, 0.2), Interval::new(-0.3, 0.1)]);
        assert_eq!(v.lo(), 0.0);
    }

    #[test]
    fn gradient_bound_of_identity() {
        let q = QuadraticForm::<f64>::identity(3);
        assert!((q.gradient_bound(1.5).unwrap() - 3.0).abs() < 1e-12);
    }
}
