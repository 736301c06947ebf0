//! Autonomous vector fields `ẋ = f(x)`.

use crate::linalg::Matrix;
use crate::scalar::{Real, Scalar};

/// A vector field that can be evaluated over any [`Scalar`]: floats for
/// simulation and training, intervals for verification, duals for
/// derivatives.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval<T: Scalar>(&self, x: &[T]) -> Vec<T>;

    fn eval_real<F: Real>(&self, x: &[F]) -> Vec<F> {
        self.eval::<F>(x)
    }
}

impl<V: VectorField + ?Sized> VectorField for &V {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        (**self).eval(x)
    }
}

/// `ẋ = A x`.
#[derive(Clone, Debug)]
pub struct LinearField<F> {
    pub a: Matrix<F>,
}

impl<F: Real> LinearField<F> {
    pub fn new(a: Matrix<F>) -> Self {
        assert!(a.is_square(), "linear field needs a square matrix");
        Self { a }
    }

    /// `ẋ = k x`.
    pub fn scaled_identity(m: usize, k: F) -> Self {
        Self::new(Matrix::identity(m).scaled(k))
    }
}

impl<F: Real> VectorField for LinearField<F> {
    fn dim(&self) -> usize {
        self.a.rows()
    }

    fn eval<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let n = self.a.rows();
        (0..n)
            .map(|i| {
                let mut acc = T::zero();
                for (j, xj) in x.iter().enumerate() {
                    let a = self.a[(i, j)];
                    if a != F::zero() {
                        acc = acc + xj.clone().scale(a.to_f64());
                    }
                }
                acc
            })
            .collect()
    }
}
