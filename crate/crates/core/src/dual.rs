//! Forward-mode dual numbers with a runtime-sized tangent.
//!
//! `Dual<Interval>` evaluated on a box yields an enclosure of the gradient over
//! that box, which is what the mean-value enclosures in the falsifier use.
//! A constant carries an empty tangent and is treated as having zero
//! derivative in every direction.

use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};
use smallvec::SmallVec;

use crate::scalar::Scalar;

pub type Tangent<T> = SmallVec<[T; 4]>;

#[derive(Clone, Debug)]
pub struct Dual<T> {
    pub re: T,
    pub eps: Tangent<T>,
}

impl<T: Scalar> Dual<T> {
    pub fn constant(re: T) -> Self {
        Self {
            re,
            eps: SmallVec::new(),
        }
    }

    /// The `i`-th of `n` independent variables.
    pub fn variable(re: T, i: usize, n: usize) -> Self {
        let mut eps: Tangent<T> = SmallVec::from_elem(T::zero(), n);
        eps[i] = T::one();
        Self { re, eps }
    }

    /// Seeds every coordinate of `x` as an independent variable.
    pub fn seed(x: &[T]) -> Vec<Self> {
        let n = x.len();
        x.iter()
            .enumerate()
            .map(|(i, v)| Self::variable(v.clone(), i, n))
            .collect()
    }

    /// Gradient with respect to `n` variables (zeros for constants).
    pub fn gradient(&self, n: usize) -> Vec<T> {
        if self.eps.is_empty() {
            vec![T::zero(); n]
        } else {
            self.eps.to_vec()
        }
    }

    fn map_eps(eps: &Tangent<T>, k: &T) -> Tangent<T> {
        eps.iter().map(|e| e.clone() * k.clone()).collect()
    }

    /// Chain rule for a unary function with value `v` and derivative `d`.
    fn chain(self, v: T, d: T) -> Self {
        let eps = Self::map_eps(&self.eps, &d);
        Self { re: v, eps }
    }
}

fn zip_with<T: Scalar>(
    a: Tangent<T>,
    b: Tangent<T>,
    f: impl Fn(T, T) -> T,
    neg_b: bool,
) -> Tangent<T> {
    match (a.is_empty(), b.is_empty()) {
        (_, true) => a,
        (true, false) => {
            if neg_b {
                b.into_iter().map(|v| -v).collect()
            } else {
                b
            }
        }
        (false, false) => a.into_iter().zip(b).map(|(x, y)| f(x, y)).collect(),
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            re: self.re + rhs.re,
            eps: zip_with(self.eps, rhs.eps, |x, y| x + y, false),
        }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self {
            re: self.re - rhs.re,
            eps: zip_with(self.eps, rhs.eps, |x, y| x - y, true),
        }
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            re: -self.re,
            eps: self.eps.into_iter().map(|v| -v).collect(),
        }
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let eps = match (self.eps.is_empty(), rhs.eps.is_empty()) {
            (true, true) => SmallVec::new(),
            (false, true) => Self::map_eps(&self.eps, &rhs.re),
            (true, false) => Self::map_eps(&rhs.eps, &self.re),
            (false, false) => self
                .eps
                .iter()
                .zip(rhs.eps.iter())
                .map(|(a, b)| a.clone() * rhs.re.clone() + b.clone() * self.re.clone())
                .collect(),
        };
        Self {
            re: self.re * rhs.re,
            eps,
        }
    }
}

impl<T: Scalar> Zero for Dual<T> {
    fn zero() -> Self {
        Self::constant(T::zero())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.eps.iter().all(|e| e.is_zero())
    }
}

impl<T: Scalar> One for Dual<T> {
    fn one() -> Self {
        Self::constant(T::one())
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn from_f64(v: f64) -> Self {
        Self::constant(T::from_f64(v))
    }

    fn tanh(self) -> Self {
        let t = self.re.clone().tanh();
        let d = T::one() - t.clone().sqr();
        self.chain(t, d)
    }

    fn sin(self) -> Self {
        let v = self.re.clone().sin();
        let d = self.re.clone().cos();
        self.chain(v, d)
    }

    fn cos(self) -> Self {
        let v = self.re.clone().cos();
        let d = -self.re.clone().sin();
        self.chain(v, d)
    }

    fn sqr(self) -> Self {
        let two_re = self.re.clone().scale(2.0);
        let v = self.re.clone().sqr();
        self.chain(v, two_re)
    }

    fn scale(self, k: f64) -> Self {
        Self {
            re: self.re.scale(k),
            eps: self.eps.into_iter().map(|e| e.scale(k)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_composite_matches_closed_form() {
        // g(x, y) = tanh(x * y) + cos(x) - y²
        let (x, y) = (0.3_f64, -1.2_f64);
        let v = Dual::seed(&[x, y]);
        let g = (v[0].clone() * v[1].clone()).tanh() + v[0].clone().cos() - v[1].clone().sqr();
        let sech2 = 1.0 - (x * y).tanh().powi(2);
        assert!((g.re - ((x * y).tanh() + x.cos() - y * y)).abs() < 1e-15);
        assert!((g.eps[0] - (sech2 * y - x.sin())).abs() < 1e-14);
        assert!((g.eps[1] - (sech2 * x - 2.0 * y)).abs() < 1e-14);
    }

    #[test]
    fn constants_have_zero_gradient() {
        let c = Dual::<f64>::from_f64(2.5);
        assert_eq!(c.gradient(3), vec![0.0; 3]);
        let x = Dual::variable(1.0, 0, 1);
        let y = c - x;
        assert_eq!(y.eps[0], -1.0);
    }
}
