//! Scalar abstractions shared by every numerical routine in the crate.
//!
//! Two levels exist. [`Scalar`] is the minimal algebra needed to *evaluate*
//! the vector field and the Lyapunov candidates: ring operations plus the
//! transcendental functions that appear in the model (`tanh`, `sin`, `cos`).
//! It is implemented for plain floats, for [`Interval`](crate::Interval)
//! enclosures and for forward-mode [`Dual`](crate::Dual) numbers, so a single
//! generic code path yields point values, guaranteed ranges and gradients.
//!
//! [`Real`] refines [`Scalar`] with ordering and the usual float utilities and
//! is what the solvers, trainers and integrators are generic over (`f32` and
//! `f64`).

use std::fmt::{Debug, Display, LowerExp};
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{Float, NumAssign, One, Zero};

pub trait Scalar:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
{
    /// Lifts a constant into the scalar domain.
    fn from_f64(v: f64) -> Self;

    fn tanh(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;

    /// `self * self`; enclosure types override this to exploit `x² ≥ 0`.
    fn sqr(self) -> Self {
        self.clone() * self
    }

    /// Multiplication by a constant.
    fn scale(self, k: f64) -> Self {
        self * Self::from_f64(k)
    }
}

/// Floating-point scalar used by solvers, trainers and integrators.
pub trait Real:
    Scalar + Copy + PartialOrd + NumAssign + Display + LowerExp + Default + Send + Sync + 'static
{
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn exp(self) -> Self;
    fn atan2(self, other: Self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn max(self, other: Self) -> Self;
    fn min(self, other: Self) -> Self;
    fn is_finite(self) -> bool;
    fn epsilon() -> Self;
    fn total_cmp(&self, other: &Self) -> std::cmp::Ordering;

    /// Shorthand for small literal constants in generic code.
    #[inline]
    fn c(v: f64) -> Self {
        <Self as Scalar>::from_f64(v)
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn tanh(self) -> Self {
                Float::tanh(self)
            }
            #[inline]
            fn sin(self) -> Self {
                Float::sin(self)
            }
            #[inline]
            fn cos(self) -> Self {
                Float::cos(self)
            }
            #[inline]
            fn scale(self, k: f64) -> Self {
                self * (k as $t)
            }
        }

        impl Real for $t {
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn sqrt(self) -> Self {
                Float::sqrt(self)
            }
            #[inline]
            fn abs(self) -> Self {
                Float::abs(self)
            }
            #[inline]
            fn exp(self) -> Self {
                Float::exp(self)
            }
            #[inline]
            fn atan2(self, other: Self) -> Self {
                Float::atan2(self, other)
            }
            #[inline]
            fn powi(self, n: i32) -> Self {
                Float::powi(self, n)
            }
            #[inline]
            fn max(self, other: Self) -> Self {
                Float::max(self, other)
            }
            #[inline]
            fn min(self, other: Self) -> Self {
                Float::min(self, other)
            }
            #[inline]
            fn is_finite(self) -> bool {
                Float::is_finite(self)
            }
            #[inline]
            fn epsilon() -> Self {
                <$t>::EPSILON
            }
            #[inline]
            fn total_cmp(&self, other: &Self) -> std::cmp::Ordering {
                <$t>::total_cmp(self, other)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Euclidean norm.
pub fn norm2<F: Real>(x: &[F]) -> F {
    x.iter().fold(F::zero(), |acc, &v| acc + v * v).sqrt()
}

/// Squared Euclidean norm.
pub fn norm2_sq<F: Real>(x: &[F]) -> F {
    x.iter().fold(F::zero(), |acc, &v| acc + v * v)
}

pub fn norm_inf<F: Real>(x: &[F]) -> F {
    x.iter().fold(F::zero(), |acc, &v| acc.max(v.abs()))
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

/// Converts a slice between real types through `f64`.
pub fn cast_vec<A: Real, B: Scalar>(x: &[A]) -> Vec<B> {
    x.iter().map(|v| B::from_f64(v.to_f64())).collect()
}
