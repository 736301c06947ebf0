//! Closed `f64` intervals with outward rounding.
//!
//! Every operation returns an enclosure of the exact real result. Sums and
//! products use error-free transformations to detect the rounding direction,
//! so exact results stay exact and inexact ones move one ulp outward. The
//! libm transcendental functions are widened by two ulps. `tanh` is handled by monotonicity and
//! `sin`/`cos` by locating the extrema that fall inside the argument.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

use crate::scalar::Scalar;

#[derive(Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

#[inline]
fn down(v: f64) -> f64 {
    if v.is_finite() {
        v.next_down()
    } else {
        v
    }
}

#[inline]
fn up(v: f64) -> f64 {
    if v.is_finite() {
        v.next_up()
    } else {
        v
    }
}

/// `a + b` rounded toward −∞ (`dir < 0`) or +∞ (`dir > 0`).
#[inline]
fn add_dir(a: f64, b: f64, dir: i8) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    if dir < 0 && err < 0.0 {
        s.next_down()
    } else if dir > 0 && err > 0.0 {
        s.next_up()
    } else {
        s
    }
}

/// Rounding error of `p = fl(a·b)`, i.e. `a·b − p` exactly.
#[inline]
fn product_error(a: f64, b: f64, p: f64) -> f64 {
    if cfg!(target_feature = "fma") {
        a.mul_add(b, -p)
    } else {
        // Dekker's two-product; callers keep the operands far from overflow.
        #[inline]
        fn split(v: f64) -> (f64, f64) {
            let c = 134_217_729.0 * v;
            let hi = c - (c - v);
            (hi, v - hi)
        }
        let (ah, al) = split(a);
        let (bh, bl) = split(b);
        ((ah * bh - p) + ah * bl + al * bh) + al * bl
    }
}

/// `a · b` rounded toward −∞ (`dir < 0`) or +∞ (`dir > 0`).
#[inline]
fn mul_dir(a: f64, b: f64, dir: i8) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    // Outside this range the error term may under- or overflow.
    let pa = p.abs();
    if !(1e-290..=1e290).contains(&pa) || a.abs() > 1e150 || b.abs() > 1e150 {
        return if dir < 0 { down(p) } else { up(p) };
    }
    let err = product_error(a, b, p);
    if dir < 0 && err < 0.0 {
        p.next_down()
    } else if dir > 0 && err > 0.0 {
        p.next_up()
    } else {
        p
    }
}

impl Interval {
    /// Panics if `lo > hi` or either bound is NaN.
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "invalid interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    /// Whole real line.
    pub fn entire() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Midpoint, guaranteed to lie inside the interval.
    pub fn mid(&self) -> f64 {
        let m = self.lo + 0.5 * (self.hi - self.lo);
        m.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Intersection; `None` when disjoint.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Pushes both bounds `n` ulps outward.
    fn widen(mut self, n: usize) -> Self {
        for _ in 0..n {
            self.lo = down(self.lo);
            self.hi = up(self.hi);
        }
        self
    }

    /// Range of a `2π`-periodic function with maxima at `max_at + 2kπ` and
    /// minima at `max_at + π + 2kπ`.
    fn periodic(self, f: fn(f64) -> f64, max_at: f64) -> Self {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.width() >= 2.0 * PI {
            return Interval { lo: -1.0, hi: 1.0 };
        }
        if self.lo == 0.0 && self.hi == 0.0 {
            // sin(0) and cos(0) are exact
            return Interval::point(f(0.0));
        }
        let a = f(self.lo);
        let b = f(self.hi);
        let mut lo = a.min(b);
        let mut hi = a.max(b);
        // Extremum test on a slightly widened argument so a rounding error in
        // the reduction can only add an extremum, never drop one.
        let slack = 4.0 * f64::EPSILON * self.lo.abs().max(self.hi.abs()).max(1.0);
        let contains_phase = |phase: f64| {
            let k = ((self.lo - slack - phase) / (2.0 * PI)).ceil();
            phase + 2.0 * PI * k <= self.hi + slack
        };
        if contains_phase(max_at) {
            hi = 1.0;
        }
        if contains_phase(max_at + PI) {
            lo = -1.0;
        }
        let out = Interval { lo, hi }.widen(2);
        Interval {
            lo: out.lo.max(-1.0),
            hi: out.hi.min(1.0),
        }
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Add for Interval {
    type Output = Interval;
    #[inline]
    fn add(self, rhs: Interval) -> Interval {
        Interval {
            lo: add_dir(self.lo, rhs.lo, -1),
            hi: add_dir(self.hi, rhs.hi, 1),
        }
    }
}

impl Sub for Interval {
    type Output = Interval;
    #[inline]
    fn sub(self, rhs: Interval) -> Interval {
        Interval {
            lo: add_dir(self.lo, -rhs.hi, -1),
            hi: add_dir(self.hi, -rhs.lo, 1),
        }
    }
}

impl Neg for Interval {
    type Output = Interval;
    #[inline]
    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Mul for Interval {
    type Output = Interval;
    #[inline]
    fn mul(self, rhs: Interval) -> Interval {
        if self.lo == self.hi && self.lo == 0.0 || rhs.lo == rhs.hi && rhs.lo == 0.0 {
            return Interval::point(0.0);
        }
        let (a, b, c, d) = (self.lo, self.hi, rhs.lo, rhs.hi);
        let lo_hi = |l: (f64, f64), h: (f64, f64)| Interval {
            lo: mul_dir(l.0, l.1, -1),
            hi: mul_dir(h.0, h.1, 1),
        };
        if a >= 0.0 {
            if c >= 0.0 {
                lo_hi((a, c), (b, d))
            } else if d <= 0.0 {
                lo_hi((b, c), (a, d))
            } else {
                lo_hi((b, c), (b, d))
            }
        } else if b <= 0.0 {
            if c >= 0.0 {
                lo_hi((a, d), (b, c))
            } else if d <= 0.0 {
                lo_hi((b, d), (a, c))
            } else {
                lo_hi((a, d), (a, c))
            }
        } else if c >= 0.0 {
            lo_hi((a, d), (b, d))
        } else if d <= 0.0 {
            lo_hi((b, c), (a, c))
        } else {
            Interval {
                lo: mul_dir(a, d, -1).min(mul_dir(b, c, -1)),
                hi: mul_dir(a, c, 1).max(mul_dir(b, d, 1)),
            }
        }
    }
}

impl Zero for Interval {
    fn zero() -> Self {
        Interval::point(0.0)
    }
    fn is_zero(&self) -> bool {
        self.lo == 0.0 && self.hi == 0.0
    }
}

impl One for Interval {
    fn one() -> Self {
        Interval::point(1.0)
    }
}

impl Scalar for Interval {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Interval::point(v)
    }

    fn tanh(self) -> Self {
        // tanh(0) = 0 is exact; keep it so zero stays a point.
        let lo = if self.lo == 0.0 {
            0.0
        } else {
            down(down(self.lo.tanh())).max(-1.0)
        };
        let hi = if self.hi == 0.0 {
            0.0
        } else {
            up(up(self.hi.tanh())).min(1.0)
        };
        Interval { lo, hi }
    }

    fn sin(self) -> Self {
        self.periodic(f64::sin, FRAC_PI_2)
    }

    fn cos(self) -> Self {
        self.periodic(f64::cos, 0.0)
    }

    fn sqr(self) -> Self {
        let hi = mul_dir(self.lo, self.lo, 1).max(mul_dir(self.hi, self.hi, 1));
        let lo = if self.lo <= 0.0 && self.hi >= 0.0 {
            0.0
        } else {
            let a = self.lo.abs().min(self.hi.abs());
            mul_dir(a, a, -1).max(0.0)
        };
        Interval { lo, hi }
    }

    fn scale(self, k: f64) -> Self {
        self * Interval::point(k)
    }
}
