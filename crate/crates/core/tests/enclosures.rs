use gridlyap::{Dual, Interval, Scalar};
use proptest::prelude::*;

fn interval() -> impl Strategy<Value = (f64, f64, f64)> {
    (-5.0..5.0f64, 0.0..3.0f64, 0.0..=1.0f64).prop_map(|(lo, w, t)| (lo, lo + w, lo + t * w))
}

proptest! {
    #[test]
    fn arithmetic_encloses_points((a0, a1, a) in interval(), (b0, b1, b) in interval()) {
        let x = Interval::new(a0, a1);
        let y = Interval::new(b0, b1);
        prop_assert!((x + y).contains(a + b));
        prop_assert!((x - y).contains(a - b));
        prop_assert!((x * y).contains(a * b));
        prop_assert!((-x).contains(-a));
        prop_assert!(x.sqr().contains(a * a));
        prop_assert!(x.sqr().lo() >= 0.0);
    }

    #[test]
    fn elementary_functions_enclose_points((a0, a1, a) in interval()) {
        let x = Interval::new(a0, a1);
        prop_assert!(x.sin().contains(a.sin()));
        prop_assert!(x.cos().contains(a.cos()));
        prop_assert!(x.tanh().contains(a.tanh()));
        prop_assert!(x.tanh().hi() <= 1.0 && x.tanh().lo() >= -1.0);
    }

    #[test]
    fn dual_gradient_matches_differences(x in -2.0..2.0f64, y in -2.0..2.0f64) {
        let g = |a: Dual<f64>, b: Dual<f64>| (a.clone() * b.clone()).sin().tanh() + a.cos() * b.sqr();
        let d = Dual::seed(&[x, y]);
        let grad = g(d[0].clone(), d[1].clone()).gradient(2);
        let h = 1e-6;
        let f = |a: f64, b: f64| (a * b).sin().tanh() + a.cos() * b * b;
        let fx = (f(x + h, y) - f(x - h, y)) / (2.0 * h);
        let fy = (f(x, y + h) - f(x, y - h)) / (2.0 * h);
        prop_assert!((grad[0] - fx).abs() <= 1e-7 * (1.0 + fx.abs()));
        prop_assert!((grad[1] - fy).abs() <= 1e-7 * (1.0 + fy.abs()));
    }

    #[test]
    fn dual_over_intervals_encloses_point_derivative((a0, a1, a) in interval()) {
        let xi = Dual::seed(&[Interval::new(a0, a1)]);
        let xp = Dual::seed(&[a]);
        let gi = (xi[0].clone().sin() * xi[0].clone()).tanh().gradient(1);
        let gp = (xp[0].clone().sin() * xp[0].clone()).tanh().gradient(1);
        prop_assert!(gi[0].contains(gp[0]));
    }
}
