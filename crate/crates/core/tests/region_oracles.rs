use gridlyap::candidate::QuadraticForm;
use gridlyap::nk::NkConfig;
use gridlyap::region::{boundary_sweep_oracle, sr_est, SrConfig};
use gridlyap::Candidate;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// For V = xᵀ diag(d) x the minimum over the sphere is min(d)·u², reached
    /// on the axis of the smallest weight.
    #[test]
    fn quadratic_level_is_smallest_weight(d in prop::collection::vec(0.2..3.0f64, 2..=4), u in 0.3..2.0f64) {
        let v = QuadraticForm::diag(&d);
        let region = sr_est(&v, u, &SrConfig::new(40, 3), &NkConfig::default()).unwrap();
        let (k, dmin) = d.iter().copied().enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        prop_assert!((region.d_star - dmin * u * u).abs() <= 1e-8 * (1.0 + dmin * u * u));
        for t in &region.touch_points {
            let r2: f64 = t.x.iter().map(|v| v * v).sum();
            prop_assert!((r2 - u * u).abs() <= 1e-8);
            prop_assert!((t.value - region.d_star).abs() <= 1e-9);
        }
        let sweep = boundary_sweep_oracle(&v, u, 41);
        prop_assert!(region.d_star <= sweep.d_grid + 1e-8);
        prop_assert!(region.contains(&vec![0.0; d.len()]));
        let mut outside = vec![0.0; d.len()];
        outside[k] = 1.0001 * u;
        prop_assert!(!region.contains(&outside));
        prop_assert!(v.value(&vec![0.0; d.len()]) == 0.0);
    }
}
