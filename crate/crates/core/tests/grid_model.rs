use gridlyap::linalg::eigenvalues;
use gridlyap::linear::{jacobian, spectral_abscissa, DEFAULT_JACOBIAN_STEP};
use gridlyap::{
    repair_setpoints, DroopInterface, Line, NetworkModel, NetworkedSystem, Scenario, Setpoint,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn network(
    lines: &[(usize, usize, f64, f64)],
    n: usize,
) -> (NetworkModel<f64>, Vec<Vec<Complex64>>) {
    let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for &(a, b, r, x) in lines {
        let ys = 1.0 / Complex64::new(r, x);
        y[a][a] += ys;
        y[b][b] += ys;
        y[a][b] -= ys;
        y[b][a] -= ys;
    }
    let ls: Vec<Line<f64>> = lines
        .iter()
        .map(|&(from, to, r, x)| Line { from, to, r, x })
        .collect();
    (NetworkModel::from_lines(n, &ls).unwrap(), y)
}

fn case() -> impl Strategy<Value = (Vec<(usize, usize, f64, f64)>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..=4).prop_flat_map(|n| {
        let chain = prop::collection::vec((0.05..1.5f64, 0.05..1.5f64), n - 1);
        let angles = prop::collection::vec(-1.0..1.0f64, n);
        let volts = prop::collection::vec(0.9..1.1f64, n);
        let x = prop::collection::vec(-0.5..0.5f64, n);
        (chain, angles, volts, x).prop_map(|(c, a, v, x)| {
            let lines = c
                .into_iter()
                .enumerate()
                .map(|(i, (r, xl))| (i, i + 1, r, xl))
                .collect();
            (lines, a, v, x)
        })
    })
}

proptest! {
    #[test]
    fn power_injection_matches_complex_power_flow((lines, angles, volts, x) in case()) {
        let n = angles.len();
        let (net, y) = network(&lines, n);
        let ifaces = vec![DroopInterface::AngleDroopReduced { m_a: 1.0, d_a: 1.0 }; n];
        let sps: Vec<Setpoint<f64>> = angles.iter().zip(&volts).map(|(&delta, &voltage)| Setpoint { delta, voltage, p: 0.0, q: 0.0 }).collect();
        let sps = repair_setpoints(&ifaces, &sps, &[], &net).unwrap();
        let sys = NetworkedSystem::assemble(ifaces, sps, vec![], net, 1e-9).unwrap();

        let phasor: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(volts[k], angles[k] + x[k])).collect();
        let pq = sys.power_injection(&x);
        for k in 0..n {
            let current: Complex64 = (0..n).map(|j| y[k][j] * phasor[j]).sum();
            let s = phasor[k] * current.conj();
            prop_assert!((pq[k].0 - s.re).abs() < 1e-10, "P at bus {}: {} vs {}", k, pq[k].0, s.re);
            prop_assert!((pq[k].1 - s.im).abs() < 1e-10, "Q at bus {}: {} vs {}", k, pq[k].1, s.im);
        }
        let f0: Vec<f64> = sys.dynamics(&vec![0.0f64; n]);
        prop_assert!(f0.iter().all(|v| v.abs() < 1e-12));
    }
}

#[test]
fn eigenvalues_agree_with_reference_solver() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/ieee123.toml");
    let sys = Scenario::load(std::path::Path::new(path))
        .unwrap()
        .scenario
        .build_system()
        .unwrap();
    let a = jacobian(&sys, DEFAULT_JACOBIAN_STEP).unwrap();
    let m = sys.m();
    let mut ours: Vec<f64> = eigenvalues(&a).unwrap().iter().map(|l| l.re).collect();
    let reference = DMatrix::from_fn(m, m, |i, j| a[(i, j)]);
    let mut theirs: Vec<f64> = reference
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .collect();
    ours.sort_by(f64::total_cmp);
    theirs.sort_by(f64::total_cmp);
    for (p, q) in ours.iter().zip(&theirs) {
        assert!((p - q).abs() < 1e-9, "{ours:?} vs {theirs:?}");
    }
    assert!(spectral_abscissa(&eigenvalues(&a).unwrap()) < 0.0);
}

#[test]
fn state_names_follow_interfaces() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/case_b.toml");
    let sys = Scenario::load(std::path::Path::new(path))
        .unwrap()
        .scenario
        .build_system()
        .unwrap();
    assert_eq!(
        sys.state_names(),
        ["delta_MG1", "delta_MG2", "delta_MG3", "omega_MG3"]
    );
}
