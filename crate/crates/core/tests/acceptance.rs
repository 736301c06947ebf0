//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gridlyap::baseline::{
    lyapunov_residual, quadratic_region, solve_lyapunov_equation, QuadraticSearch,
};
use gridlyap::candidate::{Candidate, QuadraticForm};
use gridlyap::falsifier::{falsify, violates, FalsifierConfig};
use gridlyap::net::{risk, risk_gradient, uniform_in_ball, NetParams, SampleSet, TrainConfig};
use gridlyap::pipeline::{self, RunOutput};
use gridlyap::region::boundary_sweep_oracle;
use gridlyap::report::CertificateFile;
use gridlyap::scalar::norm2;
use gridlyap::scenario::{LoadedScenario, Scenario};
use gridlyap::simulate::{integrate, ConvergenceCriterion};
use gridlyap::{LinearField, Matrix, NetworkedSystem, Scalar, VectorField};

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn scenario(name: &str) -> (LoadedScenario, NetworkedSystem) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"));
    let loaded = Scenario::load(&path).expect("bundled scenario parses");
    let sys = loaded
        .scenario
        .build_system()
        .expect("bundled scenario builds");
    (loaded, sys)
}

fn random_net(rng: &mut ChaCha8Rng, m: usize, p: usize) -> NetParams<f64> {
    let n = p * m + 2 * p + 1;
    let flat: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    NetParams::from_flat(m, p, &flat)
}

fn random_hurwitz(rng: &mut ChaCha8Rng, m: usize) -> Matrix<f64> {
    let raw = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    let abscissa = raw
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let shift = abscissa + rng.random_range(0.2..1.0);
    Matrix::from_fn(m, m, |i, j| raw[(i, j)] - if i == j { shift } else { 0.0 })
}

/// `ẋ = x³ − x`, stable at the origin with attraction basin `(−1, 1)`.
struct Cubic;

impl VectorField for Cubic {
    fn dim(&self) -> usize {
        1
    }
    fn eval<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let v = x[0].clone();
        vec![v.clone() * v.clone() * v.clone() - v]
    }
}

fn gradient_correctness() -> Line {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for draw in 0..100 {
        let m = rng.random_range(1..=4);
        let p = rng.random_range(1..=8);
        let theta = random_net(&mut rng, m, p);
        let a = random_hurwitz(&mut rng, m);
        let f = LinearField::new(a);
        let samples = SampleSet::new((0..20).map(|_| uniform_in_ball(&mut rng, m, 1.0)).collect());
        let cfg = TrainConfig {
            alpha: rng.random_range(0.5..3.0),
            beta: rng.random_range(0.5..3.0),
            gamma: rng.random_range(0.0..3.0),
            tau: rng.random_range(0.1..0.5),
            p,
            seed: draw,
            ..TrainConfig::defaults(m)
        };
        let g = risk_gradient(&theta, &samples, &f, &cfg).to_flat();
        let flat = theta.to_flat();
        let mut fd = vec![0.0; flat.len()];
        for (k, fdk) in fd.iter_mut().enumerate() {
            let h = 1e-6 * flat[k].abs().max(1.0);
            let mut plus = flat.clone();
            plus[k] += h;
            let mut minus = flat.clone();
            minus[k] -= h;
            let rp = risk(&NetParams::from_flat(m, p, &plus), &samples, &f, &cfg);
            let rm = risk(&NetParams::from_flat(m, p, &minus), &samples, &f, &cfg);
            *fdk = (rp - rm) / (2.0 * h);
        }
        let scale = fd.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
        let err = g
            .iter()
            .zip(&fd)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
            / scale;
        worst = worst.max(err);
    }
    let elapsed = start.elapsed().as_secs_f64();
    Line {
        id: 1,
        name: "risk gradient matches central differences",
        pass: worst <= 1e-5 && elapsed < 10.0,
        detail: format!("max rel err {worst:.2e} (tol 1e-5), {elapsed:.2} s (limit 10 s)"),
    }
}

fn lie_derivative_correctness() -> Line {
    let (_, sys) = scenario("ieee123");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let theta = random_net(&mut rng, sys.m(), 8);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x: Vec<f64> = uniform_in_ball(&mut rng, sys.m(), 1.0);
        let fx: Vec<f64> = sys.eval(&x);
        let lie = theta.lie_derivative(&x, &sys);
        let h = 1e-5;
        let step = |s: f64| -> Vec<f64> { x.iter().zip(&fx).map(|(a, b)| a + s * h * b).collect() };
        let fd = (theta.value(&step(1.0)) - theta.value(&step(-1.0))) / (2.0 * h);
        // |V̇| ≤ ‖∇V‖‖f‖, the natural magnitude when V̇ itself is near zero.
        let scale = norm2(&theta.gradient(&x)) * norm2(&fx);
        worst = worst.max((lie - fd).abs() / scale.max(1e-12));
    }
    Line {
        id: 2,
        name: "Lie derivative matches directional differences",
        pass: worst <= 1e-6,
        detail: format!("max rel err {worst:.2e} over 1000 points (tol 1e-6)"),
    }
}

fn falsifier_suite() -> Line {
    let start = Instant::now();
    let delta = 1e-3;
    let cfg = |u: f64| FalsifierConfig {
        delta,
        ..FalsifierConfig::new(u)
    };
    let eye2 = QuadraticForm::<f64>::identity(2);
    let lin = |rows: &[Vec<f64>]| LinearField::new(Matrix::from_rows(rows));
    let mut results: Vec<(&str, bool, bool, bool)> = Vec::new();
    let mut check =
        |name: &'static str, cand: &dyn Fn() -> (bool, bool), expect_certified: bool| {
            let (certified, reverified) = cand();
            results.push((name, certified == expect_certified, reverified, certified));
        };
    fn run<C: Candidate, V: VectorField>(c: &C, f: &V, cfg: &FalsifierConfig) -> (bool, bool) {
        match falsify(c, f, cfg) {
            Ok(o) => {
                let ok = o.counterexamples.points.iter().all(|x| {
                    let r = norm2(x);
                    violates(c, f, x, cfg.delta) && r >= cfg.l - 1e-12 && r <= cfg.u + 1e-12
                });
                (o.counterexamples.is_empty(), ok)
            }
            Err(_) => (false, false),
        }
    }
    check(
        "|x|^2 with f = -x",
        &|| run(&eye2, &LinearField::scaled_identity(2, -1.0), &cfg(1.0)),
        true,
    );
    check(
        "|x|^2 with f = +x",
        &|| run(&eye2, &LinearField::scaled_identity(2, 1.0), &cfg(1.0)),
        false,
    );
    check(
        "-|x|^2 with f = -x",
        &|| {
            run(
                &QuadraticForm::diag(&[-1.0, -1.0]),
                &LinearField::scaled_identity(2, -1.0),
                &cfg(1.0),
            )
        },
        false,
    );
    check(
        "diag(1,2,3) with f = -x",
        &|| {
            run(
                &QuadraticForm::diag(&[1.0, 2.0, 3.0]),
                &LinearField::scaled_identity(3, -1.0),
                &cfg(1.0),
            )
        },
        true,
    );
    check(
        "|x|^2 with damped rotation",
        &|| run(&eye2, &lin(&[vec![-0.5, 1.0], vec![-1.0, -0.5]]), &cfg(1.0)),
        true,
    );
    check(
        "|x|^2 with pure rotation",
        &|| run(&eye2, &lin(&[vec![0.0, 1.0], vec![-1.0, 0.0]]), &cfg(1.0)),
        false,
    );
    check(
        "|x|^2 with non-normal stable A",
        &|| run(&eye2, &lin(&[vec![-1.0, 3.0], vec![0.0, -1.0]]), &cfg(1.0)),
        false,
    );
    check(
        "semidefinite x1^2 with f = -x",
        &|| {
            run(
                &QuadraticForm::diag(&[1.0, 0.0]),
                &LinearField::scaled_identity(2, -1.0),
                &cfg(1.0),
            )
        },
        false,
    );
    check(
        "x^2 with cubic field inside basin",
        &|| run(&QuadraticForm::<f64>::identity(1), &Cubic, &cfg(0.9)),
        true,
    );
    check(
        "x^2 with cubic field past basin",
        &|| run(&QuadraticForm::<f64>::identity(1), &Cubic, &cfg(1.2)),
        false,
    );
    let elapsed = start.elapsed().as_secs_f64();
    let wrong: Vec<&str> = results
        .iter()
        .filter(|r| !r.1 || !r.2)
        .map(|r| r.0)
        .collect();
    Line {
        id: 3,
        name: "falsifier classifies 10 probes at delta = 1e-3",
        pass: wrong.is_empty() && elapsed < 60.0,
        detail: format!(
            "{}/10 correct, counterexamples re-verified, {elapsed:.2} s (limit 60 s){}",
            results.len() - wrong.len(),
            if wrong.is_empty() {
                String::new()
            } else {
                format!("; wrong: {wrong:?}")
            }
        ),
    }
}

fn case_a(run: &Result<RunOutput, String>) -> Line {
    let out = match run {
        Ok(o) => o,
        Err(e) => {
            return Line {
                id: 4,
                name: "case A certificate and security region",
                pass: false,
                detail: e.clone(),
            }
        }
    };
    let region = &out.region;
    let wall = out.learn_report.wall_time_s;
    let touch = &region.touch_points[0];
    let on_sphere = (norm2(&touch.x).powi(2) - region.u * region.u).abs();
    let level_gap = (touch.value - region.d_star).abs();
    let sweep = boundary_sweep_oracle(&region.candidate, region.u, 4001);
    let bound = sweep.error_bound.unwrap_or(0.0);
    let in_bound =
        region.d_star <= sweep.d_grid + 1e-9 && region.d_star >= sweep.d_grid - bound - 1e-9;
    let pass = out.learned.certificate.u == 1.5
        && out.learned.audit.updates() <= 5000
        && wall <= 600.0
        && region.d_star > 0.0
        && on_sphere <= 1e-6
        && level_gap <= 1e-6
        && in_bound;
    Line {
        id: 4,
        name: "case A certificate and security region",
        pass,
        detail: format!(
            "seed {:?}, {} updates, {wall:.1} s; d* = {:.4}, touch point {:?}, |‖x*‖²−u²| = {on_sphere:.1e}, |V(x*)−d*| = {level_gap:.1e}, sweep {:.4} (bound {bound:.1e})",
            out.learn_report.seed,
            out.learned.audit.updates(),
            region.d_star,
            touch.x.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            sweep.d_grid,
        ),
    }
}

fn region_validity(
    runs: &[(
        &str,
        &LoadedScenario,
        &NetworkedSystem,
        &Result<RunOutput, String>,
    )],
) -> Line {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, loaded, sys, run) in runs {
        match run {
            Ok(out) => {
                let rep = pipeline::validate_region(
                    &loaded.scenario,
                    sys,
                    &out.region,
                    0,
                    100,
                    11,
                    &loaded.hash,
                );
                let started = pipeline::sample_region(&out.region, 100, 12).len();
                let ok = started == 100
                    && rep.left_region == 0
                    && rep.not_converged == 0
                    && rep.failed_integrations == 0;
                pass &= ok;
                parts.push(format!(
                    "{name}: {} left, {} not converged, {} failed",
                    rep.left_region, rep.not_converged, rep.failed_integrations
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: no region ({e})"));
            }
        }
    }
    Line {
        id: 5,
        name: "100 trajectories per region stay inside and converge",
        pass,
        detail: parts.join("; "),
    }
}

fn conservativeness(
    runs: &[(
        &str,
        &LoadedScenario,
        &NetworkedSystem,
        &Result<RunOutput, String>,
    )],
) -> Line {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, loaded, sys, run) in runs {
        let Ok(out) = run else {
            pass = false;
            parts.push(format!("{name}: no region"));
            continue;
        };
        match pipeline::compare(loaded, sys, &out.region) {
            Ok((rep, _)) => {
                pass &= rep.ratio > 1.0 && rep.mc_samples >= 100_000;
                parts.push(format!(
                    "{name}: ratio {:.3} (neural {:.4}, quadratic {:.4}, {} samples)",
                    rep.ratio, rep.neural.volume, rep.conventional.volume, rep.mc_samples
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    Line {
        id: 6,
        name: "neural region larger than quadratic baseline",
        pass,
        detail: parts.join("; "),
    }
}

fn ieee123(
    loaded: &LoadedScenario,
    sys: &NetworkedSystem,
    run: &Result<RunOutput, String>,
) -> Line {
    let name = "123-node case: gate, certificate at u = 0.7, x(0) inside, convergence";
    let out = match run {
        Ok(o) => o,
        Err(e) => {
            return Line {
                id: 7,
                name,
                pass: false,
                detail: e.clone(),
            }
        }
    };
    // Pre-event angles minus the post-event dispatch.
    let pre = [0.0, -0.8472, 2.3062, 0.5936];
    let dispatch = [0.0, -1.0472, 2.3562, 0.5236];
    let x0: Vec<f64> = pre.iter().zip(&dispatch).map(|(a, b)| a - b).collect();
    let v0 = out.region.candidate.value(&x0);
    let inside = out.region.contains(&x0);
    let (t_end, dt) = pipeline::horizon(&loaded.scenario, sys);
    let tr = integrate(sys, &x0, t_end, dt, &ConvergenceCriterion::default());
    let converged = tr.as_ref().map(|t| t.converged).unwrap_or(false);
    Line {
        id: 7,
        name,
        pass: out.stability.stable && out.learned.certificate.u == 0.7 && inside && converged,
        detail: format!(
            "abscissa {:.3}, {} updates, {:.0} s; V(x0) = {v0:.3} < d* = {:.3}: {inside}; converged: {converged}",
            out.stability.spectral_abscissa,
            out.learned.audit.updates(),
            out.learn_report.wall_time_s,
            out.region.d_star
        ),
    }
}

fn rk4_order() -> Line {
    let (_, sys) = scenario("relaxation");
    let err = |dt: f64| {
        let tr = integrate(&sys, &[1.0], 2.0, dt, &ConvergenceCriterion::default()).unwrap();
        (tr.last()[0] - (-2.0f64).exp()).abs()
    };
    let (e1, e2) = (err(0.2), err(0.1));
    let ratio = e1 / e2;
    Line {
        id: 8,
        name: "RK4 endpoint error drops by 12..20 when dt halves",
        pass: (12.0..=20.0).contains(&ratio),
        detail: format!("errors {e1:.3e} -> {e2:.3e}, ratio {ratio:.2}"),
    }
}

fn lyapunov_baseline() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = rng.random_range(2..=6);
        let a = random_hurwitz(&mut rng, m);
        let q = Matrix::identity(m);
        let p = solve_lyapunov_equation(&a, &q).expect("Hurwitz input");
        worst = worst.max(lyapunov_residual(&a, &p, &q));
    }
    let f = LinearField::new(Matrix::from_rows(&[vec![-1.0, 0.5], vec![-0.3, -2.0]]));
    let q = Matrix::identity(2);
    let p = solve_lyapunov_equation(&f.a, &q).unwrap();
    let cert = quadratic_region(
        &Cubic2,
        &p,
        &q,
        &QuadraticSearch::new(2.0),
        &FalsifierConfig::new(2.0),
    )
    .unwrap();
    let lam = DMatrix::from_fn(2, 2, |i, j| p[(i, j)])
        .symmetric_eigenvalues()
        .min();
    let exact = cert.d_q == cert.lambda_min * cert.u_q * cert.u_q;
    let lam_ok = (lam - cert.lambda_min).abs() <= 1e-12 * lam.abs();
    Line {
        id: 9,
        name: "Lyapunov equation residual and quadratic level",
        pass: worst <= 1e-10 && exact && lam_ok,
        detail: format!(
            "max residual {worst:.2e} over 20 matrices (tol 1e-10); u_q = {:.3}, d_q = λ_min·u_q² exactly: {exact}",
            cert.u_q
        ),
    }
}

/// Linear part of the matrix in `lyapunov_baseline` plus a cubic damping
/// loss, so the quadratic valid radius is finite.
struct Cubic2;

impl VectorField for Cubic2 {
    fn dim(&self) -> usize {
        2
    }
    fn eval<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let (a, b) = (x[0].clone(), x[1].clone());
        vec![
            a.clone().scale(-1.0) + b.clone().scale(0.5) + a.clone() * a.clone() * a.clone(),
            a.scale(-0.3) + b.scale(-2.0),
        ]
    }
}

fn determinism(
    first: &Result<RunOutput, String>,
    loaded: &LoadedScenario,
    sys: &NetworkedSystem,
) -> Line {
    let name = "identical scenario gives bit-identical certificate and d*";
    let second = pipeline::run(loaded, sys).map_err(|e| e.to_string());
    let (Ok(a), Ok(b)) = (first, &second) else {
        return Line {
            id: 10,
            name,
            pass: false,
            detail: "a run failed".into(),
        };
    };
    let json = |o: &RunOutput| {
        serde_json::to_string(&CertificateFile::new(
            &o.learned.certificate,
            &loaded.hash,
            sys.state_names(),
        ))
        .unwrap()
    };
    let same_cert = json(a) == json(b);
    let same_d = a.region.d_star.to_bits() == b.region.d_star.to_bits();
    Line {
        id: 10,
        name,
        pass: same_cert && same_d,
        detail: format!("certificate identical: {same_cert}; d* identical: {same_d}"),
    }
}

fn main() -> ExitCode {
    let mut lines = vec![
        gradient_correctness(),
        lie_derivative_correctness(),
        falsifier_suite(),
    ];
    let (a_loaded, a_sys) = scenario("case_a");
    let a_run = pipeline::run(&a_loaded, &a_sys).map_err(|e| e.to_string());
    let (n_loaded, n_sys) = scenario("ieee123");
    let n_run = pipeline::run(&n_loaded, &n_sys).map_err(|e| e.to_string());
    let runs = [
        ("case A", &a_loaded, &a_sys, &a_run),
        ("123-node", &n_loaded, &n_sys, &n_run),
    ];
    lines.push(case_a(&a_run));
    lines.push(region_validity(&runs));
    lines.push(conservativeness(&runs));
    lines.push(ieee123(&n_loaded, &n_sys, &n_run));
    lines.push(rk4_order());
    lines.push(lyapunov_baseline());
    lines.push(determinism(&a_run, &a_loaded, &a_sys));

    let mut failed = 0;
    for l in &lines {
        println!(
            "[{}] {:>2}. {}: {}",
            if l.pass { "PASS" } else { "FAIL" },
            l.id,
            l.name,
            l.detail
        );
        failed += usize::from(!l.pass);
    }
    println!(
        "acceptance: {} passed, {} failed",
        lines.len() - failed,
        failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
