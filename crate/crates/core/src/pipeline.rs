//! End-to-end assessment: stability gate, learning, region estimation,
//! comparison with the quadratic baseline, and empirical validation.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::{
    monte_carlo_volume, quadratic_region, solve_lyapunov_equation, BaselineError,
    QuadraticCertificate, QuadraticSearch,
};
use crate::candidate::Candidate;
use crate::cegis::{learn_function, Certificate, FailureDiagnostics, LearnError, Learned};
use crate::grid::NetworkedSystem;
use crate::linalg::Matrix;
use crate::linear::{
    is_asymptotically_stable, jacobian, spectral_abscissa, LinearError, DEFAULT_JACOBIAN_STEP,
};
use crate::net::{uniform_in_ball, NetParams, SampleSet, ShiftedNet};
use crate::region::{sr_est, RegionError, SecurityRegion};
use crate::report::{
    CompareReport, LearnReport, Membership, RegionVolume, SeedAttempt, StabilityReport,
    ValidationReport,
};
use crate::scalar::norm2;
use crate::scenario::{LoadedScenario, Scenario};
use crate::simulate::{integrate, ConvergenceCriterion, SimError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("equilibrium is not asymptotically stable (spectral abscissa {abscissa:e}); request for tuning parameters")]
    Unstable {
        abscissa: f64,
        report: Box<StabilityReport>,
    },
    #[error("linearization: {0}")]
    Linear(#[from] LinearError),
    #[error("learning failed for every seed: {last}")]
    Learning {
        last: LearnError,
        report: Box<LearnReport>,
        diagnostics: Option<FailureDiagnostics>,
    },
    #[error("region estimation: {0}")]
    Region(#[from] RegionError),
    #[error("baseline: {0}")]
    Baseline(#[from] BaselineError),
    #[error("simulation: {0}")]
    Simulation(#[from] SimError),
}

pub fn check_stability(
    loaded: &LoadedScenario,
    sys: &NetworkedSystem<f64>,
) -> Result<StabilityReport, LinearError> {
    let a = jacobian(sys, DEFAULT_JACOBIAN_STEP)?;
    let (stable, eig) = is_asymptotically_stable(&a, 0.0)?;
    Ok(StabilityReport {
        scenario: loaded.scenario.name.clone(),
        scenario_hash: loaded.hash.clone(),
        stable,
        spectral_abscissa: spectral_abscissa(&eig),
        eigenvalues: eig.iter().map(|l| [l.re, l.im]).collect(),
        jacobian: a.to_rows(),
        state_names: sys.state_names(),
    })
}

/// Runs the learner for each configured seed until one is certified.
pub fn learn(
    loaded: &LoadedScenario,
    sys: &NetworkedSystem<f64>,
) -> Result<(Learned<f64>, LearnReport), PipelineError> {
    let sc = &loaded.scenario;
    let m = sys.m();
    let start = Instant::now();
    let mut report = LearnReport {
        scenario: sc.name.clone(),
        scenario_hash: loaded.hash.clone(),
        hyper: sc.hyper.clone(),
        seed: None,
        attempts: Vec::new(),
        wall_time_s: 0.0,
        audit: None,
    };
    let mut last = None;
    for &seed in &sc.hyper.seeds {
        let train = sc.train_config(m, seed);
        let theta0 = NetParams::init(m, train.p, seed).scaled(sc.hyper.init_scale);
        let samples = SampleSet::uniform_in_ball(m, sc.hyper.q, sc.hyper.u, seed);
        let fals = sc.falsifier_config(seed);
        log::info!("learning with seed {seed}");
        match learn_function(sys, &theta0, &samples, &train, &fals, sc.hyper.n_i) {
            Ok(learned) => {
                report.attempts.push(SeedAttempt {
                    seed,
                    certified: true,
                    updates: learned.audit.updates(),
                    final_samples: learned.audit.final_samples(),
                    message: "certified".into(),
                });
                report.seed = Some(seed);
                report.audit = Some(learned.audit.clone());
                report.wall_time_s = start.elapsed().as_secs_f64();
                return Ok((learned, report));
            }
            Err(e) => {
                let (updates, final_samples) = match &e {
                    LearnError::Failure { updates, audit, .. } => (*updates, audit.final_samples()),
                    _ => (0, 0),
                };
                log::warn!("seed {seed}: {e}");
                report.attempts.push(SeedAttempt {
                    seed,
                    certified: false,
                    updates,
                    final_samples,
                    message: e.to_string(),
                });
                last = Some(e);
            }
        }
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    let last = last.expect("at least one seed");
    let diagnostics = match &last {
        LearnError::Failure { diagnostics, .. } => Some(diagnostics.clone()),
        _ => None,
    };
    Err(PipelineError::Learning {
        last,
        report: Box::new(report),
        diagnostics,
    })
}

pub fn estimate_region(
    sc: &Scenario,
    cert: &Certificate<f64>,
    seed: u64,
) -> Result<SecurityRegion<ShiftedNet<f64>>, RegionError> {
    sr_est(&cert.v, cert.u, &sc.sr_config(seed), &sc.nk_config())
}

pub fn memberships<C: Candidate>(sc: &Scenario, region: &SecurityRegion<C>) -> Vec<Membership> {
    sc.simulation
        .initial_conditions
        .iter()
        .map(|ic| Membership {
            name: ic.name.clone(),
            x0: ic.x0.clone(),
            norm: norm2(&ic.x0),
            value: region.candidate.value(&ic.x0),
            contains: region.contains(&ic.x0),
        })
        .collect()
}

/// Default `(t_end, dt)` for a system: 20 times the largest and 1/50 of the
/// smallest time constant, unless the scenario overrides them.
pub fn horizon(sc: &Scenario, sys: &NetworkedSystem<f64>) -> (f64, f64) {
    (
        sc.simulation
            .t_end
            .unwrap_or(20.0 * sys.max_time_constant()),
        sc.simulation.dt.unwrap_or(sys.min_time_constant() / 50.0),
    )
}

pub fn conventional(
    sc: &Scenario,
    sys: &NetworkedSystem<f64>,
) -> Result<QuadraticCertificate, PipelineError> {
    let a = jacobian(sys, DEFAULT_JACOBIAN_STEP)?;
    let q = Matrix::identity(sys.m());
    let p = solve_lyapunov_equation(&a, &q)?;
    let fals = sc.falsifier_config(0);
    Ok(quadratic_region(
        sys,
        &p,
        &q,
        &QuadraticSearch::new(sc.u_max()),
        &fals,
    )?)
}

pub fn compare(
    loaded: &LoadedScenario,
    sys: &NetworkedSystem<f64>,
    region: &SecurityRegion<ShiftedNet<f64>>,
) -> Result<(CompareReport, QuadraticCertificate), PipelineError> {
    let sc = &loaded.scenario;
    let quad = conventional(sc, sys)?;
    let m = sys.m();
    let half = region.u.max(quad.u_q);
    let n = sc.compare.mc_samples;
    // Same sample stream for both regions.
    let v_nn = monte_carlo_volume(m, half, n, 7, |x| region.contains(x));
    let v_q = monte_carlo_volume(m, half, n, 7, |x| quad.contains(x));
    let ratio = if v_q > 0.0 { v_nn / v_q } else { f64::INFINITY };
    let memberships = sc
        .simulation
        .initial_conditions
        .iter()
        .map(|ic| {
            (
                ic.name.clone(),
                region.contains(&ic.x0),
                quad.contains(&ic.x0),
            )
        })
        .collect();
    Ok((
        CompareReport {
            scenario_hash: loaded.hash.clone(),
            neural: RegionVolume {
                u: region.u,
                level: region.d_star,
                volume: v_nn,
            },
            conventional: RegionVolume {
                u: quad.u_q,
                level: quad.d_q,
                volume: v_q,
            },
            conventional_global_up_to_cap: quad.global_up_to_cap,
            p_matrix: quad.p.to_rows(),
            ratio,
            mc_samples: n,
            half_width: half,
            memberships,
        },
        quad,
    ))
}

/// Uniform draws from `region`, by rejection from the ball of radius `u`.
pub fn sample_region<C: Candidate>(
    region: &SecurityRegion<C>,
    n: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = region.candidate.dim();
    let mut out = Vec::with_capacity(n);
    let mut tries = 0usize;
    while out.len() < n && tries < 1000 * n.max(1) {
        tries += 1;
        let x: Vec<f64> = uniform_in_ball(&mut rng, m, region.u);
        if region.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Monte-Carlo membership audit plus trajectories from inside the region
/// that must stay inside and converge.
pub fn validate_region<C: Candidate>(
    sc: &Scenario,
    sys: &NetworkedSystem<f64>,
    region: &SecurityRegion<C>,
    mc_samples: usize,
    trajectories: usize,
    seed: u64,
    hash: &str,
) -> ValidationReport {
    let (t_end, dt) = horizon(sc, sys);
    let mut rep = ValidationReport {
        scenario_hash: hash.into(),
        mc_samples,
        trajectories,
        t_end,
        dt,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = region.candidate.dim();
    for _ in 0..mc_samples {
        let x: Vec<f64> = uniform_in_ball(&mut rng, m, region.u);
        if region.contains(&x) {
            rep.mc_inside += 1;
            let v: f64 = region.candidate.value(&x);
            if !(norm2(&x) < region.u && v < region.d_star) {
                rep.mc_inconsistent += 1;
            }
        }
    }
    let crit = ConvergenceCriterion::default();
    for x0 in sample_region(region, trajectories, seed.wrapping_add(1)) {
        match integrate(sys, &x0, t_end, dt, &crit) {
            Ok(tr) => {
                if !tr.states.iter().all(|x| region.contains(x)) {
                    rep.left_region += 1;
                }
                if !tr.converged {
                    rep.not_converged += 1;
                }
            }
            Err(_) => rep.failed_integrations += 1,
        }
    }
    rep
}

/// Everything produced by a full run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub updates: usize,
    pub u: f64,
    pub d_star: f64,
    pub memberships: Vec<Membership>,
}

pub struct RunOutput {
    pub stability: StabilityReport,
    pub learned: Learned<f64>,
    pub learn_report: LearnReport,
    pub region: SecurityRegion<ShiftedNet<f64>>,
    pub summary: RunSummary,
}

/// Stability gate, learning and region estimation.
pub fn run(
    loaded: &LoadedScenario,
    sys: &NetworkedSystem<f64>,
) -> Result<RunOutput, PipelineError> {
    let stability = check_stability(loaded, sys)?;
    if !stability.stable {
        return Err(PipelineError::Unstable {
            abscissa: stability.spectral_abscissa,
            report: Box::new(stability),
        });
    }
    let (learned, learn_report) = learn(loaded, sys)?;
    let seed = learn_report.seed.expect("certified seed");
    let region = estimate_region(&loaded.scenario, &learned.certificate, seed)?;
    let summary = RunSummary {
        scenario: loaded.scenario.name.clone(),
        scenario_hash: loaded.hash.clone(),
        seed,
        updates: learned.audit.updates(),
        u: region.u,
        d_star: region.d_star,
        memberships: memberships(&loaded.scenario, &region),
    };
    Ok(RunOutput {
        stability,
        learned,
        learn_report,
        region,
        summary,
    })
}
