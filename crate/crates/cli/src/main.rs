use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use gridlyap::pipeline::{self, PipelineError};
use gridlyap::report::{level_set_csv, write_json, write_text, CertificateFile, RegionReport};
use gridlyap::scenario::{LoadedScenario, Scenario};
use gridlyap::simulate::{integrate, ConvergenceCriterion};
use gridlyap::NetworkedSystem;

const EXIT_PARSE: u8 = 2;
const EXIT_UNSTABLE: u8 = 3;
const EXIT_LEARNING: u8 = 4;
const EXIT_ESTIMATION: u8 = 5;

#[derive(Parser)]
#[command(
    name = "gridlyap",
    version,
    about = "Transient stability assessment of networked microgrids with neural Lyapunov functions"
)]
struct Cli {
    /// Fixed evaluation order everywhere. Runs are always single-threaded, so
    /// this only documents intent.
    #[arg(long, global = true)]
    deterministic: bool,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario file (TOML).
    scenario: PathBuf,
}

#[derive(Args)]
struct OutDir {
    /// Directory for reports and CSV files.
    #[arg(long, short, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Linearize at the equilibrium and check the eigenvalues.
    CheckStability {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[command(flatten)]
        out: OutDir,
    },
    /// Learn a certified Lyapunov function.
    Learn {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[command(flatten)]
        out: OutDir,
    },
    /// Estimate the security region of a saved certificate.
    EstimateRegion {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, short)]
        certificate: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
    /// Integrate the system from an initial condition and write the trajectory.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Name of an initial condition in the scenario.
        #[arg(long, conflicts_with = "x0")]
        initial: Option<String>,
        /// Initial state as comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Output CSV file.
        #[arg(long, short, default_value = "trajectory.csv")]
        out: PathBuf,
    },
    /// Compare the neural region with the quadratic baseline.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, short)]
        certificate: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
    /// Monte-Carlo and trajectory audit of a saved region.
    ValidateRegion {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, short)]
        certificate: PathBuf,
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long, default_value_t = 10_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Stability check, learning and region estimation in one go.
    Run {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[command(flatten)]
        out: OutDir,
    },
}

/// Error carrying the process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Self {
            code: 1,
            error: e.into(),
        }
    }
}

fn fail(code: u8, error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code,
        error: error.into(),
    }
}

fn load(path: &Path) -> Result<(LoadedScenario, NetworkedSystem), Failure> {
    let loaded = Scenario::load(path).map_err(|e| fail(EXIT_PARSE, e))?;
    let sys = loaded
        .scenario
        .build_system()
        .map_err(|e| fail(EXIT_PARSE, e))?;
    Ok((loaded, sys))
}

fn load_certificate(
    path: &Path,
    loaded: &LoadedScenario,
) -> Result<gridlyap::cegis::Certificate<f64>, Failure> {
    let file = CertificateFile::load(path).map_err(|e| fail(EXIT_PARSE, e))?;
    if file.scenario_hash != loaded.hash {
        log::warn!(
            "certificate was learned for a different scenario file (hash {})",
            file.scenario_hash
        );
    }
    file.certificate().map_err(|e| fail(EXIT_PARSE, e))
}

fn pipeline_failure(e: PipelineError, out: &Path) -> Failure {
    match e {
        PipelineError::Unstable { ref report, .. } => {
            eprintln!("eigenvalues of the linearization:");
            for [re, im] in &report.eigenvalues {
                eprintln!("  {re:+.6e} {im:+.6e}i");
            }
            let _ = write_json(&out.join("stability.json"), report);
            fail(EXIT_UNSTABLE, e)
        }
        PipelineError::Learning {
            ref report,
            ref diagnostics,
            ..
        } => {
            let _ = write_json(&out.join("learn_report.json"), report);
            if let Some(d) = diagnostics {
                eprintln!(
                    "last counterexamples: {} ({} with V <= delta, {} with Vdot >= -delta)",
                    d.n_counterexamples, d.n_not_positive, d.n_not_decreasing
                );
                eprintln!("request for tuning user-defined parameters:");
                for r in d.remedies() {
                    eprintln!("  - {r}");
                }
            }
            fail(EXIT_LEARNING, e)
        }
        PipelineError::Region(_) | PipelineError::Baseline(_) | PipelineError::Simulation(_) => {
            fail(EXIT_ESTIMATION, e)
        }
        PipelineError::Linear(_) => fail(1, e),
    }
}

fn write_region_outputs(
    loaded: &LoadedScenario,
    sys: &NetworkedSystem,
    region: &gridlyap::region::SecurityRegion<gridlyap::net::ShiftedNet<f64>>,
    out: &Path,
) -> Result<RegionReport, Failure> {
    let names = sys.state_names();
    let memberships = pipeline::memberships(&loaded.scenario, region);
    let report = RegionReport::neural(region, &loaded.hash, memberships, names.clone());
    write_json(&out.join("region_report.json"), &report)?;
    if region.u > 0.0 && sys.m() >= 2 {
        let origin = vec![0.0; sys.m()];
        let csv = level_set_csv(
            &region.candidate,
            &names,
            0,
            1,
            &origin,
            region.u,
            101,
            |x| region.contains(x),
        );
        write_text(&out.join("levelset_origin_0_1.csv"), &csv)?;
        if let Some(t) = region.touch_points.first() {
            let csv = level_set_csv(&region.candidate, &names, 0, 1, &t.x, region.u, 101, |x| {
                region.contains(x)
            });
            write_text(&out.join("levelset_touch_0_1.csv"), &csv)?;
        }
    }
    Ok(report)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable")
    );
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::CheckStability { scenario, out } => {
            let (loaded, sys) = load(&scenario.scenario)?;
            let report = pipeline::check_stability(&loaded, &sys)?;
            write_json(&out.out_dir.join("stability.json"), &report)?;
            print_json(&report);
            if !report.stable {
                return Err(fail(
                    EXIT_UNSTABLE,
                    anyhow::anyhow!(
                        "equilibrium is not asymptotically stable (spectral abscissa {:e})",
                        report.spectral_abscissa
                    ),
                ));
            }
        }
        Command::Learn { scenario, out } => {
            let (loaded, sys) = load(&scenario.scenario)?;
            let stability = pipeline::check_stability(&loaded, &sys)?;
            if !stability.stable {
                return Err(pipeline_failure(
                    PipelineError::Unstable {
                        abscissa: stability.spectral_abscissa,
                        report: Box::new(stability),
                    },
                    &out.out_dir,
                ));
            }
            let (learned, report) =
                pipeline::learn(&loaded, &sys).map_err(|e| pipeline_failure(e, &out.out_dir))?;
            let file = CertificateFile::new(&learned.certificate, &loaded.hash, sys.state_names());
            file.save(&out.out_dir.join("certificate.json"))?;
            write_json(&out.out_dir.join("learn_report.json"), &report)?;
            println!(
                "certified at u = {} after {} updates (seed {})",
                learned.certificate.u,
                learned.audit.updates(),
                report.seed.unwrap_or_default()
            );
        }
        Command::EstimateRegion {
            scenario,
            certificate,
            out,
        } => {
            let (loaded, sys) = load(&scenario.scenario)?;
            let cert = load_certificate(&certificate, &loaded)?;
            let region = pipeline::estimate_region(&loaded.scenario, &cert, 0)
                .map_err(|e| fail(EXIT_ESTIMATION, e))?;
            let report = write_region_outputs(&loaded, &sys, &region, &out.out_dir)?;
            print_json(&report);
        }
        Command::Simulate {
            scenario,
            initial,
            x0,
            t_end,
            dt,
            out,
        } => {
            let (loaded, sys) = load(&scenario.scenario)?;
            let sc = &loaded.scenario;
            let x0 = match (initial, x0) {
                (Some(name), _) => sc
                    .initial_condition(&name)
                    .with_context(|| format!("no initial condition named {name}"))
                    .map_err(|e| fail(EXIT_PARSE, e))?
                    .to_vec(),
                (None, Some(x)) => x,
                (None, None) => match sc.simulation.initial_conditions.first() {
                    Some(ic) => ic.x0.clone(),
                    None => {
                        return Err(fail(EXIT_PARSE, anyhow::anyhow!("give --x0 or --initial")))
                    }
                },
            };
            if x0.len() != sys.m() {
                return Err(fail(
                    EXIT_PARSE,
                    anyhow::anyhow!(
                        "initial state has {} entries, system has {}",
                        x0.len(),
                        sys.m()
                    ),
                ));
            }
            let (t_def, dt_def) = pipeline::horizon(sc, &sys);
            let tr = integrate(
                &sys,
                &x0,
                t_end.unwrap_or(t_def),
                dt.unwrap_or(dt_def),
                &ConvergenceCriterion::default(),
            )
            .map_err(|e| fail(EXIT_ESTIMATION, e))?;
            write_text(&out, &tr.to_csv(&sys.state_names()))?;
            println!(
                "{} steps written to {}; final norm {:.3e}; converged: {}",
                tr.times.len() - 1,
                out.display(),
                tr.final_norm,
                tr.converged
            );
        }
        Command::Compare {
            scenario,
            certificate,
            out,
        } => {
            let (loaded, sys) = load(&scenario.scenario)?;
            let cert = load_certificate(&certificate, &loaded)?;
            let region = pipeline::estimate_region(&loaded.scenario, &cert, 0)
                .map_err(|e| fail(EXIT_ESTIMATION, e))?;
            let (report, quad) = pipeline::compare(&loaded, &sys, &region)
                .map_err(|e| pipeline_failure(e, &out.out_dir))?;
            let conv =
                RegionReport::conventional(&quad, &loaded.hash, Vec::new(), sys.state_names());
            write_json(&out.out_dir.join("compare_report.json"), &report)?;
            write_json(&out.out_dir.join("conventional_region.json"), &conv)?;
            if sys.m() >= 2 {
                let names = sys.state_names();
                let csv = level_set_csv(
                    &quad.form(),
                    &names,
                    0,
                    1,
                    &vec![0.0; sys.m()],
                    region.u.max(quad.u_q),
                    101,
                    |x| quad.contains(x),
                );
                write_text(&out.out_dir.join("levelset_conventional_0_1.csv"), &csv)?;
            }
            print_json(&report);
            println!("volume ratio (neural / conventional): {:.3}", report.ratio);
        }
        Command::ValidateRegion {
            scenario,
            certificate,
            trajectories,
            mc_samples,
            seed,
            out,
        } => {
            let (loaded, sys) = load(&scenario.scenario)?;
            let cert = load_certificate(&certificate, &loaded)?;
            let region = pipeline::estimate_region(&loaded.scenario, &cert, 0)
                .map_err(|e| fail(EXIT_ESTIMATION, e))?;
            let n_traj = trajectories.unwrap_or(loaded.scenario.compare.validation_trajectories);
            let report = pipeline::validate_region(
                &loaded.scenario,
                &sys,
                &region,
                mc_samples,
                n_traj,
                seed,
                &loaded.hash,
            );
            write_json(&out.out_dir.join("validation_report.json"), &report)?;
            print_json(&report);
            if !report.passed() {
                return Err(fail(
                    EXIT_ESTIMATION,
                    anyhow::anyhow!("region validation found violations"),
                ));
            }
        }
        Command::Run { scenario, out } => {
            let (loaded, sys) = load(&scenario.scenario)?;
            let output =
                pipeline::run(&loaded, &sys).map_err(|e| pipeline_failure(e, &out.out_dir))?;
            write_json(&out.out_dir.join("stability.json"), &output.stability)?;
            CertificateFile::new(&output.learned.certificate, &loaded.hash, sys.state_names())
                .save(&out.out_dir.join("certificate.json"))?;
            write_json(&out.out_dir.join("learn_report.json"), &output.learn_report)?;
            write_region_outputs(&loaded, &sys, &output.region, &out.out_dir)?;
            write_json(&out.out_dir.join("run_summary.json"), &output.summary)?;
            print_json(&output.summary);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if cli.deterministic {
        log::info!("deterministic mode");
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
