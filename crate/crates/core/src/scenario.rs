//! TOML scenario files: the networked system plus every hyperparameter of the
//! learning and estimation pipeline.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::falsifier::FalsifierConfig;
use crate::grid::{
    repair_setpoints, DroopInterface, FixedBus, GridError, Line, NetworkModel, NetworkedSystem,
    Setpoint,
};
use crate::net::TrainConfig;
use crate::nk::NkConfig;
use crate::region::SrConfig;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicrogridSpec {
    pub name: String,
    pub interface: DroopInterface<f64>,
    /// Dispatched angle `δ*` (rad).
    pub delta: f64,
    /// Dispatched voltage magnitude `E*` (p.u.).
    #[serde(default = "one")]
    pub voltage: f64,
    /// Active power setpoint; recomputed when `repair_setpoints` is on.
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub q: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedBusSpec {
    pub name: String,
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "one")]
    pub voltage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub from: String,
    pub to: String,
    pub r: f64,
    pub x: f64,
}

/// Bus admittance matrix in rectangular form, buses ordered microgrids first,
/// then fixed buses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmittanceSpec {
    pub g: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub microgrids: Vec<MicrogridSpec>,
    #[serde(default)]
    pub fixed_buses: Vec<FixedBusSpec>,
    #[serde(default)]
    pub lines: Vec<LineSpec>,
    #[serde(default)]
    pub admittance: Option<AdmittanceSpec>,
    /// Recompute `P*`, `Q*` from `δ*`, `E*` instead of requiring them.
    #[serde(default)]
    pub repair_setpoints: bool,
    #[serde(default = "default_eq_tol")]
    pub eq_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyper {
    pub u: f64,
    /// Hidden width; defaults to `2m`.
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default = "default_q")]
    pub q: usize,
    #[serde(default = "default_r")]
    pub r: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub momentum: f64,
    /// Multiplier applied to the random initial weights.
    #[serde(default = "one")]
    pub init_scale: f64,
    #[serde(default = "default_n_sr")]
    pub n_sr: usize,
    #[serde(default = "default_n_i")]
    pub n_i: usize,
    /// Seeds tried in order until one produces a certificate.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Inner exclusion radius; defaults to `0.1·u`.
    #[serde(default)]
    pub l: Option<f64>,
    #[serde(default = "default_max_cells")]
    pub max_cells: usize,
    #[serde(default = "default_max_ce")]
    pub max_counterexamples: usize,
    #[serde(default = "default_probe")]
    pub probe_samples: usize,
    #[serde(default = "default_local")]
    pub local_search_starts: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    /// Horizon; defaults to 20 times the largest time constant.
    pub t_end: Option<f64>,
    /// Step; defaults to the smallest time constant over 50.
    pub dt: Option<f64>,
    /// Named initial conditions in state coordinates (deviation from the
    /// equilibrium).
    #[serde(default)]
    pub initial_conditions: Vec<InitialCondition>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    pub name: String,
    pub x0: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSpec {
    /// Upper end of the quadratic valid-radius search; defaults to `2u`.
    pub u_max: Option<f64>,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    #[serde(default = "default_trajectories")]
    pub validation_trajectories: usize,
}

impl Default for BaselineSpec {
    fn default() -> Self {
        Self {
            u_max: None,
            mc_samples: default_mc(),
            validation_trajectories: default_trajectories(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub system: SystemSpec,
    pub hyper: Hyper,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub compare: BaselineSpec,
}

fn one() -> f64 {
    1.0
}
fn default_eq_tol() -> f64 {
    1e-8
}
fn default_q() -> usize {
    500
}
fn default_r() -> usize {
    10
}
fn default_eta() -> f64 {
    0.01
}
fn default_tau() -> f64 {
    0.1
}
fn default_n_sr() -> usize {
    100
}
fn default_n_i() -> usize {
    5000
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_delta() -> f64 {
    1e-3
}
fn default_max_cells() -> usize {
    4_000_000
}
fn default_max_ce() -> usize {
    64
}
fn default_probe() -> usize {
    4096
}
fn default_local() -> usize {
    16
}
fn default_mc() -> usize {
    100_000
}
fn default_trajectories() -> usize {
    100
}

/// Parsed scenario together with the hash of its source text.
#[derive(Clone, Debug)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub hash: String,
}

pub fn scenario_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl Scenario {
    pub fn parse(text: &str) -> Result<LoadedScenario, ScenarioError> {
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(LoadedScenario {
            scenario,
            hash: scenario_hash(text),
        })
    }

    pub fn load(path: &Path) -> Result<LoadedScenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.system.microgrids.is_empty() {
            return bad("at least one microgrid is required".into());
        }
        if self.system.lines.is_empty() == self.system.admittance.is_none() {
            return bad("give exactly one of `lines` or `admittance`".into());
        }
        let h = &self.hyper;
        if !(h.u > 0.0 && h.u.is_finite()) {
            return bad(format!("u must be positive, got {}", h.u));
        }
        if h.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if !(h.init_scale > 0.0 && h.init_scale.is_finite()) {
            return bad(format!("init_scale must be positive, got {}", h.init_scale));
        }
        if !(0.0..1.0).contains(&h.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", h.momentum));
        }
        if h.q == 0 || h.n_sr == 0 {
            return bad("q and n_sr must be positive".into());
        }
        if !self.system.repair_setpoints {
            for mg in &self.system.microgrids {
                if mg.p.is_none() || mg.q.is_none() {
                    return bad(format!(
                        "microgrid {} needs p and q unless repair_setpoints = true",
                        mg.name
                    ));
                }
            }
        }
        Ok(())
    }

    fn bus_index(&self) -> HashMap<&str, usize> {
        self.system
            .microgrids
            .iter()
            .map(|m| m.name.as_str())
            .chain(self.system.fixed_buses.iter().map(|b| b.name.as_str()))
            .enumerate()
            .map(|(i, n)| (n, i))
            .collect()
    }

    /// Assembles the networked system, repairing setpoints when requested.
    pub fn build_system(&self) -> Result<NetworkedSystem<f64>, ScenarioError> {
        let sys = &self.system;
        let n_buses = sys.microgrids.len() + sys.fixed_buses.len();
        let index = self.bus_index();
        if index.len() != n_buses {
            return Err(ScenarioError::Invalid("bus names must be unique".into()));
        }
        let network = if let Some(adm) = &sys.admittance {
            if adm.g.len() != n_buses || adm.b.len() != n_buses {
                return Err(ScenarioError::Invalid(format!(
                    "admittance must be {n_buses}x{n_buses}"
                )));
            }
            let y: Vec<Vec<num_complex::Complex<f64>>> = adm
                .g
                .iter()
                .zip(&adm.b)
                .map(|(gr, br)| {
                    gr.iter()
                        .zip(br)
                        .map(|(g, b)| num_complex::Complex::new(*g, *b))
                        .collect()
                })
                .collect();
            NetworkModel::from_admittance(&y)?
        } else {
            let mut lines = Vec::new();
            for l in &sys.lines {
                let lookup = |n: &str| {
                    index.get(n).copied().ok_or_else(|| {
                        ScenarioError::Invalid(format!("line references unknown bus {n}"))
                    })
                };
                lines.push(Line {
                    from: lookup(&l.from)?,
                    to: lookup(&l.to)?,
                    r: l.r,
                    x: l.x,
                });
            }
            NetworkModel::from_lines(n_buses, &lines)?
        };
        let interfaces: Vec<DroopInterface<f64>> =
            sys.microgrids.iter().map(|m| m.interface).collect();
        let fixed: Vec<FixedBus<f64>> = sys
            .fixed_buses
            .iter()
            .map(|b| FixedBus {
                delta: b.delta,
                voltage: b.voltage,
            })
            .collect();
        let mut setpoints: Vec<Setpoint<f64>> = sys
            .microgrids
            .iter()
            .map(|m| Setpoint {
                delta: m.delta,
                voltage: m.voltage,
                p: m.p.unwrap_or(0.0),
                q: m.q.unwrap_or(0.0),
            })
            .collect();
        if sys.repair_setpoints {
            setpoints = repair_setpoints(&interfaces, &setpoints, &fixed, &network)?;
        }
        let names = sys.microgrids.iter().map(|m| m.name.clone()).collect();
        Ok(
            NetworkedSystem::assemble(interfaces, setpoints, fixed, network, sys.eq_tol)?
                .with_names(names),
        )
    }

    /// Hidden width after defaulting.
    pub fn hidden_width(&self, m: usize) -> usize {
        self.hyper.p.unwrap_or(2 * m)
    }

    pub fn train_config(&self, m: usize, seed: u64) -> TrainConfig<f64> {
        let h = &self.hyper;
        TrainConfig {
            alpha: h.alpha,
            beta: h.beta,
            gamma: h.gamma,
            tau: h.tau,
            eta: h.eta,
            r: h.r,
            p: self.hidden_width(m),
            seed,
            q: h.q,
            momentum: h.momentum,
        }
    }

    pub fn falsifier_config(&self, seed: u64) -> FalsifierConfig {
        let h = &self.hyper;
        FalsifierConfig {
            u: h.u,
            l: h.l.unwrap_or(0.1 * h.u),
            delta: h.delta,
            max_cells: h.max_cells,
            max_counterexamples: h.max_counterexamples,
            probe_samples: h.probe_samples,
            local_search_starts: h.local_search_starts,
            seed,
        }
    }

    pub fn sr_config(&self, seed: u64) -> SrConfig {
        SrConfig::new(self.hyper.n_sr, seed)
    }

    pub fn nk_config(&self) -> NkConfig {
        NkConfig::default()
    }

    pub fn u_max(&self) -> f64 {
        self.compare.u_max.unwrap_or(2.0 * self.hyper.u)
    }

    pub fn initial_condition(&self, name: &str) -> Option<&[f64]> {
        self.simulation
            .initial_conditions
            .iter()
            .find(|ic| ic.name == name)
            .map(|ic| ic.x0.as_slice())
    }
}
