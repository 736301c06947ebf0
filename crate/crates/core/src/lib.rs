//! Transient stability assessment for networked droop-controlled microgrids.
//!
//! The crate models the interface dynamics of microgrids coupled through a
//! distribution network, learns a neural Lyapunov function with a
//! counterexample-guided loop backed by an interval falsifier, and estimates
//! the largest sublevel set of that function that fits inside the ball where
//! the Lyapunov conditions were verified.
//!
//! Numerical code is generic over [`Real`] (`f32`, `f64`); the aliases at the
//! bottom of this file pin the common `f64` instantiations.

pub mod baseline;
pub mod candidate;
pub mod cegis;
pub mod dual;
pub mod falsifier;
pub mod field;
pub mod grid;
pub mod interval;
pub mod linalg;
pub mod linear;
pub mod net;
pub mod nk;
pub mod pipeline;
pub mod region;
pub mod report;
pub mod scalar;
pub mod scenario;
pub mod simulate;

pub use dual::Dual;
pub use field::{LinearField, VectorField};
pub use grid::{
    repair_setpoints, DroopInterface, FixedBus, GridError, Line, NetworkModel, Setpoint, StateRole,
    StateSlot,
};
pub use interval::Interval;
pub use linalg::{LinalgError, Matrix};
pub use scalar::{Real, Scalar};

pub type NetworkedSystem<F = f64> = grid::NetworkedSystem<F>;

pub use candidate::Candidate;
pub use cegis::{learn_function, LearnError};
pub use falsifier::{falsify, FalsifierConfig, FalsifierError};
pub use region::{sr_est, RegionError};
pub use scenario::{LoadedScenario, Scenario, ScenarioError};

pub type NetParams = net::NetParams<f64>;
pub type ShiftedNet = net::ShiftedNet<f64>;
pub type TrainConfig = net::TrainConfig<f64>;
pub type Certificate = cegis::Certificate<f64>;
pub type Learned = cegis::Learned<f64>;
pub type Trajectory = simulate::Trajectory<f64>;
pub type SecurityRegion = region::SecurityRegion<net::ShiftedNet<f64>>;
