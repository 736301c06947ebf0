//! Networked microgrids with droop-controlled interfaces.
//!
//! Each microgrid is seen from the distribution network through its
//! power-electronic interface at the point of common coupling. Interfaces
//! follow one of three droop laws:
//!
//! * full angle droop: `M_a δ̇' + δ' = D_a (P* − P)`, `M_v Ė' + E' = D_v (Q* − Q)`
//! * reduced angle droop (voltage frozen at `E*`): only the angle equation
//! * frequency droop: `δ̇' = ω'`, `M_f ω̇' + D_f ω' = P* − P`
//!
//! The network couples the interfaces through the bus admittance matrix:
//!
//! ```text
//! P_k =  G_kk E_k² + Σ_{i≠k} E_k E_i Y_ki cos(δ_k − δ_i − σ_ki)
//! Q_k = −B_kk E_k² + Σ_{i≠k} E_k E_i Y_ki sin(δ_k − δ_i − σ_ki)
//! ```
//!
//! The state vector holds deviations from the dispatched setpoint, so the
//! equilibrium sits at the origin. Its layout is fixed: all angle deviations
//! in microgrid order, then voltage deviations, then frequency deviations.
//! Buses with a fixed voltage phasor (an upstream grid, say) take part in the
//! network but carry no state.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::field::VectorField;
use crate::linalg::Matrix;
use crate::scalar::{Real, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DroopInterface<F> {
    AngleDroopFull { m_a: F, d_a: F, m_v: F, d_v: F },
    AngleDroopReduced { m_a: F, d_a: F },
    FrequencyDroop { m_f: F, d_f: F },
}

impl<F: Real> DroopInterface<F> {
    fn constants(&self) -> Vec<(&'static str, F)> {
        match *self {
            Self::AngleDroopFull { m_a, d_a, m_v, d_v } => {
                vec![("M_a", m_a), ("D_a", d_a), ("M_v", m_v), ("D_v", d_v)]
            }
            Self::AngleDroopReduced { m_a, d_a } => vec![("M_a", m_a), ("D_a", d_a)],
            Self::FrequencyDroop { m_f, d_f } => vec![("M_f", m_f), ("D_f", d_f)],
        }
    }

    /// Largest time constant of the interface (s).
    pub fn max_time_constant(&self) -> F {
        match *self {
            Self::AngleDroopFull { m_a, m_v, .. } => m_a.max(m_v),
            Self::AngleDroopReduced { m_a, .. } => m_a,
            Self::FrequencyDroop { m_f, d_f } => m_f / d_f,
        }
    }

    /// Smallest time constant of the interface (s).
    pub fn min_time_constant(&self) -> F {
        match *self {
            Self::AngleDroopFull { m_a, m_v, .. } => m_a.min(m_v),
            Self::AngleDroopReduced { m_a, .. } => m_a,
            Self::FrequencyDroop { m_f, d_f } => m_f / d_f,
        }
    }
}

/// Dispatched operating point of one interface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Setpoint<F> {
    pub delta: F,
    pub voltage: F,
    pub p: F,
    pub q: F,
}

/// Bus whose voltage phasor is held fixed (infinite bus).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedBus<F> {
    pub delta: F,
    pub voltage: F,
}

/// Series branch between two buses, in per unit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Line<F> {
    pub from: usize,
    pub to: usize,
    pub r: F,
    pub x: F,
}

/// Admittance data consumed by the power-flow coupling.
///
/// Buses `0..n_microgrids` are the interfaces, the remaining ones are fixed
/// buses.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel<F> {
    pub y_mag: Matrix<F>,
    pub y_ang: Matrix<F>,
    pub g_diag: Vec<F>,
    pub b_diag: Vec<F>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("setpoints violate the equilibrium power flow: residual {residual:e} at bus {bus}")]
    EquilibriumInconsistent { residual: f64, bus: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl<F: Real> NetworkModel<F> {
    pub fn n_buses(&self) -> usize {
        self.g_diag.len()
    }

    /// Standard bus-admittance assembly from series branches.
    pub fn from_lines(n_buses: usize, lines: &[Line<F>]) -> Result<Self, GridError> {
        let mut y = vec![vec![Complex::new(F::zero(), F::zero()); n_buses]; n_buses];
        for (idx, line) in lines.iter().enumerate() {
            if line.from >= n_buses || line.to >= n_buses {
                return Err(GridError::InvalidParameter(format!(
                    "line {idx} references bus outside 0..{n_buses}"
                )));
            }
            if line.from == line.to {
                return Err(GridError::InvalidParameter(format!(
                    "line {idx} is a self loop"
                )));
            }
            let z = Complex::new(line.r, line.x);
            if z.norm_sqr() == F::zero() {
                return Err(GridError::InvalidParameter(format!(
                    "line {idx} has zero impedance"
                )));
            }
            let ys = Complex::new(F::one(), F::zero()) / z;
            let (a, b) = (line.from, line.to);
            y[a][a] = y[a][a] + ys;
            y[b][b] = y[b][b] + ys;
            y[a][b] = y[a][b] - ys;
            y[b][a] = y[b][a] - ys;
        }
        Self::from_admittance(&y)
    }

    /// Splits a complex bus admittance matrix into magnitude/angle form.
    pub fn from_admittance(y: &[Vec<Complex<F>>]) -> Result<Self, GridError> {
        let n = y.len();
        for row in y {
            if row.len() != n {
                return Err(GridError::DimensionMismatch {
                    what: "admittance row",
                    expected: n,
                    found: row.len(),
                });
            }
        }
        let mut y_mag = Matrix::zeros(n, n);
        let mut y_ang = Matrix::zeros(n, n);
        for k in 0..n {
            for i in 0..n {
                if i == k {
                    continue;
                }
                let v = y[k][i];
                let mag = (v.re * v.re + v.im * v.im).sqrt();
                y_mag[(k, i)] = mag;
                y_ang[(k, i)] = if mag == F::zero() {
                    F::zero()
                } else {
                    v.im.atan2(v.re)
                };
            }
        }
        let model = Self {
            y_mag,
            y_ang,
            g_diag: (0..n).map(|k| y[k][k].re).collect(),
            b_diag: (0..n).map(|k| y[k][k].im).collect(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let n = self.n_buses();
        for (what, len) in [
            ("y_mag rows", self.y_mag.rows()),
            ("y_mag cols", self.y_mag.cols()),
            ("y_ang rows", self.y_ang.rows()),
            ("y_ang cols", self.y_ang.cols()),
            ("b_diag", self.b_diag.len()),
        ] {
            if len != n {
                return Err(GridError::DimensionMismatch {
                    what,
                    expected: n,
                    found: len,
                });
            }
        }
        let tol = F::c(1e-12) * (F::one() + self.y_mag.max_abs());
        for k in 0..n {
            if self.y_mag[(k, k)] != F::zero() {
                return Err(GridError::InvalidParameter(format!(
                    "admittance magnitude diagonal must be zero (bus {k})"
                )));
            }
            for i in 0..n {
                let a = self.y_mag[(k, i)];
                if !(a >= F::zero()) || !a.is_finite() {
                    return Err(GridError::InvalidParameter(format!(
                        "admittance magnitude ({k},{i}) must be finite and nonnegative"
                    )));
                }
                if (a - self.y_mag[(i, k)]).abs() > tol
                    || (self.y_ang[(k, i)] - self.y_ang[(i, k)]).abs() > tol
                {
                    return Err(GridError::InvalidParameter(format!(
                        "admittance entries ({k},{i}) and ({i},{k}) differ"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateRole {
    AngleDev,
    VoltageDev,
    FreqDev,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSlot {
    pub microgrid: usize,
    pub role: StateRole,
}

/// One nonzero off-diagonal admittance seen from microgrid `k`.
#[derive(Clone, Copy, Debug)]
struct Coupling<F> {
    other: usize,
    y: F,
    /// `δ*_k − δ*_i − σ_ki`
    phase: F,
}

/// Assembled model `ẋ = f(x)` of `n` networked microgrids.
///
/// Immutable once assembled; evaluation is a pure function of the state.
#[derive(Clone, Debug)]
pub struct NetworkedSystem<F> {
    interfaces: Vec<DroopInterface<F>>,
    setpoints: Vec<Setpoint<F>>,
    fixed_buses: Vec<FixedBus<F>>,
    network: NetworkModel<F>,
    names: Vec<String>,
    layout: Vec<StateSlot>,
    angle_idx: Vec<usize>,
    voltage_idx: Vec<Option<usize>>,
    freq_idx: Vec<Option<usize>>,
    couplings: Vec<Vec<Coupling<F>>>,
}

impl<F: Real> NetworkedSystem<F> {
    /// Builds the system and checks that the origin is an equilibrium.
    pub fn assemble(
        interfaces: Vec<DroopInterface<F>>,
        setpoints: Vec<Setpoint<F>>,
        fixed_buses: Vec<FixedBus<F>>,
        network: NetworkModel<F>,
        eq_tol: F,
    ) -> Result<Self, GridError> {
        let n = interfaces.len();
        if setpoints.len() != n {
            return Err(GridError::DimensionMismatch {
                what: "setpoints",
                expected: n,
                found: setpoints.len(),
            });
        }
        if network.n_buses() != n + fixed_buses.len() {
            return Err(GridError::DimensionMismatch {
                what: "network buses",
                expected: n + fixed_buses.len(),
                found: network.n_buses(),
            });
        }
        network.validate()?;
        for (k, iface) in interfaces.iter().enumerate() {
            for (name, v) in iface.constants() {
                if !(v > F::zero()) || !v.is_finite() {
                    return Err(GridError::InvalidParameter(format!(
                        "{name} of microgrid {k} must be strictly positive"
                    )));
                }
            }
        }
        for (k, sp) in setpoints.iter().enumerate() {
            if !(sp.voltage > F::zero()) {
                return Err(GridError::InvalidParameter(format!(
                    "setpoint voltage of microgrid {k} must be positive"
                )));
            }
        }
        for (k, fb) in fixed_buses.iter().enumerate() {
            if !(fb.voltage > F::zero()) {
                return Err(GridError::InvalidParameter(format!(
                    "voltage of fixed bus {k} must be positive"
                )));
            }
        }

        let mut layout = Vec::new();
        let angle_idx: Vec<usize> = (0..n)
            .map(|k| {
                layout.push(StateSlot {
                    microgrid: k,
                    role: StateRole::AngleDev,
                });
                layout.len() - 1
            })
            .collect();
        let voltage_idx: Vec<Option<usize>> = interfaces
            .iter()
            .enumerate()
            .map(|(k, iface)| {
                matches!(iface, DroopInterface::AngleDroopFull { .. }).then(|| {
                    layout.push(StateSlot {
                        microgrid: k,
                        role: StateRole::VoltageDev,
                    });
                    layout.len() - 1
                })
            })
            .collect();
        let freq_idx: Vec<Option<usize>> = interfaces
            .iter()
            .enumerate()
            .map(|(k, iface)| {
                matches!(iface, DroopInterface::FrequencyDroop { .. }).then(|| {
                    layout.push(StateSlot {
                        microgrid: k,
                        role: StateRole::FreqDev,
                    });
                    layout.len() - 1
                })
            })
            .collect();

        let bus_delta = |i: usize| {
            if i < n {
                setpoints[i].delta
            } else {
                fixed_buses[i - n].delta
            }
        };
        let couplings = (0..n)
            .map(|k| {
                (0..network.n_buses())
                    .filter(|&i| i != k && network.y_mag[(k, i)] != F::zero())
                    .map(|i| Coupling {
                        other: i,
                        y: network.y_mag[(k, i)],
                        phase: bus_delta(k) - bus_delta(i) - network.y_ang[(k, i)],
                    })
                    .collect()
            })
            .collect();

        let system = Self {
            names: (0..n).map(|k| format!("MG{}", k + 1)).collect(),
            interfaces,
            setpoints,
            fixed_buses,
            network,
            layout,
            angle_idx,
            voltage_idx,
            freq_idx,
            couplings,
        };

        let (residual, bus) = system.equilibrium_residual();
        if !(residual <= eq_tol) {
            return Err(GridError::EquilibriumInconsistent {
                residual: residual.to_f64(),
                bus,
            });
        }
        Ok(system)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.interfaces.len());
        self.names = names;
        self
    }

    /// Number of microgrids.
    pub fn n(&self) -> usize {
        self.interfaces.len()
    }

    /// State dimension.
    pub fn m(&self) -> usize {
        self.layout.len()
    }

    pub fn interfaces(&self) -> &[DroopInterface<F>] {
        &self.interfaces
    }

    pub fn setpoints(&self) -> &[Setpoint<F>] {
        &self.setpoints
    }

    pub fn fixed_buses(&self) -> &[FixedBus<F>] {
        &self.fixed_buses
    }

    pub fn network(&self) -> &NetworkModel<F> {
        &self.network
    }

    pub fn state_layout(&self) -> &[StateSlot] {
        &self.layout
    }

    pub fn angle_index(&self, microgrid: usize) -> usize {
        self.angle_idx[microgrid]
    }

    pub fn microgrid_names(&self) -> &[String] {
        &self.names
    }

    /// Human-readable state names in layout order, e.g. `delta_MG1`.
    pub fn state_names(&self) -> Vec<String> {
        self.layout
            .iter()
            .map(|slot| {
                let prefix = match slot.role {
                    StateRole::AngleDev => "delta",
                    StateRole::VoltageDev => "E",
                    StateRole::FreqDev => "omega",
                };
                format!("{prefix}_{}", self.names[slot.microgrid])
            })
            .collect()
    }

    pub fn max_time_constant(&self) -> F {
        self.interfaces
            .iter()
            .map(DroopInterface::max_time_constant)
            .fold(F::zero(), F::max)
    }

    pub fn min_time_constant(&self) -> F {
        self.interfaces
            .iter()
            .map(DroopInterface::min_time_constant)
            .fold(F::c(f64::INFINITY), F::min)
    }

    /// Largest absolute mismatch of the equilibrium power-flow equations at
    /// the setpoints, and the microgrid where it occurs.
    pub fn equilibrium_residual(&self) -> (F, usize) {
        let zero = vec![F::zero(); self.m()];
        let pq = self.power_injection(&zero);
        let mut worst = (F::zero(), 0);
        for (k, ((p, q), sp)) in pq.iter().zip(&self.setpoints).enumerate() {
            let r = (sp.p - *p).abs().max((sp.q - *q).abs());
            if r > worst.0 || !r.is_finite() {
                worst = (r, k);
            }
        }
        worst
    }

    /// Voltage magnitude of every interface at state `x`.
    fn voltages<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        (0..self.n())
            .map(|k| {
                let e = T::from_f64(self.setpoints[k].voltage.to_f64());
                match self.voltage_idx[k] {
                    Some(j) => e + x[j].clone(),
                    None => e,
                }
            })
            .collect()
    }

    /// Real and reactive power injected at every interface for state `x`.
    pub fn power_injection<T: Scalar>(&self, x: &[T]) -> Vec<(T, T)> {
        assert_eq!(x.len(), self.m(), "state dimension");
        let n = self.n();
        let volts = self.voltages(x);
        (0..n)
            .map(|k| {
                let ek = volts[k].clone();
                let ek2 = ek.clone().sqr();
                let mut p = ek2.clone().scale(self.network.g_diag[k].to_f64());
                let mut q = ek2.scale(-self.network.b_diag[k].to_f64());
                for c in &self.couplings[k] {
                    let (arg, ei) = if c.other < n {
                        let d = x[self.angle_idx[k]].clone() - x[self.angle_idx[c.other]].clone();
                        (d + T::from_f64(c.phase.to_f64()), volts[c.other].clone())
                    } else {
                        let fb = &self.fixed_buses[c.other - n];
                        (
                            x[self.angle_idx[k]].clone() + T::from_f64(c.phase.to_f64()),
                            T::from_f64(fb.voltage.to_f64()),
                        )
                    };
                    let mag = (ek.clone() * ei).scale(c.y.to_f64());
                    p = p + mag.clone() * arg.clone().cos();
                    q = q + mag * arg.sin();
                }
                (p, q)
            })
            .collect()
    }

    /// Time derivative of the state.
    pub fn dynamics<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let pq = self.power_injection(x);
        let mut out = vec![T::zero(); self.m()];
        for (k, iface) in self.interfaces.iter().enumerate() {
            let sp = &self.setpoints[k];
            let (p, q) = pq[k].clone();
            let dp = T::from_f64(sp.p.to_f64()) - p;
            let ia = self.angle_idx[k];
            match *iface {
                DroopInterface::AngleDroopFull { m_a, d_a, m_v, d_v } => {
                    let iv = self.voltage_idx[k].expect("full droop has a voltage state");
                    let dq = T::from_f64(sp.q.to_f64()) - q;
                    out[ia] = (dp.scale(d_a.to_f64()) - x[ia].clone()).scale(1.0 / m_a.to_f64());
                    out[iv] = (dq.scale(d_v.to_f64()) - x[iv].clone()).scale(1.0 / m_v.to_f64());
                }
                DroopInterface::AngleDroopReduced { m_a, d_a } => {
                    out[ia] = (dp.scale(d_a.to_f64()) - x[ia].clone()).scale(1.0 / m_a.to_f64());
                }
                DroopInterface::FrequencyDroop { m_f, d_f } => {
                    let iw = self.freq_idx[k].expect("frequency droop has a frequency state");
                    out[ia] = x[iw].clone();
                    out[iw] = (dp - x[iw].clone().scale(d_f.to_f64())).scale(1.0 / m_f.to_f64());
                }
            }
        }
        out
    }
}

impl<F: Real> VectorField for NetworkedSystem<F> {
    fn dim(&self) -> usize {
        self.m()
    }

    fn eval<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        self.dynamics(x)
    }
}

/// Recomputes `P*`, `Q*` from the dispatched angles and voltages so that the
/// setpoints satisfy the equilibrium power flow exactly.
pub fn repair_setpoints<F: Real>(
    interfaces: &[DroopInterface<F>],
    setpoints: &[Setpoint<F>],
    fixed_buses: &[FixedBus<F>],
    network: &NetworkModel<F>,
) -> Result<Vec<Setpoint<F>>, GridError> {
    // Assemble with an infinite tolerance just to reuse the injection code.
    let probe = NetworkedSystem::assemble(
        interfaces.to_vec(),
        setpoints.to_vec(),
        fixed_buses.to_vec(),
        network.clone(),
        F::c(f64::INFINITY),
    )?;
    let zero = vec![F::zero(); probe.m()];
    Ok(probe
        .power_injection(&zero)
        .into_iter()
        .zip(setpoints)
        .map(|((p, q), sp)| Setpoint { p, q, ..*sp })
        .collect())
}
