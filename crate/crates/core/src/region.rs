//! Security-region estimation.
//!
//! The largest sublevel set `{V < d}` that fits inside the ball `‖x‖ < u`
//! has `d* = min_{‖x‖=u} V(x)`. The minimizer is a critical point of the
//! Lagrangian `V(x) + φ(‖x‖² − u²)`, i.e. a root of
//!
//! ```text
//! h(x, φ) = ( ∂V/∂x + 2φx ,  ‖x‖² − u² )
//! ```
//!
//! Roots are found by Newton-Krylov from random starts on the sphere, then
//! deduplicated; `d*` is the smallest `V` among them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::candidate::Candidate;
use crate::net::{uniform_on_sphere, NetParams};
use crate::nk::{newton_krylov, NkConfig};
use crate::scalar::{norm2, norm_inf, Real};

/// `∂V/∂x = (1 − V²) · W2 · Λ · W1` with `Λ = diag(1 − tanh²(W1 x + b1))`.
pub fn v_gradient<F: Real>(theta: &NetParams<F>, x: &[F]) -> Vec<F> {
    theta.gradient(x)
}

/// Residual of the Lagrange conditions on the sphere of radius `u`.
pub struct CriticalSystem<'a, C> {
    pub candidate: &'a C,
    pub u: f64,
}

impl<'a, C: Candidate> CriticalSystem<'a, C> {
    pub fn new(candidate: &'a C, u: f64) -> Self {
        Self { candidate, u }
    }

    /// `z = (x, φ)`.
    pub fn residual(&self, z: &[f64]) -> Vec<f64> {
        let m = self.candidate.dim();
        let (x, phi) = (&z[..m], z[m]);
        let g: Vec<f64> = self.candidate.gradient(x);
        let mut out: Vec<f64> = g
            .iter()
            .zip(x)
            .map(|(gi, xi)| gi + 2.0 * phi * xi)
            .collect();
        out.push(x.iter().map(|v| v * v).sum::<f64>() - self.u * self.u);
        out
    }
}

pub fn critical_system<C: Candidate>(candidate: &C, u: f64) -> CriticalSystem<'_, C> {
    CriticalSystem::new(candidate, u)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub x: Vec<f64>,
    pub phi: f64,
    pub value: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultistartStats {
    pub starts: usize,
    pub converged: usize,
    pub diverged: usize,
    pub distinct: usize,
}

/// `S = {x : ‖x‖ < u, V(x) < d*}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityRegion<C> {
    pub candidate: C,
    pub u: f64,
    pub d_star: f64,
    pub touch_points: Vec<CriticalPoint>,
    pub critical_set: Vec<CriticalPoint>,
    pub stats: MultistartStats,
}

impl<C: Candidate> SecurityRegion<C> {
    pub fn contains(&self, x: &[f64]) -> bool {
        contains(self, x)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.candidate.value(x)
    }
}

pub fn contains<C: Candidate>(region: &SecurityRegion<C>, x: &[f64]) -> bool {
    let v: f64 = region.candidate.value(x);
    norm2(x) < region.u && v < region.d_star
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrConfig {
    pub n_sr: usize,
    pub seed: u64,
    /// Two critical points closer than this in the ∞-norm are the same.
    pub dedup_tol: f64,
    /// `φ0` is drawn from `[−phi_range, phi_range]`.
    pub phi_range: f64,
    /// Acceptance threshold on both residual blocks.
    pub accept_tol: f64,
}

impl SrConfig {
    pub fn new(n_sr: usize, seed: u64) -> Self {
        Self {
            n_sr,
            seed,
            dedup_tol: 1e-5,
            phi_range: 2.0,
            accept_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegionError {
    #[error("none of the {starts} Newton-Krylov starts converged; raise n_sr")]
    NoCriticalPoints { starts: usize },
    #[error("minimum of V on the sphere is {d_star:e}, not positive; the function is not a valid certificate on this ball")]
    NonPositiveLevel { d_star: f64 },
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Multistart search for the critical points of `V` on the sphere of radius
/// `u` and the resulting level `d*`.
pub fn sr_est<C: Candidate + Clone>(
    candidate: &C,
    u: f64,
    cfg: &SrConfig,
    nk: &NkConfig,
) -> Result<SecurityRegion<C>, RegionError> {
    let m = candidate.dim();
    let sys = CriticalSystem::new(candidate, u);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut found = Vec::new();
    let mut diverged = 0;
    for _ in 0..cfg.n_sr {
        let mut z: Vec<f64> = uniform_on_sphere(&mut rng, m, u);
        z.push(rng.random_range(-cfg.phi_range..=cfg.phi_range));
        match newton_krylov(|z| sys.residual(z), &z, nk) {
            Ok(sol) => {
                let r = sys.residual(&sol.z);
                let stationarity = norm2(&r[..m]);
                let sphere = r[m].abs();
                if stationarity <= cfg.accept_tol && sphere <= cfg.accept_tol {
                    let x = sol.z[..m].to_vec();
                    found.push(CriticalPoint {
                        value: candidate.value(&x),
                        x,
                        phi: sol.z[m],
                        residual: stationarity.max(sphere),
                    });
                } else {
                    diverged += 1;
                }
            }
            Err(_) => diverged += 1,
        }
    }
    let converged = found.len();
    if found.is_empty() {
        return Err(RegionError::NoCriticalPoints { starts: cfg.n_sr });
    }
    found.sort_by(|a, b| lex_cmp(&a.x, &b.x));
    let mut distinct: Vec<CriticalPoint> = Vec::new();
    for p in found {
        let dup = distinct.iter().any(|q| {
            let d: Vec<f64> = p.x.iter().zip(&q.x).map(|(a, b)| a - b).collect();
            norm_inf(&d) <= cfg.dedup_tol
        });
        if !dup {
            distinct.push(p);
        }
    }
    let d_star = distinct
        .iter()
        .map(|p| p.value)
        .fold(f64::INFINITY, f64::min);
    if !(d_star > 0.0) {
        return Err(RegionError::NonPositiveLevel { d_star });
    }
    let touch_points = distinct
        .iter()
        .filter(|p| p.value <= d_star + 1e-9)
        .cloned()
        .collect();
    Ok(SecurityRegion {
        candidate: candidate.clone(),
        u,
        d_star,
        touch_points,
        stats: MultistartStats {
            starts: cfg.n_sr,
            converged,
            diverged,
            distinct: distinct.len(),
        },
        critical_set: distinct,
    })
}

/// Dense boundary sweep used to cross-check `d*`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub d_grid: f64,
    pub argmin: Vec<f64>,
    /// Upper bound on `d_grid − min_{‖x‖=u} V`, when a gradient bound is
    /// available.
    pub error_bound: Option<f64>,
    pub points: usize,
}

/// Minimum of `V` over a grid on the cube surface `‖y‖∞ = 1` projected to
/// the sphere of radius `u`. Intended for `m ≤ 4`.
pub fn boundary_sweep_oracle<C: Candidate>(candidate: &C, u: f64, n_grid: usize) -> SweepResult {
    let m = candidate.dim();
    assert!(m <= 4, "boundary sweep is only meant for m <= 4");
    assert!(n_grid >= 2);
    let mut best = (f64::INFINITY, vec![0.0; m]);
    let mut count = 0usize;
    let free = m - 1;
    let total = n_grid.pow(free as u32);
    let mut y = vec![0.0; m];
    for axis in 0..m {
        for sign in [-1.0, 1.0] {
            for idx in 0..total {
                let mut rest = idx;
                let mut slot = 0;
                for (k, yk) in y.iter_mut().enumerate() {
                    if k == axis {
                        *yk = sign;
                        continue;
                    }
                    let i = rest % n_grid;
                    rest /= n_grid;
                    *yk = -1.0 + 2.0 * i as f64 / (n_grid - 1) as f64;
                    slot += 1;
                }
                debug_assert_eq!(slot, free);
                let n = norm2(&y);
                let x: Vec<f64> = y.iter().map(|v| v * u / n).collect();
                let v: f64 = candidate.value(&x);
                count += 1;
                if v < best.0 {
                    best = (v, x);
                }
            }
        }
    }
    // Every sphere point lies within u·√(m−1)/(n−1) of a projected grid
    // point: the face grid spacing is 2/(n−1) and the radial projection
    // from the cube surface is u-Lipschitz.
    let spacing = u * (free.max(1) as f64).sqrt() / (n_grid - 1) as f64;
    SweepResult {
        d_grid: best.0,
        argmin: best.1,
        error_bound: candidate.gradient_bound(u).map(|g| g * spacing),
        points: count,
    }
}
