//! Jacobian-free Newton-Krylov for small smooth systems `h(z) = 0`.
//!
//! Newton steps solve `J(z) s = −h(z)` with restarted GMRES, where every
//! product `J(z) v` is a central finite difference of `h`. A backtracking
//! line search on `‖h‖₂` globalizes the iteration.

use crate::scalar::norm2;

#[derive(Clone, Debug, PartialEq)]
pub struct NkConfig {
    /// Converged when `‖h‖₂ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative finite-difference step, scaled by `1 + ‖z‖₂`.
    pub fd_eps: f64,
    /// Krylov dimension cap per restart cycle.
    pub max_restart: usize,
    pub max_cycles: usize,
}

impl Default for NkConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            fd_eps: 1e-7,
            max_restart: 20,
            max_cycles: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NkSolution {
    pub z: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum NkError {
    #[error("Newton-Krylov diverged after {iterations} iterations (residual {residual:e})")]
    Diverged { iterations: usize, residual: f64 },
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| a * xi + yi).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Restarted GMRES for `A s = b` with `A` given as an operator.
fn gmres(
    apply: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    b: &[f64],
    restart: usize,
    cycles: usize,
    rtol: f64,
) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return x;
    }
    let k_max = restart.min(n).max(1);
    for _ in 0..cycles {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        if beta <= rtol * bnorm {
            break;
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; k_max]; k_max + 1];
        let mut cs = vec![0.0; k_max];
        let mut sn = vec![0.0; k_max];
        let mut g = vec![0.0; k_max + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..k_max {
            let mut w = apply(&v[k]);
            // modified Gram-Schmidt
            for (i, vi) in v.iter().enumerate() {
                h[i][k] = dot(&w, vi);
                w = axpy(-h[i][k], vi, &w);
            }
            h[k + 1][k] = norm2(&w);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            let hk1 = h[k + 1][k];
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= rtol * bnorm || hk1 == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hk1).collect());
        }
        // back substitution on the k_used × k_used triangle
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = ((i + 1)..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = if h[i][i] != 0.0 {
                (g[i] - s) / h[i][i]
            } else {
                0.0
            };
        }
        for (i, yi) in y.iter().enumerate() {
            x = axpy(*yi, &v[i], &x);
        }
        if g[k_used].abs() <= rtol * bnorm {
            break;
        }
    }
    x
}

/// Solves `h(z) = 0` from `z0`.
pub fn newton_krylov(
    h: impl Fn(&[f64]) -> Vec<f64>,
    z0: &[f64],
    cfg: &NkConfig,
) -> Result<NkSolution, NkError> {
    let mut z = z0.to_vec();
    let mut hz = h(&z);
    let mut res = norm2(&hz);
    for it in 0..=cfg.max_iter {
        if !res.is_finite() {
            return Err(NkError::Diverged {
                iterations: it,
                residual: res,
            });
        }
        if res <= cfg.tol {
            return Ok(NkSolution {
                z,
                iterations: it,
                residual: res,
            });
        }
        if it == cfg.max_iter {
            break;
        }
        let eps = cfg.fd_eps * (1.0 + norm2(&z));
        let mut jv = |v: &[f64]| {
            let vn = norm2(v);
            if vn == 0.0 {
                return vec![0.0; v.len()];
            }
            let e = eps / vn;
            let hp = h(&axpy(e, v, &z));
            let hm = h(&axpy(-e, v, &z));
            hp.iter()
                .zip(&hm)
                .map(|(a, b)| (a - b) / (2.0 * e))
                .collect()
        };
        let rhs: Vec<f64> = hz.iter().map(|v| -v).collect();
        let step = gmres(&mut jv, &rhs, cfg.max_restart, cfg.max_cycles, 1e-12);

        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = axpy(lambda, &step, &z);
            let ht = h(&trial);
            let rt = norm2(&ht);
            if rt.is_finite() && rt <= (1.0 - 1e-4 * lambda) * res {
                z = trial;
                hz = ht;
                res = rt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(NkError::Diverged {
                iterations: it + 1,
                residual: res,
            });
        }
    }
    Err(NkError::Diverged {
        iterations: cfg.max_iter,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_probe_converges_in_one_step() {
        let sol = newton_krylov(|z| vec![z[0] - 1.0], &[0.0], &NkConfig::default()).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!((sol.z[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn solves_a_coupled_nonlinear_system() {
        // x² + y² = 4, x·y = 1
        let h = |z: &[f64]| vec![z[0] * z[0] + z[1] * z[1] - 4.0, z[0] * z[1] - 1.0];
        let sol = newton_krylov(h, &[2.0, 0.3], &NkConfig::default()).unwrap();
        let r = h(&sol.z);
        assert!(norm2(&r) <= 1e-10);
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let a = [[4.0, 1.0, 0.0], [2.0, 3.0, 1.0], [0.0, -1.0, 2.0]];
        let x_true = [1.0, -2.0, 0.5];
        let b: Vec<f64> = a.iter().map(|row| dot(row, &x_true)).collect();
        let mut op = |v: &[f64]| a.iter().map(|row| dot(row, v)).collect::<Vec<_>>();
        let x = gmres(&mut op, &b, 20, 3, 1e-14);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-12);
        }
    }

    #[test]
    fn reports_divergence() {
        // no real root
        let err = newton_krylov(|z| vec![z[0] * z[0] + 1.0], &[0.5], &NkConfig::default());
        assert!(matches!(err, Err(NkError::Diverged { .. })));
    }
}
