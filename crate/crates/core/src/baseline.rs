//! Conventional comparison: a quadratic Lyapunov function `xᵀPx` from the
//! linearization, with its own valid radius and sublevel region.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::candidate::QuadraticForm;
use crate::falsifier::{falsify, FalsifierConfig, FalsifierError};
use crate::field::VectorField;
use crate::linalg::{eigenvalues, solve, symmetric_eigenvalues, LinalgError, Matrix};
use crate::scalar::norm2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BaselineError {
    #[error("A is not Hurwitz (spectral abscissa {abscissa:e})")]
    NotHurwitz { abscissa: f64 },
    #[error("P is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("no radius above {resolution:e} passed the decrease check")]
    NoValidRadius { resolution: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("falsifier: {0}")]
    Falsifier(FalsifierError),
}

/// Solves `AᵀP + PA = −Q` for symmetric `P` through the Kronecker form.
pub fn solve_lyapunov_equation(
    a: &Matrix<f64>,
    q: &Matrix<f64>,
) -> Result<Matrix<f64>, BaselineError> {
    let eig: Vec<Complex<f64>> = eigenvalues(a)?;
    let abscissa = eig.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    if !(abscissa < 0.0) {
        return Err(BaselineError::NotHurwitz { abscissa });
    }
    let m = a.rows();
    let n = m * m;
    // Equation (i, j) of AᵀP + PA has coefficient A[k][i]·[l = j] + A[l][j]·[k = i]
    // on unknown P[k][l].
    let mut k = Matrix::zeros(n, n);
    for i in 0..m {
        for j in 0..m {
            let row = i * m + j;
            for kk in 0..m {
                k[(row, kk * m + j)] += a[(kk, i)];
            }
            for l in 0..m {
                k[(row, i * m + l)] += a[(l, j)];
            }
        }
    }
    let rhs: Vec<f64> = q.as_slice().iter().map(|v| -v).collect();
    let p = solve(&k, &rhs)?;
    let p = Matrix::from_row_major(m, m, p);
    Ok(Matrix::from_fn(m, m, |i, j| 0.5 * (p[(i, j)] + p[(j, i)])))
}

/// `‖AᵀP + PA + Q‖∞`.
pub fn lyapunov_residual(a: &Matrix<f64>, p: &Matrix<f64>, q: &Matrix<f64>) -> f64 {
    a.transpose().matmul(p).add(&p.matmul(a)).add(q).norm_inf()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCertificate {
    pub p: Matrix<f64>,
    pub q: Matrix<f64>,
    pub u_q: f64,
    pub d_q: f64,
    pub lambda_min: f64,
    /// The decrease check passed at the search cap, so the true valid radius
    /// may be larger.
    pub global_up_to_cap: bool,
}

impl QuadraticCertificate {
    pub fn form(&self) -> QuadraticForm<f64> {
        QuadraticForm::new(self.p.clone())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.p.quad_form(x)
    }

    /// `‖x‖ < u_q` and `xᵀPx < d_q`.
    pub fn contains(&self, x: &[f64]) -> bool {
        norm2(x) < self.u_q && self.value(x) < self.d_q
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSearch {
    /// Upper end of the radius bisection.
    pub u_max: f64,
    /// Bisection stops once the bracket is narrower than `resolution·u_max`.
    pub resolution: f64,
}

impl QuadraticSearch {
    pub fn new(u_max: f64) -> Self {
        Self {
            u_max,
            resolution: 1e-2,
        }
    }
}

fn decreases_on<V: VectorField>(
    p: &Matrix<f64>,
    lambda_min: f64,
    f: &V,
    u: f64,
    fals: &FalsifierConfig,
) -> Result<bool, BaselineError> {
    // V/(λ_min u²) has the same sign pattern as V and V̇ but keeps both above
    // the δ threshold at the inner radius regardless of u.
    let scaled = QuadraticForm::new(p.scaled(1.0 / (lambda_min * u * u)));
    let cfg = FalsifierConfig {
        u,
        l: fals.l / fals.u * u,
        ..fals.clone()
    };
    match falsify(&scaled, f, &cfg) {
        Ok(o) => Ok(o.counterexamples.is_empty()),
        Err(FalsifierError::BudgetExhausted { .. }) | Err(FalsifierError::Unresolved { .. }) => {
            Ok(false)
        }
        Err(e) => Err(BaselineError::Falsifier(e)),
    }
}

/// Largest radius on which the quadratic function decreases along `f`,
/// found by bisection, and the sublevel value `d_q = λ_min(P)·u_q²`.
pub fn quadratic_region<V: VectorField>(
    f: &V,
    p: &Matrix<f64>,
    q: &Matrix<f64>,
    search: &QuadraticSearch,
    fals: &FalsifierConfig,
) -> Result<QuadraticCertificate, BaselineError> {
    let eig = symmetric_eigenvalues(p)?;
    let lambda_min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if !(lambda_min > 0.0) {
        return Err(BaselineError::NotPositiveDefinite {
            min_eigenvalue: lambda_min,
        });
    }
    let tol = search.resolution * search.u_max;
    let finish = |u_q: f64, global: bool| QuadraticCertificate {
        p: p.clone(),
        q: q.clone(),
        u_q,
        d_q: lambda_min * u_q * u_q,
        lambda_min,
        global_up_to_cap: global,
    };
    if decreases_on(p, lambda_min, f, search.u_max, fals)? {
        return Ok(finish(search.u_max, true));
    }
    let (mut lo, mut hi) = (0.0, search.u_max);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if decreases_on(p, lambda_min, f, mid, fals)? {
            lo = mid;
        } else {
            hi = mid;
        }
        log::debug!("quadratic valid radius bracket [{lo}, {hi}]");
    }
    if lo == 0.0 {
        return Err(BaselineError::NoValidRadius { resolution: tol });
    }
    Ok(finish(lo, false))
}

/// Volume estimate of `{x : inside(x)}` from `n` uniform samples in the cube
/// `[−half_width, half_width]^m`.
pub fn monte_carlo_volume(
    m: usize,
    half_width: f64,
    n: usize,
    seed: u64,
    mut inside: impl FnMut(&[f64]) -> bool,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; m];
    let mut hits = 0usize;
    for _ in 0..n {
        for xi in x.iter_mut() {
            *xi = rng.random_range(-half_width..=half_width);
        }
        if inside(&x) {
            hits += 1;
        }
    }
    hits as f64 / n as f64 * (2.0 * half_width).powi(m as i32)
}
