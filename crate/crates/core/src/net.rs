//! Two-layer tanh Lyapunov candidate, its Lie derivative, the empirical
//! Lyapunov risk and the full-batch gradient-descent trainer.
//!
//! ```text
//! c1 = W1 x + b1,  v1 = tanh(c1),  c2 = W2·v1 + b2,  V = tanh(c2)
//! V̇  = (1 − V²) · W2 · diag(1 − v1²) · W1 · f(x)
//! R  = α/q Σ ReLU(−V(x_i)) + β/q Σ ReLU(V̇(x_i) + τ) + γ V(0)²
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::field::VectorField;
use crate::linalg::Matrix;
use crate::scalar::{dot, norm2, Real, Scalar};

/// Weights and biases `θ = (W1, b1, W2, b2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetParams<F> {
    /// `p × m`
    pub w1: Matrix<F>,
    pub b1: Vec<F>,
    pub w2: Vec<F>,
    pub b2: F,
}

/// Intermediate values of a forward pass.
#[derive(Clone, Debug)]
pub struct Forward<T> {
    pub c1: Vec<T>,
    pub v1: Vec<T>,
    pub c2: T,
    pub v: T,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetError {
    #[error("risk or its gradient became non-finite at update {update}; lower the learning rate")]
    NonFiniteRisk { update: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("sample set is empty")]
    EmptySamples,
}

impl<F: Real> NetParams<F> {
    pub fn zeros(m: usize, p: usize) -> Self {
        Self {
            w1: Matrix::zeros(p, m),
            b1: vec![F::zero(); p],
            w2: vec![F::zero(); p],
            b2: F::zero(),
        }
    }

    /// Zero-mean uniform initialization scaled by `1/√fan_in` per layer.
    pub fn init(m: usize, p: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |fan_in: usize| {
            let k = 1.0 / (fan_in as f64).sqrt();
            F::c(rng.random_range(-k..k))
        };
        let w1 = Matrix::from_fn(p, m, |_, _| draw(m));
        let b1 = (0..p).map(|_| draw(m)).collect();
        let w2 = (0..p).map(|_| draw(p)).collect();
        let b2 = draw(p);
        Self { w1, b1, w2, b2 }
    }

    /// State dimension.
    pub fn m(&self) -> usize {
        self.w1.cols()
    }

    /// Hidden width.
    pub fn p(&self) -> usize {
        self.w1.rows()
    }

    pub fn n_params(&self) -> usize {
        self.p() * self.m() + 2 * self.p() + 1
    }

    /// Flattens as `W1` (row-major), `b1`, `W2`, `b2`.
    pub fn to_flat(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend_from_slice(self.w1.as_slice());
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.push(self.b2);
        out
    }

    /// All weights and biases multiplied by `s`.
    pub fn scaled(&self, s: F) -> Self {
        let flat: Vec<F> = self.to_flat().into_iter().map(|v| v * s).collect();
        Self::from_flat(self.m(), self.p(), &flat)
    }

    pub fn from_flat(m: usize, p: usize, flat: &[F]) -> Self {
        assert_eq!(flat.len(), p * m + 2 * p + 1, "parameter count");
        let (w1, rest) = flat.split_at(p * m);
        let (b1, rest) = rest.split_at(p);
        let (w2, rest) = rest.split_at(p);
        Self {
            w1: Matrix::from_row_major(p, m, w1.to_vec()),
            b1: b1.to_vec(),
            w2: w2.to_vec(),
            b2: rest[0],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().into_iter().all(Real::is_finite)
    }

    pub fn cast<G: Real>(&self) -> NetParams<G> {
        NetParams {
            w1: self.w1.cast(),
            b1: self.b1.iter().map(|v| G::c(v.to_f64())).collect(),
            w2: self.w2.iter().map(|v| G::c(v.to_f64())).collect(),
            b2: G::c(self.b2.to_f64()),
        }
    }

    /// Forward pass over any scalar domain.
    pub fn forward<T: Scalar>(&self, x: &[T]) -> Forward<T> {
        assert_eq!(x.len(), self.m(), "state dimension");
        let c1: Vec<T> = (0..self.p())
            .map(|j| {
                self.w1
                    .row(j)
                    .iter()
                    .zip(x)
                    .fold(T::from_f64(self.b1[j].to_f64()), |acc, (w, xk)| {
                        acc + xk.clone().scale(w.to_f64())
                    })
            })
            .collect();
        let v1: Vec<T> = c1.iter().map(|c| c.clone().tanh()).collect();
        let c2 = v1
            .iter()
            .zip(&self.w2)
            .fold(T::from_f64(self.b2.to_f64()), |acc, (v, w)| {
                acc + v.clone().scale(w.to_f64())
            });
        let v = c2.clone().tanh();
        Forward { c1, v1, c2, v }
    }

    pub fn value<T: Scalar>(&self, x: &[T]) -> T {
        self.forward(x).v
    }

    /// `∂V/∂x = (1 − V²) · W2 · diag(1 − v1²) · W1`.
    pub fn gradient<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let fw = self.forward(x);
        self.gradient_from(&fw)
    }

    fn gradient_from<T: Scalar>(&self, fw: &Forward<T>) -> Vec<T> {
        let outer = T::one() - fw.v.clone().sqr();
        // row vector W2 · diag(1 − v1²)
        let g: Vec<T> = fw
            .v1
            .iter()
            .zip(&self.w2)
            .map(|(v, w)| (T::one() - v.clone().sqr()).scale(w.to_f64()))
            .collect();
        (0..self.m())
            .map(|k| {
                let inner = g.iter().enumerate().fold(T::zero(), |acc, (j, gj)| {
                    acc + gj.clone().scale(self.w1[(j, k)].to_f64())
                });
                outer.clone() * inner
            })
            .collect()
    }

    /// `V̇` at `x` given the field value `fx = f(x)`.
    pub fn lie_derivative_with<T: Scalar>(&self, x: &[T], fx: &[T]) -> T {
        dot(&self.gradient(x), fx)
    }

    pub fn lie_derivative<T: Scalar, V: VectorField>(&self, x: &[T], f: &V) -> T {
        let fx = f.eval(x);
        self.lie_derivative_with(x, &fx)
    }

    /// `Σ_j |W2_j| · ‖W1_j‖₂`, a global bound on `‖∂V/∂x‖₂`.
    pub fn gradient_norm_bound(&self) -> f64 {
        (0..self.p())
            .map(|j| self.w2[j].abs().to_f64() * norm2(self.w1.row(j)).to_f64())
            .sum()
    }
}

/// Risk weights and trainer settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<F> {
    pub alpha: F,
    pub beta: F,
    pub gamma: F,
    pub tau: F,
    pub eta: F,
    /// Updates per `min_risk` call.
    pub r: usize,
    /// Hidden width.
    pub p: usize,
    pub seed: u64,
    /// Size of the initial sample set.
    pub q: usize,
    /// Heavy-ball coefficient; `0` is plain gradient descent.
    #[serde(default)]
    pub momentum: F,
}

impl<F: Real> TrainConfig<F> {
    /// Empirical defaults for an `m`-state system.
    pub fn defaults(m: usize) -> Self {
        Self {
            alpha: F::one(),
            beta: F::one(),
            gamma: F::zero(),
            tau: F::c(0.1),
            eta: F::c(0.01),
            r: 10,
            p: 2 * m,
            seed: 0,
            q: 500,
            momentum: F::zero(),
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |msg: &str| Err(NetError::InvalidConfig(msg.to_string()));
        if !(self.tau > F::zero()) {
            return bad("tau must be positive");
        }
        if !(self.eta > F::zero()) {
            return bad("eta must be positive");
        }
        if !(self.alpha >= F::zero() && self.beta >= F::zero() && self.gamma >= F::zero()) {
            return bad("risk weights must be nonnegative");
        }
        if !(self.momentum >= F::zero() && self.momentum < F::one()) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.p == 0 {
            return bad("hidden width must be positive");
        }
        Ok(())
    }
}

/// The training set `X`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet<F> {
    pub points: Vec<Vec<F>>,
}

impl<F: Real> SampleSet<F> {
    pub fn new(points: Vec<Vec<F>>) -> Self {
        Self { points }
    }

    /// `q` points uniform in the open ball of radius `u`.
    pub fn uniform_in_ball(m: usize, q: usize, u: F, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..q)
            .map(|_| uniform_in_ball(&mut rng, m, u.to_f64()))
            .collect();
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Set union with exact-match deduplication; new points are appended.
    pub fn add_samples(&mut self, extra: &[Vec<F>]) -> usize {
        let mut added = 0;
        for x in extra {
            if !self.points.iter().any(|y| y == x) {
                self.points.push(x.clone());
                added += 1;
            }
        }
        added
    }
}

/// Uniform point in the open ball: normalized Gaussian direction, radius
/// `u·U^{1/m}`.
pub fn uniform_in_ball<F: Real, R: Rng>(rng: &mut R, m: usize, u: f64) -> Vec<F> {
    loop {
        let dir = gaussian_direction(rng, m);
        let rad = u * rng.random::<f64>().powf(1.0 / m as f64);
        let x: Vec<F> = dir.iter().map(|d| F::c(d * rad)).collect();
        if norm2(&x).to_f64() < u {
            return x;
        }
    }
}

/// Uniform point on the sphere of radius `u`.
pub fn uniform_on_sphere<F: Real, R: Rng>(rng: &mut R, m: usize, u: f64) -> Vec<F> {
    gaussian_direction(rng, m)
        .iter()
        .map(|d| F::c(d * u))
        .collect()
}

fn gaussian_direction<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-12 {
            return g.into_iter().map(|v| v / n).collect();
        }
    }
}

/// Samples with their field values; `f` does not depend on `θ`, so the
/// trainer evaluates it once per sample.
#[derive(Clone, Debug)]
pub struct Batch<F> {
    pub xs: Vec<Vec<F>>,
    pub fxs: Vec<Vec<F>>,
}

impl<F: Real> Batch<F> {
    pub fn new<V: VectorField>(samples: &SampleSet<F>, f: &V) -> Self {
        Self {
            fxs: samples.points.iter().map(|x| f.eval_real(x)).collect(),
            xs: samples.points.clone(),
        }
    }
}

/// Risk value with the count of active penalty terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiskBreakdown<F> {
    pub total: F,
    pub positivity: F,
    pub decrease: F,
    pub origin: F,
    pub n_negative: usize,
    pub n_not_decreasing: usize,
}

/// Empirical Lyapunov risk over `samples`.
pub fn risk<F: Real, V: VectorField>(
    theta: &NetParams<F>,
    samples: &SampleSet<F>,
    f: &V,
    cfg: &TrainConfig<F>,
) -> F {
    risk_breakdown(theta, &Batch::new(samples, f), cfg).total
}

pub fn risk_breakdown<F: Real>(
    theta: &NetParams<F>,
    batch: &Batch<F>,
    cfg: &TrainConfig<F>,
) -> RiskBreakdown<F> {
    risk_and_gradient(theta, batch, cfg, false).0
}

/// Exact gradient of the risk with respect to `θ`, in [`NetParams`] layout.
pub fn risk_gradient<F: Real, V: VectorField>(
    theta: &NetParams<F>,
    samples: &SampleSet<F>,
    f: &V,
    cfg: &TrainConfig<F>,
) -> NetParams<F> {
    risk_and_gradient(theta, &Batch::new(samples, f), cfg, true).1
}

/// Risk and (optionally) its gradient in one pass. Samples are reduced in
/// index order so the result is reproducible.
pub fn risk_and_gradient<F: Real>(
    theta: &NetParams<F>,
    batch: &Batch<F>,
    cfg: &TrainConfig<F>,
    want_grad: bool,
) -> (RiskBreakdown<F>, NetParams<F>) {
    let (m, p) = (theta.m(), theta.p());
    let q = batch.xs.len();
    let two = F::c(2.0);
    let mut grad = NetParams::zeros(m, p);
    let mut out = RiskBreakdown {
        total: F::zero(),
        positivity: F::zero(),
        decrease: F::zero(),
        origin: F::zero(),
        n_negative: 0,
        n_not_decreasing: 0,
    };
    let wa = if q > 0 {
        cfg.alpha / F::c(q as f64)
    } else {
        F::zero()
    };
    let wb = if q > 0 {
        cfg.beta / F::c(q as f64)
    } else {
        F::zero()
    };

    let mut s = vec![F::zero(); p];
    let mut a = vec![F::zero(); p];
    let mut non_finite = false;
    let mut accumulate =
        |x: &[F], fx: Option<&[F]>, c_v: F, c_d: F, fw: &Forward<F>, a: &[F], s: &[F]| {
            let e = F::one() - fw.v * fw.v;
            grad.b2 += c_v * e;
            for j in 0..p {
                let w2 = theta.w2[j];
                let dv = -two * fw.v1[j] * a[j];
                grad.w2[j] += c_v * e * fw.v1[j] + c_d * a[j] * s[j];
                let t = c_v * e * w2 * a[j] + c_d * w2 * s[j] * dv;
                grad.b1[j] += t;
                let row_f = c_d * w2 * a[j];
                for k in 0..m {
                    let mut g = t * x[k];
                    if let Some(fx) = fx {
                        g += row_f * fx[k];
                    }
                    grad.w1[(j, k)] += g;
                }
            }
        };

    for (x, fx) in batch.xs.iter().zip(&batch.fxs) {
        let fw = theta.forward(x);
        let e = F::one() - fw.v * fw.v;
        let mut d = F::zero();
        for j in 0..p {
            a[j] = F::one() - fw.v1[j] * fw.v1[j];
            s[j] = dot(theta.w1.row(j), fx);
            d += theta.w2[j] * a[j] * s[j];
        }
        let vdot = e * d;
        if !(fw.v.is_finite() && vdot.is_finite()) {
            non_finite = true;
        }

        let mut c_v = F::zero();
        let mut c_d = F::zero();
        if fw.v < F::zero() {
            out.positivity += -fw.v;
            out.n_negative += 1;
            c_v -= wa;
        }
        if vdot + cfg.tau > F::zero() {
            out.decrease += vdot + cfg.tau;
            out.n_not_decreasing += 1;
            c_v += wb * (-two * fw.v * d);
            c_d += wb * e;
        }
        if want_grad && (c_v != F::zero() || c_d != F::zero()) {
            accumulate(x, Some(fx), c_v, c_d, &fw, &a, &s);
        }
    }
    out.positivity *= wa;
    out.decrease *= wb;

    if cfg.gamma != F::zero() {
        let zero = vec![F::zero(); m];
        let fw = theta.forward(&zero);
        out.origin = cfg.gamma * fw.v * fw.v;
        if want_grad {
            for j in 0..p {
                a[j] = F::one() - fw.v1[j] * fw.v1[j];
                s[j] = F::zero();
            }
            accumulate(&zero, None, two * cfg.gamma * fw.v, F::zero(), &fw, &a, &s);
        }
    }
    out.total = out.positivity + out.decrease + out.origin;
    if non_finite {
        out.total = F::c(f64::NAN);
    }
    (out, grad)
}

/// Result of one `min_risk` call.
#[derive(Clone, Debug)]
pub struct MinRiskOutcome<F> {
    pub theta: NetParams<F>,
    /// Risk evaluated before each update.
    pub risk_trace: Vec<F>,
    /// Heavy-ball velocity to carry into the next call.
    pub velocity: Option<Vec<F>>,
}

/// `r` full-batch gradient-descent updates starting from `theta0`.
pub fn min_risk<F: Real, V: VectorField>(
    theta0: &NetParams<F>,
    samples: &SampleSet<F>,
    f: &V,
    cfg: &TrainConfig<F>,
) -> Result<MinRiskOutcome<F>, NetError> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(NetError::EmptySamples);
    }
    min_risk_batch(theta0, &Batch::new(samples, f), cfg, cfg.r, None)
}

pub fn min_risk_batch<F: Real>(
    theta0: &NetParams<F>,
    batch: &Batch<F>,
    cfg: &TrainConfig<F>,
    updates: usize,
    velocity: Option<Vec<F>>,
) -> Result<MinRiskOutcome<F>, NetError> {
    let (m, p) = (theta0.m(), theta0.p());
    let mut flat = theta0.to_flat();
    let mut vel = velocity.unwrap_or_else(|| vec![F::zero(); flat.len()]);
    let mut trace = Vec::with_capacity(updates);
    let mut theta = theta0.clone();
    for update in 0..updates {
        let (r, g) = risk_and_gradient(&theta, batch, cfg, true);
        let g = g.to_flat();
        if !r.total.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(NetError::NonFiniteRisk { update });
        }
        trace.push(r.total);
        for ((w, v), gi) in flat.iter_mut().zip(vel.iter_mut()).zip(&g) {
            *v = cfg.momentum * *v + *gi;
            *w -= cfg.eta * *v;
        }
        theta = NetParams::from_flat(m, p, &flat);
        if !theta.is_finite() {
            return Err(NetError::NonFiniteRisk { update });
        }
    }
    Ok(MinRiskOutcome {
        theta,
        risk_trace: trace,
        velocity: (cfg.momentum != F::zero()).then_some(vel),
    })
}

/// `V_θ(x) − V_θ(0)`: vanishes at the origin while keeping `V̇` unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftedNet<F> {
    pub net: NetParams<F>,
    pub shift: F,
}

impl<F: Real> ShiftedNet<F> {
    pub fn new(net: NetParams<F>) -> Self {
        let shift = net.value(&vec![F::zero(); net.m()]);
        Self { net, shift }
    }

    pub fn value<T: Scalar>(&self, x: &[T]) -> T {
        self.net.value(x) - T::from_f64(self.shift.to_f64())
    }
}

pub fn shift_to_zero<F: Real>(theta: &NetParams<F>) -> ShiftedNet<F> {
    ShiftedNet::new(theta.clone())
}
