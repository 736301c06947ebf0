//! Counterexample-guided learning of a Lyapunov function.
//!
//! Alternates `r` risk-minimization updates with a falsification query on
//! the shifted candidate `V_θ − V_θ(0)`, feeding counterexamples back into
//! the training set, until the falsifier certifies the candidate or the
//! update budget `n_i` is spent.

use serde::{Deserialize, Serialize};

use crate::candidate::Candidate;
use crate::falsifier::{falsify, FalsifierConfig, FalsifierError};
use crate::field::VectorField;
use crate::net::{
    min_risk_batch, risk_breakdown, Batch, NetError, NetParams, SampleSet, ShiftedNet, TrainConfig,
};
use crate::scalar::{norm2, Real};

/// One train/falsify round.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundRecord {
    /// Parameter updates performed so far.
    pub updates: usize,
    pub n_samples: usize,
    /// Risk after the round's updates.
    pub risk: f64,
    pub n_counterexamples: usize,
    pub cells_explored: usize,
    pub budget_exhausted: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct AuditTrail {
    pub rounds: Vec<RoundRecord>,
    /// Risk before every parameter update, in order.
    pub risk_trace: Vec<f64>,
}

impl AuditTrail {
    pub fn updates(&self) -> usize {
        self.rounds.last().map_or(0, |r| r.updates)
    }

    pub fn final_samples(&self) -> usize {
        self.rounds.last().map_or(0, |r| r.n_samples)
    }
}

/// A falsifier-certified Lyapunov function on the ball of radius `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate<F> {
    pub v: ShiftedNet<F>,
    pub u: f64,
}

#[derive(Clone, Debug)]
pub struct Learned<F> {
    pub certificate: Certificate<F>,
    pub audit: AuditTrail,
}

/// Which Lyapunov condition the last counterexamples violated.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FailureDiagnostics {
    pub n_counterexamples: usize,
    /// Points with `V ≤ δ`.
    pub n_not_positive: usize,
    /// Points with `V̇ ≥ −δ`.
    pub n_not_decreasing: usize,
    pub min_norm: Option<f64>,
    pub max_norm: Option<f64>,
    pub budget_exhausted: bool,
}

impl FailureDiagnostics {
    pub fn remedies(&self) -> Vec<&'static str> {
        let mut out = vec![
            "decrease the valid-region radius u",
            "change the initial parameters (seed)",
        ];
        if self.n_not_positive > 0 {
            out.push("raise alpha to weight positivity");
        }
        if self.n_not_decreasing > 0 {
            out.push("raise beta or tau to weight the decrease condition");
        }
        out.push("tune gamma");
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error("no certificate within {updates} updates: {reason}")]
    Failure {
        reason: String,
        updates: usize,
        diagnostics: FailureDiagnostics,
        last_counterexamples: Vec<Vec<f64>>,
        /// Parameters after the final round.
        last_theta: NetParams<f64>,
        audit: AuditTrail,
    },
    #[error(transparent)]
    Training(#[from] NetError),
    #[error("falsifier: {0}")]
    Falsifier(FalsifierError),
}

fn diagnose<F: Real, V: VectorField>(
    v: &ShiftedNet<F>,
    f: &V,
    pts: &[Vec<f64>],
    delta: f64,
    budget_exhausted: bool,
) -> FailureDiagnostics {
    let mut d = FailureDiagnostics {
        n_counterexamples: pts.len(),
        n_not_positive: 0,
        n_not_decreasing: 0,
        min_norm: None,
        max_norm: None,
        budget_exhausted,
    };
    for x in pts {
        let val: f64 = v.value(x);
        let lie: f64 = v.lie(x, f);
        if !(val > delta) {
            d.n_not_positive += 1;
        }
        if !(lie < -delta) {
            d.n_not_decreasing += 1;
        }
        let n = norm2(x);
        d.min_norm = Some(d.min_norm.map_or(n, |m: f64| m.min(n)));
        d.max_norm = Some(d.max_norm.map_or(n, |m: f64| m.max(n)));
    }
    d
}

/// Runs the learn/falsify loop from `theta0` and the initial sample set.
///
/// `n_i` bounds the number of parameter updates; the loop guard is checked
/// before each round, so up to `n_i + r` updates can happen.
pub fn learn_function<F: Real, V: VectorField>(
    f: &V,
    theta0: &NetParams<F>,
    samples: &SampleSet<F>,
    train: &TrainConfig<F>,
    fals: &FalsifierConfig,
    n_i: usize,
) -> Result<Learned<F>, LearnError> {
    train.validate()?;
    fals.validate().map_err(LearnError::Falsifier)?;
    if samples.is_empty() {
        return Err(NetError::EmptySamples.into());
    }
    if train.r == 0 {
        return Err(NetError::InvalidConfig("r must be at least 1".into()).into());
    }

    let mut theta = theta0.clone();
    let mut xs = samples.clone();
    let mut batch = Batch::new(&xs, f);
    let mut velocity = None;
    let mut audit = AuditTrail::default();
    let mut j = 0usize;
    let mut last: Vec<Vec<f64>> = Vec::new();
    let mut last_budget = false;
    let mut round = 0u64;

    while j <= n_i {
        let out = min_risk_batch(&theta, &batch, train, train.r, velocity.take())?;
        theta = out.theta;
        velocity = out.velocity;
        audit
            .risk_trace
            .extend(out.risk_trace.iter().map(|r| r.to_f64()));
        j += train.r;

        let candidate = ShiftedNet::new(theta.clone());
        let cfg = FalsifierConfig {
            seed: fals.seed.wrapping_add(round),
            ..fals.clone()
        };
        round += 1;
        let result = falsify(&candidate, f, &cfg);
        let risk = risk_breakdown(&theta, &batch, train).total.to_f64();
        let (ce, cells, budget) = match result {
            Ok(o) => (o.counterexamples.points, o.cells_explored, false),
            Err(FalsifierError::BudgetExhausted { max_cells, .. }) => (Vec::new(), max_cells, true),
            Err(FalsifierError::Unresolved { .. }) => (Vec::new(), 0, true),
            Err(e) => return Err(LearnError::Falsifier(e)),
        };
        log::debug!(
            "updates={j} samples={} risk={risk:.4e} counterexamples={} cells={cells}{}",
            xs.len(),
            ce.len(),
            if budget { " (no verdict)" } else { "" }
        );
        let certified = ce.is_empty() && !budget;
        if !ce.is_empty() {
            let extra: Vec<Vec<F>> = ce
                .iter()
                .map(|x| x.iter().map(|v| F::c(*v)).collect())
                .collect();
            for x in &extra {
                if !xs.points.contains(x) {
                    batch.fxs.push(f.eval_real(x));
                    batch.xs.push(x.clone());
                }
            }
            xs.add_samples(&extra);
        }
        audit.rounds.push(RoundRecord {
            updates: j,
            n_samples: xs.len(),
            risk,
            n_counterexamples: ce.len(),
            cells_explored: cells,
            budget_exhausted: budget,
        });
        if certified {
            return Ok(Learned {
                certificate: Certificate {
                    v: candidate,
                    u: fals.u,
                },
                audit,
            });
        }
        last = ce;
        last_budget = budget;
    }

    let last_theta = theta.cast();
    let candidate = ShiftedNet::new(theta);
    let diagnostics = diagnose(&candidate, f, &last, fals.delta, last_budget);
    let reason = if last_budget {
        "falsifier could not reach a verdict on the last candidate".to_string()
    } else {
        format!(
            "{} counterexamples remain ({} with V <= delta, {} with Vdot >= -delta)",
            diagnostics.n_counterexamples, diagnostics.n_not_positive, diagnostics.n_not_decreasing
        )
    };
    Err(LearnError::Failure {
        reason,
        updates: j,
        diagnostics,
        last_counterexamples: last,
        last_theta,
        audit,
    })
}
