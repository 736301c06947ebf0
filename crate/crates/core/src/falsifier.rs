//! δ-complete search for violations of the Lyapunov conditions
//!
//! ```text
//! ∃ x :  l² ≤ ‖x‖² ≤ u²  ∧  (V(x) ≤ 0 ∨ V̇(x) ≥ 0)
//! ```
//!
//! by interval branch-and-prune over `[−u, u]^m`. A cell is discarded when
//! its `‖x‖²` enclosure misses the annulus and pruned when the enclosures
//! prove `V > 0 ∧ V̇ < 0` on it. Every other cell is probed at one point
//! with the δ-weakened predicate `V ≤ δ ∨ V̇ ≥ −δ`; a hit becomes a
//! counterexample, a miss splits the widest coordinate.
//!
//! Enclosures intersect the natural interval extension with the mean-value
//! form `g(c) + ∇g(X)·(X − c)`, whose gradient enclosure comes from
//! `Dual<Interval>` evaluation. An empty result is a proof modulo δ.
//!
//! Before branching, a seeded batch of random annulus points is checked;
//! during training most candidates fail somewhere obvious and this avoids a
//! full tree search for them.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::candidate::Candidate;
use crate::dual::Dual;
use crate::field::VectorField;
use crate::interval::Interval;
use crate::net::uniform_in_ball;
use crate::scalar::{norm2, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalsifierConfig {
    /// Valid-region radius.
    pub u: f64,
    /// Inner exclusion radius.
    pub l: f64,
    pub delta: f64,
    /// Cells evaluated before giving up.
    pub max_cells: usize,
    pub max_counterexamples: usize,
    /// Random points checked before branch-and-prune; `0` disables.
    pub probe_samples: usize,
    /// Worst probe points refined by projected gradient ascent on the
    /// violation score.
    pub local_search_starts: usize,
    pub seed: u64,
}

impl FalsifierConfig {
    /// `l = 0.1·u`, `δ = 1e-3`.
    pub fn new(u: f64) -> Self {
        Self {
            u,
            l: 0.1 * u,
            delta: 1e-3,
            max_cells: 4_000_000,
            max_counterexamples: 64,
            probe_samples: 4096,
            local_search_starts: 16,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), FalsifierError> {
        let bad = |m: &str| Err(FalsifierError::InvalidConfig(m.to_string()));
        if !(self.l > 0.0 && self.l < self.u && self.u.is_finite()) {
            return bad("need 0 < l < u");
        }
        if !(self.delta > 0.0) {
            return bad("delta must be positive");
        }
        if self.max_counterexamples == 0 {
            return bad("max_counterexamples must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FalsifierError {
    #[error("cell budget of {max_cells} exhausted before a verdict")]
    BudgetExhausted { max_cells: usize, unresolved: usize },
    #[error(
        "{cells} cells narrower than delta could neither be pruned nor yield a counterexample"
    )]
    Unresolved { cells: usize },
    #[error("invalid falsifier configuration: {0}")]
    InvalidConfig(String),
}

/// Axis-aligned search cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SearchBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(
            lo.iter().zip(&hi).all(|(a, b)| a <= b),
            "box bounds out of order"
        );
        Self { lo, hi }
    }

    pub fn cube(m: usize, r: f64) -> Self {
        Self::new(vec![-r; m], vec![r; m])
    }

    pub fn point(x: &[f64]) -> Self {
        Self::new(x.to_vec(), x.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn intervals(&self) -> Vec<Interval> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| Interval::new(a, b))
            .collect()
    }

    pub fn mid(&self) -> Vec<f64> {
        self.intervals().iter().map(Interval::mid).collect()
    }

    pub fn max_width(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| b - a)
            .fold(0.0, f64::max)
    }

    fn widest(&self) -> usize {
        let mut best = 0;
        for k in 1..self.dim() {
            if self.hi[k] - self.lo[k] > self.hi[best] - self.lo[best] {
                best = k;
            }
        }
        best
    }

    /// Halves the widest coordinate.
    pub fn split(&self) -> (SearchBox, SearchBox) {
        let k = self.widest();
        let c = Interval::new(self.lo[k], self.hi[k]).mid();
        let mut left = self.clone();
        let mut right = self.clone();
        left.hi[k] = c;
        right.lo[k] = c;
        (left, right)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| a <= v && v <= b)
    }
}

/// Concrete states where the δ-weakened conditions fail.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSet {
    pub points: Vec<Vec<f64>>,
}

impl CounterexampleSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Counterexamples,
    BudgetExhausted,
}

/// Outcome of one falsification query.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FalsifyOutcome {
    pub counterexamples: CounterexampleSet,
    pub cells_explored: usize,
    pub found_by_probe: bool,
    pub wall_time_s: f64,
}

impl FalsifyOutcome {
    pub fn verdict(&self) -> Verdict {
        if self.counterexamples.is_empty() {
            Verdict::Certified
        } else {
            Verdict::Counterexamples
        }
    }
}

/// Structured summary of a falsification run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FalsifyReport {
    pub verdict: Verdict,
    pub delta: f64,
    pub u: f64,
    pub l: f64,
    pub cells_explored: usize,
    pub n_counterexamples: usize,
    pub wall_time_s: f64,
}

impl FalsifyReport {
    pub fn new(cfg: &FalsifierConfig, result: &Result<FalsifyOutcome, FalsifierError>) -> Self {
        let (verdict, cells, n, t) = match result {
            Ok(o) => (
                o.verdict(),
                o.cells_explored,
                o.counterexamples.len(),
                o.wall_time_s,
            ),
            Err(FalsifierError::BudgetExhausted { max_cells, .. }) => {
                (Verdict::BudgetExhausted, *max_cells, 0, 0.0)
            }
            Err(_) => (Verdict::BudgetExhausted, 0, 0, 0.0),
        };
        Self {
            verdict,
            delta: cfg.delta,
            u: cfg.u,
            l: cfg.l,
            cells_explored: cells,
            n_counterexamples: n,
            wall_time_s: t,
        }
    }
}

/// Guaranteed enclosures of `V` and `V̇` over a box.
pub fn interval_bounds<C: Candidate, V: VectorField>(
    cand: &C,
    f: &V,
    cell: &SearchBox,
) -> (Interval, Interval) {
    let x = cell.intervals();
    let m = x.len();
    let c = cell.mid();
    let ci: Vec<Interval> = c.iter().map(|&v| Interval::point(v)).collect();
    let dx: Vec<Interval> = x.iter().zip(&ci).map(|(a, b)| *a - *b).collect();

    let xd = Dual::seed(&x);
    let vd = cand.value(&xd);
    let ld = cand.lie(&xd, f);
    let v_c = cand.value(&ci);
    let l_c = cand.lie(&ci, f);

    let mean_value = |center: Interval, g: Vec<Interval>| {
        g.into_iter()
            .zip(&dx)
            .fold(center, |acc, (gk, dk)| acc + gk * *dk)
    };
    let v_mv = mean_value(v_c, vd.gradient(m));
    let l_mv = mean_value(l_c, ld.gradient(m));
    // Both are enclosures of the same range, so they cannot be disjoint.
    let v = vd.re.intersect(&v_mv).unwrap_or(vd.re);
    let l = ld.re.intersect(&l_mv).unwrap_or(ld.re);
    (v, l)
}

/// Pointwise δ-weakened violation test.
pub fn violates<C: Candidate, V: VectorField>(cand: &C, f: &V, x: &[f64], delta: f64) -> bool {
    let v: f64 = cand.value(x);
    let vdot: f64 = cand.lie(x, f);
    !(v > delta) || !(vdot < -delta)
}

fn in_annulus(x: &[f64], l: f64, u: f64) -> bool {
    let n2: f64 = x.iter().map(|v| v * v).sum();
    l * l <= n2 && n2 <= u * u
}

/// Moves `x` radially into the closed annulus, keeping it strictly inside
/// the outer ball.
fn clamp_to_annulus(mut x: Vec<f64>, l: f64, u: f64) -> Vec<f64> {
    let n = norm2(&x);
    let target = if n == 0.0 {
        x[0] = 1.0;
        Some(l * (1.0 + 1e-9))
    } else if n < l {
        Some(l * (1.0 + 1e-9) / n)
    } else if n >= u {
        Some(u * (1.0 - 1e-9) / n)
    } else {
        None
    };
    if let Some(k) = target {
        for v in &mut x {
            *v *= k;
        }
    }
    x
}

fn annulus_status(cell: &SearchBox, l: f64, u: f64) -> bool {
    let n2 = cell
        .intervals()
        .into_iter()
        .fold(Interval::point(0.0), |acc, v| acc + v.sqr());
    !(n2.hi() < l * l || n2.lo() > u * u)
}

fn sort_and_cap(mut pts: Vec<Vec<f64>>, cap: usize) -> Vec<Vec<f64>> {
    pts.sort_by(|a, b| {
        norm2(a).total_cmp(&norm2(b)).then_with(|| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    pts.dedup();
    pts.truncate(cap);
    pts
}

/// `max(δ − V, V̇ + δ)`: nonnegative exactly at δ-weakened violations.
fn violation_score<C: Candidate, V: VectorField>(cand: &C, f: &V, x: &[f64], delta: f64) -> f64 {
    let v: f64 = cand.value(x);
    let vdot: f64 = cand.lie(x, f);
    let s = (delta - v).max(vdot + delta);
    if s.is_nan() {
        f64::INFINITY
    } else {
        s
    }
}

/// Random sampling of the annulus followed by projected gradient ascent on
/// the violation score from the worst samples. Only finds counterexamples;
/// proving their absence is left to branch-and-prune.
fn probe<C: Candidate, V: VectorField>(cand: &C, f: &V, cfg: &FalsifierConfig) -> Vec<Vec<f64>> {
    let m = cand.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut hits = Vec::new();
    let mut scored = Vec::with_capacity(cfg.probe_samples);
    for _ in 0..cfg.probe_samples {
        let x = clamp_to_annulus(uniform_in_ball::<f64, _>(&mut rng, m, cfg.u), cfg.l, cfg.u);
        let s = violation_score(cand, f, &x, cfg.delta);
        if s >= 0.0 {
            hits.push(x);
        } else {
            scored.push((s, x));
        }
    }
    if !hits.is_empty() || cfg.local_search_starts == 0 {
        return hits;
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(cfg.local_search_starts);
    let h = 1e-6 * cfg.u;
    for (mut s, mut x) in scored {
        let mut step = 0.05 * cfg.u;
        for _ in 0..40 {
            let mut g = vec![0.0; m];
            for k in 0..m {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                g[k] = (violation_score(cand, f, &xp, cfg.delta)
                    - violation_score(cand, f, &xm, cfg.delta))
                    / (2.0 * h);
            }
            let gn = norm2(&g);
            if !(gn > 0.0 && gn.is_finite()) {
                break;
            }
            let trial: Vec<f64> = x
                .iter()
                .zip(&g)
                .map(|(xi, gi)| xi + step * gi / gn)
                .collect();
            let trial = clamp_to_annulus(trial, cfg.l, cfg.u);
            let st = violation_score(cand, f, &trial, cfg.delta);
            if st > s {
                s = st;
                x = trial;
                if s >= 0.0 {
                    break;
                }
            } else {
                step *= 0.5;
                if step < 1e-6 * cfg.u {
                    break;
                }
            }
        }
        if s >= 0.0 && violates(cand, f, &x, cfg.delta) {
            hits.push(x);
        }
    }
    hits
}

/// Searches the annulus `l ≤ ‖x‖ ≤ u` for counterexamples.
///
/// Returns an empty set only when every cell was pruned. When the budget runs
/// out after some counterexamples were already found, those are returned;
/// otherwise the verdict is unknown and reported as an error.
pub fn falsify<C: Candidate, V: VectorField>(
    cand: &C,
    f: &V,
    cfg: &FalsifierConfig,
) -> Result<FalsifyOutcome, FalsifierError> {
    cfg.validate()?;
    let start = Instant::now();
    let m = cand.dim();
    assert_eq!(f.dim(), m, "candidate and field dimensions differ");

    if cfg.probe_samples > 0 {
        let hits = probe(cand, f, cfg);
        if !hits.is_empty() {
            return Ok(FalsifyOutcome {
                counterexamples: CounterexampleSet {
                    points: sort_and_cap(hits, cfg.max_counterexamples),
                },
                cells_explored: 0,
                found_by_probe: true,
                wall_time_s: start.elapsed().as_secs_f64(),
            });
        }
    }

    let mut level = vec![SearchBox::cube(m, cfg.u)];
    let mut found = Vec::new();
    let mut unresolved = 0usize;
    let mut explored = 0usize;
    while !level.is_empty() {
        let mut next = Vec::new();
        for cell in level.iter() {
            if explored >= cfg.max_cells {
                let pending = level.len() + next.len();
                return budget_outcome(found, cfg, explored, pending, start);
            }
            explored += 1;
            if !annulus_status(cell, cfg.l, cfg.u) {
                continue;
            }
            let (v, vdot) = interval_bounds(cand, f, cell);
            if v.lo() > 0.0 && vdot.hi() < 0.0 {
                continue;
            }
            let probe = clamp_to_annulus(cell.mid(), cfg.l, cfg.u);
            if violates(cand, f, &probe, cfg.delta) {
                found.push(probe);
                continue;
            }
            if cell.max_width() <= cfg.delta {
                unresolved += 1;
                continue;
            }
            let (a, b) = cell.split();
            next.push(a);
            next.push(b);
        }
        if found.len() >= cfg.max_counterexamples {
            break;
        }
        level = next;
    }

    if found.is_empty() && unresolved > 0 {
        return Err(FalsifierError::Unresolved { cells: unresolved });
    }
    debug_assert!(found.iter().all(|x| in_annulus(x, cfg.l, cfg.u)));
    Ok(FalsifyOutcome {
        counterexamples: CounterexampleSet {
            points: sort_and_cap(found, cfg.max_counterexamples),
        },
        cells_explored: explored,
        found_by_probe: false,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn budget_outcome(
    found: Vec<Vec<f64>>,
    cfg: &FalsifierConfig,
    explored: usize,
    pending: usize,
    start: Instant,
) -> Result<FalsifyOutcome, FalsifierError> {
    if found.is_empty() {
        Err(FalsifierError::BudgetExhausted {
            max_cells: cfg.max_cells,
            unresolved: pending,
        })
    } else {
        Ok(FalsifyOutcome {
            counterexamples: CounterexampleSet {
                points: sort_and_cap(found, cfg.max_counterexamples),
            },
            cells_explored: explored,
            found_by_probe: false,
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }
}

/// `X ← C ∪ X` with exact-match deduplication.
pub fn add_samples<F: crate::Real>(
    samples: &crate::net::SampleSet<F>,
    counterexamples: &CounterexampleSet,
) -> crate::net::SampleSet<F> {
    let mut out = samples.clone();
    let extra: Vec<Vec<F>> = counterexamples
        .points
        .iter()
        .map(|x| x.iter().map(|v| F::from_f64(*v)).collect())
        .collect();
    out.add_samples(&extra);
    out
}
