//! Jaya gain tuning.
//!
//! Every candidate moves toward the current best member and away from the
//! current worst one; a move is kept only if it lowers the objective. The
//! optimizer is independent of what is being tuned: callers pass a batch
//! evaluator so objective runs can be spread over threads without affecting
//! the result.

use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::PidGains;
use crate::math;
use crate::sim::{self, ControllerKind, ControllerSpec, Scenario, SimulationTrace, Termination};

/// Base value added to aborted or failed runs.
pub const PENALTY: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct JayaConfig {
    /// Population size `n_c`.
    pub population: usize,
    pub generations: usize,
    /// Per-dimension `(lower, upper)`; both strictly positive.
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
    /// Redraws allowed when an update produces a non-positive component.
    pub retry_limit: u32,
}

impl JayaConfig {
    pub fn new(bounds: Vec<(f64, f64)>, generations: usize, seed: u64) -> Self {
        Self {
            population: 15,
            generations,
            bounds,
            seed,
            retry_limit: 32,
        }
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<(), JayaConfigError> {
        if self.population < 3 {
            return Err(JayaConfigError::Population(self.population));
        }
        if self.bounds.is_empty() {
            return Err(JayaConfigError::NoDimensions);
        }
        for (index, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(JayaConfigError::Bounds { index, lo, hi });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JayaConfigError {
    Population(usize),
    NoDimensions,
    Bounds { index: usize, lo: f64, hi: f64 },
    WarmStart { expected: usize, got: usize },
}

impl fmt::Display for JayaConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JayaConfigError::Population(n) => write!(f, "population size {n} is below 3"),
            JayaConfigError::NoDimensions => write!(f, "no gain bounds given"),
            JayaConfigError::Bounds { index, lo, hi } => {
                write!(f, "bounds #{index} ({lo}, {hi}) must satisfy 0 < lower <= upper")
            }
            JayaConfigError::WarmStart { expected, got } => {
                write!(f, "warm start has {got} gains, expected {expected}")
            }
        }
    }
}

impl core::error::Error for JayaConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub gains: Vec<f64>,
    pub fx: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    candidates: Vec<Candidate>,
    best: usize,
    worst: usize,
}

impl Population {
    fn new(candidates: Vec<Candidate>) -> Self {
        let mut p = Self {
            candidates,
            best: 0,
            worst: 0,
        };
        p.refresh();
        p
    }

    /// Ties keep the lowest index so the result does not depend on
    /// evaluation order.
    fn refresh(&mut self) {
        let fx = |i: usize| self.candidates[i].fx;
        let (mut best, mut worst) = (0, 0);
        for i in 1..self.candidates.len() {
            if fx(i) < fx(best) {
                best = i;
            }
            if fx(i) > fx(worst) {
                worst = i;
            }
        }
        self.best = best;
        self.worst = worst;
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn best(&self) -> &Candidate {
        &self.candidates[self.best]
    }

    pub fn worst(&self) -> &Candidate {
        &self.candidates[self.worst]
    }

    pub fn mean_fx(&self) -> f64 {
        self.candidates.iter().map(|c| c.fx).sum::<f64>() / self.candidates.len() as f64
    }
}

/// Objective summary after one generation (generation 0 is the initial
/// population).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fx: f64,
    pub mean_fx: f64,
    pub worst_fx: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JayaResult {
    pub best: Candidate,
    pub history: Vec<GenerationStats>,
    pub evaluations: usize,
    pub population: Population,
}

/// One Jaya move with explicit random factors:
/// `c + r1 (best - c) - r2 (worst - c)`, element-wise.
pub fn jaya_move(c: &[f64], best: &[f64], worst: &[f64], r1: &[f64], r2: &[f64]) -> Vec<f64> {
    c.iter()
        .zip(best)
        .zip(worst)
        .zip(r1.iter().zip(r2))
        .map(|(((c, b), w), (r1, r2))| c + r1 * (b - c) - r2 * (w - c))
        .collect()
}

/// Jaya move with randoms from `rng`, redrawn while any component is
/// non-positive (at most `retry_limit` times), then clamped into `bounds`.
pub fn jaya_update<R: Rng>(
    c: &[f64],
    best: &[f64],
    worst: &[f64],
    bounds: &[(f64, f64)],
    retry_limit: u32,
    rng: &mut R,
) -> Vec<f64> {
    let n = c.len();
    let mut r1 = alloc::vec![0.0; n];
    let mut r2 = alloc::vec![0.0; n];
    let mut next = Vec::new();
    for _ in 0..=retry_limit {
        for k in 0..n {
            r1[k] = rng.random::<f64>();
            r2[k] = rng.random::<f64>();
        }
        next = jaya_move(c, best, worst, &r1, &r2);
        if next.iter().all(|v| *v > 0.0) {
            break;
        }
    }
    for (v, &(lo, hi)) in next.iter_mut().zip(bounds) {
        *v = if v.is_nan() { lo } else { v.clamp(lo, hi) };
    }
    next
}

/// Independent stream per (generation, candidate) so batch evaluation order
/// never changes the draws.
fn substream(seed: u64, generation: usize, candidate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | candidate as u64);
    rng
}

fn log_uniform<R: Rng>(bounds: &[(f64, f64)], rng: &mut R) -> Vec<f64> {
    bounds
        .iter()
        .map(|&(lo, hi)| {
            let (a, b) = (math::ln(lo), math::ln(hi));
            math::exp(a + (b - a) * rng.random::<f64>()).clamp(lo, hi)
        })
        .collect()
}

/// Run Jaya for `config.generations` generations.
///
/// `evaluate` receives a batch of gain vectors and must return one objective
/// value per vector, in order. `warm_start`, if given, replaces the first
/// initial candidate (clamped into bounds).
pub fn optimize<F>(
    config: &JayaConfig,
    warm_start: Option<&[f64]>,
    mut evaluate: F,
) -> Result<JayaResult, JayaConfigError>
where
    F: FnMut(&[Vec<f64>]) -> Vec<f64>,
{
    config.validate()?;
    let dim = config.dimension();
    if let Some(w) = warm_start {
        if w.len() != dim {
            return Err(JayaConfigError::WarmStart {
                expected: dim,
                got: w.len(),
            });
        }
    }

    let mut initial: Vec<Vec<f64>> = (0..config.population)
        .map(|i| log_uniform(&config.bounds, &mut substream(config.seed, 0, i)))
        .collect();
    if let Some(w) = warm_start {
        initial[0] = w
            .iter()
            .zip(&config.bounds)
            .map(|(v, &(lo, hi))| v.clamp(lo, hi))
            .collect();
    }
    let fx = evaluate(&initial);
    assert_eq!(fx.len(), initial.len(), "evaluator returned wrong batch size");
    let mut evaluations = initial.len();
    let mut pop = Population::new(
        initial
            .into_iter()
            .zip(fx)
            .map(|(gains, fx)| Candidate { gains, fx: sanitize(fx) })
            .collect(),
    );

    let mut history = Vec::with_capacity(config.generations + 1);
    history.push(stats(0, &pop));

    for g in 1..=config.generations {
        let best = pop.best().gains.clone();
        let worst = pop.worst().gains.clone();
        let proposals: Vec<Vec<f64>> = pop
            .candidates
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut rng = substream(config.seed, g, i);
                jaya_update(&c.gains, &best, &worst, &config.bounds, config.retry_limit, &mut rng)
            })
            .collect();
        let fx = evaluate(&proposals);
        assert_eq!(fx.len(), proposals.len(), "evaluator returned wrong batch size");
        evaluations += proposals.len();
        for ((cand, gains), fx) in pop.candidates.iter_mut().zip(proposals).zip(fx) {
            let fx = sanitize(fx);
            if fx < cand.fx {
                *cand = Candidate { gains, fx };
            }
        }
        pop.refresh();
        history.push(stats(g, &pop));
    }

    Ok(JayaResult {
        best: pop.best().clone(),
        history,
        evaluations,
        population: pop,
    })
}

/// NaN objectives would break the ordering; treat them as worse than any
/// finite value.
fn sanitize(fx: f64) -> f64 {
    if fx.is_nan() {
        f64::INFINITY
    } else {
        fx
    }
}

fn stats(generation: usize, pop: &Population) -> GenerationStats {
    GenerationStats {
        generation,
        best_fx: pop.best().fx,
        mean_fx: pop.mean_fx(),
        worst_fx: pop.worst().fx,
    }
}

/// Tracking objective `sqrt(sum x_e1² + sum x_e2²)` over every trace sample.
/// Runs that stopped early score `PENALTY * (1 + remaining fraction)`.
pub fn objective(trace: &SimulationTrace) -> f64 {
    match trace.termination {
        Termination::Completed => {}
        _ => return PENALTY * (1.0 + trace.remaining_fraction()),
    }
    let sum: f64 = trace
        .records
        .iter()
        .map(|r| r.tracking_errors[0] * r.tracking_errors[0] + r.tracking_errors[1] * r.tracking_errors[1])
        .sum();
    let f = math::sqrt(sum);
    if f.is_finite() {
        f
    } else {
        PENALTY * 2.0
    }
}

/// Controller spec for a gain vector of the given kind; `theta0` is taken
/// from the scenario when it already uses the barrier controller.
pub fn controller_from_gains(
    scenario: &Scenario,
    kind: ControllerKind,
    gains: &[f64],
) -> Option<ControllerSpec> {
    match kind {
        ControllerKind::DrsBlf => {
            let theta0 = match scenario.controller {
                ControllerSpec::DrsBlf { theta0, .. } => theta0,
                ControllerSpec::Pid(_) => 1.0,
            };
            crate::controller::ControllerGains::from_slice(gains)
                .map(|gains| ControllerSpec::DrsBlf { gains, theta0 })
        }
        ControllerKind::Pid => PidGains::from_slice(gains).map(ControllerSpec::Pid),
    }
}

/// Simulate `scenario` with `gains` and score the trace. Gain vectors the
/// scenario rejects score the full penalty.
pub fn evaluate_gains(scenario: &Scenario, kind: ControllerKind, gains: &[f64]) -> f64 {
    let Some(spec) = controller_from_gains(scenario, kind, gains) else {
        return PENALTY * 2.0;
    };
    match sim::run(&scenario.with_controller(spec)) {
        Ok(trace) => objective(&trace),
        Err(_) => PENALTY * 2.0,
    }
}
