//! Reference methods: state enumeration, Monte Carlo sampling and an exact
//! brute-force oracle.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csilp::{monotone, record_trace, Bounds, Criteria, CsilpError, StopReason, TracePoint};
use crate::evaluator::{Evaluation, EvaluationSession, Evaluator, EvaluatorError};
use crate::state::{ComponentReliability, StateError, SystemState};

/// Largest system the brute-force oracle accepts.
pub const ORACLE_MAX_COMPONENTS: usize = 24;

/// Name of the sampling generator, recorded in reports.
pub const MCS_RNG: &str = "chacha8 (rand_chacha 0.3), stream = batch index";

const SE_CHUNK: usize = 4096;
const SE_TRACE_EVERY: u64 = 1024;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("the base state (no component failed) is already a failure")]
    BaseStateFailure,
    #[error("brute force needs 2^{n} evaluations; refusing above {max} components")]
    TooLarge { n: usize, max: usize },
    #[error("reliability data covers {reliability} components, evaluator has {evaluator}")]
    WidthMismatch {
        evaluator: usize,
        reliability: usize,
    },
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Evaluator(#[from] EvaluatorError),
    #[error(transparent)]
    State(#[from] StateError),
}

impl From<CsilpError> for BaselineError {
    fn from(e: CsilpError) -> Self {
        BaselineError::InvalidSettings(e.to_string())
    }
}

fn check_width(ev: &dyn Evaluator, r: &ComponentReliability) -> Result<(), BaselineError> {
    if ev.components() != r.len() {
        return Err(BaselineError::WidthMismatch {
            evaluator: ev.components(),
            reliability: r.len(),
        });
    }
    if r.is_empty() {
        return Err(StateError::EmptySystem.into());
    }
    Ok(())
}

fn pool(workers: usize) -> Option<rayon::ThreadPool> {
    (workers > 1).then(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool")
    })
}

fn evaluate_all(
    pool: Option<&rayon::ThreadPool>,
    ev: &dyn Evaluator,
    states: &[SystemState],
) -> Vec<Result<Evaluation, EvaluatorError>> {
    match pool {
        Some(p) => p.install(|| states.par_iter().map(|s| ev.evaluate(s)).collect()),
        None => states.iter().map(|s| ev.evaluate(s)).collect(),
    }
}

/// Result of a state-enumeration run.
#[derive(Debug, Clone, PartialEq)]
pub struct SeRun {
    pub bounds: Bounds,
    /// Solver calls, base state included.
    pub evaluations: u64,
    pub failures: u64,
    /// Every state of level at most this was evaluated.
    pub levels_completed: usize,
    pub trace: Vec<TracePoint>,
    pub stop_reason: StopReason,
    pub aborted: Option<String>,
}

impl SeRun {
    pub fn lolp(&self) -> f64 {
        self.bounds.lower
    }
}

/// State enumeration: solves every state level by level, lexicographically
/// within a level, with no lattice shortcuts.
///
/// The budget and gap targets are checked after every state; `k*` after
/// every level. States are solved in parallel chunks but committed in order,
/// so the result does not depend on `workers`.
pub fn enumerate_assess(
    ev: &dyn Evaluator,
    r: &ComponentReliability,
    criteria: Criteria,
    workers: usize,
) -> Result<SeRun, BaselineError> {
    check_width(ev, r)?;
    criteria.validate()?;
    let n = r.len();
    let pool = pool(workers);
    let mut failure_mass = 0.0;
    let mut normal_mass = 0.0;
    let mut evaluations = 0u64;
    let mut failures = 0u64;
    let mut trace = Vec::new();
    let mut shown = Bounds::trivial();
    let push = |trace: &mut Vec<TracePoint>, evaluations: u64, b: Bounds| {
        record_trace(
            trace,
            TracePoint {
                evaluations,
                lower: b.lower,
                upper: b.upper,
                elapsed_ms: None,
            },
        )
    };

    let max_level = criteria.max_level.unwrap_or(n).min(n);
    let mut stop = None;
    let mut levels_completed = 0;
    let mut aborted = None;
    'levels: for level in 0..=max_level {
        let mut combos = (1..=n).combinations(level);
        loop {
            let budget_left = criteria
                .max_evaluations
                .map_or(usize::MAX, |m| m.saturating_sub(evaluations) as usize);
            let take = SE_CHUNK.min(budget_left);
            let chunk: Vec<SystemState> = combos
                .by_ref()
                .take(take)
                .map(|ids| SystemState::from_ids(n, ids).expect("ids in range"))
                .collect();
            if chunk.is_empty() {
                break;
            }
            let results = evaluate_all(pool.as_ref(), ev, &chunk);
            for (s, res) in chunk.iter().zip(results) {
                let e = match res {
                    Ok(e) => e,
                    Err(err) => {
                        aborted = Some(err.to_string());
                        stop = Some(StopReason::Aborted);
                        break 'levels;
                    }
                };
                if level == 0 && e.status.is_failure() {
                    return Err(BaselineError::BaseStateFailure);
                }
                evaluations += 1;
                let p = r.state_probability(s);
                if e.status.is_failure() {
                    failures += 1;
                    failure_mass += p;
                } else {
                    normal_mass += p;
                }
                shown = monotone(shown, failure_mass, 1.0 - normal_mass);
                if evaluations.is_multiple_of(SE_TRACE_EVERY) {
                    push(&mut trace, evaluations, shown);
                }
                if criteria.min_gap.is_some_and(|g| shown.gap() <= g) {
                    stop = Some(StopReason::Gap);
                    break 'levels;
                }
                if criteria.max_evaluations.is_some_and(|m| evaluations >= m) {
                    stop = Some(StopReason::Budget);
                    break 'levels;
                }
            }
        }
        levels_completed = level;
        push(&mut trace, evaluations, shown);
    }
    let b = shown;
    push(&mut trace, evaluations, b);
    let stop_reason = stop.unwrap_or(if max_level == n {
        StopReason::Completed
    } else {
        StopReason::MaxLevel
    });
    if stop_reason == StopReason::Completed {
        levels_completed = n;
    }
    Ok(SeRun {
        bounds: b,
        evaluations,
        failures,
        levels_completed,
        trace,
        stop_reason,
        aborted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsSettings {
    pub seed: u64,
    pub max_samples: u64,
    /// Stop once the coefficient of variation drops to this value.
    pub target_cov: Option<f64>,
    /// Samples per RNG stream and per convergence check.
    pub batch_size: u64,
    /// No convergence check before this many samples.
    pub min_samples: u64,
}

impl Default for McsSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            max_samples: 10_000_000,
            target_cov: Some(0.01),
            batch_size: 10_000,
            min_samples: 10_000,
        }
    }
}

impl McsSettings {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.batch_size == 0 {
            return Err(BaselineError::InvalidSettings(
                "batch size must be positive".into(),
            ));
        }
        if let Some(c) = self.target_cov {
            if !(c.is_finite() && c > 0.0) {
                return Err(BaselineError::InvalidSettings(format!(
                    "target coefficient of variation must be > 0, got {c}"
                )));
            }
        }
        if self.max_samples == 0 {
            return Err(BaselineError::InvalidSettings(
                "max_samples must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McsStop {
    Converged,
    MaxSamples,
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsPoint {
    pub samples: u64,
    pub estimate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_of_variation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McsRun {
    pub estimate: f64,
    pub samples: u64,
    pub failures: u64,
    /// Distinct states sent to the solver.
    pub evaluations: u64,
    pub coefficient_of_variation: Option<f64>,
    pub convergence: Vec<McsPoint>,
    pub stop: McsStop,
    pub aborted: Option<String>,
    pub rng: &'static str,
}

/// Binomial-proportion coefficient of variation of an estimate `l` from `k`
/// samples; `None` while no failure has been seen.
pub fn coefficient_of_variation(l: f64, k: u64) -> Option<f64> {
    (l > 0.0 && k > 0).then(|| ((1.0 - l) / (k as f64 * l)).sqrt())
}

/// Draws one state: component `i` fails with probability `p_i`.
fn sample(rng: &mut ChaCha8Rng, p: &[f64]) -> SystemState {
    let ids = p
        .iter()
        .enumerate()
        .filter(|(_, &pi)| rng.gen::<f64>() < pi)
        .map(|(i, _)| i + 1);
    SystemState::from_ids(p.len(), ids).expect("ids in range")
}

/// Monte Carlo sampling with a cache of solved states.
///
/// Batch `b` draws from its own stream `b` of a ChaCha8 generator seeded with
/// `seed`, so the sample path is fixed by the seed and the batch size alone.
pub fn monte_carlo_assess(
    ev: &dyn Evaluator,
    r: &ComponentReliability,
    settings: McsSettings,
    workers: usize,
) -> Result<McsRun, BaselineError> {
    check_width(ev, r)?;
    settings.validate()?;
    let mut session = EvaluationSession::new(ev, workers);
    if session
        .evaluate(&SystemState::empty(r.len()))?
        .status
        .is_failure()
    {
        return Err(BaselineError::BaseStateFailure);
    }
    let mut samples = 0u64;
    let mut failures = 0u64;
    let mut convergence = Vec::new();
    let mut stop = McsStop::MaxSamples;
    let mut aborted = None;
    let mut batch = 0u64;
    'batches: while samples < settings.max_samples {
        let size = settings.batch_size.min(settings.max_samples - samples);
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        rng.set_stream(batch);
        let states: Vec<SystemState> = (0..size).map(|_| sample(&mut rng, r.failure())).collect();
        let mut distinct = states.clone();
        distinct.sort();
        distinct.dedup();
        session.prefetch(&distinct);
        for s in &states {
            match session.evaluate(s) {
                Ok(o) => {
                    samples += 1;
                    if o.status.is_failure() {
                        failures += 1;
                    }
                }
                Err(e) => {
                    aborted = Some(e.to_string());
                    stop = McsStop::Aborted;
                    break 'batches;
                }
            }
        }
        batch += 1;
        let estimate = failures as f64 / samples as f64;
        let cov = coefficient_of_variation(estimate, samples);
        convergence.push(McsPoint {
            samples,
            estimate,
            coefficient_of_variation: cov,
        });
        if samples >= settings.min_samples {
            if let (Some(target), Some(c)) = (settings.target_cov, cov) {
                if c <= target {
                    stop = McsStop::Converged;
                    break;
                }
            }
        }
    }
    let estimate = if samples == 0 {
        0.0
    } else {
        failures as f64 / samples as f64
    };
    Ok(McsRun {
        estimate,
        samples,
        failures,
        evaluations: session.solver_calls(),
        coefficient_of_variation: coefficient_of_variation(estimate, samples),
        convergence,
        stop,
        aborted,
        rng: MCS_RNG,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub lolp_exact: f64,
    /// Minimal failure states, ordered by level then lexicographically.
    pub minimal_cut_sets: Vec<SystemState>,
    pub evaluations: u64,
    pub failures: u64,
}

/// Evaluates all `2^n` states. Minimal cut sets are the failures whose
/// single-repair neighbours are all normal, which is exact for coherent
/// systems.
pub fn brute_force_oracle(
    ev: &dyn Evaluator,
    r: &ComponentReliability,
    workers: usize,
) -> Result<OracleResult, BaselineError> {
    check_width(ev, r)?;
    let n = r.len();
    if n > ORACLE_MAX_COMPONENTS {
        return Err(BaselineError::TooLarge {
            n,
            max: ORACLE_MAX_COMPONENTS,
        });
    }
    let pool = pool(workers);
    let total = 1usize << n;
    let state_of = |mask: usize| {
        SystemState::from_ids(n, (0..n).filter(|b| mask >> b & 1 == 1).map(|b| b + 1))
            .expect("ids in range")
    };
    let mut failed = vec![false; total];
    for start in (0..total).step_by(1 << 14) {
        let end = (start + (1 << 14)).min(total);
        let states: Vec<SystemState> = (start..end).map(state_of).collect();
        for (k, res) in evaluate_all(pool.as_ref(), ev, &states)
            .into_iter()
            .enumerate()
        {
            failed[start + k] = res?.status.is_failure();
        }
    }
    if failed[0] {
        return Err(BaselineError::BaseStateFailure);
    }
    let mut lolp = 0.0;
    let mut cuts = Vec::new();
    let mut failures = 0;
    for mask in 0..total {
        if !failed[mask] {
            continue;
        }
        failures += 1;
        let s = state_of(mask);
        lolp += r.state_probability(&s);
        let minimal = (0..n)
            .filter(|b| mask >> b & 1 == 1)
            .all(|b| !failed[mask & !(1 << b)]);
        if minimal {
            cuts.push(s);
        }
    }
    cuts.sort();
    Ok(OracleResult {
        lolp_exact: lolp,
        minimal_cut_sets: cuts,
        evaluations: total as u64,
        failures,
    })
}
