//! The structure function: classifying states as normal or failure.
//!
//! [`Evaluator`] is the pluggable contract. Bundled implementations are the
//! synthetic [`CutsetOracle`] and [`ThresholdOracle`] here and the DC-OPF
//! evaluator in [`crate::dcopf`]. [`EvaluationSession`] wraps an evaluator
//! with a cache, a solver-call counter and optional parallel prefetching.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{StateError, StateStatus, SystemState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluatorError {
    #[error("state has {got} components, evaluator expects {expected}")]
    Width { expected: usize, got: usize },
    #[error("cut sets {first} and {second} are nested; cut sets must form an antichain")]
    NotAntichain { first: String, second: String },
    #[error("invalid evaluator input: {0}")]
    Invalid(String),
    #[error("evaluation of {state} failed: {reason}")]
    Failed { state: String, reason: String },
    #[error(transparent)]
    State(#[from] StateError),
}

/// Raw result of one structure-function evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub status: StateStatus,
    /// Load shed in MW (synthetic units for oracles).
    pub shed: f64,
}

/// Deterministic, coherent structure function over `components()` components.
///
/// Implementations must be safe to call from several threads at once.
pub trait Evaluator: Send + Sync {
    fn components(&self) -> usize;

    fn evaluate(&self, state: &SystemState) -> Result<Evaluation, EvaluatorError>;

    /// Short human-readable kind, e.g. `"dcopf"`.
    fn kind(&self) -> &'static str;
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn components(&self) -> usize {
        (**self).components()
    }
    fn evaluate(&self, state: &SystemState) -> Result<Evaluation, EvaluatorError> {
        (**self).evaluate(state)
    }
    fn kind(&self) -> &'static str {
        (**self).kind()
    }
}

fn check_width(expected: usize, s: &SystemState) -> Result<(), EvaluatorError> {
    if s.width() != expected {
        return Err(EvaluatorError::Width {
            expected,
            got: s.width(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Via {
    Solver,
    Dominance,
    Cache,
}

/// Classification of a state together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationOutcome {
    pub status: StateStatus,
    /// `None` when the status came from dominance and no solve happened.
    pub shed: Option<f64>,
    pub via: Via,
}

impl EvaluationOutcome {
    fn from_evaluation(e: Evaluation, via: Via) -> Self {
        Self {
            status: e.status,
            shed: Some(e.shed),
            via,
        }
    }

    pub fn dominated() -> Self {
        Self {
            status: StateStatus::Failure,
            shed: None,
            via: Via::Dominance,
        }
    }
}

/// Structure function induced by a list of minimal cut sets:
/// a state fails iff it contains one of them.
#[derive(Debug, Clone)]
pub struct CutsetOracle {
    width: usize,
    cutsets: Vec<SystemState>,
}

impl CutsetOracle {
    /// Rejects lists in which one cut set contains another.
    pub fn new(width: usize, cutsets: Vec<SystemState>) -> Result<Self, EvaluatorError> {
        if width == 0 {
            return Err(StateError::EmptySystem.into());
        }
        for c in &cutsets {
            check_width(width, c)?;
        }
        for (i, a) in cutsets.iter().enumerate() {
            for b in &cutsets[i + 1..] {
                if a.is_subset_of(b) || b.is_subset_of(a) {
                    return Err(EvaluatorError::NotAntichain {
                        first: a.to_string(),
                        second: b.to_string(),
                    });
                }
            }
        }
        Ok(Self { width, cutsets })
    }

    pub fn cutsets(&self) -> &[SystemState] {
        &self.cutsets
    }
}

impl Evaluator for CutsetOracle {
    fn components(&self) -> usize {
        self.width
    }

    /// Shed is 1.0 per contained cut set.
    fn evaluate(&self, state: &SystemState) -> Result<Evaluation, EvaluatorError> {
        check_width(self.width, state)?;
        let covering = self
            .cutsets
            .iter()
            .filter(|c| c.is_subset_of(state))
            .count();
        Ok(Evaluation {
            status: if covering > 0 {
                StateStatus::Failure
            } else {
                StateStatus::Normal
            },
            shed: covering as f64,
        })
    }

    fn kind(&self) -> &'static str {
        "cutsets"
    }
}

/// Single-bus capacity model: fails when surviving capacity drops below demand.
#[derive(Debug, Clone)]
pub struct ThresholdOracle {
    capacities: Vec<f64>,
    demand: f64,
}

impl ThresholdOracle {
    pub fn new(capacities: Vec<f64>, demand: f64) -> Result<Self, EvaluatorError> {
        if capacities.is_empty() {
            return Err(StateError::EmptySystem.into());
        }
        if capacities.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(EvaluatorError::Invalid(
                "capacities must be finite and non-negative".into(),
            ));
        }
        if !demand.is_finite() || demand < 0.0 {
            return Err(EvaluatorError::Invalid(
                "demand must be finite and non-negative".into(),
            ));
        }
        Ok(Self { capacities, demand })
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    pub fn demand(&self) -> f64 {
        self.demand
    }
}

impl Evaluator for ThresholdOracle {
    fn components(&self) -> usize {
        self.capacities.len()
    }

    fn evaluate(&self, state: &SystemState) -> Result<Evaluation, EvaluatorError> {
        check_width(self.capacities.len(), state)?;
        let surviving: f64 = self
            .capacities
            .iter()
            .enumerate()
            .filter(|(i, _)| !state.contains(crate::state::ComponentId::new(i + 1).unwrap()))
            .map(|(_, c)| c)
            .sum();
        let failed = surviving < self.demand;
        Ok(Evaluation {
            status: if failed {
                StateStatus::Failure
            } else {
                StateStatus::Normal
            },
            shed: (self.demand - surviving).max(0.0),
        })
    }

    fn kind(&self) -> &'static str {
        "threshold"
    }
}

pub fn cutset_oracle(
    width: usize,
    cutsets: Vec<SystemState>,
) -> Result<CutsetOracle, EvaluatorError> {
    CutsetOracle::new(width, cutsets)
}

pub fn threshold_oracle(
    capacities: Vec<f64>,
    demand: f64,
) -> Result<ThresholdOracle, EvaluatorError> {
    ThresholdOracle::new(capacities, demand)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CriticalSetError {
    #[error("{state} lies strictly above critical state {by}")]
    Dominated { state: String, by: String },
    #[error("{state} lies strictly below critical state {above}")]
    BelowMember { state: String, above: String },
    #[error("{0} is already a critical state")]
    Duplicate(String),
}

/// Identified critical states, bucketed by level, in discovery order.
///
/// Always an antichain. Dominance queries scan only the buckets below the
/// query's level.
#[derive(Debug, Clone, Default)]
pub struct CriticalSet {
    buckets: Vec<Vec<SystemState>>,
    sequence: Vec<SystemState>,
}

impl CriticalSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    /// Members in insertion (discovery) order.
    pub fn members(&self) -> &[SystemState] {
        &self.sequence
    }

    /// Member counts per level; entry `i` is level `i + 1`. Empty when the
    /// set is empty.
    pub fn level_counts(&self) -> Vec<usize> {
        self.buckets.iter().skip(1).map(Vec::len).collect()
    }

    pub fn contains(&self, s: &SystemState) -> bool {
        self.buckets
            .get(s.level())
            .is_some_and(|b| b.iter().any(|c| c == s))
    }

    /// True iff some member is a strict subset of `s`.
    pub fn dominated(&self, s: &SystemState) -> bool {
        self.dominator(s).is_some()
    }

    fn dominator(&self, s: &SystemState) -> Option<&SystemState> {
        let level = s.level();
        self.buckets
            .iter()
            .take(level)
            .flat_map(|b| b.iter())
            .find(|c| c.is_subset_of(s))
    }

    /// Earliest-discovered member `c` with `c ⊆ s`.
    pub fn earliest_covering(&self, s: &SystemState) -> Option<&SystemState> {
        self.sequence.iter().find(|c| c.is_subset_of(s))
    }

    /// Appends `s`, returning its sequence number.
    pub fn insert(&mut self, s: SystemState) -> Result<usize, CriticalSetError> {
        if let Some(by) = self.dominator(&s) {
            return Err(CriticalSetError::Dominated {
                state: s.to_string(),
                by: by.to_string(),
            });
        }
        let level = s.level();
        if self.contains(&s) {
            return Err(CriticalSetError::Duplicate(s.to_string()));
        }
        if let Some(above) = self
            .buckets
            .iter()
            .skip(level + 1)
            .flat_map(|b| b.iter())
            .find(|c| s.is_subset_of(c))
        {
            return Err(CriticalSetError::BelowMember {
                state: s.to_string(),
                above: above.to_string(),
            });
        }
        if self.buckets.len() <= level {
            self.buckets.resize_with(level + 1, Vec::new);
        }
        self.buckets[level].push(s.clone());
        self.sequence.push(s);
        Ok(self.sequence.len() - 1)
    }
}

pub fn dominated(s: &SystemState, critical: &CriticalSet) -> bool {
    critical.dominated(s)
}

pub fn insert_critical(
    critical: &mut CriticalSet,
    s: SystemState,
) -> Result<usize, CriticalSetError> {
    critical.insert(s)
}

/// In-memory map from state to its solved evaluation.
#[derive(Debug, Clone, Default)]
pub struct EvaluationCache {
    map: HashMap<SystemState, Evaluation>,
}

impl EvaluationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, s: &SystemState) -> Option<Evaluation> {
        self.map.get(s).copied()
    }

    /// Keeps an existing entry; returns the stored value.
    pub fn insert_if_absent(&mut self, s: SystemState, e: Evaluation) -> Evaluation {
        *self.map.entry(s).or_insert(e)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// An evaluator together with a cache, a solver-call counter and a worker
/// pool for batch prefetching.
///
/// Prefetched results are only counted when [`EvaluationSession::evaluate`]
/// consumes them, so counts and cache contents do not depend on the number
/// of workers.
pub struct EvaluationSession<'e> {
    evaluator: &'e dyn Evaluator,
    cache: EvaluationCache,
    prefetched: HashMap<SystemState, Result<Evaluation, EvaluatorError>>,
    solver_calls: u64,
    pool: Option<rayon::ThreadPool>,
}

impl fmt::Debug for EvaluationSession<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EvaluationSession")
            .field("kind", &self.evaluator.kind())
            .field("cached", &self.cache.len())
            .field("solver_calls", &self.solver_calls)
            .finish()
    }
}

impl<'e> EvaluationSession<'e> {
    /// `workers <= 1` evaluates on the calling thread.
    pub fn new(evaluator: &'e dyn Evaluator, workers: usize) -> Self {
        Self::with_cache(evaluator, workers, EvaluationCache::new())
    }

    pub fn with_cache(
        evaluator: &'e dyn Evaluator,
        workers: usize,
        cache: EvaluationCache,
    ) -> Self {
        let pool = (workers > 1).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .expect("thread pool")
        });
        Self {
            evaluator,
            cache,
            prefetched: HashMap::new(),
            solver_calls: 0,
            pool,
        }
    }

    pub fn evaluator(&self) -> &dyn Evaluator {
        self.evaluator
    }

    pub fn solver_calls(&self) -> u64 {
        self.solver_calls
    }

    pub fn cache(&self) -> &EvaluationCache {
        &self.cache
    }

    pub fn into_cache(self) -> EvaluationCache {
        self.cache
    }

    pub fn is_parallel(&self) -> bool {
        self.pool.is_some()
    }

    /// Solves the uncached states of `states` ahead of time, in parallel when
    /// a pool is configured.
    pub fn prefetch(&mut self, states: &[SystemState]) {
        let todo: Vec<&SystemState> = states
            .iter()
            .filter(|s| self.cache.get(s).is_none() && !self.prefetched.contains_key(*s))
            .collect();
        if todo.is_empty() {
            return;
        }
        let evaluator = self.evaluator;
        let results: Vec<_> = match &self.pool {
            Some(pool) => pool.install(|| todo.par_iter().map(|s| evaluator.evaluate(s)).collect()),
            None => todo.iter().map(|s| evaluator.evaluate(s)).collect(),
        };
        for (s, r) in todo.into_iter().zip(results) {
            self.prefetched.insert(s.clone(), r);
        }
    }

    /// Evaluates `s`, counting a solver call unless the cache answers.
    pub fn evaluate(&mut self, s: &SystemState) -> Result<EvaluationOutcome, EvaluatorError> {
        if let Some(e) = self.cache.get(s) {
            return Ok(EvaluationOutcome::from_evaluation(e, Via::Cache));
        }
        let result = match self.prefetched.remove(s) {
            Some(r) => r,
            None => self.evaluator.evaluate(s),
        };
        let e = result?;
        self.solver_calls += 1;
        self.cache.insert_if_absent(s.clone(), e);
        Ok(EvaluationOutcome::from_evaluation(e, Via::Solver))
    }

    /// Drops prefetched results that were never consumed.
    pub fn discard_prefetched(&mut self) {
        self.prefetched.clear();
    }
}
