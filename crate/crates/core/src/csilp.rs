//! Critical-state identification by recursive lattice partition.
//!
//! The run starts from the base state and the `n` single failures, then
//! repeatedly takes the 1-normal lattices on the frontier, classifies their
//! relative 2-level states and partitions each lattice into failure cells,
//! normal cells and smaller 1-normal lattices. Every failure cell has a
//! failing minimum, so its whole mass counts toward the lower LOLP bound;
//! every solver-confirmed normal state is removed from the upper bound.
//!
//! All candidates of one round sit on the same global level, so none can
//! dominate another and the critical set only needs to change between rounds.
//! Candidates are committed in lexicographic order, which fixes the discovery
//! order, the evaluation indices and the trace independently of the number of
//! worker threads.

use std::collections::HashMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{
    CriticalSet, CriticalSetError, EvaluationOutcome, EvaluationSession, Evaluator, EvaluatorError,
    Via,
};
use crate::partition::{
    choose_order, partition_by_level1, partition_by_level2, ColumnOrder, PartitionError,
    PartitionResult,
};
use crate::state::{ComponentId, ComponentReliability, Lattice, StateError, SystemState};

#[derive(Debug, Error)]
pub enum CsilpError {
    #[error("the base state (no component failed) is already a failure")]
    BaseStateFailure,
    #[error("reliability data covers {reliability} components, evaluator has {evaluator}")]
    WidthMismatch {
        evaluator: usize,
        reliability: usize,
    },
    #[error("invalid criteria: {0}")]
    InvalidCriteria(String),
    #[error("lattice {0} is not eligible: dimension must be at least two")]
    NotAnalyzable(String),
    #[error("failure lattice {0} is not covered by any critical state")]
    Unattributed(String),
    #[error(transparent)]
    Evaluator(#[from] EvaluatorError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Critical(#[from] CriticalSetError),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Stopping criteria. The run stops as soon as any set criterion is met, or
/// when nothing is left to resolve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Criteria {
    /// Solver-call budget `N*`, checked between rounds.
    pub max_evaluations: Option<u64>,
    /// Target gap `δ*` between the bounds.
    pub min_gap: Option<f64>,
    /// Highest failure level `k*` to resolve.
    pub max_level: Option<usize>,
}

impl Criteria {
    /// No limits: resolve the whole state space.
    pub fn complete() -> Self {
        Self::default()
    }

    pub fn max_level(k: usize) -> Self {
        Self {
            max_level: Some(k),
            ..Self::default()
        }
    }

    pub fn with_max_evaluations(mut self, n: u64) -> Self {
        self.max_evaluations = Some(n);
        self
    }

    pub fn with_min_gap(mut self, gap: f64) -> Self {
        self.min_gap = Some(gap);
        self
    }

    pub fn with_max_level(mut self, k: usize) -> Self {
        self.max_level = Some(k);
        self
    }

    pub fn validate(&self) -> Result<(), CsilpError> {
        if let Some(g) = self.min_gap {
            if !(g.is_finite() && g >= 0.0) {
                return Err(CsilpError::InvalidCriteria(format!(
                    "gap target must be a finite non-negative number, got {g}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn trivial() -> Self {
        Self {
            lower: 0.0,
            upper: 1.0,
        }
    }

    pub fn gap(&self) -> f64 {
        gap(self)
    }
}

pub fn gap(b: &Bounds) -> f64 {
    (b.upper - b.lower).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub evaluations: u64,
    pub lower: f64,
    pub upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

impl TracePoint {
    pub fn gap(&self) -> f64 {
        (self.upper - self.lower).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureLatticeEntry {
    pub lattice: Lattice,
    /// Index into the critical set's discovery sequence.
    pub critical: usize,
    pub discovery: usize,
}

/// Bookkeeping of a run: classified cells, evaluated normal states, the
/// frontier still to analyse and the bounds trace.
#[derive(Debug, Clone, Default)]
pub struct Ledger {
    pub failure_lattices: Vec<FailureLatticeEntry>,
    /// Solver-confirmed normal states, the base state included.
    pub evaluated_normals: Vec<SystemState>,
    /// 1-normal lattices of dimension at least two, in processing order.
    pub frontier: Vec<Lattice>,
    /// Cells known to hold only normal states.
    pub normal_cells: Vec<Lattice>,
    pub trace: Vec<TracePoint>,
    failure_mass: f64,
    normal_mass: f64,
}

impl Ledger {
    /// Bounds from the running sums.
    pub fn bounds(&self) -> Bounds {
        Bounds {
            lower: self.failure_mass,
            upper: (1.0 - self.normal_mass).max(self.failure_mass),
        }
    }

    /// Upper bound computed from the certified-normal cells and the evaluated
    /// parts of frontier lattices instead of the evaluated-state list.
    pub fn cell_upper(&self, r: &ComponentReliability) -> f64 {
        let mut normal: f64 = self
            .normal_cells
            .iter()
            .map(|c| r.lattice_probability(c))
            .sum();
        for l in &self.frontier {
            normal += r.state_probability(l.lower());
            for s in l.members(1).expect("frontier lattices have dimension >= 2") {
                normal += r.state_probability(&s);
            }
        }
        (1.0 - normal).max(self.failure_mass)
    }

    fn add_failure(&mut self, entry: FailureLatticeEntry, mass: f64) {
        self.failure_mass += mass;
        self.failure_lattices.push(entry);
    }

    fn add_normal(&mut self, s: SystemState, p: f64) {
        self.normal_mass += p;
        self.evaluated_normals.push(s);
    }

    fn record(&mut self, point: TracePoint) {
        record_trace(&mut self.trace, point);
    }
}

/// Appends `point`, replacing the last row if it has the same evaluation
/// count, so counts stay strictly increasing.
pub(crate) fn record_trace(trace: &mut Vec<TracePoint>, point: TracePoint) {
    match trace.last_mut() {
        Some(last) if last.evaluations == point.evaluations => *last = point,
        _ => trace.push(point),
    }
}

/// Folds freshly summed bounds into the previously reported pair so that the
/// lower bound never falls, the upper bound never rises and they never cross.
/// The running sums are exact up to rounding, so this only moves values by a
/// few ulps near convergence.
pub(crate) fn monotone(prev: Bounds, lower: f64, upper: f64) -> Bounds {
    let upper = prev.upper.min(upper.max(lower));
    Bounds {
        lower: prev.lower.max(lower.min(upper)),
        upper,
    }
}

/// Bounds recomputed from scratch: failure-cell masses below, evaluated
/// normal states subtracted above.
pub fn bounds(ledger: &Ledger, r: &ComponentReliability) -> Bounds {
    let lower: f64 = ledger
        .failure_lattices
        .iter()
        .map(|e| r.lattice_probability(&e.lattice))
        .sum();
    let normal: f64 = ledger
        .evaluated_normals
        .iter()
        .map(|s| r.state_probability(s))
        .sum();
    Bounds {
        lower,
        upper: 1.0 - normal,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalRecord {
    pub state: SystemState,
    pub level: usize,
    pub probability: f64,
    /// Load shed of the state itself.
    pub shed: f64,
    /// Probability times shed.
    pub risk: f64,
    /// Total mass of the failure lattices attributed to this state.
    pub delta_lolp: f64,
    /// Lower bound right after this state's own failure lattice was counted.
    pub lolp_at_identification: f64,
    pub evaluations_at_identification: u64,
}

/// Recomputes every critical state's attributed mass.
///
/// Each failure lattice goes to the earliest-discovered critical state below
/// its minimum.
pub fn attribute(
    ledger: &Ledger,
    critical: &CriticalSet,
    r: &ComponentReliability,
) -> Result<Vec<f64>, CsilpError> {
    let index: HashMap<&SystemState, usize> = critical
        .members()
        .iter()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    let mut delta = vec![0.0; critical.len()];
    for e in &ledger.failure_lattices {
        let c = critical
            .earliest_covering(e.lattice.lower())
            .ok_or_else(|| CsilpError::Unattributed(e.lattice.to_string()))?;
        delta[index[c]] += r.lattice_probability(&e.lattice);
    }
    Ok(delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The whole state space is classified.
    Completed,
    MaxLevel,
    Budget,
    Gap,
    /// The evaluator returned an error; results are partial.
    Aborted,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Completed => "completed",
            StopReason::MaxLevel => "max_level",
            StopReason::Budget => "budget",
            StopReason::Gap => "gap",
            StopReason::Aborted => "aborted",
        })
    }
}

/// Result of a run.
#[derive(Debug, Clone)]
pub struct CsilpRun {
    pub bounds: Bounds,
    /// Solver calls, excluding the base-state check.
    pub evaluations: u64,
    /// Every state of level at most this is classified.
    pub levels_resolved: usize,
    pub critical: CriticalSet,
    pub records: Vec<CriticalRecord>,
    pub ledger: Ledger,
    pub stop_reason: StopReason,
    /// Evaluator error message when the run was cut short.
    pub aborted: Option<String>,
}

impl CsilpRun {
    /// Final LOLP estimate: the lower bound.
    pub fn lolp(&self) -> f64 {
        self.bounds.lower
    }

    pub fn gap(&self) -> f64 {
        self.bounds.gap()
    }
}

/// Configured run over an evaluator and its component reliabilities.
pub struct Csilp<'a> {
    evaluator: &'a dyn Evaluator,
    reliability: &'a ComponentReliability,
    criteria: Criteria,
    workers: usize,
    tight_upper: bool,
    timing: bool,
}

impl<'a> Csilp<'a> {
    pub fn new(evaluator: &'a dyn Evaluator, reliability: &'a ComponentReliability) -> Self {
        Self {
            evaluator,
            reliability,
            criteria: Criteria::complete(),
            workers: 1,
            tight_upper: false,
            timing: false,
        }
    }

    pub fn criteria(mut self, c: Criteria) -> Self {
        self.criteria = c;
        self
    }

    pub fn workers(mut self, w: usize) -> Self {
        self.workers = w.max(1);
        self
    }

    /// Report the upper bound from certified-normal cells.
    pub fn tight_upper(mut self, on: bool) -> Self {
        self.tight_upper = on;
        self
    }

    /// Stamp trace points with wall-clock time (makes output non-reproducible).
    pub fn timing(mut self, on: bool) -> Self {
        self.timing = on;
        self
    }

    pub fn run(&self) -> Result<CsilpRun, CsilpError> {
        self.criteria.validate()?;
        let mut session = EvaluationSession::new(self.evaluator, self.workers);
        let mut engine = Engine::new(
            self.evaluator,
            self.reliability,
            self.tight_upper,
            self.timing.then(Instant::now),
        )?;
        engine.check_base(&mut session)?;

        let mut level = 0;
        let mut stop = match engine.bootstrap(&mut session) {
            Ok(()) => {
                level = 1;
                None
            }
            Err(Abort(e)) => Some((StopReason::Aborted, Some(e.to_string()))),
        };
        while stop.is_none() {
            stop = self.check_stop(&engine, level).map(|r| (r, None));
            if stop.is_some() {
                break;
            }
            match engine.round(&mut session)? {
                Ok(()) => level += 1,
                Err(Abort(e)) => stop = Some((StopReason::Aborted, Some(e.to_string()))),
            }
        }
        let (stop_reason, aborted) = stop.expect("loop exits with a reason");
        engine.finish(level, stop_reason, aborted)
    }

    fn check_stop(&self, engine: &Engine, level: usize) -> Option<StopReason> {
        let c = &self.criteria;
        let b = engine.current_bounds();
        if engine.ledger.frontier.is_empty() {
            Some(StopReason::Completed)
        } else if c.min_gap.is_some_and(|g| b.gap() <= g) {
            Some(StopReason::Gap)
        } else if c.max_evaluations.is_some_and(|n| engine.evaluations >= n) {
            Some(StopReason::Budget)
        } else if c.max_level.is_some_and(|k| level >= k) {
            Some(StopReason::MaxLevel)
        } else {
            None
        }
    }
}

/// Runs with one worker and default options.
pub fn run(
    evaluator: &dyn Evaluator,
    reliability: &ComponentReliability,
    criteria: Criteria,
) -> Result<CsilpRun, CsilpError> {
    Csilp::new(evaluator, reliability).criteria(criteria).run()
}

/// Evaluates the base state and the single failures and splits the state
/// space accordingly. Returns the ledger, the level-1 critical states and the
/// number of solver calls spent (base state excluded).
pub fn bootstrap(
    evaluator: &dyn Evaluator,
    reliability: &ComponentReliability,
) -> Result<(Ledger, CriticalSet, u64), CsilpError> {
    let mut session = EvaluationSession::new(evaluator, 1);
    let mut engine = Engine::new(evaluator, reliability, false, None)?;
    engine.check_base(&mut session)?;
    engine
        .bootstrap(&mut session)
        .map_err(|Abort(e)| CsilpError::Evaluator(e))?;
    Ok((engine.ledger, engine.critical, engine.evaluations))
}

/// Result of analysing a single 1-normal lattice.
#[derive(Debug, Clone)]
pub struct LatticeAnalysis {
    pub partition: PartitionResult,
    pub order: ColumnOrder,
    /// Newly identified critical states, in discovery order.
    pub new_critical: Vec<SystemState>,
    pub evaluated_normals: Vec<SystemState>,
    pub solver_calls: u64,
}

/// Classifies the relative 2-level states of the 1-normal lattice `lattice`
/// and partitions it. Dominated states cost no solver call; solver-confirmed
/// failures are added to `critical`.
pub fn analyze_one_normal(
    lattice: &Lattice,
    critical: &mut CriticalSet,
    session: &mut EvaluationSession<'_>,
) -> Result<LatticeAnalysis, CsilpError> {
    if lattice.dimension() < 2 {
        return Err(CsilpError::NotAnalyzable(lattice.to_string()));
    }
    let before = session.solver_calls();
    let candidates = lattice.members(2)?;
    let pending: Vec<SystemState> = candidates
        .iter()
        .filter(|s| !critical.dominated(s))
        .cloned()
        .collect();
    session.prefetch(&pending);
    let mut failing = Vec::new();
    let mut new_critical = Vec::new();
    let mut evaluated_normals = Vec::new();
    for s in candidates {
        let outcome = if critical.dominated(&s) {
            EvaluationOutcome::dominated()
        } else {
            session.evaluate(&s)?
        };
        if outcome.status.is_failure() {
            if outcome.via != Via::Dominance {
                critical.insert(s.clone())?;
                new_critical.push(s.clone());
            }
            failing.push(s);
        } else {
            evaluated_normals.push(s);
        }
    }
    let order = choose_order(lattice, &failing);
    let partition = partition_by_level2(lattice, &order, &failing)?;
    Ok(LatticeAnalysis {
        partition,
        order,
        new_critical,
        evaluated_normals,
        solver_calls: session.solver_calls() - before,
    })
}

/// An evaluator error, carried as a partial-run marker.
struct Abort(EvaluatorError);

struct Engine<'a> {
    width: usize,
    reliability: &'a ComponentReliability,
    ledger: Ledger,
    critical: CriticalSet,
    records: Vec<CriticalRecord>,
    evaluations: u64,
    tight_upper: bool,
    clock: Option<Instant>,
    /// Last bounds written to the trace.
    reported: Bounds,
}

struct Candidate {
    state: SystemState,
    lattice: usize,
    outcome: Option<EvaluationOutcome>,
    evaluation: u64,
}

impl<'a> Engine<'a> {
    fn new(
        evaluator: &dyn Evaluator,
        reliability: &'a ComponentReliability,
        tight_upper: bool,
        clock: Option<Instant>,
    ) -> Result<Self, CsilpError> {
        let width = evaluator.components();
        if width == 0 {
            return Err(StateError::EmptySystem.into());
        }
        if reliability.len() != width {
            return Err(CsilpError::WidthMismatch {
                evaluator: width,
                reliability: reliability.len(),
            });
        }
        Ok(Self {
            width,
            reliability,
            ledger: Ledger::default(),
            critical: CriticalSet::new(),
            records: Vec::new(),
            evaluations: 0,
            tight_upper,
            clock,
            reported: Bounds::trivial(),
        })
    }

    fn current_bounds(&self) -> Bounds {
        let mut b = self.ledger.bounds();
        if self.tight_upper {
            b.upper = self.ledger.cell_upper(self.reliability);
        }
        monotone(self.reported, b.lower, b.upper)
    }

    fn trace(&mut self) {
        let b = self.current_bounds();
        self.reported = b;
        let elapsed_ms = self.clock.map(|c| c.elapsed().as_secs_f64() * 1e3);
        self.ledger.record(TracePoint {
            evaluations: self.evaluations,
            lower: b.lower,
            upper: b.upper,
            elapsed_ms,
        });
    }

    /// Intra-round trace point; skipped in tight mode, whose upper bound is
    /// only defined between rounds.
    fn trace_mid(&mut self) {
        if !self.tight_upper {
            self.trace();
        }
    }

    fn check_base(&mut self, session: &mut EvaluationSession<'_>) -> Result<(), CsilpError> {
        let base = SystemState::empty(self.width);
        let outcome = session.evaluate(&base)?;
        if outcome.status.is_failure() {
            return Err(CsilpError::BaseStateFailure);
        }
        let p = self.reliability.state_probability(&base);
        self.ledger.add_normal(base, p);
        Ok(())
    }

    fn identify(
        &mut self,
        state: SystemState,
        shed: f64,
        lattice: Lattice,
    ) -> Result<(), CsilpError> {
        let mass = self.reliability.lattice_probability(&lattice);
        let index = self.critical.insert(state.clone())?;
        self.ledger.add_failure(
            FailureLatticeEntry {
                lattice,
                critical: index,
                discovery: self.ledger.failure_lattices.len(),
            },
            mass,
        );
        let probability = self.reliability.state_probability(&state);
        self.records.push(CriticalRecord {
            level: state.level(),
            probability,
            shed,
            risk: probability * shed,
            delta_lolp: 0.0,
            lolp_at_identification: self.ledger.failure_mass,
            evaluations_at_identification: self.evaluations,
            state,
        });
        Ok(())
    }

    fn bootstrap(&mut self, session: &mut EvaluationSession<'_>) -> Result<(), Abort> {
        let whole = Lattice::whole(self.width);
        let singles = whole.members(1).expect("width >= 1");
        session.prefetch(&singles);
        let mut failing = Vec::new();
        let mut normal = Vec::new();
        for s in singles {
            let outcome = match session.evaluate(&s) {
                Ok(o) => o,
                Err(e) => {
                    self.trace();
                    return Err(Abort(e));
                }
            };
            self.evaluations += 1;
            let id = s.ids().next().expect("single failure");
            if outcome.status.is_failure() {
                failing.push((id, s, outcome.shed.unwrap_or(0.0), self.evaluations));
            } else {
                let p = self.reliability.state_probability(&s);
                self.ledger.add_normal(s, p);
                normal.push(id);
            }
        }
        if failing.is_empty() {
            self.push_one_normal(whole);
            self.trace();
            return Ok(());
        }
        let total = self.evaluations;
        let order: Vec<ComponentId> = failing.iter().map(|f| f.0).chain(normal).collect();
        let order = ColumnOrder::new(&whole, order).expect("permutation of all components");
        let f = failing.len();
        let parts = partition_by_level1(&whole, &order, f, f).expect("valid level-1 split");
        for ((_, s, shed, at), cell) in failing.into_iter().zip(parts.failure_lattices) {
            self.evaluations = at;
            self.identify(s, shed, cell)
                .expect("singles form an antichain");
        }
        self.evaluations = total;
        for l in parts.one_normal_lattices {
            self.push_one_normal(l);
        }
        self.trace();
        Ok(())
    }

    fn push_one_normal(&mut self, l: Lattice) {
        if l.dimension() >= 2 {
            self.ledger.frontier.push(l);
        } else {
            self.ledger.normal_cells.push(l);
        }
    }

    /// One pass over the whole frontier. The outer error is an internal
    /// inconsistency; the inner one an evaluator failure.
    fn round(
        &mut self,
        session: &mut EvaluationSession<'_>,
    ) -> Result<Result<(), Abort>, CsilpError> {
        let frontier = std::mem::take(&mut self.ledger.frontier);
        let mut candidates = Vec::new();
        for (li, l) in frontier.iter().enumerate() {
            for state in l.members(2)? {
                let outcome = self
                    .critical
                    .dominated(&state)
                    .then(EvaluationOutcome::dominated);
                candidates.push(Candidate {
                    state,
                    lattice: li,
                    outcome,
                    evaluation: self.evaluations,
                });
            }
        }
        // all candidates share one level, so sorting is lexicographic
        candidates.sort_by(|a, b| a.state.cmp(&b.state));
        debug_assert!(candidates
            .windows(2)
            .all(|w| w[0].state.level() == w[1].state.level()));

        let pending: Vec<SystemState> = candidates
            .iter()
            .filter(|c| c.outcome.is_none())
            .map(|c| c.state.clone())
            .collect();
        session.prefetch(&pending);
        let mut counter = self.evaluations;
        for c in candidates.iter_mut().filter(|c| c.outcome.is_none()) {
            match session.evaluate(&c.state) {
                Ok(o) => {
                    counter += 1;
                    c.outcome = Some(o);
                    c.evaluation = counter;
                }
                Err(e) => {
                    session.discard_prefetched();
                    // the round is dropped; its solver calls still count
                    self.evaluations = counter;
                    self.ledger.frontier = frontier;
                    self.trace();
                    return Ok(Err(Abort(e)));
                }
            }
        }

        let mut failing: Vec<Vec<SystemState>> = vec![Vec::new(); frontier.len()];
        for c in &candidates {
            if c.outcome.expect("classified").status.is_failure() {
                failing[c.lattice].push(c.state.clone());
            }
        }
        let mut cells: HashMap<SystemState, Lattice> = HashMap::new();
        let mut next = Vec::new();
        for (li, l) in frontier.iter().enumerate() {
            let order = choose_order(l, &failing[li]);
            let parts = partition_by_level2(l, &order, &failing[li])?;
            for cell in parts.failure_lattices {
                cells.insert(cell.lower().clone(), cell);
            }
            for cell in parts.one_normal_lattices {
                if cell.dimension() >= 2 {
                    next.push(cell);
                } else {
                    self.ledger.normal_cells.push(cell);
                }
            }
            self.ledger.normal_cells.extend(parts.normal_lattices);
        }

        for c in candidates {
            let outcome = c.outcome.expect("classified");
            self.evaluations = c.evaluation;
            if outcome.status.is_failure() {
                let cell = cells
                    .remove(&c.state)
                    .expect("each failing candidate heads one failure lattice");
                if outcome.via == Via::Dominance {
                    let mass = self.reliability.lattice_probability(&cell);
                    let by = self
                        .critical
                        .earliest_covering(&c.state)
                        .expect("dominated by an existing critical state");
                    let critical = self
                        .critical
                        .members()
                        .iter()
                        .position(|m| m == by)
                        .expect("member");
                    let discovery = self.ledger.failure_lattices.len();
                    self.ledger.add_failure(
                        FailureLatticeEntry {
                            lattice: cell,
                            critical,
                            discovery,
                        },
                        mass,
                    );
                } else {
                    self.identify(c.state, outcome.shed.unwrap_or(0.0), cell)?;
                    self.trace_mid();
                }
            } else {
                let p = self.reliability.state_probability(&c.state);
                self.ledger.add_normal(c.state, p);
                if self.evaluations.is_multiple_of(256) {
                    self.trace_mid();
                }
            }
        }
        self.evaluations = counter;
        self.ledger.frontier = next;
        self.trace();
        Ok(Ok(()))
    }

    fn finish(
        mut self,
        level: usize,
        stop_reason: StopReason,
        aborted: Option<String>,
    ) -> Result<CsilpRun, CsilpError> {
        let delta = attribute(&self.ledger, &self.critical, self.reliability)?;
        for (r, d) in self.records.iter_mut().zip(delta) {
            r.delta_lolp = d;
        }
        let levels_resolved = if stop_reason == StopReason::Completed {
            self.width
        } else {
            level
        };
        Ok(CsilpRun {
            bounds: self.current_bounds(),
            evaluations: self.evaluations,
            levels_resolved,
            critical: self.critical,
            records: self.records,
            ledger: self.ledger,
            stop_reason,
            aborted,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::CutsetOracle;

    fn st(n: usize, ids: &[usize]) -> SystemState {
        SystemState::from_ids(n, ids.iter().copied()).unwrap()
    }

    fn lat(n: usize, lo: &[usize], hi: &[usize]) -> Lattice {
        Lattice::new(st(n, lo), st(n, hi)).unwrap()
    }

    fn sys5() -> (CutsetOracle, ComponentReliability) {
        let o = CutsetOracle::new(
            5,
            vec![
                st(5, &[1]),
                st(5, &[2, 3]),
                st(5, &[3, 4]),
                st(5, &[2, 4, 5]),
            ],
        )
        .unwrap();
        (o, ComponentReliability::uniform(5, 0.1).unwrap())
    }

    fn brute_lolp(ev: &dyn Evaluator, r: &ComponentReliability) -> f64 {
        Lattice::whole(ev.components())
            .all_members()
            .iter()
            .filter(|s| ev.evaluate(s).unwrap().status.is_failure())
            .map(|s| r.state_probability(s))
            .sum()
    }

    #[test]
    fn bootstrap_sys5() {
        let (o, r) = sys5();
        let (ledger, c, evals) = bootstrap(&o, &r).unwrap();
        assert_eq!(evals, 5);
        assert_eq!(c.members(), &[st(5, &[1])]);
        assert_eq!(ledger.failure_lattices.len(), 1);
        assert_eq!(
            ledger.failure_lattices[0].lattice,
            lat(5, &[1], &[1, 2, 3, 4, 5])
        );
        assert_eq!(ledger.frontier, vec![lat(5, &[], &[2, 3, 4, 5])]);
        let b = bounds(&ledger, &r);
        assert!((b.lower - 0.1).abs() < 1e-15);
        assert_eq!(ledger.bounds().lower, b.lower);
    }

    #[test]
    fn bootstrap_without_single_failures_keeps_whole_space() {
        let o = CutsetOracle::new(4, vec![st(4, &[1, 2]), st(4, &[3, 4])]).unwrap();
        let r = ComponentReliability::uniform(4, 0.2).unwrap();
        let (ledger, c, evals) = bootstrap(&o, &r).unwrap();
        assert_eq!(evals, 4);
        assert!(c.is_empty());
        assert!(ledger.failure_lattices.is_empty());
        assert_eq!(ledger.frontier, vec![Lattice::whole(4)]);
    }

    #[test]
    fn bootstrap_with_all_single_failures() {
        let o = CutsetOracle::new(3, (1..=3).map(|i| st(3, &[i])).collect()).unwrap();
        let r = ComponentReliability::uniform(3, 0.3).unwrap();
        let (ledger, c, _) = bootstrap(&o, &r).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(ledger.failure_lattices.len(), 3);
        assert!(ledger.frontier.is_empty());
        let run = run(&o, &r, Criteria::complete()).unwrap();
        assert_eq!(run.stop_reason, StopReason::Completed);
        assert!((run.lolp() - brute_lolp(&o, &r)).abs() < 1e-12);
    }

    #[test]
    fn base_state_failure_is_rejected() {
        let o = crate::evaluator::ThresholdOracle::new(vec![1.0, 1.0], 5.0).unwrap();
        let r = ComponentReliability::uniform(2, 0.1).unwrap();
        assert!(matches!(
            run(&o, &r, Criteria::complete()),
            Err(CsilpError::BaseStateFailure)
        ));
    }

    #[test]
    fn analyze_sys5_rounds() {
        let (o, _) = sys5();
        let mut session = EvaluationSession::new(&o, 1);
        let mut c = CriticalSet::new();
        c.insert(st(5, &[1])).unwrap();
        let a = analyze_one_normal(&lat(5, &[], &[2, 3, 4, 5]), &mut c, &mut session).unwrap();
        assert_eq!(a.solver_calls, 6);
        assert_eq!(a.new_critical, vec![st(5, &[2, 3]), st(5, &[3, 4])]);
        assert_eq!(a.evaluated_normals.len(), 4);
        assert!(a
            .partition
            .one_normal_lattices
            .contains(&lat(5, &[2], &[2, 4, 5])));

        let b = analyze_one_normal(&lat(5, &[2], &[2, 4, 5]), &mut c, &mut session).unwrap();
        assert_eq!(b.solver_calls, 1);
        assert_eq!(b.new_critical, vec![st(5, &[2, 4, 5])]);
        assert_eq!(session.solver_calls(), 7);
    }

    #[test]
    fn analyze_fully_dominated_lattice_costs_nothing() {
        let o = CutsetOracle::new(4, vec![st(4, &[1])]).unwrap();
        let mut session = EvaluationSession::new(&o, 1);
        let mut c = CriticalSet::new();
        c.insert(st(4, &[1])).unwrap();
        let l = lat(4, &[1], &[1, 2, 3, 4]);
        let a = analyze_one_normal(&l, &mut c, &mut session).unwrap();
        assert_eq!(a.solver_calls, 0);
        assert!(a.new_critical.is_empty());
        assert_eq!(a.partition.failure_lattices.len(), 3);
        assert!(analyze_one_normal(&lat(4, &[], &[1]), &mut c, &mut session).is_err());
    }

    #[test]
    fn full_run_sys5() {
        let (o, r) = sys5();
        let run = run(&o, &r, Criteria::max_level(5)).unwrap();
        assert_eq!(run.evaluations, 12);
        assert_eq!(
            run.critical.members(),
            &[
                st(5, &[1]),
                st(5, &[2, 3]),
                st(5, &[3, 4]),
                st(5, &[2, 4, 5])
            ]
        );
        let fl: Vec<_> = run
            .ledger
            .failure_lattices
            .iter()
            .map(|e| e.lattice.clone())
            .collect();
        assert_eq!(
            fl,
            vec![
                lat(5, &[1], &[1, 2, 3, 4, 5]),
                lat(5, &[2, 3], &[2, 3, 4, 5]),
                lat(5, &[3, 4], &[3, 4, 5]),
                lat(5, &[2, 4, 5], &[2, 4, 5]),
            ]
        );
        let mut normal = run.ledger.normal_cells.clone();
        normal.sort_by(|a, b| a.lower().cmp(b.lower()).then(a.upper().cmp(b.upper())));
        let mut expected = vec![
            lat(5, &[2, 4], &[2, 4]),
            lat(5, &[2], &[2, 5]),
            lat(5, &[3], &[3, 5]),
            lat(5, &[], &[4, 5]),
        ];
        expected.sort_by(|a, b| a.lower().cmp(b.lower()).then(a.upper().cmp(b.upper())));
        assert_eq!(normal, expected);
        let masses: Vec<f64> = fl.iter().map(|l| r.lattice_probability(l)).collect();
        for (m, e) in masses.iter().zip([0.1, 0.009, 0.0081, 0.00081]) {
            assert!((m - e).abs() < 1e-15, "{m} vs {e}");
        }
        assert!((run.lolp() - 0.11791).abs() < 1e-12);
        assert!((run.lolp() - brute_lolp(&o, &r)).abs() < 1e-12);
        assert!((run.bounds.upper - run.bounds.lower).abs() < 1e-12);
        assert_eq!(run.stop_reason, StopReason::Completed);
    }

    #[test]
    fn attribution_sys5() {
        let (o, r) = sys5();
        let run = run(&o, &r, Criteria::complete()).unwrap();
        let d: Vec<f64> = run.records.iter().map(|r| r.delta_lolp).collect();
        assert!((d[0] - 0.1).abs() < 1e-15);
        assert!((d[3] - r.state_probability(&st(5, &[2, 4, 5]))).abs() < 1e-15);
        assert!((d.iter().sum::<f64>() - run.lolp()).abs() < 1e-15);
        for rec in &run.records {
            assert_eq!(rec.level, rec.state.level());
            assert!((rec.risk - rec.probability * rec.shed).abs() < 1e-18);
        }
        assert_eq!(
            run.records
                .iter()
                .map(|r| r.evaluations_at_identification)
                .collect::<Vec<_>>(),
            vec![1, 6, 9, 12]
        );
    }

    #[test]
    fn budget_at_bootstrap() {
        let (o, r) = sys5();
        let run = run(&o, &r, Criteria::complete().with_max_evaluations(5)).unwrap();
        assert_eq!(run.stop_reason, StopReason::Budget);
        assert_eq!(run.evaluations, 5);
        assert!((run.bounds.lower - 0.1).abs() < 1e-15);
        let normal: f64 = [&[][..], &[2], &[3], &[4], &[5]]
            .iter()
            .map(|ids| r.state_probability(&st(5, ids)))
            .sum();
        assert!((run.bounds.upper - (1.0 - normal)).abs() < 1e-15);
    }

    #[test]
    fn stop_criteria() {
        let (o, r) = sys5();
        let run2 = run(&o, &r, Criteria::max_level(2)).unwrap();
        assert_eq!(run2.stop_reason, StopReason::MaxLevel);
        assert_eq!(run2.evaluations, 11);
        assert_eq!(run2.levels_resolved, 2);
        let g = run(&o, &r, Criteria::complete().with_min_gap(0.5)).unwrap();
        assert_eq!(g.stop_reason, StopReason::Gap);
        assert!(g.gap() <= 0.5);
        assert!(Criteria::complete().with_min_gap(-1.0).validate().is_err());
    }

    #[test]
    fn monotone_envelope_absorbs_rounding() {
        // Running sums crossing by an ulp at completion.
        let prev = Bounds {
            lower: 0.1171,
            upper: 0.11790999999999963,
        };
        let b = monotone(prev, 0.11791000000000001, 0.11790999999999963);
        assert_eq!(b.upper, prev.upper);
        assert!(b.lower <= b.upper && b.lower >= prev.lower);
        // Ordinary progress passes through untouched.
        let b = monotone(Bounds::trivial(), 0.2, 0.7);
        assert_eq!(
            b,
            Bounds {
                lower: 0.2,
                upper: 0.7
            }
        );
    }

    #[test]
    fn complete_trace_is_monotone_to_the_last_row() {
        let (o, r) = sys5();
        let run = run(&o, &r, Criteria::complete()).unwrap();
        for w in run.ledger.trace.windows(2) {
            assert!(w[0].lower <= w[1].lower && w[0].upper >= w[1].upper);
        }
        let last = run.ledger.trace.last().unwrap();
        assert_eq!(
            (last.lower, last.upper),
            (run.bounds.lower, run.bounds.upper)
        );
    }

    #[test]
    fn empty_ledger_bounds() {
        let r = ComponentReliability::uniform(3, 0.1).unwrap();
        let b = bounds(&Ledger::default(), &r);
        assert_eq!(b, Bounds::trivial());
        assert_eq!(gap(&b), 1.0);
        assert_eq!(
            gap(&Bounds {
                lower: 0.3,
                upper: 0.3
            }),
            0.0
        );
    }

    #[test]
    fn tight_upper_agrees_with_default() {
        let (o, r) = sys5();
        for k in 1..=5 {
            let a = Csilp::new(&o, &r)
                .criteria(Criteria::max_level(k))
                .run()
                .unwrap();
            let b = Csilp::new(&o, &r)
                .criteria(Criteria::max_level(k))
                .tight_upper(true)
                .run()
                .unwrap();
            assert!((a.bounds.upper - b.bounds.upper).abs() < 1e-12);
        }
    }

    #[test]
    fn evaluator_errors_abort_with_partial_results() {
        struct Flaky(CutsetOracle);
        impl Evaluator for Flaky {
            fn components(&self) -> usize {
                self.0.components()
            }
            fn evaluate(
                &self,
                s: &SystemState,
            ) -> Result<crate::evaluator::Evaluation, EvaluatorError> {
                if s.level() == 3 {
                    return Err(EvaluatorError::Failed {
                        state: s.to_string(),
                        reason: "solver exploded".into(),
                    });
                }
                self.0.evaluate(s)
            }
            fn kind(&self) -> &'static str {
                "flaky"
            }
        }
        let (o, r) = sys5();
        let run = run(&Flaky(o), &r, Criteria::complete()).unwrap();
        assert_eq!(run.stop_reason, StopReason::Aborted);
        assert!(run.aborted.as_deref().unwrap().contains("solver exploded"));
        assert_eq!(run.critical.len(), 3);
        assert_eq!(run.levels_resolved, 2);
        let exact = 0.11791;
        assert!(run.bounds.lower <= exact && exact <= run.bounds.upper + 1e-12);
    }
}
