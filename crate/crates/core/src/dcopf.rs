//! DC optimal power flow load-shedding evaluator.
//!
//! The network's components are its generators followed by its lines, in
//! file order, mapped to ids `1..=n`. A failed generator keeps its bus but
//! loses all capacity; a failed line is dropped from the flow model.
//!
//! The shed LP has generation `g ∈ [0, cap]`, curtailment `c_b ∈ [0, d_b]`
//! at every loaded bus, free bus angles `θ` and line flows
//! `f ∈ [-cap, cap]` tied to `f = B (θ_from - θ_to)`. Each bus balances
//! generation, curtailment and net inflow against its demand. Minimising
//! `Σ c_b` gives the shed. No slack angle is pinned: curtailment keeps every
//! island balanced, so the LP is always feasible.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{Evaluation, Evaluator, EvaluatorError};
use crate::lp::{LinearProgram, LpError, LpOutcome};
use crate::state::{ComponentId, ComponentReliability, StateError, StateStatus, SystemState};

/// Relative shed threshold: a state fails when shed exceeds this fraction of
/// total demand.
pub const SHED_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DcOpfError {
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("state has {got} components, network has {expected}")]
    Width { expected: usize, got: usize },
    #[error("shed LP was {0}; the model is inconsistent")]
    Unsolvable(&'static str),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub id: String,
    pub bus: u32,
    pub capacity: f64,
    pub failure_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub id: String,
    pub from: u32,
    pub to: u32,
    pub capacity: f64,
    pub susceptance: f64,
    pub failure_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkModel {
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub lines: Vec<Line>,
}

fn check_prob(what: &str, id: &str, p: f64) -> Result<(), DcOpfError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(DcOpfError::Invalid(format!(
            "{what} {id}: failure_prob {p} outside [0, 1]"
        )));
    }
    Ok(())
}

fn check_nonneg(what: &str, id: &str, field: &str, v: f64) -> Result<(), DcOpfError> {
    if !v.is_finite() || v < 0.0 {
        return Err(DcOpfError::Invalid(format!(
            "{what} {id}: {field} must be finite and >= 0, got {v}"
        )));
    }
    Ok(())
}

impl NetworkModel {
    pub fn validate(&self) -> Result<(), DcOpfError> {
        let mut buses = HashSet::new();
        for b in &self.buses {
            if !buses.insert(b.id) {
                return Err(DcOpfError::Invalid(format!("duplicate bus id {}", b.id)));
            }
            check_nonneg("bus", &b.id.to_string(), "demand", b.demand)?;
        }
        let mut ids = HashSet::new();
        for g in &self.generators {
            if !ids.insert(g.id.as_str()) {
                return Err(DcOpfError::Invalid(format!(
                    "duplicate component id {}",
                    g.id
                )));
            }
            if !buses.contains(&g.bus) {
                return Err(DcOpfError::Invalid(format!(
                    "generator {} sits on unknown bus {}",
                    g.id, g.bus
                )));
            }
            check_nonneg("generator", &g.id, "capacity", g.capacity)?;
            check_prob("generator", &g.id, g.failure_prob)?;
        }
        for l in &self.lines {
            if !ids.insert(l.id.as_str()) {
                return Err(DcOpfError::Invalid(format!(
                    "duplicate component id {}",
                    l.id
                )));
            }
            for end in [l.from, l.to] {
                if !buses.contains(&end) {
                    return Err(DcOpfError::Invalid(format!(
                        "line {} ends at unknown bus {end}",
                        l.id
                    )));
                }
            }
            if l.from == l.to {
                return Err(DcOpfError::Invalid(format!("line {} is a self-loop", l.id)));
            }
            check_nonneg("line", &l.id, "capacity", l.capacity)?;
            if !(l.susceptance.is_finite() && l.susceptance > 0.0) {
                return Err(DcOpfError::Invalid(format!(
                    "line {}: susceptance must be > 0",
                    l.id
                )));
            }
            check_prob("line", &l.id, l.failure_prob)?;
        }
        if self.components() == 0 {
            return Err(StateError::EmptySystem.into());
        }
        Ok(())
    }

    /// Number of failure-prone components: generators plus lines.
    pub fn components(&self) -> usize {
        self.generators.len() + self.lines.len()
    }

    pub fn total_demand(&self) -> f64 {
        self.buses.iter().map(|b| b.demand).sum()
    }

    /// Per-component failure probabilities in component-id order.
    pub fn reliability(&self) -> Result<ComponentReliability, StateError> {
        let p = self
            .generators
            .iter()
            .map(|g| g.failure_prob)
            .chain(self.lines.iter().map(|l| l.failure_prob))
            .collect();
        ComponentReliability::new(p)
    }

    /// Human-readable label for component `id` (1-based).
    pub fn component_label(&self, id: ComponentId) -> Option<&str> {
        let i = id.get() - 1;
        if i < self.generators.len() {
            Some(&self.generators[i].id)
        } else {
            self.lines
                .get(i - self.generators.len())
                .map(|l| l.id.as_str())
        }
    }

    /// Component id of the generator or line with label `label`.
    pub fn component_id(&self, label: &str) -> Option<ComponentId> {
        self.generators
            .iter()
            .map(|g| g.id.as_str())
            .chain(self.lines.iter().map(|l| l.id.as_str()))
            .position(|x| x == label)
            .and_then(|i| ComponentId::new(i + 1))
    }

    /// Returns a copy with every component scaled by `factor`
    /// (capacities and demands).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.buses {
            b.demand *= factor;
        }
        for g in &mut out.generators {
            g.capacity *= factor;
        }
        for l in &mut out.lines {
            l.capacity *= factor;
        }
        out
    }
}

/// Derates `net` by the failures in `s`.
pub fn apply_state(net: &NetworkModel, s: &SystemState) -> Result<NetworkModel, DcOpfError> {
    if s.width() != net.components() {
        return Err(DcOpfError::Width {
            expected: net.components(),
            got: s.width(),
        });
    }
    let ng = net.generators.len();
    let failed = |i: usize| s.contains(ComponentId::new(i + 1).expect("nonzero"));
    let generators = net
        .generators
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let mut g = g.clone();
            if failed(i) {
                g.capacity = 0.0;
            }
            g
        })
        .collect();
    let lines = net
        .lines
        .iter()
        .enumerate()
        .filter(|(i, _)| !failed(ng + i))
        .map(|(_, l)| l.clone())
        .collect();
    Ok(NetworkModel {
        buses: net.buses.clone(),
        generators,
        lines,
    })
}

/// Shed-minimisation LP for an already derated network.
pub fn build_shed_lp(net: &NetworkModel) -> LinearProgram {
    let mut lp = LinearProgram::new();
    let bus_index: HashMap<u32, usize> = net
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id, i))
        .collect();
    let mut balance: Vec<Vec<(usize, f64)>> = vec![Vec::new(); net.buses.len()];

    for g in &net.generators {
        let v = lp.add_var(0.0, g.capacity, 0.0);
        balance[bus_index[&g.bus]].push((v, 1.0));
    }
    for (i, b) in net.buses.iter().enumerate() {
        if b.demand > 0.0 {
            let v = lp.add_var(0.0, b.demand, 1.0);
            balance[i].push((v, 1.0));
        }
    }
    let theta: Vec<usize> = net
        .buses
        .iter()
        .map(|_| lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0))
        .collect();
    for l in &net.lines {
        let f = lp.add_var(-l.capacity, l.capacity, 0.0);
        let (from, to) = (bus_index[&l.from], bus_index[&l.to]);
        lp.add_eq(
            &[
                (f, 1.0),
                (theta[from], -l.susceptance),
                (theta[to], l.susceptance),
            ],
            0.0,
        );
        balance[from].push((f, -1.0));
        balance[to].push((f, 1.0));
    }
    for (i, b) in net.buses.iter().enumerate() {
        lp.add_eq(&balance[i], b.demand);
    }
    lp
}

/// Minimum total load shed (MW) of `net` under failure state `s`.
pub fn min_load_shed(net: &NetworkModel, s: &SystemState) -> Result<f64, DcOpfError> {
    let derated = apply_state(net, s)?;
    match build_shed_lp(&derated).solve()? {
        LpOutcome::Optimal(sol) => Ok(sol.objective.max(0.0)),
        LpOutcome::Infeasible => Err(DcOpfError::Unsolvable("infeasible")),
        LpOutcome::Unbounded => Err(DcOpfError::Unsolvable("unbounded")),
    }
}

/// [`Evaluator`] backed by [`min_load_shed`].
#[derive(Debug, Clone)]
pub struct DcOpfEvaluator {
    net: NetworkModel,
    threshold: f64,
}

impl DcOpfEvaluator {
    pub fn new(net: NetworkModel) -> Result<Self, DcOpfError> {
        net.validate()?;
        let threshold = SHED_EPSILON * net.total_demand();
        Ok(Self { net, threshold })
    }

    pub fn network(&self) -> &NetworkModel {
        &self.net
    }

    /// Shed above which a state counts as a failure.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl Evaluator for DcOpfEvaluator {
    fn components(&self) -> usize {
        self.net.components()
    }

    fn evaluate(&self, state: &SystemState) -> Result<Evaluation, EvaluatorError> {
        let shed = min_load_shed(&self.net, state).map_err(|e| match e {
            DcOpfError::Width { expected, got } => EvaluatorError::Width { expected, got },
            other => EvaluatorError::Failed {
                state: state.to_string(),
                reason: other.to_string(),
            },
        })?;
        Ok(Evaluation {
            status: if shed > self.threshold {
                StateStatus::Failure
            } else {
                StateStatus::Normal
            },
            shed,
        })
    }

    fn kind(&self) -> &'static str {
        "dcopf"
    }
}
