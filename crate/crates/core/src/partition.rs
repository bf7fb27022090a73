//! Splitting a lattice into failure, 1-normal and normal cells.
//!
//! Notation follows the usual column picture of an `n`-dimensional lattice
//! `[lower, upper]` with ordered free components `c_1..c_n`:
//!
//! * `a_i = lower ∪ {c_i}` and `a_ij = lower ∪ {c_i, c_j}` are the relative
//!   1- and 2-level states;
//! * `t_i = lower ∪ {c_i, .., c_n}` and `t_ij = a_i ∪ {c_j, .., c_n}` are
//!   their conjugates, with `t_{n+1} = lower` and `t_{i(n+1)} = a_i`.
//!
//! Column `i` is the sub-lattice `[a_i, t_i]`; the columns together with the
//! tail `[lower, t_{m+1}]` tile the input for any `m`.

use std::collections::HashMap;

use thiserror::Error;

use crate::state::{ComponentId, Lattice, StateError, SystemState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("column order is not a permutation of the lattice's free components")]
    InvalidOrder,
    #[error("index {index} outside 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("indices must satisfy i < j, got i = {i}, j = {j}")]
    IndexOrder { i: usize, j: usize },
    #[error("{failing} failing columns exceed m = {m}")]
    TooManyFailing { failing: usize, m: usize },
    #[error("state {state} is not a relative 2-level state of {lattice}")]
    PairOutsideLattice { state: String, lattice: String },
    #[error(transparent)]
    State(#[from] StateError),
}

/// Permutation of a lattice's free components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnOrder {
    order: Vec<ComponentId>,
}

impl ColumnOrder {
    pub fn new(lattice: &Lattice, order: Vec<ComponentId>) -> Result<Self, PartitionError> {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != lattice.free_components() {
            return Err(PartitionError::InvalidOrder);
        }
        Ok(Self { order })
    }

    /// Ascending component ids.
    pub fn ascending(lattice: &Lattice) -> Self {
        Self {
            order: lattice.free_components(),
        }
    }

    pub fn as_slice(&self) -> &[ComponentId] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn check(&self, lattice: &Lattice) -> Result<(), PartitionError> {
        if self.order.len() != lattice.dimension()
            || !self
                .order
                .iter()
                .all(|&c| !lattice.lower().contains(c) && lattice.upper().contains(c))
        {
            return Err(PartitionError::InvalidOrder);
        }
        Ok(())
    }
}

/// Cells of a partition. Together they tile the input lattice.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PartitionResult {
    pub failure_lattices: Vec<Lattice>,
    pub one_normal_lattices: Vec<Lattice>,
    pub normal_lattices: Vec<Lattice>,
    /// Cells whose status the partition cannot certify (only produced by
    /// [`partition_by_level1`] when `m` exceeds the failing prefix).
    pub unclassified: Vec<Lattice>,
}

impl PartitionResult {
    pub fn cells(&self) -> impl Iterator<Item = &Lattice> {
        self.failure_lattices
            .iter()
            .chain(&self.one_normal_lattices)
            .chain(&self.normal_lattices)
            .chain(&self.unclassified)
    }

    pub fn cell_count(&self) -> usize {
        self.failure_lattices.len()
            + self.one_normal_lattices.len()
            + self.normal_lattices.len()
            + self.unclassified.len()
    }
}

fn with_suffix(base: &SystemState, suffix: &[ComponentId]) -> SystemState {
    suffix.iter().fold(base.clone(), |s, &c| s.with(c))
}

/// `t_i`: join of the relative 1-level states `a_i..a_n`; `lower` at `i = n+1`.
pub fn conjugate_t(
    lattice: &Lattice,
    order: &ColumnOrder,
    i: usize,
) -> Result<SystemState, PartitionError> {
    order.check(lattice)?;
    let n = order.len();
    if i == 0 || i > n + 1 {
        return Err(PartitionError::IndexOutOfRange {
            index: i,
            max: n + 1,
        });
    }
    Ok(with_suffix(lattice.lower(), &order.order[i - 1..]))
}

/// `t_ij`: join of `a_ik` for `k = j..n`; `a_i` at `j = n+1`.
pub fn conjugate_t2(
    lattice: &Lattice,
    order: &ColumnOrder,
    i: usize,
    j: usize,
) -> Result<SystemState, PartitionError> {
    order.check(lattice)?;
    let n = order.len();
    if i == 0 || i > n {
        return Err(PartitionError::IndexOutOfRange { index: i, max: n });
    }
    if j > n + 1 {
        return Err(PartitionError::IndexOutOfRange {
            index: j,
            max: n + 1,
        });
    }
    if j <= i {
        return Err(PartitionError::IndexOrder { i, j });
    }
    let a_i = lattice.lower().with(order.order[i - 1]);
    Ok(with_suffix(&a_i, &order.order[j - 1..]))
}

/// Splits `lattice` into the columns `[a_i, t_i]`, `i = 1..m`, and the tail
/// `[lower, t_{m+1}]`.
///
/// The caller orders the free components so that the relative 1-level
/// failures come first and passes their count as `failing`. The first
/// `failing` columns are failure lattices; the tail is 1-normal. Columns
/// between `failing` and `m` carry no certified status.
pub fn partition_by_level1(
    lattice: &Lattice,
    order: &ColumnOrder,
    m: usize,
    failing: usize,
) -> Result<PartitionResult, PartitionError> {
    order.check(lattice)?;
    let n = order.len();
    if m == 0 || m > n {
        return Err(PartitionError::IndexOutOfRange { index: m, max: n });
    }
    if failing > m {
        return Err(PartitionError::TooManyFailing { failing, m });
    }
    let lower = lattice.lower();
    let cols = &order.order;
    let mut out = PartitionResult::default();
    for i in 0..m {
        let cell = Lattice::new_unchecked(lower.with(cols[i]), with_suffix(lower, &cols[i..]));
        if i < failing {
            out.failure_lattices.push(cell);
        } else {
            out.unclassified.push(cell);
        }
    }
    out.one_normal_lattices.push(Lattice::new_unchecked(
        lower.clone(),
        with_suffix(lower, &cols[m..]),
    ));
    Ok(out)
}

/// Column order for a 1-normal lattice given its failing relative 2-level
/// states.
///
/// Greedy cover: repeatedly take the component incident to the most failure
/// pairs not yet covered by an earlier column (ties to the smaller id), then
/// append the remaining components in ascending order. Failure-bearing
/// columns therefore lead, and each column collects every still-uncovered
/// pair it touches.
pub fn choose_order(lattice: &Lattice, failure_pairs: &[SystemState]) -> ColumnOrder {
    let free = lattice.free_components();
    let pairs: Vec<(ComponentId, ComponentId)> = failure_pairs
        .iter()
        .filter_map(|p| relative_pair(lattice, p))
        .collect();
    let mut covered = vec![false; pairs.len()];
    let mut placed: Vec<ComponentId> = Vec::with_capacity(free.len());
    let mut used = vec![false; free.len()];
    loop {
        let mut degree: HashMap<ComponentId, usize> = HashMap::new();
        for (k, &(x, y)) in pairs.iter().enumerate() {
            if !covered[k] {
                *degree.entry(x).or_default() += 1;
                *degree.entry(y).or_default() += 1;
            }
        }
        let best = free
            .iter()
            .enumerate()
            .filter(|(idx, _)| !used[*idx])
            .filter_map(|(idx, c)| degree.get(c).map(|&d| (idx, *c, d)))
            .max_by(|a, b| a.2.cmp(&b.2).then(b.1.cmp(&a.1)));
        let Some((idx, c, _)) = best else { break };
        used[idx] = true;
        placed.push(c);
        for (k, &(x, y)) in pairs.iter().enumerate() {
            if x == c || y == c {
                covered[k] = true;
            }
        }
    }
    placed.extend(
        free.iter()
            .enumerate()
            .filter(|(idx, _)| !used[*idx])
            .map(|(_, c)| *c),
    );
    ColumnOrder { order: placed }
}

fn relative_pair(lattice: &Lattice, s: &SystemState) -> Option<(ComponentId, ComponentId)> {
    if !lattice.contains(s) || s.level() != lattice.lower().level() + 2 {
        return None;
    }
    let extra = s.difference(lattice.lower()).ok()?;
    let mut ids = extra.ids();
    Some((ids.next()?, ids.next()?))
}

/// Partitions a 1-normal lattice by its failing relative 2-level states.
///
/// `failure_pairs` must list every failing relative 2-level state; all other
/// relative 2-level states are taken as normal. For each column `i` (in
/// `order`), the partner components placed after it are re-ordered with the
/// failing partners first (ascending id), then the others (ascending id), so
/// that the failures of the column are contiguous. With `f_i` failing
/// partners the column yields `f_i` failure lattices `[a_ij, t_ij]` and the
/// 1-normal lattice `[a_i, t_{i(f_i+1)}]`.
///
/// Trailing columns without failures are merged into the tail
/// `[lower, t_{m'+1}]` down to dimension two, so the tail only holds relative
/// states of level at most two and is normal. Earlier failure-free columns
/// are emitted as 1-normal cells. A lattice of dimension below two is
/// returned whole as a normal cell.
pub fn partition_by_level2(
    lattice: &Lattice,
    order: &ColumnOrder,
    failure_pairs: &[SystemState],
) -> Result<PartitionResult, PartitionError> {
    order.check(lattice)?;
    let d = order.len();
    let mut pairs = Vec::with_capacity(failure_pairs.len());
    for p in failure_pairs {
        pairs.push(relative_pair(lattice, p).ok_or_else(|| {
            PartitionError::PairOutsideLattice {
                state: p.to_string(),
                lattice: lattice.to_string(),
            }
        })?);
    }
    let mut out = PartitionResult::default();
    if d < 2 {
        out.normal_lattices.push(lattice.clone());
        return Ok(out);
    }

    let cols = &order.order;
    let position: HashMap<ComponentId, usize> =
        cols.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut failing_partners: Vec<Vec<ComponentId>> = vec![Vec::new(); d];
    for &(x, y) in &pairs {
        let (col, partner) = if position[&x] < position[&y] {
            (x, y)
        } else {
            (y, x)
        };
        failing_partners[position[&col]].push(partner);
    }
    let last_failing = failing_partners
        .iter()
        .rposition(|f| !f.is_empty())
        .map_or(0, |i| i + 1);
    let split = last_failing.max(d - 2);

    let lower = lattice.lower();
    for i in 0..split {
        let a_i = lower.with(cols[i]);
        let mut failing = failing_partners[i].clone();
        failing.sort_unstable();
        failing.dedup();
        let mut rest: Vec<ComponentId> = cols[i + 1..]
            .iter()
            .copied()
            .filter(|c| !failing.contains(c))
            .collect();
        rest.sort_unstable();
        let mut partners = failing.clone();
        partners.extend(rest);
        for k in 0..failing.len() {
            out.failure_lattices.push(Lattice::new_unchecked(
                a_i.with(partners[k]),
                with_suffix(&a_i, &partners[k..]),
            ));
        }
        out.one_normal_lattices.push(Lattice::new_unchecked(
            a_i.clone(),
            with_suffix(&a_i, &partners[failing.len()..]),
        ));
    }
    out.normal_lattices.push(Lattice::new_unchecked(
        lower.clone(),
        with_suffix(lower, &cols[split..]),
    ));
    Ok(out)
}
