//! System states, the subset partial order, lattice intervals and the
//! product-form probability model.
//!
//! A [`SystemState`] is the set of failed components of an `n`-component
//! system, stored as a bit vector of 64-bit words. Component ids are 1-based
//! (`1..=n`); bit `i - 1` is set when component `i` has failed.

use std::cmp::Ordering;
use std::fmt;

use itertools::Itertools;
use smallvec::SmallVec;
use thiserror::Error;

const WORD_BITS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("state width mismatch: {left} vs {right} components")]
    WidthMismatch { left: usize, right: usize },
    #[error("component id {id} is outside 1..={width}")]
    ComponentOutOfRange { id: usize, width: usize },
    #[error("a system needs at least one component")]
    EmptySystem,
    #[error("lattice lower end {lower} is not a subset of upper end {upper}")]
    InvertedLattice { lower: String, upper: String },
    #[error("relative level {k} exceeds lattice dimension {dimension}")]
    LevelOutOfRange { k: usize, dimension: usize },
    #[error("failure probability {value} of component {id} is outside [0, 1]")]
    InvalidProbability { id: usize, value: f64 },
}

/// 1-based component identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComponentId(u32);

impl ComponentId {
    /// Returns `None` for id 0.
    pub fn new(id: usize) -> Option<Self> {
        if id == 0 || id > u32::MAX as usize {
            None
        } else {
            Some(Self(id as u32))
        }
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }

    fn bit(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Set of failed components.
///
/// Equality, hashing and ordering include the width, so states from systems
/// of different size never compare equal. The total order is by level first
/// and then lexicographic over the sorted component ids, which is the order
/// in which candidates are visited everywhere in this crate.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SystemState {
    width: u32,
    words: SmallVec<[u64; 2]>,
}

impl SystemState {
    /// The intact state `{}` of an `width`-component system.
    pub fn empty(width: usize) -> Self {
        Self {
            width: width as u32,
            words: SmallVec::from_elem(0, width.div_ceil(WORD_BITS)),
        }
    }

    /// The state with every component failed.
    pub fn full(width: usize) -> Self {
        let mut s = Self::empty(width);
        for (i, w) in s.words.iter_mut().enumerate() {
            let bits = (width - i * WORD_BITS).min(WORD_BITS);
            *w = if bits == WORD_BITS {
                u64::MAX
            } else {
                (1u64 << bits) - 1
            };
        }
        s
    }

    pub fn from_ids<I>(width: usize, ids: I) -> Result<Self, StateError>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut s = Self::empty(width);
        for id in ids {
            if id == 0 || id > width {
                return Err(StateError::ComponentOutOfRange { id, width });
            }
            s.set_bit(id - 1);
        }
        Ok(s)
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Number of failed components.
    pub fn level(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn contains(&self, id: ComponentId) -> bool {
        let b = id.bit();
        b < self.width() && self.words[b / WORD_BITS] >> (b % WORD_BITS) & 1 == 1
    }

    pub fn insert(&mut self, id: ComponentId) -> Result<(), StateError> {
        self.check_id(id)?;
        self.set_bit(id.bit());
        Ok(())
    }

    pub fn remove(&mut self, id: ComponentId) -> Result<(), StateError> {
        self.check_id(id)?;
        let b = id.bit();
        self.words[b / WORD_BITS] &= !(1u64 << (b % WORD_BITS));
        Ok(())
    }

    /// Copy of `self` with `id` added.
    pub fn with(&self, id: ComponentId) -> Self {
        let mut s = self.clone();
        debug_assert!(id.bit() < self.width());
        s.set_bit(id.bit());
        s
    }

    fn check_id(&self, id: ComponentId) -> Result<(), StateError> {
        if id.get() > self.width() {
            return Err(StateError::ComponentOutOfRange {
                id: id.get(),
                width: self.width(),
            });
        }
        Ok(())
    }

    fn set_bit(&mut self, b: usize) {
        self.words[b / WORD_BITS] |= 1u64 << (b % WORD_BITS);
    }

    /// Failed components in ascending order.
    pub fn ids(&self) -> impl Iterator<Item = ComponentId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let tz = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(ComponentId((wi * WORD_BITS + tz + 1) as u32))
            })
        })
    }

    /// Failed component ids as plain integers.
    pub fn id_vec(&self) -> Vec<usize> {
        self.ids().map(ComponentId::get).collect()
    }

    fn check_width(&self, other: &Self) -> Result<(), StateError> {
        if self.width != other.width {
            return Err(StateError::WidthMismatch {
                left: self.width(),
                right: other.width(),
            });
        }
        Ok(())
    }

    /// `self ⊆ other`, checked for equal width.
    pub fn leq(&self, other: &Self) -> Result<bool, StateError> {
        self.check_width(other)?;
        Ok(self.is_subset_of(other))
    }

    /// Subset test without the width check. Widths must agree.
    #[inline]
    pub fn is_subset_of(&self, other: &Self) -> bool {
        debug_assert_eq!(self.width, other.width);
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & !b == 0)
    }

    #[inline]
    pub fn is_strict_subset_of(&self, other: &Self) -> bool {
        self.is_subset_of(other) && self.words != other.words
    }

    /// Least upper bound (union).
    pub fn join(&self, other: &Self) -> Result<Self, StateError> {
        self.check_width(other)?;
        Ok(self.zip_words(other, |a, b| a | b))
    }

    /// Greatest lower bound (intersection).
    pub fn meet(&self, other: &Self) -> Result<Self, StateError> {
        self.check_width(other)?;
        Ok(self.zip_words(other, |a, b| a & b))
    }

    /// Components failed in `self` but not in `other`.
    pub fn difference(&self, other: &Self) -> Result<Self, StateError> {
        self.check_width(other)?;
        Ok(self.zip_words(other, |a, b| a & !b))
    }

    /// Join of every state yielded by `states`; `{}` for an empty collection.
    pub fn join_all<'a, I>(width: usize, states: I) -> Result<Self, StateError>
    where
        I: IntoIterator<Item = &'a SystemState>,
    {
        states
            .into_iter()
            .try_fold(Self::empty(width), |acc, s| acc.join(s))
    }

    fn zip_words(&self, other: &Self, f: impl Fn(u64, u64) -> u64) -> Self {
        Self {
            width: self.width,
            words: self
                .words
                .iter()
                .zip(other.words.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

impl Ord for SystemState {
    fn cmp(&self, other: &Self) -> Ordering {
        self.width
            .cmp(&other.width)
            .then_with(|| self.level().cmp(&other.level()))
            .then_with(|| {
                // Same level: whichever holds the lowest differing component
                // comes first in lexicographic order of sorted id lists.
                for (a, b) in self.words.iter().zip(other.words.iter()) {
                    let diff = a ^ b;
                    if diff != 0 {
                        let low = diff & diff.wrapping_neg();
                        return if a & low != 0 {
                            Ordering::Less
                        } else {
                            Ordering::Greater
                        };
                    }
                }
                Ordering::Equal
            })
    }
}

impl PartialOrd for SystemState {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.ids().join(","))
    }
}

impl fmt::Debug for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Level of a state (number of failed components).
pub fn level(s: &SystemState) -> usize {
    s.level()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateStatus {
    Normal,
    Failure,
}

impl StateStatus {
    pub fn is_failure(self) -> bool {
        self == StateStatus::Failure
    }
}

/// Closed interval `[lower, upper]` of the subset order.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Lattice {
    lower: SystemState,
    upper: SystemState,
}

impl Lattice {
    pub fn new(lower: SystemState, upper: SystemState) -> Result<Self, StateError> {
        if !lower.leq(&upper)? {
            return Err(StateError::InvertedLattice {
                lower: lower.to_string(),
                upper: upper.to_string(),
            });
        }
        Ok(Self { lower, upper })
    }

    /// Callers guarantee `lower ⊆ upper`.
    pub(crate) fn new_unchecked(lower: SystemState, upper: SystemState) -> Self {
        debug_assert!(lower.is_subset_of(&upper));
        Self { lower, upper }
    }

    /// The whole state space `[{}, {1..n}]`.
    pub fn whole(width: usize) -> Self {
        Self {
            lower: SystemState::empty(width),
            upper: SystemState::full(width),
        }
    }

    /// 0-dimensional lattice holding one state.
    pub fn point(s: SystemState) -> Self {
        Self {
            lower: s.clone(),
            upper: s,
        }
    }

    pub fn lower(&self) -> &SystemState {
        &self.lower
    }

    pub fn upper(&self) -> &SystemState {
        &self.upper
    }

    pub fn width(&self) -> usize {
        self.lower.width()
    }

    pub fn dimension(&self) -> usize {
        self.upper.level() - self.lower.level()
    }

    /// Number of member states, `2^dimension` (saturating).
    pub fn size(&self) -> u128 {
        1u128
            .checked_shl(self.dimension() as u32)
            .unwrap_or(u128::MAX)
    }

    pub fn contains(&self, s: &SystemState) -> bool {
        s.width() == self.width() && self.lower.is_subset_of(s) && s.is_subset_of(&self.upper)
    }

    /// Components in `upper \ lower`, ascending.
    pub fn free_components(&self) -> Vec<ComponentId> {
        self.upper
            .zip_words(&self.lower, |a, b| a & !b)
            .ids()
            .collect()
    }

    /// Members at relative level `k`, lexicographic over the free components.
    pub fn members(&self, k: usize) -> Result<Vec<SystemState>, StateError> {
        let free = self.free_components();
        if k > free.len() {
            return Err(StateError::LevelOutOfRange {
                k,
                dimension: free.len(),
            });
        }
        Ok(free
            .iter()
            .combinations(k)
            .map(|combo| {
                let mut s = self.lower.clone();
                for id in combo {
                    s.set_bit(id.bit());
                }
                s
            })
            .collect())
    }

    /// Every member, level by level.
    pub fn all_members(&self) -> Vec<SystemState> {
        (0..=self.dimension())
            .flat_map(|k| self.members(k).expect("k within dimension"))
            .collect()
    }

    /// True when the two intervals share at least one state.
    pub fn intersects(&self, other: &Lattice) -> bool {
        // [l1,u1] ∩ [l2,u2] = [l1 ∪ l2, u1 ∩ u2], non-empty iff the join of
        // the lower ends sits below the meet of the upper ends.
        self.lower
            .words
            .iter()
            .zip(other.lower.words.iter())
            .zip(self.upper.words.iter().zip(other.upper.words.iter()))
            .all(|((l1, l2), (u1, u2))| (l1 | l2) & !(u1 & u2) == 0)
    }
}

impl fmt::Display for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lower, self.upper)
    }
}

impl fmt::Debug for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Independent per-component failure probabilities.
///
/// Probabilities are plain `f64` products. With `n` up to a few hundred and
/// every `p_i >= 1e-6` the smallest state probability stays far above the
/// subnormal range; beyond that, expect underflow to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentReliability {
    p: Vec<f64>,
    q: Vec<f64>,
}

impl ComponentReliability {
    pub fn new(p: Vec<f64>) -> Result<Self, StateError> {
        if p.is_empty() {
            return Err(StateError::EmptySystem);
        }
        for (i, &v) in p.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(StateError::InvalidProbability {
                    id: i + 1,
                    value: v,
                });
            }
        }
        let q = p.iter().map(|&v| 1.0 - v).collect();
        Ok(Self { p, q })
    }

    pub fn uniform(n: usize, p: f64) -> Result<Self, StateError> {
        Self::new(vec![p; n])
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn failure(&self) -> &[f64] {
        &self.p
    }

    pub fn success(&self) -> &[f64] {
        &self.q
    }

    /// `P(s) = Π_{i∈s} p_i · Π_{i∉s} q_i`.
    pub fn state_probability(&self, s: &SystemState) -> f64 {
        debug_assert_eq!(s.width(), self.len());
        self.interval_mass(s, s)
    }

    /// Total mass of a lattice: `Π_{i∈lower} p_i · Π_{i∉upper} q_i`.
    pub fn lattice_probability(&self, l: &Lattice) -> f64 {
        debug_assert_eq!(l.width(), self.len());
        self.interval_mass(l.lower(), l.upper())
    }

    fn interval_mass(&self, lower: &SystemState, upper: &SystemState) -> f64 {
        let mut prod = 1.0;
        for i in 0..self.len() {
            let (w, b) = (i / WORD_BITS, i % WORD_BITS);
            if lower.words[w] >> b & 1 == 1 {
                prod *= self.p[i];
            } else if upper.words[w] >> b & 1 == 0 {
                prod *= self.q[i];
            }
        }
        prod
    }
}

pub fn state_probability(s: &SystemState, r: &ComponentReliability) -> f64 {
    r.state_probability(s)
}

pub fn lattice_probability(l: &Lattice, r: &ComponentReliability) -> f64 {
    r.lattice_probability(l)
}

/// Relative `k`-level members of `l`; see [`Lattice::members`].
pub fn lattice_members(l: &Lattice, k: usize) -> Result<Vec<SystemState>, StateError> {
    l.members(k)
}
