//! Reproducible random coherent systems for cross-checking the algorithms.
//!
//! Each member is derived from its own pinned seed, so a failing case can be
//! rebuilt in isolation with [`corpus_system`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::evaluator::{CutsetOracle, Evaluator, ThresholdOracle};
use crate::state::{ComponentReliability, SystemState};

/// Seed of corpus member 0; member `i` uses `CORPUS_SEED + i`.
pub const CORPUS_SEED: u64 = 0x5eed_0000;
pub const MIN_COMPONENTS: usize = 5;
pub const MAX_COMPONENTS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusKind {
    Cutsets,
    Threshold,
}

pub struct CorpusSystem {
    pub index: usize,
    pub seed: u64,
    pub kind: CorpusKind,
    pub evaluator: Box<dyn Evaluator>,
    pub reliability: ComponentReliability,
}

impl CorpusSystem {
    pub fn components(&self) -> usize {
        self.evaluator.components()
    }

    pub fn name(&self) -> String {
        let kind = match self.kind {
            CorpusKind::Cutsets => "cutsets",
            CorpusKind::Threshold => "threshold",
        };
        format!("corpus-{}-{kind}-n{}", self.index, self.components())
    }
}

/// Corpus member `index`: even indices are cut-set systems, odd are threshold.
pub fn corpus_system(index: usize) -> CorpusSystem {
    let seed = CORPUS_SEED + index as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(MIN_COMPONENTS..=MAX_COMPONENTS);
    let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.3)).collect();
    let reliability = ComponentReliability::new(p).expect("probabilities in range");
    let (kind, evaluator): (CorpusKind, Box<dyn Evaluator>) = if index.is_multiple_of(2) {
        (CorpusKind::Cutsets, Box::new(random_cutsets(&mut rng, n)))
    } else {
        (
            CorpusKind::Threshold,
            Box::new(random_threshold(&mut rng, n)),
        )
    };
    CorpusSystem {
        index,
        seed,
        kind,
        evaluator,
        reliability,
    }
}

/// The first `count` corpus members.
pub fn corpus(count: usize) -> Vec<CorpusSystem> {
    (0..count).map(corpus_system).collect()
}

fn random_cutsets(rng: &mut ChaCha8Rng, n: usize) -> CutsetOracle {
    // Small cut sets are likelier, as in real networks.
    const SIZES: [usize; 10] = [1, 2, 2, 2, 3, 3, 3, 4, 4, 5];
    let count = rng.gen_range(1..=n + 2);
    let ids: Vec<usize> = (1..=n).collect();
    let mut sets: Vec<SystemState> = (0..count)
        .map(|_| {
            let size = SIZES[rng.gen_range(0..SIZES.len())].min(n);
            let pick = ids.choose_multiple(rng, size).copied();
            SystemState::from_ids(n, pick).expect("ids in range")
        })
        .collect();
    sets.sort();
    sets.dedup();
    let minimal: Vec<SystemState> = sets
        .iter()
        .filter(|s| !sets.iter().any(|t| t.is_strict_subset_of(s)))
        .cloned()
        .collect();
    CutsetOracle::new(n, minimal).expect("minimal sets form an antichain")
}

fn random_threshold(rng: &mut ChaCha8Rng, n: usize) -> ThresholdOracle {
    let caps: Vec<f64> = (0..n).map(|_| rng.gen_range(10..=100) as f64).collect();
    let total: f64 = caps.iter().sum();
    let reserve = rng.gen_range(0.05..0.5) * total;
    ThresholdOracle::new(caps, (total - reserve).round()).expect("valid threshold system")
}
