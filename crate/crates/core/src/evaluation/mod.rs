//! Evaluator selection and score consensus.
//!
//! Selection sorts the eligible pool by reputation, cuts it into `x`
//! equal-count quantile slots and draws one member per slot from a ChaCha20
//! stream seeded by the submission's commitment, the chain head and the
//! round. Consensus flags every evaluator more than `k` population standard
//! deviations from the mean on either metric. The comparison is done on exact
//! integers: no square roots, no rounding.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::fixed::{isqrt, Fixed, SCALE};
use crate::hash::{Digest, Hasher};
use crate::ids::AccountId;
use crate::reputation::{MAX_SCORE, MIN_SCORE};

mod flow;

/// Candidate evaluators and the draw for one round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluatorPool {
    pub round: u32,
    /// Eligible `(id, reputation)` pairs, in slot order.
    pub eligible: Vec<(AccountId, Fixed)>,
    pub slots: Vec<Vec<AccountId>>,
    pub selected: Vec<AccountId>,
    pub excluded: BTreeSet<AccountId>,
    pub seed: Digest,
}

/// One evaluator's scores for a submission.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub evaluator: AccountId,
    pub completeness: u8,
    pub quality: u8,
    pub review_ref: Digest,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusResult {
    pub round: u32,
    pub c_mean: Fixed,
    pub q_mean: Fixed,
    pub c_std: Fixed,
    pub q_std: Fixed,
    pub outliers: BTreeSet<AccountId>,
    pub in_consensus: BTreeSet<AccountId>,
    pub reached: bool,
    pub forced: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ConsensusError {
    #[error("sheet has {scored} of {expected} scores")]
    IncompleteSheet { scored: usize, expected: usize },
    #[error("score outside [1, 100]")]
    OutOfRange,
    #[error("evaluator scored twice")]
    DuplicateEvaluator,
    #[error("outlier multiplier must be non-negative")]
    NegativeMultiplier,
}

/// Seed for one round's draw.
pub fn selection_seed(commitment: &Digest, chain_head: &Digest, round: u32) -> Digest {
    Hasher::new()
        .part(b"workerrep/select")
        .part(&commitment.0)
        .part(&chain_head.0)
        .part(&round.to_be_bytes())
        .finish()
}

/// Deterministic uniform draws.
#[derive(Clone, Debug)]
pub struct SelectionRng(ChaCha20Rng);

impl SelectionRng {
    pub fn new(seed: &Digest) -> Self {
        SelectionRng(ChaCha20Rng::from_seed(seed.0))
    }

    /// Uniform integer in `0..n` by rejection sampling on u64 draws.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "empty range");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let v = self.0.next_u64();
            if v <= zone {
                return (v % n) as usize;
            }
        }
    }
}

/// Sorts by `(reputation, id)` ascending and splits into `x` slots of
/// near-equal size: slot `i` holds sorted positions
/// `[floor(i*n/x), floor((i+1)*n/x))`.
pub fn partition_slots(eligible: &[(AccountId, Fixed)], x: usize) -> Vec<Vec<AccountId>> {
    let mut sorted: Vec<(AccountId, Fixed)> = eligible.to_vec();
    sorted.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
    let n = sorted.len();
    (0..x)
        .map(|i| {
            let lo = i * n / x;
            let hi = (i + 1) * n / x;
            sorted[lo..hi].iter().map(|(id, _)| *id).collect()
        })
        .collect()
}

/// One uniform pick per slot.
pub fn pick_per_slot(slots: &[Vec<AccountId>], rng: &mut SelectionRng) -> Vec<AccountId> {
    slots.iter().map(|slot| slot[rng.below(slot.len())]).collect()
}

/// `x` distinct uniform picks from the whole pool (partial Fisher-Yates),
/// used when slot selection is switched off.
pub fn pick_uniform(pool: &[AccountId], x: usize, rng: &mut SelectionRng) -> Vec<AccountId> {
    let mut v = pool.to_vec();
    for i in 0..x {
        let j = i + rng.below(v.len() - i);
        v.swap(i, j);
    }
    v.truncate(x);
    v
}

/// Outlier detection over a complete score sheet.
///
/// `k = None` disables removal (an infinite threshold). The result depends
/// only on the multiset of entries, never on their order.
pub fn run_consensus(
    sheet: &[ScoreEntry],
    expected: usize,
    k: Option<Fixed>,
    round: u32,
) -> Result<ConsensusResult, ConsensusError> {
    if sheet.len() != expected || sheet.is_empty() {
        return Err(ConsensusError::IncompleteSheet { scored: sheet.len(), expected });
    }
    let mut ids = BTreeSet::new();
    for e in sheet {
        let range = MIN_SCORE..=MAX_SCORE;
        if !range.contains(&e.completeness) || !range.contains(&e.quality) {
            return Err(ConsensusError::OutOfRange);
        }
        if !ids.insert(e.evaluator) {
            return Err(ConsensusError::DuplicateEvaluator);
        }
    }
    if k.is_some_and(Fixed::is_negative) {
        return Err(ConsensusError::NegativeMultiplier);
    }

    let c = Moments::of(sheet.iter().map(|e| e.completeness));
    let q = Moments::of(sheet.iter().map(|e| e.quality));

    let mut outliers = BTreeSet::new();
    let mut in_consensus = BTreeSet::new();
    for e in sheet {
        let out = k.is_some_and(|k| c.beyond(e.completeness, k) || q.beyond(e.quality, k));
        if out {
            outliers.insert(e.evaluator);
        } else {
            in_consensus.insert(e.evaluator);
        }
    }
    let reached = 2 * in_consensus.len() > sheet.len();
    Ok(ConsensusResult {
        round,
        c_mean: c.mean(),
        q_mean: q.mean(),
        c_std: c.std(),
        q_std: q.std(),
        outliers,
        in_consensus,
        reached,
        forced: false,
    })
}

/// Fallback after the last permitted round: everyone counts.
pub fn force(mut result: ConsensusResult) -> ConsensusResult {
    let all: BTreeSet<AccountId> = result.outliers.iter().chain(&result.in_consensus).copied().collect();
    result.in_consensus = all;
    result.outliers.clear();
    result.reached = true;
    result.forced = true;
    result
}

/// Integer sums for one metric.
struct Moments {
    n: i128,
    sum: i128,
    sum_sq: i128,
}

impl Moments {
    fn of(scores: impl Iterator<Item = u8>) -> Moments {
        let mut m = Moments { n: 0, sum: 0, sum_sq: 0 };
        for s in scores {
            let s = i128::from(s);
            m.n += 1;
            m.sum += s;
            m.sum_sq += s * s;
        }
        m
    }

    /// `n^2 * variance`, always a non-negative integer.
    fn var_num(&self) -> i128 {
        self.n * self.sum_sq - self.sum * self.sum
    }

    fn mean(&self) -> Fixed {
        Fixed::from_raw((self.sum * i128::from(SCALE) / self.n) as i64)
    }

    fn std(&self) -> Fixed {
        let s = i128::from(SCALE);
        Fixed::from_raw((isqrt((self.var_num() * s * s) as u128) as i128 / self.n) as i64)
    }

    /// `|x - mean| > k * std`, i.e. `(n x - sum)^2 * SCALE^2 > k_raw^2 * var_num`.
    fn beyond(&self, x: u8, k: Fixed) -> bool {
        let dev = self.n * i128::from(x) - self.sum;
        let s = i128::from(SCALE);
        let k = i128::from(k.raw());
        dev * dev * s * s > k * k * self.var_num()
    }
}
