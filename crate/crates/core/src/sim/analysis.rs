//! Selection probabilities and empirical-vs-expected tallies.

use alloc::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::evaluation::EvaluatorPool;
use crate::ids::AccountId;

/// Probability that `who` is drawn in a round with this pool: one over its
/// slot size under slot selection, `x / n` under uniform draws, zero when
/// not eligible.
pub fn selection_probability(pool: &EvaluatorPool, who: AccountId) -> f64 {
    if !pool.slots.is_empty() {
        return pool
            .slots
            .iter()
            .find(|s| s.contains(&who))
            .map_or(0.0, |s| 1.0 / s.len() as f64);
    }
    let n = pool.eligible.len();
    if n == 0 || !pool.eligible.iter().any(|(id, _)| *id == who) {
        return 0.0;
    }
    pool.selected.len() as f64 / n as f64
}

/// Probability that at least two members of `group` are drawn together.
///
/// Slot draws are independent, so the count of drawn members follows a
/// Poisson-binomial law over the slots. Uniform draws without replacement
/// give a hypergeometric law.
pub fn co_assignment_probability(pool: &EvaluatorPool, group: &BTreeSet<AccountId>) -> f64 {
    if !pool.slots.is_empty() {
        // Probability of exactly 0, exactly 1, and 2 or more members.
        let mut p = [1.0f64, 0.0, 0.0];
        for slot in &pool.slots {
            if slot.is_empty() {
                continue;
            }
            let q = slot.iter().filter(|id| group.contains(id)).count() as f64 / slot.len() as f64;
            p = [p[0] * (1.0 - q), p[1] * (1.0 - q) + p[0] * q, p[2] + p[1] * q];
        }
        return p[2];
    }
    let n = pool.eligible.len() as u64;
    let k = pool.eligible.iter().filter(|(id, _)| group.contains(id)).count() as u64;
    let draws = pool.selected.len() as u64;
    if draws > n || k < 2 || draws < 2 {
        return 0.0;
    }
    let total = binomial(n, draws);
    let none = binomial(n - k, draws);
    let one = k as f64 * binomial(n - k, draws - 1);
    (1.0 - (none + one) / total).max(0.0)
}

fn binomial(n: u64, r: u64) -> f64 {
    if r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Independent Bernoulli trials with known success probabilities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub trials: u64,
    pub hits: u64,
    /// Sum of the trial probabilities.
    pub expected_hits: f64,
    /// Sum of `p(1 - p)` over the trials.
    pub variance: f64,
}

impl Tally {
    pub fn record(&mut self, p: f64, hit: bool) {
        self.trials += 1;
        self.hits += u64::from(hit);
        self.expected_hits += p;
        self.variance += p * (1.0 - p);
    }

    /// Observed frequency; zero with no trials.
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.hits as f64 / self.trials as f64
        }
    }

    pub fn expected_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.expected_hits / self.trials as f64
        }
    }

    /// Standard error of the observed frequency under the expected law.
    pub fn standard_error(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            libm::sqrt(self.variance) / self.trials as f64
        }
    }

    /// Observed frequency within `z` standard errors of the expectation.
    pub fn within(&self, z: f64) -> bool {
        (self.rate() - self.expected_rate()).abs() <= z * self.standard_error()
    }
}
