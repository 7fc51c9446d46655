//! Score and reputation arithmetic.
//!
//! Every function accumulates its numerator exactly in `i128` and floors
//! once, at the final division. Scores entered by evaluators are integers in
//! `[1, 100]`; aggregates are [`Fixed`] values on the same 1..100 scale.

use serde::{Deserialize, Serialize};

use crate::fixed::{Fixed, Wei, SCALE};

pub const MIN_SCORE: u8 = 1;
pub const MAX_SCORE: u8 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum MathError {
    #[error("no evaluators in consensus")]
    EmptyConsensus,
    #[error("total evaluator reputation is zero")]
    ZeroTotalReputation,
    #[error("score outside [1, 100]")]
    ScoreOutOfRange,
    #[error("negative reputation")]
    NegativeReputation,
    #[error("weights must be non-negative and sum to 1")]
    BadWeights,
    #[error("alpha must lie in [0, 1]")]
    BadAlpha,
    #[error("fewer completed evaluations than owed")]
    QuotaUnmet,
}

/// One in-consensus evaluator's scores and credibility.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedScore {
    pub completeness: u8,
    pub quality: u8,
    pub reputation: Fixed,
}

/// Aggregated completeness and quality for a submission.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusScores {
    pub complete: Fixed,
    pub quality: Fixed,
    /// Set when all weights were zero and the plain mean was used.
    pub unweighted: bool,
}

fn check_score(s: u8) -> Result<(), MathError> {
    if (MIN_SCORE..=MAX_SCORE).contains(&s) {
        Ok(())
    } else {
        Err(MathError::ScoreOutOfRange)
    }
}

fn check_aggregate(v: Fixed) -> Result<(), MathError> {
    if v >= Fixed::ONE && v <= Fixed::HUNDRED {
        Ok(())
    } else {
        Err(MathError::ScoreOutOfRange)
    }
}

fn floor_div(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    num.div_euclid(den)
}

/// Reputation-weighted means of completeness and quality:
/// `sum(c_i * r_i) / sum(r_i)`, likewise for quality.
pub fn consensus_scores(entries: &[WeightedScore]) -> Result<ConsensusScores, MathError> {
    if entries.is_empty() {
        return Err(MathError::EmptyConsensus);
    }
    let mut c_num: i128 = 0;
    let mut q_num: i128 = 0;
    let mut den: i128 = 0;
    for e in entries {
        check_score(e.completeness)?;
        check_score(e.quality)?;
        if e.reputation.is_negative() {
            return Err(MathError::NegativeReputation);
        }
        let r = i128::from(e.reputation.raw());
        c_num += i128::from(e.completeness) * r;
        q_num += i128::from(e.quality) * r;
        den += r;
    }
    if den == 0 {
        return Err(MathError::ZeroTotalReputation);
    }
    let s = i128::from(SCALE);
    Ok(ConsensusScores {
        complete: Fixed::from_raw(floor_div(c_num * s, den) as i64),
        quality: Fixed::from_raw(floor_div(q_num * s, den) as i64),
        unweighted: false,
    })
}

/// [`consensus_scores`], falling back to the unweighted mean when every
/// evaluator has zero reputation.
pub fn consensus_scores_or_mean(entries: &[WeightedScore]) -> Result<ConsensusScores, MathError> {
    match consensus_scores(entries) {
        Err(MathError::ZeroTotalReputation) => {
            let n = entries.len() as i128;
            let s = i128::from(SCALE);
            let c: i128 = entries.iter().map(|e| i128::from(e.completeness)).sum();
            let q: i128 = entries.iter().map(|e| i128::from(e.quality)).sum();
            Ok(ConsensusScores {
                complete: Fixed::from_raw(floor_div(c * s, n) as i64),
                quality: Fixed::from_raw(floor_div(q * s, n) as i64),
                unweighted: true,
            })
        }
        other => other,
    }
}

/// Checks that two weights are non-negative and sum to exactly 1.
pub fn check_weights(w_c: Fixed, w_q: Fixed) -> Result<(), MathError> {
    if w_c.is_negative() || w_q.is_negative() || w_c + w_q != Fixed::ONE {
        return Err(MathError::BadWeights);
    }
    Ok(())
}

/// `(w_q * quality + w_c * complete) / (w_q + w_c)`.
pub fn final_score(
    complete: Fixed,
    quality: Fixed,
    w_c: Fixed,
    w_q: Fixed,
) -> Result<Fixed, MathError> {
    check_weights(w_c, w_q)?;
    check_aggregate(complete)?;
    check_aggregate(quality)?;
    let num = i128::from(w_q.raw()) * i128::from(quality.raw())
        + i128::from(w_c.raw()) * i128::from(complete.raw());
    let den = i128::from(w_q.raw()) + i128::from(w_c.raw());
    Ok(Fixed::from_raw(floor_div(num, den) as i64))
}

/// `(200 - |quality - q_i| - |complete - c_i|) / 2`.
pub fn evaluator_score(
    complete: Fixed,
    quality: Fixed,
    c_i: u8,
    q_i: u8,
) -> Result<Fixed, MathError> {
    check_aggregate(complete)?;
    check_aggregate(quality)?;
    check_score(c_i)?;
    check_score(q_i)?;
    let s = i128::from(SCALE);
    let dq = (i128::from(quality.raw()) - i128::from(q_i) * s).abs();
    let dc = (i128::from(complete.raw()) - i128::from(c_i) * s).abs();
    Ok(Fixed::from_raw(floor_div(200 * s - dq - dc, 2) as i64))
}

fn check_alpha(alpha: Fixed) -> Result<(), MathError> {
    if alpha.is_negative() || alpha > Fixed::ONE {
        Err(MathError::BadAlpha)
    } else {
        Ok(())
    }
}

/// Reputation gained from one's own submission:
/// `(1 - alpha) * final + alpha * sum(e_scores) / y`.
///
/// Uses the first `y` eScores; fewer than `y` is [`MathError::QuotaUnmet`].
pub fn submission_rep_delta(
    final_score: Fixed,
    e_scores: &[Fixed],
    y: u32,
    alpha: Fixed,
) -> Result<Fixed, MathError> {
    check_alpha(alpha)?;
    if y == 0 || e_scores.len() < y as usize {
        return Err(MathError::QuotaUnmet);
    }
    let s = i128::from(SCALE);
    let a = i128::from(alpha.raw());
    let y = i128::from(y);
    let e_sum: i128 = e_scores[..y as usize]
        .iter()
        .map(|e| i128::from(e.raw()))
        .sum();
    let num = (s - a) * i128::from(final_score.raw()) * y + a * e_sum;
    Ok(Fixed::from_raw(floor_div(num, s * y) as i64))
}

/// Reputation change for a volunteer evaluation: `+alpha * e` inside the
/// consensus, `-alpha * e` as an outlier. The magnitude is floored, so the
/// two cases are exact negatives.
pub fn volunteer_rep_delta(e_score: Fixed, is_outlier: bool, alpha: Fixed) -> Result<Fixed, MathError> {
    check_alpha(alpha)?;
    check_aggregate(e_score)?;
    let mag = floor_div(
        i128::from(alpha.raw()) * i128::from(e_score.raw()),
        i128::from(SCALE),
    ) as i64;
    Ok(Fixed::from_raw(if is_outlier { -mag } else { mag }))
}

fn percent_of(score: Fixed, amount: Wei) -> Result<Wei, MathError> {
    if score.is_negative() || score > Fixed::HUNDRED {
        return Err(MathError::ScoreOutOfRange);
    }
    Ok(amount.mul_div_floor(score.raw() as u128, 100 * SCALE as u128))
}

/// `final_score * task_reward / 100`.
pub fn reward(final_score: Fixed, task_reward: Wei) -> Result<Wei, MathError> {
    percent_of(final_score, task_reward)
}

/// `complete_score * acceptance_fee / 100`.
pub fn fee_returned(complete_score: Fixed, acceptance_fee: Wei) -> Result<Wei, MathError> {
    percent_of(complete_score, acceptance_fee)
}
