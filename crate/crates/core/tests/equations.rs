mod oracle;

use num_rational::BigRational;
use num_traits::One;
use proptest::prelude::*;

use workerrep_core::reputation::{self, MathError, WeightedScore};
use workerrep_core::{Fixed, Wei, SCALE};

fn cfg() -> ProptestConfig {
    ProptestConfig { cases: 10_000, ..ProptestConfig::default() }
}

fn one_unit() -> BigRational {
    BigRational::one()
}

fn aggregate() -> impl Strategy<Value = Fixed> {
    (SCALE..=100 * SCALE).prop_map(Fixed::from_raw)
}

fn unit() -> impl Strategy<Value = Fixed> {
    (0..=SCALE).prop_map(Fixed::from_raw)
}

fn sheet() -> impl Strategy<Value = Vec<WeightedScore>> {
    prop::collection::vec((1u8..=100, 1u8..=100, 0..=500 * SCALE), 1..12).prop_map(|v| {
        let mut out: Vec<_> = v
            .into_iter()
            .map(|(c, q, r)| WeightedScore { completeness: c, quality: q, reputation: Fixed::from_raw(r) })
            .collect();
        if out.iter().all(|e| e.reputation == Fixed::ZERO) {
            out[0].reputation = Fixed::from_raw(1);
        }
        out
    })
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn weighted_means_match_exact(entries in sheet()) {
        let got = reputation::consensus_scores(&entries).unwrap();
        let (c, q) = oracle::consensus(&entries);
        prop_assert!(oracle::fixed_dev(got.complete, &c) < one_unit());
        prop_assert!(oracle::fixed_dev(got.quality, &q) < one_unit());
        // Floored, never above the exact value.
        prop_assert!(oracle::fixed(got.complete) <= c);
    }

    #[test]
    fn final_score_matches_exact(c in aggregate(), q in aggregate(), w_c in unit()) {
        let w_q = Fixed::ONE - w_c;
        let got = reputation::final_score(c, q, w_c, w_q).unwrap();
        prop_assert!(oracle::fixed_dev(got, &oracle::final_score(c, q, w_c, w_q)) < one_unit());
    }

    #[test]
    fn evaluator_score_matches_exact(c in aggregate(), q in aggregate(), c_i in 1u8..=100, q_i in 1u8..=100) {
        let got = reputation::evaluator_score(c, q, c_i, q_i).unwrap();
        prop_assert!(oracle::fixed_dev(got, &oracle::evaluator_score(c, q, c_i, q_i)) < one_unit());
        prop_assert!(got >= Fixed::ONE && got <= Fixed::HUNDRED);
    }

    #[test]
    fn submission_reputation_matches_exact(
        fin in aggregate(),
        e_scores in prop::collection::vec(aggregate(), 1..8),
        y in 1u32..8,
        alpha in unit(),
    ) {
        let got = reputation::submission_rep_delta(fin, &e_scores, y, alpha);
        if e_scores.len() < y as usize {
            prop_assert_eq!(got, Err(MathError::QuotaUnmet));
        } else {
            let exact = oracle::rep_delta(fin, &e_scores, y, alpha);
            prop_assert!(oracle::fixed_dev(got.unwrap(), &exact) < one_unit());
        }
    }

    #[test]
    fn volunteer_changes_match_exact(e in aggregate(), alpha in unit()) {
        let gain = reputation::volunteer_rep_delta(e, false, alpha).unwrap();
        let loss = reputation::volunteer_rep_delta(e, true, alpha).unwrap();
        prop_assert!(oracle::fixed_dev(gain, &oracle::volunteer_delta(e, false, alpha)) < one_unit());
        prop_assert!(oracle::fixed_dev(loss, &oracle::volunteer_delta(e, true, alpha)) < one_unit());
        prop_assert_eq!(gain.raw(), -loss.raw());
    }

    #[test]
    fn payouts_match_exact(score in 0..=100 * SCALE, amount in any::<u64>(), shift in 0u32..40) {
        let score = Fixed::from_raw(score);
        let amount = Wei(u128::from(amount) << shift);
        let r = reputation::reward(score, amount).unwrap();
        let f = reputation::fee_returned(score, amount).unwrap();
        let exact = oracle::percent_of(score, amount);
        prop_assert!(oracle::wei_dev(r, &exact) < one_unit());
        prop_assert!(oracle::wei_dev(f, &exact) < one_unit());
        prop_assert!(r <= amount);
    }
}

#[test]
fn seeded_sweep_stays_within_one_unit() {
    let s = oracle::sweep(7, 10_000);
    for (name, worst) in oracle::FORMULAS.iter().zip(&s.worst) {
        assert!(*worst <= one_unit(), "{name}: {worst}");
    }
    assert!(s.within_one_unit());
}

#[test]
fn worked_values() {
    // Final score 80 and a mean eScore of 100 at alpha 0.25.
    let alpha = Fixed::from_raw(2_500);
    let delta = reputation::submission_rep_delta(
        Fixed::from_int(80),
        &[Fixed::HUNDRED, Fixed::HUNDRED],
        2,
        alpha,
    );
    assert_eq!(delta, Ok(Fixed::from_int(85)));
    // An evaluator matching the consensus exactly.
    let e = reputation::evaluator_score(Fixed::from_int(70), Fixed::from_int(90), 70, 90);
    assert_eq!(e, Ok(Fixed::HUNDRED));
    assert_eq!(reputation::reward(Fixed::from_int(80), Wei(1_000)), Ok(Wei(800)));
    assert_eq!(reputation::fee_returned(Fixed::from_int(70), Wei(1_000)), Ok(Wei(700)));
    assert_eq!(
        reputation::volunteer_rep_delta(Fixed::HUNDRED, false, alpha),
        Ok(Fixed::from_int(25))
    );
    // Equal weights average the two metrics.
    let f = reputation::final_score(Fixed::from_int(70), Fixed::from_int(90), Fixed::from_raw(5_000), Fixed::from_raw(5_000));
    assert_eq!(f, Ok(Fixed::from_int(80)));
}

#[test]
fn boundary_inputs() {
    let w = WeightedScore { completeness: 50, quality: 60, reputation: Fixed::ZERO };
    assert_eq!(reputation::consensus_scores(&[w]), Err(MathError::ZeroTotalReputation));
    let mean = reputation::consensus_scores_or_mean(&[w, WeightedScore { completeness: 51, ..w }]).unwrap();
    assert!(mean.unweighted);
    assert_eq!(mean.complete, Fixed::from_raw(505_000));
    assert_eq!(reputation::consensus_scores(&[]), Err(MathError::EmptyConsensus));
    let bad = WeightedScore { completeness: 0, ..w };
    assert_eq!(reputation::consensus_scores(&[bad]), Err(MathError::ScoreOutOfRange));
    assert_eq!(
        reputation::final_score(Fixed::HUNDRED, Fixed::HUNDRED, Fixed::from_raw(5_000), Fixed::from_raw(5_001)),
        Err(MathError::BadWeights)
    );
    assert_eq!(
        reputation::submission_rep_delta(Fixed::HUNDRED, &[Fixed::HUNDRED], 2, Fixed::ONE),
        Err(MathError::QuotaUnmet)
    );
    assert_eq!(
        reputation::volunteer_rep_delta(Fixed::HUNDRED, false, Fixed::from_raw(10_001)),
        Err(MathError::BadAlpha)
    );
    // Extremes of the evaluator score.
    assert_eq!(reputation::evaluator_score(Fixed::ONE, Fixed::ONE, 100, 100), Ok(Fixed::ONE));
}
