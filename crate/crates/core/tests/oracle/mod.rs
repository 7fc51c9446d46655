//! Exact-rational reference for the score, reputation and payout formulas,
//! and a randomized sweep comparing it with the fixed-point implementation.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use workerrep_core::reputation::{self, WeightedScore};
use workerrep_core::{Fixed, Wei, SCALE};

pub fn int(v: i128) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// The value a fixed-point number stands for.
pub fn fixed(v: Fixed) -> BigRational {
    BigRational::new(BigInt::from(v.raw()), BigInt::from(SCALE))
}

/// Distance between a fixed-point result and the exact value, in units of
/// the last fixed-point digit.
pub fn fixed_dev(got: Fixed, exact: &BigRational) -> BigRational {
    (fixed(got) - exact).abs() * int(SCALE.into())
}

/// Distance in wei.
pub fn wei_dev(got: Wei, exact: &BigRational) -> BigRational {
    (int(got.0 as i128) - exact).abs()
}

/// Weighted means of completeness and quality.
pub fn consensus(entries: &[WeightedScore]) -> (BigRational, BigRational) {
    let den: BigRational = entries.iter().map(|e| fixed(e.reputation)).sum();
    let c: BigRational = entries
        .iter()
        .map(|e| int(e.completeness.into()) * fixed(e.reputation))
        .sum();
    let q: BigRational = entries.iter().map(|e| int(e.quality.into()) * fixed(e.reputation)).sum();
    (c / den.clone(), q / den)
}

pub fn final_score(complete: Fixed, quality: Fixed, w_c: Fixed, w_q: Fixed) -> BigRational {
    (fixed(w_q) * fixed(quality) + fixed(w_c) * fixed(complete)) / (fixed(w_q) + fixed(w_c))
}

pub fn evaluator_score(complete: Fixed, quality: Fixed, c_i: u8, q_i: u8) -> BigRational {
    let dq = (fixed(quality) - int(q_i.into())).abs();
    let dc = (fixed(complete) - int(c_i.into())).abs();
    (int(200) - dq - dc) / int(2)
}

pub fn rep_delta(final_score: Fixed, e_scores: &[Fixed], y: u32, alpha: Fixed) -> BigRational {
    let a = fixed(alpha);
    let mean: BigRational =
        e_scores[..y as usize].iter().map(|e| fixed(*e)).sum::<BigRational>() / int(y.into());
    (BigRational::one() - a.clone()) * fixed(final_score) + a * mean
}

pub fn volunteer_delta(e_score: Fixed, is_outlier: bool, alpha: Fixed) -> BigRational {
    let v = fixed(alpha) * fixed(e_score);
    if is_outlier {
        -v
    } else {
        v
    }
}

/// `score * amount / 100`, for both the reward and the returned fee.
pub fn percent_of(score: Fixed, amount: Wei) -> BigRational {
    fixed(score) * int(amount.0 as i128) / int(100)
}

pub const FORMULAS: [&str; 9] = [
    "complete score",
    "quality score",
    "final score",
    "evaluator score",
    "submission reputation",
    "volunteer gain",
    "volunteer loss",
    "reward",
    "fee returned",
];

/// Largest deviation seen for each formula.
#[derive(Clone, Debug)]
pub struct Sweep {
    pub cases: u64,
    pub worst: Vec<BigRational>,
}

impl Sweep {
    pub fn max(&self) -> BigRational {
        self.worst.iter().cloned().fold(BigRational::zero(), |a, b| if b > a { b } else { a })
    }

    /// Every deviation is at most one unit.
    pub fn within_one_unit(&self) -> bool {
        self.max() <= BigRational::one()
    }

    fn note(&mut self, i: usize, dev: BigRational) {
        if dev > self.worst[i] {
            self.worst[i] = dev;
        }
    }
}

pub struct Gen(ChaCha20Rng);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen(ChaCha20Rng::seed_from_u64(seed))
    }

    /// Uniform in `[lo, hi]`.
    pub fn range(&mut self, lo: i64, hi: i64) -> i64 {
        let span = (hi - lo) as u64 + 1;
        lo + (self.0.next_u64() % span) as i64
    }

    pub fn score(&mut self) -> u8 {
        self.range(1, 100) as u8
    }

    /// An aggregate in `[1, 100]` at full precision.
    pub fn aggregate(&mut self) -> Fixed {
        Fixed::from_raw(self.range(SCALE, 100 * SCALE))
    }

    pub fn unit(&mut self) -> Fixed {
        Fixed::from_raw(self.range(0, SCALE))
    }

    pub fn wei(&mut self) -> Wei {
        Wei((u128::from(self.0.next_u64()) << 20) | u128::from(self.0.next_u64() & 0xfffff))
    }

    pub fn sheet(&mut self) -> Vec<WeightedScore> {
        let n = self.range(1, 12) as usize;
        let mut out: Vec<_> = (0..n)
            .map(|_| WeightedScore {
                completeness: self.score(),
                quality: self.score(),
                reputation: Fixed::from_raw(self.range(0, 500 * SCALE)),
            })
            .collect();
        if out.iter().all(|e| e.reputation == Fixed::ZERO) {
            out[0].reputation = Fixed::from_raw(1);
        }
        out
    }
}

/// Runs every formula `cases` times on random inputs.
pub fn sweep(seed: u64, cases: u64) -> Sweep {
    let mut g = Gen::new(seed);
    let mut s = Sweep { cases, worst: vec![BigRational::zero(); FORMULAS.len()] };
    for _ in 0..cases {
        let sheet = g.sheet();
        let got = reputation::consensus_scores(&sheet).unwrap();
        let (c, q) = consensus(&sheet);
        s.note(0, fixed_dev(got.complete, &c));
        s.note(1, fixed_dev(got.quality, &q));

        let (complete, quality) = (g.aggregate(), g.aggregate());
        let w_c = g.unit();
        let w_q = Fixed::ONE - w_c;
        let f = reputation::final_score(complete, quality, w_c, w_q).unwrap();
        s.note(2, fixed_dev(f, &final_score(complete, quality, w_c, w_q)));

        let (c_i, q_i) = (g.score(), g.score());
        let e = reputation::evaluator_score(complete, quality, c_i, q_i).unwrap();
        s.note(3, fixed_dev(e, &evaluator_score(complete, quality, c_i, q_i)));

        let y = g.range(1, 5) as u32;
        let e_scores: Vec<_> = (0..y + g.range(0, 2) as u32).map(|_| g.aggregate()).collect();
        let alpha = g.unit();
        let fin = g.aggregate();
        let d = reputation::submission_rep_delta(fin, &e_scores, y, alpha).unwrap();
        s.note(4, fixed_dev(d, &rep_delta(fin, &e_scores, y, alpha)));

        let e = g.aggregate();
        for (i, outlier) in [(5, false), (6, true)] {
            let d = reputation::volunteer_rep_delta(e, outlier, alpha).unwrap();
            s.note(i, fixed_dev(d, &volunteer_delta(e, outlier, alpha)));
        }

        let amount = g.wei();
        let score = Fixed::from_raw(g.range(0, 100 * SCALE));
        let r = reputation::reward(score, amount).unwrap();
        s.note(7, wei_dev(r, &percent_of(score, amount)));
        let fee = g.wei();
        let back = reputation::fee_returned(score, fee).unwrap();
        s.note(8, wei_dev(back, &percent_of(score, fee)));
    }
    s
}
