//! Evaluation handlers on the platform state.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::accounts::AccountStatus;
use crate::error::ProtocolError;
use crate::fixed::Fixed;
use crate::gas::OperationKind;
use crate::hash::Digest;
use crate::ids::{AccountId, SubmissionId};
use crate::platform::{Event, Platform, RepCause, VolunteerThreshold};
use crate::reputation::{
    consensus_scores_or_mean, evaluator_score, final_score, submission_rep_delta,
    volunteer_rep_delta, WeightedScore, MAX_SCORE, MIN_SCORE,
};
use crate::submission::{EvaluationRound, Outcome, SubmissionStatus};

use super::{
    force, partition_slots, pick_per_slot, pick_uniform, run_consensus, selection_seed,
    ConsensusResult, EvaluatorPool, ScoreEntry, SelectionRng,
};

impl Platform {
    /// The worker's oldest submission still owed evaluations.
    pub fn pending_quota(&self, worker: AccountId) -> Option<SubmissionId> {
        let y = self.params.evaluations_owed;
        self.submissions
            .iter()
            .find(|s| s.worker == worker && s.quota_open(y))
            .map(|s| s.id)
    }

    /// Whether an enrolled volunteer currently clears the threshold.
    pub fn clears_volunteer_threshold(&self, worker: AccountId) -> bool {
        let Some(acct) = self.accounts.get(&worker) else {
            return false;
        };
        match self.params.volunteer_threshold {
            VolunteerThreshold::Open => true,
            VolunteerThreshold::PlatformAverage => {
                acct.reputation >= self.stats().avg_worker_reputation
            }
        }
    }

    /// Exclusions and `(id, reputation)` candidates, in account order, for
    /// the next round of `submission`.
    pub fn eligible_evaluators(
        &self,
        submission: SubmissionId,
    ) -> Result<(Vec<(AccountId, Fixed)>, BTreeSet<AccountId>), ProtocolError> {
        let sub = self
            .submission(submission)
            .ok_or(ProtocolError::UnknownSubmission(submission))?;
        let task = &self.tasks[sub.task.0 as usize];
        let mut excluded: BTreeSet<AccountId> = [sub.worker, sub.poster].into_iter().collect();
        for r in &sub.rounds {
            if let Some(c) = &r.consensus {
                excluded.extend(c.outliers.iter().copied());
            }
        }
        let y = self.params.evaluations_owed;
        let obligated: BTreeSet<AccountId> = self
            .submissions
            .iter()
            .filter(|s| s.quota_open(y))
            .map(|s| s.worker)
            .collect();
        let eligible = self
            .accounts
            .values()
            .filter(|a| a.is_active_worker() && !excluded.contains(&a.id))
            .filter(|a| a.has_skills(&task.skills_required))
            .filter(|a| {
                obligated.contains(&a.id)
                    || (self.volunteers.contains(&a.id) && self.clears_volunteer_threshold(a.id))
            })
            .map(|a| (a.id, a.reputation))
            .collect();
        Ok((eligible, excluded))
    }

    pub(crate) fn assign_evaluators(
        &mut self,
        submission: SubmissionId,
        events: &mut Vec<Event>,
    ) -> Result<OperationKind, ProtocolError> {
        let sub = self
            .submission(submission)
            .ok_or(ProtocolError::UnknownSubmission(submission))?;
        if sub.status != SubmissionStatus::AwaitingAssignment {
            return Err(ProtocolError::NotAwaitingAssignment);
        }
        if sub.round() >= self.params.max_rounds {
            return Err(ProtocolError::MaxRoundsExceeded);
        }
        let x = self.params.evaluators_per_submission as usize;
        let (eligible, excluded) = self.eligible_evaluators(submission)?;
        if eligible.len() < x {
            return Err(ProtocolError::InsufficientEvaluators {
                eligible: eligible.len() as u32,
                needed: x as u32,
            });
        }
        let round = sub.round() + 1;
        let seed = selection_seed(&sub.commitment, &self.head, round);
        let mut rng = SelectionRng::new(&seed);
        let mut ordered = eligible;
        ordered.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
        let (slots, selected) = if self.params.slot_selection {
            let slots = partition_slots(&ordered, x);
            let selected = pick_per_slot(&slots, &mut rng);
            (slots, selected)
        } else {
            let ids: Vec<AccountId> = ordered.iter().map(|e| e.0).collect();
            (Vec::new(), pick_uniform(&ids, x, &mut rng))
        };

        let sub = &mut self.submissions[submission.0 as usize];
        sub.rounds.push(EvaluationRound {
            pool: EvaluatorPool {
                round,
                eligible: ordered,
                slots,
                selected: selected.clone(),
                excluded,
                seed,
            },
            encrypted_refs: BTreeMap::new(),
            revealed: false,
            sheet: Vec::new(),
            consensus: None,
        });
        sub.status = SubmissionStatus::Evaluating;
        events.push(Event::EvaluatorsAssigned { submission, round, selected });
        Ok(OperationKind::AssignEvaluators)
    }

    pub(crate) fn become_evaluator(
        &mut self,
        sender: AccountId,
        events: &mut Vec<Event>,
    ) -> Result<OperationKind, ProtocolError> {
        if !self.accounts[&sender].is_active_worker() {
            return Err(ProtocolError::NotAWorker);
        }
        if self.volunteers.contains(&sender) {
            return Err(ProtocolError::AlreadyEnrolled);
        }
        if self.pending_quota(sender).is_none() && !self.clears_volunteer_threshold(sender) {
            return Err(ProtocolError::BelowThreshold);
        }
        self.volunteers.insert(sender);
        events.push(Event::VolunteerEnrolled { account: sender });
        Ok(OperationKind::BecomeEvaluator)
    }

    pub(crate) fn submit_evaluation(
        &mut self,
        sender: AccountId,
        submission: SubmissionId,
        completeness: u8,
        quality: u8,
        review_ref: Digest,
        events: &mut Vec<Event>,
    ) -> Result<OperationKind, ProtocolError> {
        let sub = self
            .submission(submission)
            .ok_or(ProtocolError::UnknownSubmission(submission))?;
        if !sub.is_assigned(sender) {
            return Err(ProtocolError::NotSelected);
        }
        let round = sub.current().expect("assigned implies a round");
        if !round.revealed {
            return Err(ProtocolError::NotRevealed);
        }
        for s in [completeness, quality] {
            if !(MIN_SCORE..=MAX_SCORE).contains(&s) {
                return Err(ProtocolError::OutOfRange(s));
            }
        }
        if sub.has_scored(sender) {
            return Err(ProtocolError::DuplicateScore);
        }

        let x = self.params.evaluators_per_submission as usize;
        let n = sub.round();
        let r = self.submissions[submission.0 as usize]
            .rounds
            .last_mut()
            .expect("checked above");
        r.sheet.push(ScoreEntry { evaluator: sender, completeness, quality, review_ref });
        let filled = r.sheet.len();
        events.push(Event::ScoreRecorded { submission, round: n, evaluator: sender });

        if filled == x {
            self.conclude_round(submission, events)?;
            Ok(OperationKind::ThirdEvaluationSubmit)
        } else if filled == 1 {
            Ok(OperationKind::FirstEvaluationSubmit)
        } else {
            Ok(OperationKind::SecondEvaluationSubmit)
        }
    }

    fn conclude_round(
        &mut self,
        submission: SubmissionId,
        events: &mut Vec<Event>,
    ) -> Result<(), ProtocolError> {
        let sub = &self.submissions[submission.0 as usize];
        let n = sub.round();
        let round = sub.current().expect("a round is open");
        let x = self.params.evaluators_per_submission as usize;
        let result = run_consensus(&round.sheet, x, self.params.outlier_k, n)
            .expect("sheet entries are validated on submission");

        if !result.reached && n < self.params.max_rounds {
            let outliers = result.outliers.iter().copied().collect();
            let sub = &mut self.submissions[submission.0 as usize];
            sub.rounds.last_mut().expect("open round").consensus = Some(result);
            sub.status = SubmissionStatus::AwaitingAssignment;
            events.push(Event::ConsensusFailed { submission, round: n, outliers });
            return Ok(());
        }
        let result = if result.reached { result } else { force(result) };
        let outcome = self.outcome_of(submission, &result)?;

        events.push(Event::ConsensusReached {
            submission,
            round: n,
            forced: result.forced,
            complete_score: outcome.complete_score,
            quality_score: outcome.quality_score,
            final_score: outcome.final_score,
        });
        let sheet = round.sheet.clone();
        let sub = &mut self.submissions[submission.0 as usize];
        sub.rounds.last_mut().expect("open round").consensus = Some(result.clone());
        sub.status = SubmissionStatus::Scored;
        let e_scores = outcome.e_scores.clone();
        sub.outcome = Some(outcome);

        self.credit_evaluators(&sheet, &result, &e_scores, events)?;
        self.finalize_ready(events)
    }

    /// Scores for a concluded round, from current reputations.
    fn outcome_of(
        &self,
        submission: SubmissionId,
        result: &ConsensusResult,
    ) -> Result<Outcome, ProtocolError> {
        let sub = &self.submissions[submission.0 as usize];
        let task = &self.tasks[sub.task.0 as usize];
        let sheet = &sub.current().expect("a round is open").sheet;
        let weighted: Vec<WeightedScore> = sheet
            .iter()
            .filter(|e| result.in_consensus.contains(&e.evaluator))
            .map(|e| WeightedScore {
                completeness: e.completeness,
                quality: e.quality,
                reputation: self.accounts[&e.evaluator].reputation,
            })
            .collect();
        let scores = consensus_scores_or_mean(&weighted)?;
        let fin = final_score(scores.complete, scores.quality, task.w_c, task.w_q)?;
        let mut e_scores = BTreeMap::new();
        for e in sheet {
            let s = evaluator_score(scores.complete, scores.quality, e.completeness, e.quality)?;
            e_scores.insert(e.evaluator, s);
        }
        Ok(Outcome {
            complete_score: scores.complete,
            quality_score: scores.quality,
            final_score: fin,
            unweighted: scores.unweighted,
            forced: result.forced,
            e_scores,
        })
    }

    /// In-consensus evaluators with an open quota credit their eScore to
    /// their oldest such submission. Everyone else is a volunteer: gains for
    /// consensus, losses as an outlier. Obligated outliers get nothing.
    fn credit_evaluators(
        &mut self,
        sheet: &[ScoreEntry],
        result: &ConsensusResult,
        e_scores: &BTreeMap<AccountId, Fixed>,
        events: &mut Vec<Event>,
    ) -> Result<(), ProtocolError> {
        let alpha = self.params.alpha;
        let mut order: Vec<AccountId> = sheet.iter().map(|e| e.evaluator).collect();
        order.sort();
        for evaluator in order {
            let e = e_scores[&evaluator];
            let outlier = result.outliers.contains(&evaluator);
            match self.pending_quota(evaluator) {
                Some(toward) if !outlier => {
                    self.submissions[toward.0 as usize].credited.push(e);
                    events.push(Event::QuotaCredited { evaluator, toward, e_score: e });
                }
                Some(_) => {}
                None => {
                    let active = self
                        .accounts
                        .get(&evaluator)
                        .is_some_and(|a| a.status == AccountStatus::Active);
                    if active {
                        let delta = volunteer_rep_delta(e, outlier, alpha)?;
                        let cause = if outlier {
                            RepCause::VolunteerOutlier
                        } else {
                            RepCause::VolunteerConsensus
                        };
                        self.adjust_reputation(evaluator, delta, cause, events);
                    }
                }
            }
        }
        Ok(())
    }

    /// Applies the reputation update and settles every scored submission
    /// whose worker has met the quota.
    fn finalize_ready(&mut self, events: &mut Vec<Event>) -> Result<(), ProtocolError> {
        let y = self.params.evaluations_owed;
        let ready: Vec<SubmissionId> = self
            .submissions
            .iter()
            .filter(|s| s.status == SubmissionStatus::Scored && s.credited.len() >= y as usize)
            .map(|s| s.id)
            .collect();
        for id in ready {
            let sub = &self.submissions[id.0 as usize];
            let outcome = sub.outcome.as_ref().expect("scored implies an outcome");
            let (fin, complete) = (outcome.final_score, outcome.complete_score);
            let delta = submission_rep_delta(fin, &sub.credited, y, self.params.alpha)?;
            let (worker, agreement) = (sub.worker, sub.agreement);
            self.settle(agreement, fin, complete, events)?;
            self.adjust_reputation(worker, delta, RepCause::Submission, events);
            self.submissions[id.0 as usize].status = SubmissionStatus::Finalized;
            events.push(Event::Finalized { submission: id, rep_delta: delta });
        }
        Ok(())
    }
}
