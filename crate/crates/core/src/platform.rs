//! The platform state and the operation dispatcher.
//!
//! [`Platform`] holds every module's state. [`Platform::apply`] is the only
//! mutating entry point used by the ledger: it advances time, fires due
//! deadlines and runs one [`Op`]. Handlers validate before they mutate, so a
//! rejected op leaves the state untouched.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::accounts::{AccountStatus, Role, UserAccount};
use crate::agreement::{Agreement, Settlement, Transition};
use crate::codec;
use crate::crypto::PublicKey;
use crate::error::ProtocolError;
use crate::fixed::{Fixed, Wei};
use crate::gas::{GasError, GasSchedule, OperationKind};
use crate::hash::{keccak256, Digest};
use crate::ids::{AccountId, AgreementId, SubmissionId, TaskId, Tick};
use crate::marketplace::Task;
use crate::submission::Submission;

/// Default registration fee: 0.0118 ether.
pub const DEFAULT_REGISTRATION_FEE: Wei = Wei(11_800_000_000_000_000);

/// Who may volunteer as an evaluator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VolunteerThreshold {
    /// Reputation at least the average over active workers.
    PlatformAverage,
    /// Any enrolled worker.
    Open,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    pub registration_fee: Wei,
    /// `x`: evaluators drawn per round.
    pub evaluators_per_submission: u32,
    /// `y`: evaluations a worker owes per own submission.
    pub evaluations_owed: u32,
    /// Outlier multiplier; `None` disables outlier removal.
    pub outlier_k: Option<Fixed>,
    pub alpha: Fixed,
    pub max_rounds: u32,
    pub volunteer_threshold: VolunteerThreshold,
    /// Draw one evaluator per reputation slot; off means uniform draws.
    pub slot_selection: bool,
    pub gas: GasSchedule,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            registration_fee: DEFAULT_REGISTRATION_FEE,
            evaluators_per_submission: 3,
            evaluations_owed: 2,
            outlier_k: Some(Fixed::ONE),
            alpha: Fixed::from_raw(2_500),
            max_rounds: 3,
            volunteer_threshold: VolunteerThreshold::PlatformAverage,
            slot_selection: true,
            gas: GasSchedule::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParamsError {
    #[error("evaluators per submission must be at least 1")]
    NoEvaluators,
    #[error("evaluations owed must be at least 1")]
    NoQuota,
    #[error("max rounds must be at least 1")]
    NoRounds,
    #[error("alpha must lie in [0, 1]")]
    BadAlpha,
    #[error("outlier multiplier must be non-negative")]
    NegativeK,
    #[error(transparent)]
    Gas(#[from] GasError),
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        if self.evaluators_per_submission == 0 {
            return Err(ParamsError::NoEvaluators);
        }
        if self.evaluations_owed == 0 {
            return Err(ParamsError::NoQuota);
        }
        if self.max_rounds == 0 {
            return Err(ParamsError::NoRounds);
        }
        if self.alpha.is_negative() || self.alpha > Fixed::ONE {
            return Err(ParamsError::BadAlpha);
        }
        if self.outlier_k.is_some_and(Fixed::is_negative) {
            return Err(ParamsError::NegativeK);
        }
        self.gas.validate()?;
        Ok(())
    }
}

/// A state-mutating operation, as carried in a ledger payload.
///
/// Externally tagged so the binary codec can decode it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Op {
    Register {
        role: Role,
        public_key: PublicKey,
        profile_ref: Digest,
        skills: BTreeSet<String>,
        deposit: Wei,
    },
    Exit,
    PostTask {
        title: String,
        skills: BTreeSet<String>,
        reward: Wei,
        metadata_ref: Digest,
        w_c: Fixed,
        w_q: Fixed,
    },
    CancelTask {
        task: TaskId,
    },
    Apply {
        task: TaskId,
    },
    CreateAgreement {
        task: TaskId,
        worker: AccountId,
        escrow: Wei,
        acceptance_fee: Wei,
        acceptance_deadline: Tick,
        due_date: Tick,
    },
    CancelAgreement {
        agreement: AgreementId,
    },
    Accept {
        agreement: AgreementId,
        deposit: Wei,
    },
    Commit {
        agreement: AgreementId,
        commitment: Digest,
    },
    AssignEvaluators {
        submission: SubmissionId,
    },
    Reveal {
        submission: SubmissionId,
        refs: BTreeMap<AccountId, Digest>,
    },
    BecomeEvaluator,
    SubmitEvaluation {
        submission: SubmissionId,
        completeness: u8,
        quality: u8,
        review_ref: Digest,
    },
    Tick,
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Register { .. } => "register",
            Op::Exit => "exit",
            Op::PostTask { .. } => "post-task",
            Op::CancelTask { .. } => "cancel-task",
            Op::Apply { .. } => "apply",
            Op::CreateAgreement { .. } => "create-agreement",
            Op::CancelAgreement { .. } => "cancel-agreement",
            Op::Accept { .. } => "accept",
            Op::Commit { .. } => "commit",
            Op::AssignEvaluators { .. } => "assign-evaluators",
            Op::Reveal { .. } => "reveal",
            Op::BecomeEvaluator => "become-evaluator",
            Op::SubmitEvaluation { .. } => "submit-evaluation",
            Op::Tick => "tick",
        }
    }

    /// Gas kind charged when the op lands as a recorded revert.
    pub fn nominal_kind(&self) -> OperationKind {
        match self {
            Op::Register { role: Role::Worker, .. } => OperationKind::CreateWorker,
            Op::Register { .. } => OperationKind::CreateTaskPoster,
            Op::Exit => OperationKind::Exit,
            Op::PostTask { .. } => OperationKind::PostTask,
            Op::CancelTask { .. } => OperationKind::CancelTask,
            Op::Apply { .. } => OperationKind::Apply,
            Op::CreateAgreement { .. } => OperationKind::CreateAgreement,
            Op::CancelAgreement { .. } => OperationKind::CancelAgreement,
            Op::Accept { .. } => OperationKind::AcceptAgreement,
            Op::Commit { .. } => OperationKind::SubmitHash,
            Op::AssignEvaluators { .. } => OperationKind::AssignEvaluators,
            Op::Reveal { .. } => OperationKind::Reveal,
            Op::BecomeEvaluator => OperationKind::BecomeEvaluator,
            Op::SubmitEvaluation { .. } => OperationKind::SecondEvaluationSubmit,
            Op::Tick => OperationKind::Tick,
        }
    }
}

/// Ledger payload: an op and the time it executes at.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Payload {
    pub at: Tick,
    pub op: Op,
}

/// Why a reputation changed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepCause {
    Submission,
    VolunteerConsensus,
    VolunteerOutlier,
}

/// Observable effects of an applied op. Reports only; never part of the
/// hashed state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    Registered { account: AccountId, role: Role, deposit: Wei },
    Exited { account: AccountId, refunded: Wei, retained: Wei },
    /// Currency leaving the platform.
    Payout { to: AccountId, amount: Wei },
    TaskPosted { task: TaskId, poster: AccountId, reward: Wei },
    TaskCancelled { task: TaskId },
    Applied { task: TaskId, worker: AccountId },
    AgreementCreated { agreement: AgreementId, task: TaskId, worker: AccountId, escrow: Wei },
    AgreementAccepted { agreement: AgreementId, deposit: Wei },
    AgreementCancelled { agreement: AgreementId, refunded: Wei },
    AgreementDefaulted { agreement: AgreementId, paid: Wei },
    AgreementSettled { agreement: AgreementId, settlement: Settlement },
    Committed { submission: SubmissionId, agreement: AgreementId, commitment: Digest },
    EvaluatorsAssigned { submission: SubmissionId, round: u32, selected: Vec<AccountId> },
    Revealed { submission: SubmissionId, round: u32 },
    VolunteerEnrolled { account: AccountId },
    ScoreRecorded { submission: SubmissionId, round: u32, evaluator: AccountId },
    ConsensusFailed { submission: SubmissionId, round: u32, outliers: Vec<AccountId> },
    ConsensusReached {
        submission: SubmissionId,
        round: u32,
        forced: bool,
        complete_score: Fixed,
        quality_score: Fixed,
        final_score: Fixed,
    },
    QuotaCredited { evaluator: AccountId, toward: SubmissionId, e_score: Fixed },
    ReputationChanged { account: AccountId, delta: Fixed, reputation: Fixed, cause: RepCause },
    Finalized { submission: SubmissionId, rep_delta: Fixed },
}

/// Outcome of one applied op.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Applied {
    pub kind: OperationKind,
    pub events: Vec<Event>,
    /// Set when the op was recorded but had no effect.
    pub reverted: Option<ProtocolError>,
}

/// The whole platform state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Platform {
    pub(crate) params: ProtocolParams,
    pub(crate) now: Tick,
    pub(crate) head: Digest,
    pub(crate) accounts: BTreeMap<AccountId, UserAccount>,
    pub(crate) volunteers: BTreeSet<AccountId>,
    pub(crate) tasks: Vec<Task>,
    pub(crate) agreements: Vec<Agreement>,
    pub(crate) submissions: Vec<Submission>,
    pub(crate) platform_pool: Wei,
}

impl Platform {
    pub fn new(params: ProtocolParams) -> Result<Platform, ParamsError> {
        params.validate()?;
        Ok(Platform {
            params,
            now: 0,
            head: Digest::ZERO,
            accounts: BTreeMap::new(),
            volunteers: BTreeSet::new(),
            tasks: Vec::new(),
            agreements: Vec::new(),
            submissions: Vec::new(),
            platform_pool: Wei::ZERO,
        })
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    /// Hash of the last entry folded into this state.
    pub fn chain_head(&self) -> Digest {
        self.head
    }

    pub(crate) fn set_chain_head(&mut self, head: Digest) {
        self.head = head;
    }

    pub fn account(&self, id: &AccountId) -> Option<&UserAccount> {
        self.accounts.get(id)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &UserAccount> {
        self.accounts.values()
    }

    pub fn volunteers(&self) -> &BTreeSet<AccountId> {
        &self.volunteers
    }

    pub fn task(&self, id: TaskId) -> Option<&Task> {
        self.tasks.get(id.0 as usize)
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn agreement(&self, id: AgreementId) -> Option<&Agreement> {
        self.agreements.get(id.0 as usize)
    }

    pub fn agreements(&self) -> &[Agreement] {
        &self.agreements
    }

    pub fn submission(&self, id: SubmissionId) -> Option<&Submission> {
        self.submissions.get(id.0 as usize)
    }

    pub fn submissions(&self) -> &[Submission] {
        &self.submissions
    }

    /// Retained deposits from exits.
    pub fn platform_pool(&self) -> Wei {
        self.platform_pool
    }

    /// Currency currently held: account deposits plus open escrows and
    /// acceptance deposits.
    pub fn held_funds(&self) -> Wei {
        let deposits: Wei = self.accounts.values().map(|a| a.deposit).sum();
        let agreements: Wei = self.agreements.iter().map(Agreement::held).sum();
        deposits + agreements
    }

    /// Keccak-256 of the canonical encoding of the whole state.
    pub fn state_root(&self) -> Digest {
        keccak256(&codec::encode(self).expect("platform state always encodes"))
    }

    /// Applies one op at `payload.at`.
    ///
    /// Deadlines due at `payload.at` fire first. A rejected op returns the
    /// error and leaves the state (including time) as it was; an op that
    /// lands as a recorded revert keeps the fired deadlines.
    pub fn apply(&mut self, sender: AccountId, payload: &Payload) -> Result<Applied, ProtocolError> {
        if payload.at < self.now {
            return Err(ProtocolError::TimeWentBackwards { at: payload.at, now: self.now });
        }
        // Restore point for ops that fire deadlines or may complete a sheet.
        let cascades = matches!(payload.op, Op::SubmitEvaluation { .. });
        let snapshot = (cascades || self.has_due_transitions(payload.at)).then(|| self.clone());
        let prev_now = self.now;

        let mut events = Vec::new();
        self.advance(payload.at, &mut events);
        let mut op_events = Vec::new();
        match self.dispatch(sender, &payload.op, &mut op_events) {
            Ok(kind) => {
                events.extend(op_events);
                Ok(Applied { kind, events, reverted: None })
            }
            Err(e) if e.is_recorded_revert() => {
                Ok(Applied { kind: payload.op.nominal_kind(), events, reverted: Some(e) })
            }
            Err(e) => {
                match snapshot {
                    Some(s) => *self = s,
                    None => self.now = prev_now,
                }
                Err(e)
            }
        }
    }

    /// Gas kind `op` would be charged if applied next.
    pub fn charged_kind(&self, op: &Op) -> OperationKind {
        if let Op::SubmitEvaluation { submission, .. } = op {
            let x = self.params.evaluators_per_submission as usize;
            let filled = self
                .submission(*submission)
                .and_then(|s| s.current())
                .map_or(0, |r| r.sheet.len())
                + 1;
            return if filled == x {
                OperationKind::ThirdEvaluationSubmit
            } else if filled == 1 {
                OperationKind::FirstEvaluationSubmit
            } else {
                OperationKind::SecondEvaluationSubmit
            };
        }
        op.nominal_kind()
    }

    /// Advances time to `now` and fires every due deadline.
    ///
    /// State changed this way is not on any ledger; ledger-driven callers go
    /// through [`Platform::apply`] with an [`Op::Tick`].
    pub fn tick(&mut self, now: Tick) -> Result<Vec<Transition>, ProtocolError> {
        if now < self.now {
            return Err(ProtocolError::TimeWentBackwards { at: now, now: self.now });
        }
        let mut events = Vec::new();
        Ok(self.advance(now, &mut events))
    }

    fn advance(&mut self, now: Tick, events: &mut Vec<Event>) -> Vec<Transition> {
        self.now = now;
        self.fire_deadlines(events)
    }

    fn dispatch(
        &mut self,
        sender: AccountId,
        op: &Op,
        ev: &mut Vec<Event>,
    ) -> Result<OperationKind, ProtocolError> {
        if let Op::Register { role, public_key, profile_ref, skills, deposit } = op {
            return self.register(sender, *role, *public_key, *profile_ref, skills, *deposit, ev);
        }
        match self.accounts.get(&sender) {
            None => return Err(ProtocolError::UnknownSender(sender)),
            Some(a) if a.status == AccountStatus::Exited => return Err(ProtocolError::AlreadyExited),
            Some(_) => {}
        }
        match op {
            Op::Register { .. } => unreachable!("handled above"),
            Op::Exit => self.exit(sender, ev),
            Op::PostTask { title, skills, reward, metadata_ref, w_c, w_q } => {
                self.post_task(sender, title, skills, *reward, *metadata_ref, *w_c, *w_q, ev)
            }
            Op::CancelTask { task } => self.cancel_task(sender, *task, ev),
            Op::Apply { task } => self.apply_to_task(sender, *task, ev),
            Op::CreateAgreement {
                task,
                worker,
                escrow,
                acceptance_fee,
                acceptance_deadline,
                due_date,
            } => self.create_agreement(
                sender,
                *task,
                *worker,
                *escrow,
                *acceptance_fee,
                *acceptance_deadline,
                *due_date,
                ev,
            ),
            Op::CancelAgreement { agreement } => self.cancel_agreement(sender, *agreement, ev),
            Op::Accept { agreement, deposit } => self.accept(sender, *agreement, *deposit, ev),
            Op::Commit { agreement, commitment } => self.commit(sender, *agreement, *commitment, ev),
            Op::AssignEvaluators { submission } => self.assign_evaluators(*submission, ev),
            Op::Reveal { submission, refs } => self.record_reveal(sender, *submission, refs, ev),
            Op::BecomeEvaluator => self.become_evaluator(sender, ev),
            Op::SubmitEvaluation { submission, completeness, quality, review_ref } => self
                .submit_evaluation(sender, *submission, *completeness, *quality, *review_ref, ev),
            Op::Tick => Ok(OperationKind::Tick),
        }
    }

    /// Reputation change for an active worker, with its event.
    pub(crate) fn adjust_reputation(
        &mut self,
        account: AccountId,
        delta: Fixed,
        cause: RepCause,
        events: &mut Vec<Event>,
    ) {
        if let Ok(reputation) = self.update_reputation(account, delta) {
            events.push(Event::ReputationChanged { account, delta, reputation, cause });
        }
    }
}

/// Records currency leaving the platform.
pub(crate) fn pay(to: AccountId, amount: Wei, events: &mut Vec<Event>) {
    if amount > Wei::ZERO {
        events.push(Event::Payout { to, amount });
    }
}
