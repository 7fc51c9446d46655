//! Commit-reveal submissions and the content-addressed store.
//!
//! The worker commits `keccak256(work)` before evaluators are known. Once
//! they are assigned, the worker seals one envelope per evaluator, puts the
//! envelopes in a [`ContentStore`] and records their addresses on the ledger.
//! Sealing and opening happen off the ledger, in [`reveal`] and
//! [`fetch_for_evaluator`].

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::agreement::AgreementState;
use crate::crypto::{EnvelopeCipher, EnvelopeError, SecretKey};
use crate::error::ProtocolError;
use crate::evaluation::{ConsensusResult, EvaluatorPool, ScoreEntry};
use crate::fixed::Fixed;
use crate::gas::OperationKind;
use crate::hash::{keccak256, Digest};
use crate::ids::{AccountId, AgreementId, SubmissionId, TaskId, Tick};
use crate::marketplace::TaskStatus;
use crate::platform::{Event, Platform};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubmissionStatus {
    /// Committed, or a round failed; evaluators must be (re)assigned.
    AwaitingAssignment,
    /// A round is assigned and collecting scores.
    Evaluating,
    /// Final scores fixed; waiting for the worker's evaluation quota.
    Scored,
    /// Reputation updated and agreement settled.
    Finalized,
}

/// One assignment round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationRound {
    pub pool: EvaluatorPool,
    pub encrypted_refs: BTreeMap<AccountId, Digest>,
    pub revealed: bool,
    pub sheet: Vec<ScoreEntry>,
    pub consensus: Option<ConsensusResult>,
}

/// Final scores of a submission.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub complete_score: Fixed,
    pub quality_score: Fixed,
    pub final_score: Fixed,
    /// All consensus weights were zero; plain means were used.
    pub unweighted: bool,
    pub forced: bool,
    /// eScore of every evaluator in the final round.
    pub e_scores: BTreeMap<AccountId, Fixed>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub id: SubmissionId,
    pub agreement: AgreementId,
    pub task: TaskId,
    pub worker: AccountId,
    pub poster: AccountId,
    pub commitment: Digest,
    pub committed_at: Tick,
    pub status: SubmissionStatus,
    pub rounds: Vec<EvaluationRound>,
    pub outcome: Option<Outcome>,
    /// eScores the worker earned evaluating others, counted toward this
    /// submission's quota.
    pub credited: Vec<Fixed>,
}

impl Submission {
    pub fn round(&self) -> u32 {
        self.rounds.len() as u32
    }

    pub fn current(&self) -> Option<&EvaluationRound> {
        self.rounds.last()
    }

    pub fn current_pool(&self) -> Option<&EvaluatorPool> {
        self.current().map(|r| &r.pool)
    }

    pub fn has_scored(&self, evaluator: AccountId) -> bool {
        self.current()
            .is_some_and(|r| r.sheet.iter().any(|e| e.evaluator == evaluator))
    }

    pub fn is_assigned(&self, evaluator: AccountId) -> bool {
        self.status == SubmissionStatus::Evaluating
            && self.current_pool().is_some_and(|p| p.selected.contains(&evaluator))
    }

    /// Not yet finalized and still owed evaluations by its worker.
    pub fn quota_open(&self, y: u32) -> bool {
        self.status != SubmissionStatus::Finalized && self.credited.len() < y as usize
    }
}

/// Append-only map from `keccak256(bytes)` to bytes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentStore {
    blobs: BTreeMap<Digest, Vec<u8>>,
}

impl ContentStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, bytes: Vec<u8>) -> Digest {
        let address = keccak256(&bytes);
        self.blobs.entry(address).or_insert(bytes);
        address
    }

    pub fn get(&self, address: &Digest) -> Option<&[u8]> {
        self.blobs.get(address).map(Vec::as_slice)
    }

    pub fn contains(&self, address: &Digest) -> bool {
        self.blobs.contains_key(address)
    }

    pub fn len(&self) -> usize {
        self.blobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blobs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Digest, &[u8])> {
        self.blobs.iter().map(|(k, v)| (k, v.as_slice()))
    }

    /// Overwrites a stored blob. Breaks the store's contract on purpose;
    /// only for tampering experiments.
    pub fn substitute(&mut self, address: Digest, bytes: Vec<u8>) {
        self.blobs.insert(address, bytes);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RevealError {
    #[error("unknown or uncommitted submission")]
    NotCommitted,
    #[error("no evaluators are assigned to the current round")]
    NotAssigned,
    #[error("plaintext digest does not match the commitment")]
    CommitmentMismatch,
    #[error("assigned evaluator has no registered key")]
    UnknownEvaluator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum FetchError {
    #[error("account is not assigned to this submission")]
    NotAssigned,
    #[error("submission has not been revealed")]
    NotRevealed,
    #[error("envelope missing from the content store")]
    Missing,
    #[error("worker signature on the envelope is invalid")]
    AuthFailure,
    #[error("envelope cannot be opened: {0}")]
    Envelope(EnvelopeError),
    #[error("plaintext digest does not match the commitment")]
    CommitmentMismatch,
}

/// Seals the plaintext for every evaluator of the current round and stores
/// the envelopes. Returns the addresses to record with [`crate::Op::Reveal`].
pub fn reveal<C: EnvelopeCipher>(
    platform: &Platform,
    store: &mut ContentStore,
    cipher: &C,
    worker_key: &SecretKey,
    submission: SubmissionId,
    plaintext: &[u8],
) -> Result<BTreeMap<AccountId, Digest>, RevealError> {
    let sub = platform.submission(submission).ok_or(RevealError::NotCommitted)?;
    if keccak256(plaintext) != sub.commitment {
        return Err(RevealError::CommitmentMismatch);
    }
    if sub.status != SubmissionStatus::Evaluating {
        return Err(RevealError::NotAssigned);
    }
    let pool = sub.current_pool().ok_or(RevealError::NotAssigned)?;
    let mut refs = BTreeMap::new();
    for evaluator in &pool.selected {
        let key = platform
            .account(evaluator)
            .ok_or(RevealError::UnknownEvaluator)?
            .public_key;
        let envelope = cipher.seal(plaintext, &key, worker_key);
        refs.insert(*evaluator, store.put(envelope));
    }
    Ok(refs)
}

/// Opens the evaluator's envelope and checks it against the commitment.
pub fn fetch_for_evaluator<C: EnvelopeCipher>(
    platform: &Platform,
    store: &ContentStore,
    cipher: &C,
    evaluator: AccountId,
    evaluator_key: &SecretKey,
    submission: SubmissionId,
) -> Result<Vec<u8>, FetchError> {
    let sub = platform.submission(submission).ok_or(FetchError::NotAssigned)?;
    if !sub.is_assigned(evaluator) {
        return Err(FetchError::NotAssigned);
    }
    let round = sub.current().ok_or(FetchError::NotAssigned)?;
    if !round.revealed {
        return Err(FetchError::NotRevealed);
    }
    let address = round.encrypted_refs.get(&evaluator).ok_or(FetchError::NotAssigned)?;
    let envelope = store.get(address).ok_or(FetchError::Missing)?;
    let worker_key = platform
        .account(&sub.worker)
        .map(|a| a.public_key)
        .ok_or(FetchError::AuthFailure)?;
    let plaintext = cipher
        .open(envelope, evaluator_key, &worker_key)
        .map_err(|e| match e {
            EnvelopeError::AuthFailure => FetchError::AuthFailure,
            other => FetchError::Envelope(other),
        })?;
    if keccak256(&plaintext) != sub.commitment {
        return Err(FetchError::CommitmentMismatch);
    }
    Ok(plaintext)
}

impl Platform {
    pub(crate) fn commit(
        &mut self,
        sender: AccountId,
        agreement: AgreementId,
        commitment: Digest,
        events: &mut Vec<Event>,
    ) -> Result<OperationKind, ProtocolError> {
        let a = self
            .agreement(agreement)
            .ok_or(ProtocolError::UnknownAgreement(agreement))?;
        if a.worker != sender {
            return Err(ProtocolError::NotTheWorker);
        }
        if a.state != AgreementState::Accepted {
            return Err(ProtocolError::NotAccepted);
        }
        if a.submission.is_some() {
            return Err(ProtocolError::AlreadyCommitted);
        }
        if self.now > a.due_date {
            return Err(ProtocolError::PastDue);
        }
        let id = SubmissionId(self.submissions.len() as u64);
        let (task, poster) = (a.task, a.poster);
        self.submissions.push(Submission {
            id,
            agreement,
            task,
            worker: sender,
            poster,
            commitment,
            committed_at: self.now,
            status: SubmissionStatus::AwaitingAssignment,
            rounds: Vec::new(),
            outcome: None,
            credited: Vec::new(),
        });
        self.agreements[agreement.0 as usize].submission = Some(id);
        self.tasks[task.0 as usize].status = TaskStatus::Submitted;
        events.push(Event::Committed { submission: id, agreement, commitment });
        Ok(OperationKind::SubmitHash)
    }

    /// Records the envelope addresses for the current round.
    pub(crate) fn record_reveal(
        &mut self,
        sender: AccountId,
        submission: SubmissionId,
        refs: &BTreeMap<AccountId, Digest>,
        events: &mut Vec<Event>,
    ) -> Result<OperationKind, ProtocolError> {
        let sub = self
            .submission(submission)
            .ok_or(ProtocolError::UnknownSubmission(submission))?;
        if sub.worker != sender {
            return Err(ProtocolError::NotTheWorker);
        }
        if sub.status != SubmissionStatus::Evaluating {
            return Err(ProtocolError::NotAwaitingAssignment);
        }
        let round = sub.current().expect("evaluating implies a round");
        if round.revealed {
            return Err(ProtocolError::AlreadyRevealed);
        }
        let keys_match = refs.len() == round.pool.selected.len()
            && round.pool.selected.iter().all(|e| refs.contains_key(e));
        if !keys_match {
            return Err(ProtocolError::RevealMismatch);
        }
        let n = sub.round();
        let round = self.submissions[submission.0 as usize]
            .rounds
            .last_mut()
            .expect("checked above");
        round.encrypted_refs = refs.clone();
        round.revealed = true;
        events.push(Event::Revealed { submission, round: n });
        Ok(OperationKind::Reveal)
    }
}
