use serde::{Deserialize, Serialize};

use crate::fixed::Wei;
use crate::ids::{AccountId, AgreementId, SubmissionId, TaskId, Tick};
use crate::reputation::MathError;

/// Every way a protocol operation can be refused.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum ProtocolError {
    // accounts
    #[error("deposit {paid} is below the registration fee {required}")]
    InsufficientDeposit { paid: Wei, required: Wei },
    #[error("public key already registered")]
    DuplicateKey,
    #[error("sender does not match the registered key")]
    SenderMismatch,
    #[error("unknown sender {0:?}")]
    UnknownSender(AccountId),
    #[error("account has already exited")]
    AlreadyExited,
    #[error("account has open agreements, submissions or evaluations")]
    OpenObligations,
    #[error("account is not a worker")]
    NotAWorker,

    // marketplace
    #[error("completeness and quality weights must be non-negative and sum to 1")]
    BadWeights,
    #[error("task reward must be positive")]
    NonPositiveReward,
    #[error("account is not a task poster")]
    NotATaskPoster,
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("task is not open")]
    TaskNotOpen,
    #[error("unknown or inactive worker")]
    UnknownWorker,
    #[error("only the task poster may do this")]
    NotThePoster,

    // agreement
    #[error("unknown agreement {0}")]
    UnknownAgreement(AgreementId),
    #[error("escrow {paid} does not equal the task reward {reward}")]
    WrongEscrowAmount { paid: Wei, reward: Wei },
    #[error("worker has not applied to this task")]
    NotAnApplicant,
    #[error("acceptance deadline must precede the due date and not be in the past")]
    BadDeadlines,
    #[error("caller is not the worker named in the agreement")]
    WrongCaller,
    #[error("acceptance deadline has passed")]
    Expired,
    #[error("deposit {paid} does not equal the acceptance fee {fee}")]
    WrongDeposit { paid: Wei, fee: Wei },
    #[error("agreement is not awaiting acceptance")]
    NotCreated,
    #[error("an accepted agreement cannot be cancelled by the poster")]
    CannotCancelAccepted,
    #[error("agreement is not accepted")]
    NotAccepted,
    #[error("submission has not been evaluated")]
    NotEvaluated,

    // submission
    #[error("due date has passed")]
    PastDue,
    #[error("a commitment already exists for this agreement")]
    AlreadyCommitted,
    #[error("unknown submission {0}")]
    UnknownSubmission(SubmissionId),
    #[error("only the submitting worker may do this")]
    NotTheWorker,
    #[error("envelope references do not match the assigned evaluators")]
    RevealMismatch,
    #[error("submission already revealed for this round")]
    AlreadyRevealed,
    #[error("submission has not been revealed")]
    NotRevealed,

    // evaluation
    #[error("only {eligible} eligible evaluators, {needed} needed")]
    InsufficientEvaluators { eligible: u32, needed: u32 },
    #[error("submission is not awaiting evaluator assignment")]
    NotAwaitingAssignment,
    #[error("maximum consensus rounds exceeded")]
    MaxRoundsExceeded,
    #[error("evaluator is not selected for the current round")]
    NotSelected,
    #[error("score {0} outside [1, 100]")]
    OutOfRange(u8),
    #[error("evaluator already scored this round")]
    DuplicateScore,
    #[error("reputation is below the volunteer threshold")]
    BelowThreshold,
    #[error("already enrolled as a volunteer evaluator")]
    AlreadyEnrolled,

    // time
    #[error("timestamp {at} precedes platform time {now}")]
    TimeWentBackwards { at: Tick, now: Tick },

    #[error(transparent)]
    Math(#[from] MathError),
}

impl ProtocolError {
    /// Errors that still land on the ledger: the transaction is recorded, its
    /// gas is consumed and its effect is void.
    pub fn is_recorded_revert(&self) -> bool {
        matches!(self, ProtocolError::WrongCaller | ProtocolError::Expired)
    }
}
