//! Escrowed agreements between a poster and one worker.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::ProtocolError;
use crate::fixed::{Fixed, Wei};
use crate::gas::OperationKind;
use crate::ids::{AccountId, AgreementId, SubmissionId, TaskId, Tick};
use crate::marketplace::TaskStatus;
use crate::platform::{pay, Event, Platform};
use crate::reputation::{fee_returned, reward, MathError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgreementState {
    Created,
    Accepted,
    Cancelled,
    Defaulted,
    Settled,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agreement {
    pub id: AgreementId,
    pub task: TaskId,
    pub poster: AccountId,
    pub worker: AccountId,
    pub escrow: Wei,
    pub acceptance_fee: Wei,
    /// Last tick at which the worker may accept.
    pub acceptance_deadline: Tick,
    /// Last tick at which the worker may commit.
    pub due_date: Tick,
    pub state: AgreementState,
    pub worker_deposit: Wei,
    pub submission: Option<SubmissionId>,
}

impl Agreement {
    /// Currency this agreement still holds.
    pub fn held(&self) -> Wei {
        match self.state {
            AgreementState::Created => self.escrow,
            AgreementState::Accepted => self.escrow + self.worker_deposit,
            _ => Wei::ZERO,
        }
    }
}

/// How an accepted agreement's funds were split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Settlement {
    pub final_score: Fixed,
    pub complete_score: Fixed,
    pub reward_paid: Wei,
    pub fee_returned: Wei,
    pub poster_remainder: Wei,
}

/// Splits `escrow + deposit` between worker and poster. The three parts
/// always add up to the total.
pub fn settlement(
    escrow: Wei,
    deposit: Wei,
    final_score: Fixed,
    complete_score: Fixed,
) -> Result<Settlement, MathError> {
    let reward_paid = reward(final_score, escrow)?;
    let fee_back = fee_returned(complete_score, deposit)?;
    Ok(Settlement {
        final_score,
        complete_score,
        reward_paid,
        fee_returned: fee_back,
        poster_remainder: escrow + deposit - reward_paid - fee_back,
    })
}

/// A deadline-driven state change.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Transition {
    Cancelled { agreement: AgreementId, refunded: Wei },
    Defaulted { agreement: AgreementId, paid: Wei },
}

impl Platform {
    pub(crate) fn has_due_transitions(&self, now: Tick) -> bool {
        self.agreements.iter().any(|a| is_due(a, now))
    }

    /// Cancels unaccepted agreements past their acceptance deadline and
    /// defaults accepted ones past their due date with no commitment.
    pub(crate) fn fire_deadlines(&mut self, events: &mut Vec<Event>) -> Vec<Transition> {
        let now = self.now;
        let due: Vec<AgreementId> = self
            .agreements
            .iter()
            .filter(|a| is_due(a, now))
            .map(|a| a.id)
            .collect();
        let mut fired = Vec::with_capacity(due.len());
        for id in due {
            let a = &mut self.agreements[id.0 as usize];
            let (poster, task) = (a.poster, a.task);
            let t = match a.state {
                AgreementState::Created => {
                    a.state = AgreementState::Cancelled;
                    let refunded = a.escrow;
                    events.push(Event::AgreementCancelled { agreement: id, refunded });
                    pay(poster, refunded, events);
                    Transition::Cancelled { agreement: id, refunded }
                }
                _ => {
                    a.state = AgreementState::Defaulted;
                    let paid = a.escrow + a.worker_deposit;
                    events.push(Event::AgreementDefaulted { agreement: id, paid });
                    pay(poster, paid, events);
                    Transition::Defaulted { agreement: id, paid }
                }
            };
            self.tasks[task.0 as usize].status = TaskStatus::Cancelled;
            fired.push(t);
        }
        fired
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn create_agreement(
        &mut self,
        sender: AccountId,
        task: TaskId,
        worker: AccountId,
        escrow: Wei,
        acceptance_fee: Wei,
        acceptance_deadline: Tick,
        due_date: Tick,
        events: &mut Vec<Event>,
    ) -> Result<OperationKind, ProtocolError> {
        let t = self.task(task).ok_or(ProtocolError::UnknownTask(task))?;
        if t.poster != sender {
            return Err(ProtocolError::NotThePoster);
        }
        if t.status != TaskStatus::Open {
            return Err(ProtocolError::TaskNotOpen);
        }
        if !t.applicants.contains(&worker) {
            return Err(ProtocolError::NotAnApplicant);
        }
        if !self.accounts.get(&worker).is_some_and(|a| a.is_active_worker()) {
            return Err(ProtocolError::UnknownWorker);
        }
        if escrow != t.reward {
            return Err(ProtocolError::WrongEscrowAmount { paid: escrow, reward: t.reward });
        }
        if acceptance_deadline < self.now || acceptance_deadline >= due_date {
            return Err(ProtocolError::BadDeadlines);
        }
        let id = AgreementId(self.agreements.len() as u64);
        self.agreements.push(Agreement {
            id,
            task,
            poster: sender,
            worker,
            escrow,
            acceptance_fee,
            acceptance_deadline,
            due_date,
            state: AgreementState::Created,
            worker_deposit: Wei::ZERO,
            submission: None,
        });
        self.tasks[task.0 as usize].status = TaskStatus::Agreed;
        events.push(Event::AgreementCreated { agreement: id, task, worker, escrow });
        Ok(OperationKind::CreateAgreement)
    }

    pub(crate) fn cancel_agreement(
        &mut self,
        sender: AccountId,
        agreement: AgreementId,
        events: &mut Vec<Event>,
    ) -> Result<OperationKind, ProtocolError> {
        let a = self
            .agreement(agreement)
            .ok_or(ProtocolError::UnknownAgreement(agreement))?;
        if a.poster != sender {
            return Err(ProtocolError::NotThePoster);
        }
        match a.state {
            AgreementState::Created => {}
            AgreementState::Accepted => return Err(ProtocolError::CannotCancelAccepted),
            _ => return Err(ProtocolError::NotCreated),
        }
        let (refunded, task) = (a.escrow, a.task);
        self.agreements[agreement.0 as usize].state = AgreementState::Cancelled;
        self.tasks[task.0 as usize].status = TaskStatus::Cancelled;
        events.push(Event::AgreementCancelled { agreement, refunded });
        pay(sender, refunded, events);
        Ok(OperationKind::CancelAgreement)
    }

    pub(crate) fn accept(
        &mut self,
        sender: AccountId,
        agreement: AgreementId,
        deposit: Wei,
        events: &mut Vec<Event>,
    ) -> Result<OperationKind, ProtocolError> {
        let a = self
            .agreement(agreement)
            .ok_or(ProtocolError::UnknownAgreement(agreement))?;
        if a.worker != sender {
            return Err(ProtocolError::WrongCaller);
        }
        if self.now > a.acceptance_deadline {
            return Err(ProtocolError::Expired);
        }
        if a.state != AgreementState::Created {
            return Err(ProtocolError::NotCreated);
        }
        if deposit != a.acceptance_fee {
            return Err(ProtocolError::WrongDeposit { paid: deposit, fee: a.acceptance_fee });
        }
        let a = &mut self.agreements[agreement.0 as usize];
        a.state = AgreementState::Accepted;
        a.worker_deposit = deposit;
        events.push(Event::AgreementAccepted { agreement, deposit });
        Ok(OperationKind::AcceptAgreement)
    }

    /// Pays out an accepted agreement whose submission has final scores.
    pub(crate) fn settle(
        &mut self,
        agreement: AgreementId,
        final_score: Fixed,
        complete_score: Fixed,
        events: &mut Vec<Event>,
    ) -> Result<Settlement, ProtocolError> {
        let a = self
            .agreement(agreement)
            .ok_or(ProtocolError::UnknownAgreement(agreement))?;
        if a.state != AgreementState::Accepted {
            return Err(ProtocolError::NotAccepted);
        }
        let scored = a
            .submission
            .and_then(|s| self.submission(s))
            .is_some_and(|s| s.outcome.is_some());
        if !scored {
            return Err(ProtocolError::NotEvaluated);
        }
        let s = settlement(a.escrow, a.worker_deposit, final_score, complete_score)?;
        let (worker, poster, task) = (a.worker, a.poster, a.task);
        self.agreements[agreement.0 as usize].state = AgreementState::Settled;
        self.tasks[task.0 as usize].status = TaskStatus::Evaluated;
        events.push(Event::AgreementSettled { agreement, settlement: s });
        pay(worker, s.reward_paid + s.fee_returned, events);
        pay(poster, s.poster_remainder, events);
        Ok(s)
    }
}

fn is_due(a: &Agreement, now: Tick) -> bool {
    match a.state {
        AgreementState::Created => now > a.acceptance_deadline,
        AgreementState::Accepted => a.submission.is_none() && now > a.due_date,
        _ => false,
    }
}
