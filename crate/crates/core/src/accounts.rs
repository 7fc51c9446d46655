//! Registration, reputation bookkeeping and exit settlement.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::crypto::PublicKey;
use crate::error::ProtocolError;
use crate::fixed::{Fixed, Wei};
use crate::gas::OperationKind;
use crate::hash::Digest;
use crate::ids::{AccountId, Tick};
use crate::platform::{pay, Event, Platform};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Worker,
    TaskPoster,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccountStatus {
    Active,
    Exited,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAccount {
    pub id: AccountId,
    pub role: Role,
    pub public_key: PublicKey,
    pub profile_ref: Digest,
    /// Never negative. Workers start at 1.0; posters carry 0.
    pub reputation: Fixed,
    pub deposit: Wei,
    pub skills: BTreeSet<String>,
    pub status: AccountStatus,
    pub registered_at: Tick,
}

impl UserAccount {
    pub fn is_active_worker(&self) -> bool {
        self.role == Role::Worker && self.status == AccountStatus::Active
    }

    pub fn has_skills(&self, required: &BTreeSet<String>) -> bool {
        required.is_subset(&self.skills)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlatformStats {
    pub avg_worker_reputation: Fixed,
    pub active_worker_count: u32,
}

/// Exit refund: `floor(deposit * min(1, rep / avg))`. A reputation at or
/// above the average (including the zero-average case) refunds in full.
pub fn exit_refund(deposit: Wei, reputation: Fixed, average: Fixed) -> Wei {
    if reputation >= average || average.raw() <= 0 {
        return deposit;
    }
    deposit.mul_div_floor(reputation.raw().max(0) as u128, average.raw() as u128)
}

impl Platform {
    pub(crate) fn register(
        &mut self,
        sender: AccountId,
        role: Role,
        public_key: PublicKey,
        profile_ref: Digest,
        skills: &BTreeSet<String>,
        deposit: Wei,
        events: &mut Vec<Event>,
    ) -> Result<OperationKind, ProtocolError> {
        let id = AccountId::of(&public_key);
        if sender != id {
            return Err(ProtocolError::SenderMismatch);
        }
        if self.accounts.contains_key(&id) {
            return Err(ProtocolError::DuplicateKey);
        }
        if deposit < self.params.registration_fee {
            return Err(ProtocolError::InsufficientDeposit {
                paid: deposit,
                required: self.params.registration_fee,
            });
        }
        let reputation = match role {
            Role::Worker => Fixed::ONE,
            Role::TaskPoster => Fixed::ZERO,
        };
        self.accounts.insert(
            id,
            UserAccount {
                id,
                role,
                public_key,
                profile_ref,
                reputation,
                deposit,
                skills: skills.clone(),
                status: AccountStatus::Active,
                registered_at: self.now,
            },
        );
        events.push(Event::Registered { account: id, role, deposit });
        Ok(match role {
            Role::Worker => OperationKind::CreateWorker,
            Role::TaskPoster => OperationKind::CreateTaskPoster,
        })
    }

    pub(crate) fn exit(
        &mut self,
        sender: AccountId,
        events: &mut Vec<Event>,
    ) -> Result<OperationKind, ProtocolError> {
        let acct = self.accounts.get(&sender).ok_or(ProtocolError::UnknownSender(sender))?;
        if acct.status == AccountStatus::Exited {
            return Err(ProtocolError::AlreadyExited);
        }
        if self.has_open_obligations(sender) {
            return Err(ProtocolError::OpenObligations);
        }
        let refunded = match acct.role {
            Role::TaskPoster => acct.deposit,
            Role::Worker => {
                exit_refund(acct.deposit, acct.reputation, self.stats().avg_worker_reputation)
            }
        };
        let retained = acct.deposit - refunded;

        let acct = self.accounts.get_mut(&sender).expect("checked above");
        acct.deposit = Wei::ZERO;
        acct.status = AccountStatus::Exited;
        self.volunteers.remove(&sender);
        self.platform_pool += retained;
        events.push(Event::Exited { account: sender, refunded, retained });
        pay(sender, refunded, events);
        Ok(OperationKind::Exit)
    }

    /// `reputation := max(0, reputation + delta)` for an active worker.
    pub fn update_reputation(
        &mut self,
        account: AccountId,
        delta: Fixed,
    ) -> Result<Fixed, ProtocolError> {
        let acct = self
            .accounts
            .get_mut(&account)
            .filter(|a| a.is_active_worker())
            .ok_or(ProtocolError::NotAWorker)?;
        acct.reputation = (acct.reputation + delta).max(Fixed::ZERO);
        Ok(acct.reputation)
    }

    /// Mean reputation over active workers, floored; zero with no workers.
    pub fn stats(&self) -> PlatformStats {
        let (sum, n) = self
            .accounts
            .values()
            .filter(|a| a.is_active_worker())
            .fold((0i128, 0u32), |(s, n), a| (s + i128::from(a.reputation.raw()), n + 1));
        let avg = if n == 0 { 0 } else { sum / i128::from(n) };
        PlatformStats {
            avg_worker_reputation: Fixed::from_raw(avg as i64),
            active_worker_count: n,
        }
    }

    fn has_open_obligations(&self, id: AccountId) -> bool {
        use crate::agreement::AgreementState;
        use crate::marketplace::TaskStatus;
        use crate::submission::SubmissionStatus;

        let open_agreement = self.agreements.iter().any(|a| {
            (a.worker == id || a.poster == id)
                && matches!(a.state, AgreementState::Created | AgreementState::Accepted)
        });
        let open_task = self
            .tasks
            .iter()
            .any(|t| t.poster == id && t.status == TaskStatus::Open);
        let pending = self.submissions.iter().any(|s| {
            s.status != SubmissionStatus::Finalized
                && (s.worker == id
                    || (s.status == SubmissionStatus::Evaluating
                        && s.current_pool().is_some_and(|p| p.selected.contains(&id))
                        && !s.has_scored(id)))
        });
        open_agreement || open_task || pending
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refund_formula() {
        let avg = Fixed::from_int(4);
        assert_eq!(exit_refund(Wei(10_000), Fixed::from_int(2), avg), Wei(5_000));
        assert_eq!(exit_refund(Wei(10_000), avg, avg), Wei(10_000));
        assert_eq!(exit_refund(Wei(10_000), Fixed::from_int(9), avg), Wei(10_000));
        assert_eq!(exit_refund(Wei(10_000), Fixed::ZERO, avg), Wei(0));
        assert_eq!(exit_refund(Wei(10_000), Fixed::ZERO, Fixed::ZERO), Wei(10_000));
        assert_eq!(exit_refund(Wei(10), Fixed::from_int(1), Fixed::from_int(3)), Wei(3));
    }
}
