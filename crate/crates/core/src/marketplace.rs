//! Task posting, search and applications.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::accounts::Role;
use crate::error::ProtocolError;
use crate::fixed::{Fixed, Wei};
use crate::gas::OperationKind;
use crate::hash::Digest;
use crate::ids::{AccountId, TaskId};
use crate::platform::{Event, Platform};
use crate::reputation::check_weights;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskStatus {
    Open,
    Agreed,
    Submitted,
    Evaluated,
    Cancelled,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub poster: AccountId,
    pub title: String,
    pub skills_required: BTreeSet<String>,
    pub reward: Wei,
    pub metadata_ref: Digest,
    pub w_c: Fixed,
    pub w_q: Fixed,
    pub status: TaskStatus,
    pub applicants: BTreeSet<AccountId>,
}

/// Search predicates; unset fields match everything.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchFilter {
    /// Matches tasks whose required skills all lie in this set.
    pub skills: Option<BTreeSet<String>>,
    pub min_reward: Option<Wei>,
    pub status: Option<TaskStatus>,
}

impl SearchFilter {
    pub fn matches(&self, task: &Task) -> bool {
        self.skills.as_ref().is_none_or(|s| task.skills_required.is_subset(s))
            && self.min_reward.is_none_or(|m| task.reward >= m)
            && self.status.is_none_or(|s| task.status == s)
    }
}

impl Platform {
    /// Tasks matching every predicate, by id. Pure read.
    pub fn search(&self, filter: &SearchFilter) -> Vec<&Task> {
        self.tasks.iter().filter(|t| filter.matches(t)).collect()
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn post_task(
        &mut self,
        sender: AccountId,
        title: &str,
        skills: &BTreeSet<String>,
        reward: Wei,
        metadata_ref: Digest,
        w_c: Fixed,
        w_q: Fixed,
        events: &mut Vec<Event>,
    ) -> Result<OperationKind, ProtocolError> {
        if self.accounts[&sender].role != Role::TaskPoster {
            return Err(ProtocolError::NotATaskPoster);
        }
        check_weights(w_c, w_q).map_err(|_| ProtocolError::BadWeights)?;
        if reward == Wei::ZERO {
            return Err(ProtocolError::NonPositiveReward);
        }
        let id = TaskId(self.tasks.len() as u64);
        self.tasks.push(Task {
            id,
            poster: sender,
            title: title.into(),
            skills_required: skills.clone(),
            reward,
            metadata_ref,
            w_c,
            w_q,
            status: TaskStatus::Open,
            applicants: BTreeSet::new(),
        });
        events.push(Event::TaskPosted { task: id, poster: sender, reward });
        Ok(OperationKind::PostTask)
    }

    pub(crate) fn cancel_task(
        &mut self,
        sender: AccountId,
        task: TaskId,
        events: &mut Vec<Event>,
    ) -> Result<OperationKind, ProtocolError> {
        let t = self.task(task).ok_or(ProtocolError::UnknownTask(task))?;
        if t.poster != sender {
            return Err(ProtocolError::NotThePoster);
        }
        if t.status != TaskStatus::Open {
            return Err(ProtocolError::TaskNotOpen);
        }
        self.tasks[task.0 as usize].status = TaskStatus::Cancelled;
        events.push(Event::TaskCancelled { task });
        Ok(OperationKind::CancelTask)
    }

    pub(crate) fn apply_to_task(
        &mut self,
        sender: AccountId,
        task: TaskId,
        events: &mut Vec<Event>,
    ) -> Result<OperationKind, ProtocolError> {
        if !self.accounts[&sender].is_active_worker() {
            return Err(ProtocolError::UnknownWorker);
        }
        let t = self.task(task).ok_or(ProtocolError::UnknownTask(task))?;
        if t.status != TaskStatus::Open {
            return Err(ProtocolError::TaskNotOpen);
        }
        if self.tasks[task.0 as usize].applicants.insert(sender) {
            events.push(Event::Applied { task, worker: sender });
        }
        Ok(OperationKind::Apply)
    }
}
