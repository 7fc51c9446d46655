use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::accounts::{AccountStatus, Role};
use crate::fixed::{Fixed, Wei};
use crate::gas::OperationKind;
use crate::hash::Digest;
use crate::ids::{AccountId, Tick};

use super::analysis::Tally;
use super::config::Archetype;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Every task was posted and reached a terminal or scored state.
    Completed,
    DurationReached,
    /// Stopped early because no agent could act.
    Deadlocked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub termination: Termination,
    pub ticks: Tick,
    pub entries: u64,
    pub state_root: Digest,
    pub chain_head: Digest,
    pub gas: GasSummary,
    pub conservation: Conservation,
    pub tasks: TaskOutcomes,
    pub consensus: ConsensusSummary,
    /// Mean adversary reputation minus mean honest worker reputation; unset
    /// without adversaries.
    pub adversary_advantage: Option<Fixed>,
    pub identities: Vec<IdentityLine>,
    pub reentries: Vec<ExitRecord>,
    /// At least two colluders drawn for one round.
    pub collusion: Option<Tally>,
    /// A reciprocator drawn to evaluate someone who scored it low.
    pub reciprocity: Option<Tally>,
    pub targets: Option<TargetSummary>,
    pub agents: Vec<AgentSummary>,
    pub per_tick: Vec<TickMetrics>,
    pub trajectories: Vec<Trajectory>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasSummary {
    pub total: u64,
    pub usd: f64,
    pub by_kind: Vec<GasLine>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasLine {
    pub kind: OperationKind,
    pub count: u64,
    pub gas: u64,
    pub usd: f64,
}

/// Currency in versus currency out or still held.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conservation {
    /// Registration deposits, escrows and acceptance deposits.
    pub paid_in: Wei,
    /// Refunds, rewards and poster remainders.
    pub paid_out: Wei,
    pub held: Wei,
    pub pool: Wei,
    /// `paid_in - paid_out - held - pool`.
    pub residual: i128,
}

impl Conservation {
    pub fn new(paid_in: Wei, paid_out: Wei, held: Wei, pool: Wei) -> Self {
        let residual = paid_in.0 as i128 - paid_out.0 as i128 - held.0 as i128 - pool.0 as i128;
        Conservation { paid_in, paid_out, held, pool, residual }
    }

    pub fn is_balanced(&self) -> bool {
        self.residual == 0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskOutcomes {
    pub posted: u32,
    pub open: u32,
    pub agreed: u32,
    pub submitted: u32,
    /// Scored but the worker still owes evaluations.
    pub scored_unfinalized: u32,
    pub evaluated: u32,
    pub cancelled: u32,
    pub defaulted: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusSummary {
    /// Assignment rounds started.
    pub rounds: u32,
    pub failures: u32,
    pub reached: u32,
    pub forced: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityLine {
    pub archetype: Archetype,
    pub identities: u32,
    pub registration_paid: Wei,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub account: AccountId,
    pub archetype: Archetype,
    pub tick: Tick,
    pub reputation: Fixed,
    pub average: Fixed,
    pub deposit: Wei,
    pub refund: Wei,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub accounts: Vec<AccountId>,
    pub scored_submissions: u32,
    pub mean_final_score: Option<Fixed>,
    pub mean_reputation: Fixed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub account: AccountId,
    pub agent: u32,
    pub archetype: Archetype,
    pub generation: u32,
    pub role: Role,
    pub status: AccountStatus,
    pub reputation: Fixed,
    pub submissions: u32,
    pub mean_final_score: Option<Fixed>,
    pub evaluations: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickMetrics {
    pub tick: Tick,
    pub entries: u64,
    pub gas: u64,
    pub active_workers: u32,
    pub mean_reputation: Fixed,
    pub tasks_posted: u32,
    pub finalized: u32,
    pub consensus_failures: u32,
    pub forced: u32,
    pub held: Wei,
}

/// Reputation after every change, as `(tick, reputation)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub account: AccountId,
    pub archetype: Archetype,
    pub points: Vec<(Tick, Fixed)>,
}
