use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::fixed::{Fixed, Wei};
use crate::ids::Tick;
use crate::platform::{ParamsError, ProtocolParams};
use crate::reputation::{MAX_SCORE, MIN_SCORE};

/// A complete, reproducible scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    /// Upper bound on simulated ticks.
    pub duration: Tick,
    pub params: ProtocolParams,
    pub agents: Vec<AgentSpec>,
    pub tasks: TaskPlan,
    pub behavior: Behavior,
    pub adversary: AdversaryParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "scenario".into(),
            seed: 0,
            duration: 2_000,
            params: ProtocolParams::default(),
            agents: vec![
                AgentSpec::new(Archetype::HonestWorker, 20),
                AgentSpec::new(Archetype::HonestPoster, 4),
            ],
            tasks: TaskPlan::default(),
            behavior: Behavior::default(),
            adversary: AdversaryParams::default(),
        }
    }
}

/// `count` agents of one archetype.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub archetype: Archetype,
    pub count: u32,
    /// Range of the true completeness and quality of this agent's work.
    #[serde(default)]
    pub quality: Option<ScoreRange>,
    /// Skills; all task skills when unset.
    #[serde(default)]
    pub skills: Option<BTreeSet<String>>,
}

impl AgentSpec {
    pub fn new(archetype: Archetype, count: u32) -> Self {
        AgentSpec { archetype, count, quality: None, skills: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Archetype {
    HonestWorker,
    HonestPoster,
    /// Scores fellow colluders 100 and targets 1.
    Colluder,
    /// Scores targets 1.
    BadMouther,
    /// Runs helper identities that score its submissions 100.
    BallotStuffer,
    /// Registers as many identities as its budget allows; they score each
    /// other 100.
    SybilSpawner,
    /// Low-quality worker that exits and re-registers under a fresh key
    /// once its reputation falls below the trigger.
    ReEntrant,
    /// Scores 1 for anyone who scored its own work low.
    Reciprocator,
}

impl Archetype {
    pub fn label(self) -> &'static str {
        match self {
            Archetype::HonestWorker => "honest-worker",
            Archetype::HonestPoster => "honest-poster",
            Archetype::Colluder => "colluder",
            Archetype::BadMouther => "bad-mouther",
            Archetype::BallotStuffer => "ballot-stuffer",
            Archetype::SybilSpawner => "sybil-spawner",
            Archetype::ReEntrant => "re-entrant",
            Archetype::Reciprocator => "reciprocator",
        }
    }

    pub fn is_adversary(self) -> bool {
        !matches!(self, Archetype::HonestWorker | Archetype::HonestPoster)
    }

    pub fn is_poster(self) -> bool {
        self == Archetype::HonestPoster
    }
}

/// Inclusive integer score range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRange {
    pub min: u8,
    pub max: u8,
}

impl ScoreRange {
    pub const fn new(min: u8, max: u8) -> Self {
        ScoreRange { min, max }
    }

    fn valid(&self) -> bool {
        MIN_SCORE <= self.min && self.min <= self.max && self.max <= MAX_SCORE
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskPlan {
    pub count: u32,
    /// Tasks posted per tick across all posters.
    pub per_tick: u32,
    pub reward: Wei,
    /// Rewards vary uniformly by up to this many percent either way.
    pub reward_spread_percent: u32,
    /// Task skill universe; each task requires one of these. Empty means no
    /// skill requirements.
    pub skills: Vec<String>,
    /// The first tasks are low-paying starters with this reward.
    pub starter_count: u32,
    pub starter_reward: Wei,
    /// Task weights `(w_c, w_q)`.
    pub w_c: Fixed,
    pub w_q: Fixed,
}

impl Default for TaskPlan {
    fn default() -> Self {
        TaskPlan {
            count: 50,
            per_tick: 2,
            reward: Wei(10_000_000_000_000_000),
            reward_spread_percent: 20,
            skills: vec!["coding".into()],
            starter_count: 0,
            starter_reward: Wei(1_000_000_000_000_000),
            w_c: Fixed::from_raw(5_000),
            w_q: Fixed::from_raw(5_000),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Behavior {
    /// Honest scores are the true values plus one uniform offset in
    /// `[-noise, noise]`.
    pub noise: u8,
    /// Acceptance fee as a percentage of the reward.
    pub acceptance_fee_percent: u32,
    /// Ticks between agreement creation and the acceptance deadline.
    pub acceptance_window: Tick,
    /// Ticks between the acceptance deadline and the due date.
    pub due_window: Tick,
    /// Default honest work quality.
    pub quality: ScoreRange,
    /// Ticks without a successful operation before a run is declared
    /// deadlocked.
    pub stall_ticks: Tick,
    /// Chance, in percent, that a worker lets an offer expire or misses the
    /// due date of an accepted agreement. Drawn once per agreement and step.
    pub lapse_percent: u32,
}

impl Default for Behavior {
    fn default() -> Self {
        Behavior {
            noise: 5,
            acceptance_fee_percent: 10,
            acceptance_window: 2,
            due_window: 5,
            quality: ScoreRange::new(40, 95),
            stall_ticks: 25,
            lapse_percent: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversaryParams {
    /// Honest workers singled out by bad-mouthers and colluders, taken in
    /// declaration order.
    pub targets: u32,
    /// Score adversaries give to allies.
    pub inflate_to: u8,
    /// Score adversaries give to targets.
    pub deflate_to: u8,
    /// Helper identities per ballot-stuffer.
    pub stuffer_helpers: u32,
    /// Currency each sybil-spawner spends on registrations.
    pub sybil_budget: Wei,
    /// Identities a spawner creates when registration is free.
    pub sybil_cap: u32,
    /// Re-entrants leave when reputation drops below this fraction of the
    /// platform average.
    pub reentry_trigger: Fixed,
    pub max_reentries: u32,
    /// Reciprocators hold a grudge against scores below this.
    pub grudge_below: u8,
    /// Work quality of re-entrants and reciprocators.
    pub low_quality: ScoreRange,
}

impl Default for AdversaryParams {
    fn default() -> Self {
        AdversaryParams {
            targets: 0,
            inflate_to: 100,
            deflate_to: 1,
            stuffer_helpers: 2,
            sybil_budget: Wei(5 * 11_800_000_000_000_000),
            sybil_cap: 20,
            reentry_trigger: Fixed::ONE,
            max_reentries: 3,
            grudge_below: 50,
            low_quality: ScoreRange::new(20, 50),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("scenario needs at least one worker and one poster")]
    MissingRoles,
    #[error("score range must lie within [1, 100] with min <= max")]
    BadRange,
    #[error("task plan needs a positive reward, count and rate")]
    BadTaskPlan,
    #[error("acceptance and due windows must be at least 1 tick")]
    BadWindows,
    #[error("adversary scores must lie within [1, 100]")]
    BadAdversaryScores,
    #[error("stall detection needs at least 1 tick")]
    BadStall,
    #[error("lapse chance must be a percentage")]
    BadLapse,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        let posters = self.agents.iter().any(|a| a.archetype.is_poster() && a.count > 0);
        let workers = self.agents.iter().any(|a| !a.archetype.is_poster() && a.count > 0);
        if !posters || !workers {
            return Err(ConfigError::MissingRoles);
        }
        let ranges = self
            .agents
            .iter()
            .filter_map(|a| a.quality)
            .chain([self.behavior.quality, self.adversary.low_quality]);
        if ranges.into_iter().any(|r| !r.valid()) {
            return Err(ConfigError::BadRange);
        }
        let t = &self.tasks;
        if t.reward == Wei::ZERO
            || t.per_tick == 0
            || (t.starter_count > 0 && t.starter_reward == Wei::ZERO)
        {
            return Err(ConfigError::BadTaskPlan);
        }
        crate::reputation::check_weights(t.w_c, t.w_q).map_err(|_| ConfigError::BadTaskPlan)?;
        if self.behavior.acceptance_window == 0 || self.behavior.due_window == 0 {
            return Err(ConfigError::BadWindows);
        }
        let score_ok = |s: u8| (MIN_SCORE..=MAX_SCORE).contains(&s);
        let a = &self.adversary;
        if !score_ok(a.inflate_to) || !score_ok(a.deflate_to) || !score_ok(a.grudge_below) {
            return Err(ConfigError::BadAdversaryScores);
        }
        if self.behavior.stall_ticks == 0 {
            return Err(ConfigError::BadStall);
        }
        if self.behavior.lapse_percent > 100 {
            return Err(ConfigError::BadLapse);
        }
        Ok(())
    }

    pub fn count(&self, archetype: Archetype) -> u32 {
        self.agents
            .iter()
            .filter(|a| a.archetype == archetype)
            .map(|a| a.count)
            .sum()
    }
}
