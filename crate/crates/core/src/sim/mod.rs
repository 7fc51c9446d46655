//! Seeded multi-agent simulation.
//!
//! Agents act once per tick in account-id order, each through signed ledger
//! appends only. Every random choice comes from a per-agent ChaCha20 stream
//! derived from the scenario seed, so a scenario and seed fix the ledger
//! trace and the report bit for bit.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::accounts::{AccountStatus, Role};
use crate::crypto::SimulatedEnvelope;
use crate::fixed::{Fixed, Wei};
use crate::gas::OperationKind;
use crate::ids::{AccountId, SubmissionId, TaskId, Tick};
use crate::ledger::{Ledger, LedgerError, Receipt};
use crate::marketplace::TaskStatus;
use crate::platform::{Event, Op, Payload, Platform, DEFAULT_REGISTRATION_FEE};
use crate::submission::{ContentStore, SubmissionStatus};

mod agent;
pub mod analysis;
pub mod config;
pub mod report;

pub use agent::WorkProduct;
pub use analysis::{co_assignment_probability, selection_probability, Tally};
pub use config::{
    AdversaryParams, AgentSpec, Archetype, Behavior, ConfigError, ScenarioConfig, ScoreRange,
    TaskPlan,
};
pub use report::{
    AgentSummary, Conservation, ConsensusSummary, ExitRecord, GasLine, GasSummary, IdentityLine,
    RunReport, TargetSummary, TaskOutcomes, Termination, TickMetrics, Trajectory,
};

use agent::{act_poster, act_worker, Agent, Roster};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(#[from] ConfigError),
    /// No agent could act for the configured number of ticks. `partial`
    /// holds the run up to that point.
    #[error("deadlock at tick {tick}: {diagnostic}")]
    Deadlock { tick: Tick, diagnostic: String, partial: Box<RunOutput> },
    #[error("ledger failure: {0}")]
    Ledger(LedgerError),
    #[error("scenario has no reciprocators")]
    NoReciprocators,
}

/// A finished run: the report, the ledger with its trace, and the content
/// store holding every envelope.
#[derive(Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub ledger: Ledger,
    pub store: ContentStore,
}

impl core::fmt::Debug for RunOutput {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("RunOutput")
            .field("scenario", &self.report.scenario)
            .field("termination", &self.report.termination)
            .field("entries", &self.report.entries)
            .field("blobs", &self.store.len())
            .finish_non_exhaustive()
    }
}

/// Running tallies fed by receipts.
#[derive(Clone, Debug, Default)]
struct Observer {
    paid_in: Wei,
    paid_out: Wei,
    gas_total: u64,
    gas_by_kind: BTreeMap<OperationKind, (u64, u64)>,
    registrations: BTreeMap<Archetype, (u32, Wei)>,
    exits: Vec<ExitRecord>,
    trajectories: BTreeMap<AccountId, Vec<(Tick, Fixed)>>,
    consensus: ConsensusSummary,
    posted: u32,
    finalized: u32,
    defaulted: u32,
    /// `(submission, round, entry index)` of every assignment.
    assignments: Vec<(SubmissionId, u32, u64)>,
    /// `(reciprocator, evaluator)` to the entry count when the grudge formed.
    grudges: BTreeMap<(AccountId, AccountId), u64>,
    per_tick: Vec<TickMetrics>,
}

pub(crate) struct World {
    ledger: Ledger,
    store: ContentStore,
    cipher: SimulatedEnvelope,
    now: Tick,
    obs: Observer,
    fault: Option<LedgerError>,
    progressed: bool,
}

impl World {
    fn platform(&self) -> &Platform {
        self.ledger.platform()
    }

    fn sealing(&mut self) -> (&Ledger, &mut ContentStore, &SimulatedEnvelope) {
        (&self.ledger, &mut self.store, &self.cipher)
    }

    /// Appends `op` from `agent`. `None` when the platform rejects it.
    fn submit(&mut self, agent: &Agent, op: Op) -> Option<Receipt> {
        let is_tick = matches!(op, Op::Tick);
        let payload = Payload { at: self.now, op };
        let receipt = match self.ledger.append(&payload, agent.id, &agent.key) {
            Ok((_, r)) => r.clone(),
            Err(LedgerError::Rejected(_)) => return None,
            Err(e) => {
                self.fault.get_or_insert(e);
                return None;
            }
        };
        self.observe(agent.archetype, &receipt);
        if !is_tick {
            self.progressed = true;
        }
        Some(receipt)
    }

    fn submit_exit(&mut self, agent: &Agent, reputation: Fixed, average: Fixed) -> bool {
        let Some(receipt) = self.submit(agent, Op::Exit) else { return false };
        for e in &receipt.events {
            if let Event::Exited { account, refunded, retained } = e {
                self.obs.exits.push(ExitRecord {
                    account: *account,
                    archetype: agent.archetype,
                    tick: self.now,
                    reputation,
                    average,
                    deposit: *refunded + *retained,
                    refund: *refunded,
                });
            }
        }
        true
    }

    fn note_grudge(&mut self, reciprocator: AccountId, against: AccountId) {
        let at = self.ledger.entries().len() as u64;
        self.obs.grudges.entry((reciprocator, against)).or_insert(at);
    }

    fn observe(&mut self, archetype: Archetype, receipt: &Receipt) {
        let index = self.ledger.entries().len() as u64 - 1;
        let o = &mut self.obs;
        o.gas_total += receipt.gas;
        let line = o.gas_by_kind.entry(receipt.kind).or_default();
        line.0 += 1;
        line.1 += receipt.gas;
        for e in &receipt.events {
            match e {
                Event::Registered { deposit, .. } => {
                    o.paid_in += *deposit;
                    let r = o.registrations.entry(archetype).or_default();
                    r.0 += 1;
                    r.1 += *deposit;
                }
                Event::AgreementCreated { escrow, .. } => o.paid_in += *escrow,
                Event::AgreementAccepted { deposit, .. } => o.paid_in += *deposit,
                Event::Payout { amount, .. } => o.paid_out += *amount,
                Event::TaskPosted { .. } => o.posted += 1,
                Event::AgreementDefaulted { .. } => o.defaulted += 1,
                Event::EvaluatorsAssigned { submission, round, .. } => {
                    o.consensus.rounds += 1;
                    o.assignments.push((*submission, *round, index));
                }
                Event::ConsensusFailed { .. } => o.consensus.failures += 1,
                Event::ConsensusReached { forced, .. } => {
                    o.consensus.reached += 1;
                    o.consensus.forced += u32::from(*forced);
                }
                Event::ReputationChanged { account, reputation, .. } => {
                    o.trajectories.entry(*account).or_default().push((self.now, *reputation));
                }
                Event::Finalized { .. } => o.finalized += 1,
                _ => {}
            }
        }
    }

    fn sample(&mut self, tick: Tick) {
        let p = self.ledger.platform();
        let stats = p.stats();
        let held = p.held_funds();
        let entries = self.ledger.entries().len() as u64;
        let o = &mut self.obs;
        o.per_tick.push(TickMetrics {
            tick,
            entries,
            gas: o.gas_total,
            active_workers: stats.active_worker_count,
            mean_reputation: stats.avg_worker_reputation,
            tasks_posted: o.posted,
            finalized: o.finalized,
            consensus_failures: o.consensus.failures,
            forced: o.consensus.forced,
            held,
        });
    }
}

/// Expands the agent specs into identities, in declaration order.
fn populate(cfg: &ScenarioConfig) -> (Vec<Agent>, Roster) {
    let all_skills: BTreeSet<String> = cfg.tasks.skills.iter().cloned().collect();
    let fee = cfg.params.registration_fee;
    let mut agents: Vec<Agent> = Vec::new();
    let push = |agents: &mut Vec<Agent>, group: &AgentSpec, owner: Option<usize>, role, works| {
        let index = agents.len();
        let quality = group.quality.unwrap_or(match group.archetype {
            Archetype::ReEntrant => cfg.adversary.low_quality,
            _ => cfg.behavior.quality,
        });
        let skills = match role {
            Role::TaskPoster => BTreeSet::new(),
            Role::Worker => group.skills.clone().unwrap_or_else(|| all_skills.clone()),
        };
        let owner = owner.unwrap_or(index);
        agents.push(Agent::new(cfg.seed, index, group.archetype, owner, role, works, quality, skills));
        index
    };
    for group in &cfg.agents {
        for _ in 0..group.count {
            match group.archetype {
                Archetype::HonestPoster => {
                    push(&mut agents, group, None, Role::TaskPoster, false);
                }
                Archetype::BallotStuffer => {
                    let primary = push(&mut agents, group, None, Role::Worker, true);
                    for _ in 0..cfg.adversary.stuffer_helpers {
                        push(&mut agents, group, Some(primary), Role::Worker, false);
                    }
                }
                Archetype::SybilSpawner => {
                    let n = if fee == Wei::ZERO {
                        cfg.adversary.sybil_cap
                    } else {
                        (cfg.adversary.sybil_budget.0 / fee.0).min(u128::from(cfg.adversary.sybil_cap))
                            as u32
                    };
                    let mut primary = None;
                    for _ in 0..n {
                        let i = push(&mut agents, group, primary, Role::Worker, true);
                        primary.get_or_insert(i);
                    }
                }
                _ => {
                    push(&mut agents, group, None, Role::Worker, true);
                }
            }
        }
    }
    let roster = Roster {
        by_id: agents.iter().map(|a| (a.id, a.index)).collect(),
        kinds: agents.iter().map(|a| (a.archetype, a.owner)).collect(),
        targets: agents
            .iter()
            .filter(|a| a.archetype == Archetype::HonestWorker)
            .take(cfg.adversary.targets as usize)
            .map(|a| a.index)
            .collect(),
    };
    (agents, roster)
}

/// Runs a scenario to completion, to its duration, or to a deadlock.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    let (mut agents, mut roster) = populate(cfg);
    let ledger = Ledger::new(cfg.params.clone()).map_err(ConfigError::from)?;
    let mut world = World {
        ledger,
        store: ContentStore::new(),
        cipher: SimulatedEnvelope::default(),
        now: 0,
        obs: Observer::default(),
        fault: None,
        progressed: false,
    };
    let posters: Vec<usize> = agents
        .iter()
        .filter(|a| a.role == Role::TaskPoster)
        .map(|a| a.index)
        .collect();
    let mut planned = 0u32;
    let mut stalled: Tick = 0;
    let mut termination = Termination::DurationReached;
    let mut ticks = 0;

    for tick in 1..=cfg.duration {
        world.now = tick;
        world.progressed = false;
        ticks = tick;

        if world.platform().has_due_transitions(tick) {
            if let Some(&i) = posters.iter().find(|&&i| agents[i].registered) {
                world.submit(&agents[i], Op::Tick);
            }
        }

        let mut posts: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        for _ in 0..cfg.tasks.per_tick {
            if planned < cfg.tasks.count {
                let poster = posters[planned as usize % posters.len()];
                posts.entry(poster).or_default().push(planned);
                planned += 1;
            }
        }

        let mut order: Vec<usize> = (0..agents.len()).collect();
        order.sort_by_key(|&i| agents[i].id);
        for i in order {
            let agent = &mut agents[i];
            match agent.role {
                Role::TaskPoster => {
                    let mine = posts.get(&i).map_or(&[][..], Vec::as_slice);
                    act_poster(agent, &mut world, cfg, mine);
                }
                Role::Worker => act_worker(agent, &mut world, &roster, cfg),
            }
            roster.by_id.insert(agent.id, i);
            if let Some(e) = world.fault.take() {
                return Err(SimError::Ledger(e));
            }
        }
        world.sample(tick);

        if planned == cfg.tasks.count && all_settled(world.platform()) {
            termination = Termination::Completed;
            break;
        }
        if world.progressed {
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= cfg.behavior.stall_ticks {
                let diagnostic = diagnose(world.platform());
                let report = build_report(cfg, &world, &agents, &roster, Termination::Deadlocked, tick);
                let partial = Box::new(RunOutput { report, ledger: world.ledger, store: world.store });
                return Err(SimError::Deadlock { tick, diagnostic, partial });
            }
        }
    }

    let report = build_report(cfg, &world, &agents, &roster, termination, ticks);
    Ok(RunOutput { report, ledger: world.ledger, store: world.store })
}

fn submission_by_task(p: &Platform) -> BTreeMap<TaskId, SubmissionStatus> {
    p.submissions().iter().map(|s| (s.task, s.status)).collect()
}

/// Every task is evaluated, cancelled, or scored and waiting on its
/// worker's quota.
fn all_settled(p: &Platform) -> bool {
    let subs = submission_by_task(p);
    p.tasks().iter().all(|t| match t.status {
        TaskStatus::Evaluated | TaskStatus::Cancelled => true,
        TaskStatus::Submitted => matches!(
            subs.get(&t.id),
            Some(SubmissionStatus::Scored | SubmissionStatus::Finalized)
        ),
        TaskStatus::Open | TaskStatus::Agreed => false,
    })
}

fn diagnose(p: &Platform) -> String {
    let x = p.params().evaluators_per_submission;
    let waiting: Vec<String> = p
        .submissions()
        .iter()
        .filter(|s| s.status == SubmissionStatus::AwaitingAssignment)
        .map(|s| {
            let eligible = p.eligible_evaluators(s.id).map_or(0, |(e, _)| e.len());
            format!("{} has {eligible} of {x} evaluators", s.id)
        })
        .collect();
    let unclaimed = p
        .tasks()
        .iter()
        .filter(|t| t.status == TaskStatus::Open && t.applicants.is_empty())
        .count();
    let mut msg = format!("no operation succeeded; {unclaimed} open tasks without applicants");
    if !waiting.is_empty() {
        msg.push_str("; ");
        msg.push_str(&waiting.join(", "));
    }
    msg
}

/// Floored mean.
fn mean(values: impl IntoIterator<Item = Fixed>) -> Option<Fixed> {
    let (sum, n) = values
        .into_iter()
        .fold((0i128, 0i128), |(s, n), v| (s + i128::from(v.raw()), n + 1));
    (n > 0).then(|| Fixed::from_raw(sum.div_euclid(n) as i64))
}

fn build_report(
    cfg: &ScenarioConfig,
    world: &World,
    agents: &[Agent],
    roster: &Roster,
    termination: Termination,
    ticks: Tick,
) -> RunReport {
    let p = world.platform();
    let o = &world.obs;

    let gas = GasSummary {
        total: o.gas_total,
        usd: p.params().gas.cost_usd(o.gas_total),
        by_kind: o
            .gas_by_kind
            .iter()
            .map(|(kind, (count, gas))| GasLine {
                kind: *kind,
                count: *count,
                gas: *gas,
                usd: p.params().gas.cost_usd(*gas),
            })
            .collect(),
    };

    let subs = submission_by_task(p);
    let mut tasks = TaskOutcomes { defaulted: o.defaulted, ..TaskOutcomes::default() };
    for t in p.tasks() {
        tasks.posted += 1;
        match t.status {
            TaskStatus::Open => tasks.open += 1,
            TaskStatus::Agreed => tasks.agreed += 1,
            TaskStatus::Submitted if subs.get(&t.id) == Some(&SubmissionStatus::Scored) => {
                tasks.scored_unfinalized += 1
            }
            TaskStatus::Submitted => tasks.submitted += 1,
            TaskStatus::Evaluated => tasks.evaluated += 1,
            TaskStatus::Cancelled => tasks.cancelled += 1,
        }
    }

    // Per-account submission scores and evaluation counts.
    let mut finals: BTreeMap<AccountId, Vec<Fixed>> = BTreeMap::new();
    let mut submitted: BTreeMap<AccountId, u32> = BTreeMap::new();
    let mut evaluated: BTreeMap<AccountId, u32> = BTreeMap::new();
    for s in p.submissions() {
        *submitted.entry(s.worker).or_default() += 1;
        if let Some(out) = &s.outcome {
            finals.entry(s.worker).or_default().push(out.final_score);
        }
        for r in &s.rounds {
            for e in &r.sheet {
                *evaluated.entry(e.evaluator).or_default() += 1;
            }
        }
    }

    let mut summaries = Vec::new();
    for a in agents {
        let mut ids = a.past.clone();
        if a.registered {
            ids.push((a.generation, a.id));
        }
        for (generation, id) in ids {
            let Some(acct) = p.account(&id) else { continue };
            summaries.push(AgentSummary {
                account: id,
                agent: a.index as u32,
                archetype: a.archetype,
                generation,
                role: acct.role,
                status: acct.status,
                reputation: acct.reputation,
                submissions: submitted.get(&id).copied().unwrap_or(0),
                mean_final_score: finals.get(&id).and_then(|v| mean(v.iter().copied())),
                evaluations: evaluated.get(&id).copied().unwrap_or(0),
            });
        }
    }

    let active_rep = |pred: &dyn Fn(&Agent) -> bool| {
        mean(agents.iter().filter(|a| a.registered && pred(a)).filter_map(|a| {
            p.account(&a.id)
                .filter(|acct| acct.status == AccountStatus::Active && acct.role == Role::Worker)
                .map(|acct| acct.reputation)
        }))
    };
    let adversary = active_rep(&|a| {
        a.archetype.is_adversary() && a.works && a.archetype != Archetype::ReEntrant
    });
    let honest = active_rep(&|a| a.archetype == Archetype::HonestWorker);
    let adversary_advantage = adversary.zip(honest).map(|(a, h)| a - h);

    let identities = o
        .registrations
        .iter()
        .map(|(archetype, (n, paid))| IdentityLine {
            archetype: *archetype,
            identities: *n,
            registration_paid: *paid,
        })
        .collect();

    let colluders: BTreeSet<AccountId> = agents
        .iter()
        .filter(|a| a.archetype == Archetype::Colluder)
        .map(|a| a.id)
        .collect();
    let collusion = (colluders.len() >= 2).then(|| {
        let mut t = Tally::default();
        for s in p.submissions() {
            for r in &s.rounds {
                let together = r.pool.selected.iter().filter(|e| colluders.contains(e)).count();
                t.record(co_assignment_probability(&r.pool, &colluders), together >= 2);
            }
        }
        t
    });

    let reciprocators: Vec<AccountId> = agents
        .iter()
        .filter(|a| a.archetype == Archetype::Reciprocator)
        .map(|a| a.id)
        .collect();
    let reciprocity = (!reciprocators.is_empty()).then(|| {
        let mut t = Tally::default();
        for &(sid, round, at) in &o.assignments {
            let s = &p.submissions()[sid.0 as usize];
            let pool = &s.rounds[round as usize - 1].pool;
            for r in &reciprocators {
                let held = o.grudges.get(&(*r, s.worker)).is_some_and(|&since| since <= at);
                if held {
                    t.record(selection_probability(pool, *r), pool.selected.contains(r));
                }
            }
        }
        t
    });

    let targets = (!roster.targets.is_empty()).then(|| {
        let ids: Vec<AccountId> = roster.targets.iter().map(|&i| agents[i].id).collect();
        let scores: Vec<Fixed> = ids.iter().flat_map(|id| finals.get(id).into_iter().flatten()).copied().collect();
        TargetSummary {
            scored_submissions: scores.len() as u32,
            mean_final_score: mean(scores),
            mean_reputation: mean(ids.iter().filter_map(|id| p.account(id)).map(|a| a.reputation))
                .unwrap_or(Fixed::ZERO),
            accounts: ids,
        }
    });

    let trajectories = o
        .trajectories
        .iter()
        .map(|(account, points)| Trajectory {
            account: *account,
            archetype: roster
                .by_id
                .get(account)
                .map_or(Archetype::HonestWorker, |&i| agents[i].archetype),
            points: points.clone(),
        })
        .collect();

    RunReport {
        scenario: cfg.name.clone(),
        seed: cfg.seed,
        termination,
        ticks,
        entries: world.ledger.entries().len() as u64,
        state_root: p.state_root(),
        chain_head: world.ledger.head(),
        gas,
        conservation: Conservation::new(o.paid_in, o.paid_out, p.held_funds(), p.platform_pool()),
        tasks,
        consensus: o.consensus,
        adversary_advantage,
        identities,
        reentries: o.exits.clone(),
        collusion,
        reciprocity,
        targets,
        agents: summaries,
        per_tick: o.per_tick.clone(),
        trajectories,
    }
}

/// A protocol feature that [`ablate`] switches off.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Feature {
    OutlierRemoval,
    SlotSelection,
    EntryFee,
}

impl Feature {
    /// `cfg` with the feature switched on or off. Switching on keeps the
    /// configured setting when it is already on.
    pub fn set(self, cfg: &ScenarioConfig, on: bool) -> ScenarioConfig {
        let mut c = cfg.clone();
        let p = &mut c.params;
        match (self, on) {
            (Feature::OutlierRemoval, true) => p.outlier_k = p.outlier_k.or(Some(Fixed::ONE)),
            (Feature::OutlierRemoval, false) => p.outlier_k = None,
            (Feature::SlotSelection, on) => p.slot_selection = on,
            (Feature::EntryFee, true) if p.registration_fee == Wei::ZERO => {
                p.registration_fee = DEFAULT_REGISTRATION_FEE
            }
            (Feature::EntryFee, true) => {}
            (Feature::EntryFee, false) => p.registration_fee = Wei::ZERO,
        }
        c
    }
}

/// Paired runs with one feature on and off, same seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub feature: Feature,
    pub with: RunReport,
    pub without: RunReport,
}

pub fn ablate(cfg: &ScenarioConfig, feature: Feature) -> Result<Ablation, SimError> {
    let with = run(&feature.set(cfg, true))?.report;
    let without = run(&feature.set(cfg, false))?.report;
    Ok(Ablation { feature, with, without })
}

/// How often reciprocators were drawn to evaluate someone who had scored
/// them low, against the probability the draw gave them.
pub fn reciprocity_exposure(cfg: &ScenarioConfig) -> Result<Tally, SimError> {
    if cfg.count(Archetype::Reciprocator) == 0 {
        return Err(SimError::NoReciprocators);
    }
    Ok(run(cfg)?.report.reciprocity.unwrap_or_default())
}
