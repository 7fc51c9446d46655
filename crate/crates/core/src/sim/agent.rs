use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::accounts::Role;
use crate::agreement::AgreementState;
use crate::codec;
use crate::crypto::{Ed25519, PublicKey, SecretKey, SignatureScheme};
use crate::evaluation::SelectionRng;
use crate::fixed::{Fixed, Wei, SCALE};
use crate::hash::Hasher;
use crate::ids::{AccountId, AgreementId, SubmissionId, TaskId};
use crate::marketplace::{SearchFilter, TaskStatus};
use crate::platform::{Op, Platform};
use crate::submission::{fetch_for_evaluator, reveal, SubmissionStatus};

use super::config::{Archetype, ScenarioConfig, ScoreRange};
use super::World;

/// Plaintext of a submission. Its true scores travel inside it so that
/// evaluators can score what they decrypt.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkProduct {
    pub task: TaskId,
    pub worker: AccountId,
    pub completeness: u8,
    pub quality: u8,
    pub nonce: u64,
}

/// One simulated identity and its private state.
#[derive(Clone, Debug)]
pub(crate) struct Agent {
    pub index: usize,
    pub archetype: Archetype,
    /// Agent controlling this identity; itself for primaries.
    pub owner: usize,
    pub role: Role,
    /// Takes tasks. Ballot-stuffer helpers only evaluate.
    pub works: bool,
    pub generation: u32,
    pub key: SecretKey,
    pub public: PublicKey,
    pub id: AccountId,
    pub rng: SelectionRng,
    pub quality: ScoreRange,
    pub skills: BTreeSet<String>,
    pub registered: bool,
    /// The current identity has exited.
    pub exited: bool,
    pub reentries: u32,
    pub past: Vec<(u32, AccountId)>,
    pub work: BTreeMap<AgreementId, Vec<u8>>,
    pub grudges: BTreeSet<AccountId>,
    pub seen: BTreeSet<SubmissionId>,
    pub evaluations: u32,
    /// Lapse decisions per agreement and step (`false` accept, `true` commit).
    pub lapses: BTreeMap<(AgreementId, bool), bool>,
}

impl Agent {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        seed: u64,
        index: usize,
        archetype: Archetype,
        owner: usize,
        role: Role,
        works: bool,
        quality: ScoreRange,
        skills: BTreeSet<String>,
    ) -> Agent {
        let rng_seed = Hasher::new()
            .part(b"workerrep/agent")
            .part(&seed.to_be_bytes())
            .part(&(index as u64).to_be_bytes())
            .finish();
        let (key, public, id) = identity(seed, index, 0);
        Agent {
            index,
            archetype,
            owner,
            role,
            works,
            generation: 0,
            key,
            public,
            id,
            rng: SelectionRng::new(&rng_seed),
            quality,
            skills,
            registered: false,
            exited: false,
            reentries: 0,
            past: Vec::new(),
            work: BTreeMap::new(),
            grudges: BTreeSet::new(),
            seen: BTreeSet::new(),
            evaluations: 0,
            lapses: BTreeMap::new(),
        }
    }

    pub fn is_primary(&self) -> bool {
        self.owner == self.index
    }

    fn draw(&mut self, r: ScoreRange) -> u8 {
        r.min + self.rng.below(usize::from(r.max - r.min) + 1) as u8
    }

    /// Whether this agent skips `step` of agreement `aid`. Draws nothing
    /// when lapses are disabled.
    fn lapses_on(&mut self, aid: AgreementId, step: bool, cfg: &ScenarioConfig) -> bool {
        let pct = cfg.behavior.lapse_percent;
        if pct == 0 {
            return false;
        }
        if let Some(&d) = self.lapses.get(&(aid, step)) {
            return d;
        }
        let d = (self.rng.below(100) as u32) < pct;
        self.lapses.insert((aid, step), d);
        d
    }

    fn renew(&mut self, seed: u64) {
        self.past.push((self.generation, self.id));
        self.generation += 1;
        let (key, public, id) = identity(seed, self.index, self.generation);
        self.key = key;
        self.public = public;
        self.id = id;
        self.registered = false;
        self.exited = false;
        self.work.clear();
        self.seen.clear();
    }
}

fn identity(seed: u64, index: usize, generation: u32) -> (SecretKey, PublicKey, AccountId) {
    let mut material = Vec::with_capacity(20);
    material.extend_from_slice(&seed.to_be_bytes());
    material.extend_from_slice(&(index as u64).to_be_bytes());
    material.extend_from_slice(&generation.to_be_bytes());
    let key = SecretKey::derive(&material);
    let public = Ed25519.public_key(&key);
    (key, public, AccountId::of(&public))
}

/// What every agent may know about every other: archetype and controller
/// by account, plus the targets of bad-mouthing.
#[derive(Clone, Debug, Default)]
pub(crate) struct Roster {
    pub by_id: BTreeMap<AccountId, usize>,
    pub kinds: Vec<(Archetype, usize)>,
    pub targets: BTreeSet<usize>,
}

impl Roster {
    fn agent_of(&self, id: &AccountId) -> Option<(usize, Archetype, usize)> {
        self.by_id.get(id).map(|&i| (i, self.kinds[i].0, self.kinds[i].1))
    }
}

fn clamp_score(v: i32) -> u8 {
    v.clamp(1, 100) as u8
}

/// Scores an evaluator gives for `product`.
fn scores(agent: &mut Agent, roster: &Roster, cfg: &ScenarioConfig, product: &WorkProduct) -> (u8, u8) {
    let adv = &cfg.adversary;
    let inflate = (adv.inflate_to, adv.inflate_to);
    let deflate = (adv.deflate_to, adv.deflate_to);
    let worker = roster.agent_of(&product.worker);
    let is_target = worker.is_some_and(|(i, _, _)| roster.targets.contains(&i));
    let bias = match agent.archetype {
        Archetype::Colluder => match worker {
            Some((_, Archetype::Colluder, _)) => Some(inflate),
            _ if is_target => Some(deflate),
            _ => None,
        },
        Archetype::BadMouther if is_target => Some(deflate),
        Archetype::BallotStuffer if !agent.is_primary() => {
            worker.filter(|w| w.0 == agent.owner).map(|_| inflate)
        }
        Archetype::SybilSpawner => worker
            .filter(|w| w.1 == Archetype::SybilSpawner && w.2 == agent.owner)
            .map(|_| inflate),
        Archetype::Reciprocator if agent.grudges.contains(&product.worker) => Some(deflate),
        _ => None,
    };
    if let Some(b) = bias {
        return b;
    }
    let w = i32::from(cfg.behavior.noise);
    let offset = agent.rng.below((2 * w + 1) as usize) as i32 - w;
    (
        clamp_score(i32::from(product.completeness) + offset),
        clamp_score(i32::from(product.quality) + offset),
    )
}

fn is_busy(p: &Platform, worker: AccountId) -> bool {
    p.agreements().iter().any(|a| {
        a.worker == worker
            && (a.state == AgreementState::Created
                || (a.state == AgreementState::Accepted && a.submission.is_none()))
    })
}

fn register(agent: &mut Agent, world: &mut World, cfg: &ScenarioConfig) {
    let fee = cfg.params.registration_fee;
    let op = Op::Register {
        role: agent.role,
        public_key: agent.public,
        profile_ref: Hasher::new().part(b"profile").part(&agent.id.0 .0).finish(),
        skills: agent.skills.clone(),
        deposit: fee,
    };
    if world.submit(agent, op).is_some() {
        agent.registered = true;
    }
}

/// One tick of a worker identity.
pub(crate) fn act_worker(agent: &mut Agent, world: &mut World, roster: &Roster, cfg: &ScenarioConfig) {
    if agent.exited {
        if agent.archetype == Archetype::ReEntrant && agent.reentries < cfg.adversary.max_reentries {
            agent.reentries += 1;
            agent.renew(cfg.seed);
        } else {
            return;
        }
    }
    if !agent.registered {
        register(agent, world, cfg);
        if !agent.registered {
            return;
        }
    }
    let me = agent.id;

    if !world.platform().volunteers().contains(&me) && world.platform().clears_volunteer_threshold(me) {
        world.submit(agent, Op::BecomeEvaluator);
    }

    evaluate(agent, world, roster, cfg);

    if agent.archetype == Archetype::Reciprocator {
        collect_grudges(agent, world, cfg);
    }

    // Own submissions: request evaluators, then publish envelopes.
    let own: Vec<(SubmissionId, SubmissionStatus, bool, AgreementId)> = world
        .platform()
        .submissions()
        .iter()
        .filter(|s| s.worker == me)
        .map(|s| (s.id, s.status, s.current().is_some_and(|r| r.revealed), s.agreement))
        .collect();
    for (sid, status, revealed, agreement) in own {
        match status {
            SubmissionStatus::AwaitingAssignment => {
                world.submit(agent, Op::AssignEvaluators { submission: sid });
            }
            SubmissionStatus::Evaluating if !revealed => {
                let Some(plain) = agent.work.get(&agreement) else { continue };
                let (ledger, store, cipher) = world.sealing();
                if let Ok(refs) = reveal(ledger.platform(), store, cipher, &agent.key, sid, plain) {
                    world.submit(agent, Op::Reveal { submission: sid, refs });
                }
            }
            _ => {}
        }
    }

    // Accepted agreements: do the work and commit to it.
    let accepted: Vec<(AgreementId, TaskId)> = world
        .platform()
        .agreements()
        .iter()
        .filter(|a| a.worker == me && a.state == AgreementState::Accepted && a.submission.is_none())
        .map(|a| (a.id, a.task))
        .collect();
    for (aid, task) in accepted {
        if agent.lapses_on(aid, true, cfg) {
            continue;
        }
        let product = WorkProduct {
            task,
            worker: me,
            completeness: agent.draw(agent.quality),
            quality: agent.draw(agent.quality),
            nonce: agent.rng.below(usize::MAX) as u64,
        };
        let plain = codec::encode(&product).expect("work product encodes");
        let commitment = crate::hash::keccak256(&plain);
        agent.work.insert(aid, plain);
        world.submit(agent, Op::Commit { agreement: aid, commitment });
    }

    // Offers: accept before the deadline.
    let now = world.now;
    let offers: Vec<(AgreementId, Wei)> = world
        .platform()
        .agreements()
        .iter()
        .filter(|a| a.worker == me && a.state == AgreementState::Created && now <= a.acceptance_deadline)
        .map(|a| (a.id, a.acceptance_fee))
        .collect();
    for (aid, fee) in offers {
        if agent.lapses_on(aid, false, cfg) {
            continue;
        }
        world.submit(agent, Op::Accept { agreement: aid, deposit: fee });
    }

    let leaving = agent.archetype == Archetype::ReEntrant && wants_out(agent, world.platform(), cfg);
    if leaving {
        let p = world.platform();
        let reputation = p.account(&me).map_or(Fixed::ZERO, |a| a.reputation);
        let average = p.stats().avg_worker_reputation;
        if world.submit_exit(agent, reputation, average) {
            agent.exited = true;
        }
        return;
    }

    if agent.works {
        apply_for_work(agent, world);
    }
}

/// Below the trigger fraction of the average after at least one finalized
/// submission under this identity.
fn wants_out(agent: &Agent, p: &Platform, cfg: &ScenarioConfig) -> bool {
    let Some(acct) = p.account(&agent.id) else { return false };
    let worked = p
        .submissions()
        .iter()
        .any(|s| s.worker == agent.id && s.status == SubmissionStatus::Finalized);
    let avg = i128::from(p.stats().avg_worker_reputation.raw());
    let bar = avg * i128::from(cfg.adversary.reentry_trigger.raw()) / i128::from(SCALE);
    worked && i128::from(acct.reputation.raw()) < bar
}

fn apply_for_work(agent: &mut Agent, world: &mut World) {
    let me = agent.id;
    let p = world.platform();
    if is_busy(p, me) {
        return;
    }
    let pending = p
        .tasks()
        .iter()
        .any(|t| t.status == TaskStatus::Open && t.applicants.contains(&me));
    if pending {
        return;
    }
    let filter = SearchFilter {
        skills: Some(agent.skills.clone()),
        min_reward: None,
        status: Some(TaskStatus::Open),
    };
    let open: Vec<TaskId> = p
        .search(&filter)
        .into_iter()
        .filter(|t| t.poster != me)
        .map(|t| t.id)
        .collect();
    if open.is_empty() {
        return;
    }
    let task = open[agent.rng.below(open.len())];
    world.submit(agent, Op::Apply { task });
}

fn evaluate(agent: &mut Agent, world: &mut World, roster: &Roster, cfg: &ScenarioConfig) {
    let me = agent.id;
    let todo: Vec<SubmissionId> = world
        .platform()
        .submissions()
        .iter()
        .filter(|s| s.is_assigned(me) && s.current().is_some_and(|r| r.revealed) && !s.has_scored(me))
        .map(|s| s.id)
        .collect();
    for sid in todo {
        let (ledger, store, cipher) = world.sealing();
        let Ok(plain) = fetch_for_evaluator(ledger.platform(), store, cipher, me, &agent.key, sid)
        else {
            continue;
        };
        let Ok(product) = codec::decode::<WorkProduct>(&plain) else { continue };
        let (completeness, quality) = scores(agent, roster, cfg, &product);
        let review_ref = Hasher::new()
            .part(b"review")
            .part(&sid.0.to_be_bytes())
            .part(&me.0 .0)
            .part(&[completeness, quality])
            .finish();
        let op = Op::SubmitEvaluation { submission: sid, completeness, quality, review_ref };
        if world.submit(agent, op).is_some() {
            agent.evaluations += 1;
        }
    }
}

fn collect_grudges(agent: &mut Agent, world: &mut World, cfg: &ScenarioConfig) {
    let me = agent.id;
    let below = cfg.adversary.grudge_below;
    let mut fresh = Vec::new();
    for s in world.platform().submissions() {
        if s.worker != me || s.outcome.is_none() || agent.seen.contains(&s.id) {
            continue;
        }
        agent.seen.insert(s.id);
        let Some(round) = s.current() else { continue };
        for e in &round.sheet {
            if (e.completeness < below || e.quality < below) && agent.grudges.insert(e.evaluator) {
                fresh.push(e.evaluator);
            }
        }
    }
    for against in fresh {
        world.note_grudge(me, against);
    }
}

/// One tick of a poster: register, post its share of this tick's tasks,
/// then hire for open tasks with applicants.
pub(crate) fn act_poster(agent: &mut Agent, world: &mut World, cfg: &ScenarioConfig, posts: &[u32]) {
    if !agent.registered {
        register(agent, world, cfg);
        if !agent.registered {
            return;
        }
    }
    let me = agent.id;
    let plan = &cfg.tasks;
    for &k in posts {
        let reward = if k < plan.starter_count {
            plan.starter_reward
        } else {
            let s = u128::from(plan.reward_spread_percent.min(100));
            let pct = 100 - s + agent.rng.below((2 * s + 1) as usize) as u128;
            plan.reward.mul_div_floor(pct, 100).max(Wei(1))
        };
        let skills: BTreeSet<String> = if plan.skills.is_empty() {
            BTreeSet::new()
        } else {
            [plan.skills[agent.rng.below(plan.skills.len())].clone()].into_iter().collect()
        };
        let title = format!("task {k}");
        let metadata_ref = crate::hash::keccak256(title.as_bytes());
        let op = Op::PostTask { title, skills, reward, metadata_ref, w_c: plan.w_c, w_q: plan.w_q };
        world.submit(agent, op);
    }

    let open: Vec<TaskId> = world
        .platform()
        .tasks()
        .iter()
        .filter(|t| t.poster == me && t.status == TaskStatus::Open && !t.applicants.is_empty())
        .map(|t| t.id)
        .collect();
    for tid in open {
        let p = world.platform();
        let task = p.task(tid).expect("listed above");
        let candidates: Vec<AccountId> = task
            .applicants
            .iter()
            .copied()
            .filter(|w| p.account(w).is_some_and(|a| a.is_active_worker()) && !is_busy(p, *w))
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let worker = candidates[agent.rng.below(candidates.len())];
        let escrow = task.reward;
        let fee = escrow.mul_div_floor(u128::from(cfg.behavior.acceptance_fee_percent), 100);
        let deadline = world.now + cfg.behavior.acceptance_window;
        let op = Op::CreateAgreement {
            task: tid,
            worker,
            escrow,
            acceptance_fee: fee,
            acceptance_deadline: deadline,
            due_date: deadline + cfg.behavior.due_window,
        };
        world.submit(agent, op);
    }
}

