#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use workerrep_core::crypto::{Ed25519, PublicKey, SecretKey, SignatureScheme, SimulatedEnvelope};
use workerrep_core::ledger::LedgerError;
use workerrep_core::platform::DEFAULT_REGISTRATION_FEE;
use workerrep_core::submission;
use workerrep_core::accounts::Role;
use workerrep_core::{
    keccak256, AccountId, AgreementId, Digest, Event, Fixed, Ledger, Op, Payload, ProtocolParams,
    Receipt, SubmissionId, TaskId, Tick, Wei,
};

pub const ETHER: u128 = 1_000_000_000_000_000_000;

#[derive(Clone, Debug)]
pub struct Actor {
    pub key: SecretKey,
    pub public: PublicKey,
    pub id: AccountId,
}

pub fn actor(name: &str) -> Actor {
    let key = SecretKey::derive(name.as_bytes());
    let public = Ed25519.public_key(&key);
    Actor { key, public, id: AccountId::of(&public) }
}

pub fn skills(list: &[&str]) -> BTreeSet<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// A ledger plus the off-chain pieces needed to drive it by hand.
pub struct Harness {
    pub ledger: Ledger,
    pub store: submission::ContentStore,
    pub cipher: SimulatedEnvelope,
    pub now: Tick,
    /// State root after each appended entry.
    pub roots: Vec<Digest>,
    keys: BTreeMap<AccountId, SecretKey>,
}

/// One contracted task, up to its commitment.
#[derive(Clone, Debug)]
pub struct Contract {
    pub task: TaskId,
    pub agreement: AgreementId,
    pub submission: SubmissionId,
    pub plaintext: Vec<u8>,
}

impl Harness {
    pub fn new(params: ProtocolParams) -> Self {
        Harness {
            ledger: Ledger::new(params).expect("valid params"),
            store: submission::ContentStore::new(),
            cipher: SimulatedEnvelope::default(),
            now: 0,
            roots: Vec::new(),
            keys: BTreeMap::new(),
        }
    }

    pub fn platform(&self) -> &workerrep_core::Platform {
        self.ledger.platform()
    }

    pub fn try_send(&mut self, who: &Actor, op: Op) -> Result<Receipt, LedgerError> {
        let payload = Payload { at: self.now, op };
        let receipt = self.ledger.append(&payload, who.id, &who.key).map(|(_, r)| r.clone())?;
        self.roots.push(self.ledger.platform().state_root());
        Ok(receipt)
    }

    pub fn send(&mut self, who: &Actor, op: Op) -> Receipt {
        let name = op.name();
        let r = self
            .try_send(who, op)
            .unwrap_or_else(|e| panic!("{name} failed: {e}"));
        assert!(r.reverted.is_none(), "{name} reverted: {:?}", r.reverted);
        r
    }

    pub fn register(&mut self, who: &Actor, role: Role, skill_list: &[&str]) -> Receipt {
        self.keys.insert(who.id, who.key.clone());
        let deposit = self.platform().params().registration_fee;
        self.send(
            who,
            Op::Register {
                role,
                public_key: who.public,
                profile_ref: Digest::ZERO,
                skills: skills(skill_list),
                deposit,
            },
        )
    }

    pub fn worker(&mut self, who: &Actor) -> Receipt {
        self.register(who, Role::Worker, &["coding"])
    }

    pub fn poster(&mut self, who: &Actor) -> Receipt {
        self.register(who, Role::TaskPoster, &[])
    }

    pub fn post(&mut self, poster: &Actor, reward: Wei) -> TaskId {
        let r = self.send(
            poster,
            Op::PostTask {
                title: "task".into(),
                skills: skills(&["coding"]),
                reward,
                metadata_ref: Digest::ZERO,
                w_c: Fixed::from_raw(5_000),
                w_q: Fixed::from_raw(5_000),
            },
        );
        r.events
            .iter()
            .find_map(|e| match e {
                Event::TaskPosted { task, .. } => Some(*task),
                _ => None,
            })
            .expect("task posted")
    }

    pub fn create_agreement(&mut self, poster: &Actor, worker: &Actor, task: TaskId, fee: Wei) -> AgreementId {
        let reward = self.platform().task(task).expect("task").reward;
        let r = self.send(
            poster,
            Op::CreateAgreement {
                task,
                worker: worker.id,
                escrow: reward,
                acceptance_fee: fee,
                acceptance_deadline: self.now + 5,
                due_date: self.now + 20,
            },
        );
        r.events
            .iter()
            .find_map(|e| match e {
                Event::AgreementCreated { agreement, .. } => Some(*agreement),
                _ => None,
            })
            .expect("agreement created")
    }

    pub fn commit(&mut self, worker: &Actor, agreement: AgreementId, plaintext: &[u8]) -> SubmissionId {
        let r = self.send(worker, Op::Commit { agreement, commitment: keccak256(plaintext) });
        r.events
            .iter()
            .find_map(|e| match e {
                Event::Committed { submission, .. } => Some(*submission),
                _ => None,
            })
            .expect("committed")
    }

    /// Posts, applies, agrees, accepts and commits.
    pub fn contract(&mut self, poster: &Actor, worker: &Actor, reward: Wei, fee: Wei) -> Contract {
        let task = self.post(poster, reward);
        self.send(worker, Op::Apply { task });
        let agreement = self.create_agreement(poster, worker, task, fee);
        self.send(worker, Op::Accept { agreement, deposit: fee });
        let plaintext = format!("work for task {} by {}", task.0, worker.id.0.to_hex()).into_bytes();
        let submission = self.commit(worker, agreement, &plaintext);
        Contract { task, agreement, submission, plaintext }
    }

    /// Draws evaluators and reveals to them; returns the selection.
    pub fn assign_and_reveal(&mut self, worker: &Actor, c: &Contract) -> Vec<AccountId> {
        let r = self.send(worker, Op::AssignEvaluators { submission: c.submission });
        let selected = r
            .events
            .iter()
            .find_map(|e| match e {
                Event::EvaluatorsAssigned { selected, .. } => Some(selected.clone()),
                _ => None,
            })
            .expect("assigned");
        let refs = submission::reveal(
            self.ledger.platform(),
            &mut self.store,
            &self.cipher,
            &worker.key,
            c.submission,
            &c.plaintext,
        )
        .expect("reveal");
        self.send(worker, Op::Reveal { submission: c.submission, refs });
        selected
    }

    pub fn key_of(&self, id: &AccountId) -> SecretKey {
        self.keys.get(id).cloned().expect("known account")
    }

    /// Fetches the envelope and scores as `evaluator`.
    pub fn evaluate(&mut self, evaluator: AccountId, sub: SubmissionId, c: u8, q: u8) -> Receipt {
        let key = self.key_of(&evaluator);
        submission::fetch_for_evaluator(self.ledger.platform(), &self.store, &self.cipher, evaluator, &key, sub)
            .expect("fetch");
        let public = Ed25519.public_key(&key);
        let who = Actor { key, public, id: evaluator };
        self.send(
            &who,
            Op::SubmitEvaluation { submission: sub, completeness: c, quality: q, review_ref: Digest::ZERO },
        )
    }
}

pub fn registration_fee() -> Wei {
    DEFAULT_REGISTRATION_FEE
}

pub fn reputation_of(h: &Harness, id: &AccountId) -> Fixed {
    h.platform().account(id).expect("account").reputation
}
