use proptest::prelude::*;

use workerrep_core::crypto::Ed25519;
use workerrep_core::sim::{run, AgentSpec, Archetype, RunOutput, ScenarioConfig, SimError, Termination};
use workerrep_core::{verify_chain, Fixed, VolunteerThreshold, Wei};

#[derive(Clone, Debug)]
struct Shape {
    seed: u64,
    honest: u32,
    posters: u32,
    adversaries: [u32; 6],
    tasks: u32,
    per_tick: u32,
    starters: u32,
    fee: bool,
    k: Option<i64>,
    slots: bool,
    x: u32,
    y: u32,
    rounds: u32,
    open: bool,
    noise: u8,
    fee_percent: u32,
    windows: (u64, u64),
    lapse: u32,
}

fn shape() -> impl Strategy<Value = Shape> {
    (
        (any::<u64>(), 6u32..14, 1u32..4, prop::array::uniform6(0u32..3)),
        (4u32..16, 1u32..4, 0u32..4, any::<bool>()),
        (prop::option::weighted(0.8, 5_000i64..20_000), any::<bool>(), 1u32..4, 1u32..3, 1u32..4, any::<bool>()),
        (0u8..9, 0u32..25, 1u64..4, 1u64..9, prop_oneof![Just(0u32), 1u32..40]),
    )
        .prop_map(|(a, b, c, d)| Shape {
            seed: a.0,
            honest: a.1,
            posters: a.2,
            adversaries: a.3,
            tasks: b.0,
            per_tick: b.1,
            starters: b.2,
            fee: b.3,
            k: c.0,
            slots: c.1,
            x: c.2,
            y: c.3,
            rounds: c.4,
            open: c.5,
            noise: d.0,
            fee_percent: d.1,
            windows: (d.2, d.3),
            lapse: d.4,
        })
}

fn scenario(s: &Shape) -> ScenarioConfig {
    let mut c = ScenarioConfig { name: "conservation".into(), seed: s.seed, ..ScenarioConfig::default() };
    let kinds = [
        Archetype::Colluder,
        Archetype::BadMouther,
        Archetype::BallotStuffer,
        Archetype::SybilSpawner,
        Archetype::ReEntrant,
        Archetype::Reciprocator,
    ];
    c.agents = vec![
        AgentSpec::new(Archetype::HonestWorker, s.honest),
        AgentSpec::new(Archetype::HonestPoster, s.posters),
    ];
    for (kind, n) in kinds.into_iter().zip(s.adversaries) {
        if n > 0 {
            c.agents.push(AgentSpec::new(kind, n));
        }
    }
    c.adversary.targets = 2;
    c.adversary.sybil_cap = 4;
    c.duration = 400;
    c.tasks.count = s.tasks;
    c.tasks.per_tick = s.per_tick;
    c.tasks.starter_count = s.starters;
    c.params.registration_fee = if s.fee { c.params.registration_fee } else { Wei::ZERO };
    c.params.outlier_k = s.k.map(Fixed::from_raw);
    c.params.slot_selection = s.slots;
    c.params.evaluators_per_submission = s.x;
    c.params.evaluations_owed = s.y;
    c.params.max_rounds = s.rounds;
    if s.open {
        c.params.volunteer_threshold = VolunteerThreshold::Open;
    }
    c.behavior.noise = s.noise;
    c.behavior.acceptance_fee_percent = s.fee_percent;
    c.behavior.acceptance_window = s.windows.0;
    c.behavior.due_window = s.windows.1;
    c.behavior.lapse_percent = s.lapse;
    c
}

/// Completed runs and deadlocked ones both leave a full ledger to check.
fn finished(r: Result<RunOutput, SimError>) -> Result<RunOutput, String> {
    match r {
        Ok(out) => Ok(out),
        Err(SimError::Deadlock { partial, .. }) => Ok(*partial),
        Err(e) => Err(e.to_string()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 120, ..ProptestConfig::default() })]

    #[test]
    fn currency_is_conserved(s in shape()) {
        let cfg = scenario(&s);
        let out = finished(run(&cfg)).map_err(TestCaseError::fail)?;
        let r = &out.report;
        prop_assert_eq!(r.conservation.residual, 0, "{:?}", r.conservation);
        prop_assert!(verify_chain(&Ed25519, out.ledger.entries()).is_ok());
        let p = out.ledger.platform();
        prop_assert_eq!(r.conservation.held, p.held_funds());
        prop_assert_eq!(r.conservation.pool, p.platform_pool());
        prop_assert_eq!(r.entries, out.ledger.entries().len() as u64);
        prop_assert_ne!(r.termination, Termination::DurationReached);
    }
}

#[test]
fn defaults_and_cancellations_also_balance() {
    let mut defaulted = 0;
    let mut cancelled = 0;
    for seed in 0..8 {
        let s = Shape {
            seed,
            honest: 8,
            posters: 2,
            adversaries: [0, 0, 0, 0, 1, 0],
            tasks: 12,
            per_tick: 3,
            starters: 0,
            fee: true,
            k: Some(10_000),
            slots: true,
            x: 3,
            y: 2,
            rounds: 3,
            open: false,
            noise: 5,
            fee_percent: 10,
            windows: (1, 1),
            lapse: 30,
        };
        let out = finished(run(&scenario(&s))).unwrap();
        let r = &out.report;
        assert_eq!(r.conservation.residual, 0);
        assert!(verify_chain(&Ed25519, out.ledger.entries()).is_ok());
        defaulted += r.tasks.defaulted;
        cancelled += r.tasks.cancelled;
    }
    assert!(defaulted > 0 && cancelled > 0, "defaulted {defaulted}, cancelled {cancelled}");
}
