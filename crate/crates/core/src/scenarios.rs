//! Built-in scenario configurations.

use crate::check::Status;
use crate::config::{AdversarySpec, RunConfig, Timeouts};
use crate::fairness::Mechanism;
use crate::netsim::{NetworkMode, NetworkModel};
use crate::oneshot::{PrevoteTimer, UnlockRule};

fn byzantine_four(name: &str, description: &str) -> RunConfig {
    let mut c = RunConfig::honest(name, 4, 0);
    c.description = description.into();
    c.byzantine = vec![4];
    c.protocol.one_shot = true;
    c.timeouts = Timeouts { propose: 10, prevote: 10, commit: 10 };
    c
}

/// The lock-split schedule under `rule`; it only breaks agreement under the legacy rule.
pub fn agreement_violation(rule: UnlockRule) -> RunConfig {
    let legacy = rule == UnlockRule::Legacy;
    let mut c = byzantine_four(
        if legacy { "agreement-violation-legacy" } else { "agreement-violation-corrected" },
        "p1 decides B and leaves; p4 staggers p2's and p3's locks until p2 decides a fresh block",
    );
    c.protocol.unlock_rule = rule;
    c.protocol.prevote_timer = PrevoteTimer::OnEntry;
    c.network = NetworkModel { mode: NetworkMode::Asynchronous, gst: 0, delta: 1, max_pre_gst: 100_000 };
    c.adversary = AdversarySpec::AgreementViolation;
    c.horizon.heights = None;
    c.horizon.time = 1_000;
    c.expect.insert("agreement".into(), if legacy { Status::Violated } else { Status::Holds });
    c.expect.insert("integrity".into(), Status::Holds);
    c.expect.insert("validity".into(), Status::Holds);
    c
}

/// Locks on v1 and v3 leapfrog forever after stabilization.
pub fn livelock() -> RunConfig {
    let mut c = byzantine_four("livelock", "p4's just-in-time prevotes keep p1 and p3 locked on different blocks");
    c.network = NetworkModel { mode: NetworkMode::EventuallySynchronous, gst: 5, delta: 5, max_pre_gst: 30 };
    c.adversary = AdversarySpec::Livelock;
    c.horizon.heights = None;
    c.horizon.rounds = Some(100);
    c.horizon.time = 100_000;
    c.expect.insert("agreement".into(), Status::Holds);
    c.expect.insert("termination".into(), Status::Fail);
    c.expect.insert("assumption_t".into(), Status::Absent);
    c
}

/// Delay of the slow validator's proposals and commits in [`fairness_violation`].
pub const SLOW_DELAY: u64 = 40;
pub const SLOW_VICTIM: u32 = 3;

/// p3's proposals and commits take [`SLOW_DELAY`] ticks, everything else one tick.
pub fn fairness_violation(mechanism: Mechanism) -> RunConfig {
    let mut c = RunConfig::honest(&format!("fairness-{}", mechanism.label()), 4, 0);
    c.description = "one correct validator's commits always arrive after the commit timer".into();
    c.network = NetworkModel { mode: NetworkMode::EventuallySynchronous, gst: 0, delta: SLOW_DELAY, max_pre_gst: SLOW_DELAY };
    c.timeouts = Timeouts { propose: 10, prevote: 10, commit: 10 };
    c.reward.mechanism = mechanism;
    c.adversary = AdversarySpec::SlowValidator { victim: SLOW_VICTIM, delay: SLOW_DELAY };
    c.horizon.heights = Some(60);
    c.horizon.time = 1_000_000;
    let verdict = match mechanism {
        Mechanism::Original | Mechanism::Delayed { .. } => Status::NotEventuallyFair,
        Mechanism::Modulable | Mechanism::ModulableF1Filter => Status::EventuallyFair,
    };
    c.expect.insert("fairness".into(), verdict);
    c.expect.insert("outputs_identical".into(), Status::Holds);
    c
}

/// Synchronous network with commit timer at least twice the delay bound and rewards one height late.
pub fn delayed_reward() -> RunConfig {
    let mut c = RunConfig::honest("delayed-reward-sync", 4, 0);
    c.description = "delayed reward with x = 1 on a synchronous network".into();
    c.network = NetworkModel::synchronous(2);
    c.timeouts = Timeouts { propose: 10, prevote: 10, commit: 4 };
    c.reward.mechanism = Mechanism::Delayed { x: 1 };
    c.horizon.heights = Some(52);
    c.horizon.time = 1_000_000;
    c.expect.insert("fairness".into(), Status::Fair);
    c
}

/// No faulty process, but p3's commits are always later than any commit timer reaches.
pub fn asynchronous(mechanism: Mechanism) -> RunConfig {
    let mut c = RunConfig::honest(&format!("async-{}", mechanism.label()), 4, 0);
    c.description = "asynchronous scheduler starving one correct validator's commits".into();
    c.network = NetworkModel { mode: NetworkMode::Asynchronous, gst: 0, delta: 1, max_pre_gst: 1_000_000 };
    c.timeouts = Timeouts { propose: 10, prevote: 10, commit: 10 };
    c.reward.mechanism = mechanism;
    c.adversary = AdversarySpec::SlowValidator { victim: SLOW_VICTIM, delay: 1_000_000 };
    c.horizon.heights = Some(40);
    c.horizon.time = 900_000;
    c.expect.insert("fairness".into(), Status::NotEventuallyFair);
    c
}

/// Seven processes, four validators per height, stake-weighted rotation from height 5.
pub fn rotation(seed: u64) -> RunConfig {
    let mut c = RunConfig::honest("rotation", 4, seed);
    c.description = "validator set drawn by stake from the chain tip".into();
    c.processes = Some(7);
    c.selector = Some(crate::repeated::Selector::StakeRotation { n: 4, stakes: vec![5, 1, 3, 2, 4, 1, 2], start_height: 5 });
    c.horizon.heights = Some(20);
    c.horizon.time = 1_000_000;
    c.mempool_seed = seed;
    c.expect.insert("agreement".into(), Status::Holds);
    c.expect.insert("validity".into(), Status::Holds);
    c.expect.insert("chain_linkage".into(), Status::Holds);
    c.expect.insert("outputs_identical".into(), Status::Holds);
    c
}

pub fn honest() -> RunConfig {
    let mut c = RunConfig::honest("honest", 4, 0);
    c.description = "four correct validators on a synchronous network".into();
    c.horizon.heights = Some(20);
    c.expect.insert("agreement".into(), Status::Holds);
    c.expect.insert("termination".into(), Status::Pass);
    c.expect.insert("outputs_identical".into(), Status::Holds);
    c.expect.insert("fairness".into(), Status::Fair);
    c
}

pub const MECHANISMS: [Mechanism; 4] =
    [Mechanism::Original, Mechanism::Modulable, Mechanism::ModulableF1Filter, Mechanism::Delayed { x: 1 }];

pub fn all() -> Vec<RunConfig> {
    let mut v = vec![
        honest(),
        agreement_violation(UnlockRule::Legacy),
        agreement_violation(UnlockRule::Corrected),
        livelock(),
        fairness_violation(Mechanism::Original),
        fairness_violation(Mechanism::ModulableF1Filter),
        delayed_reward(),
        rotation(7),
    ];
    v.extend(MECHANISMS.iter().map(|m| asynchronous(*m)));
    v
}

pub fn by_name(name: &str) -> Option<RunConfig> {
    all().into_iter().find(|c| c.name == name)
}
