//! Reward audits for every mechanism: a slow correct validator after
//! stabilization, a synchronous run with delayed rewards, and a fully
//! asynchronous scheduler.
//!
//! cargo run --example fairness_audit

use tendermint_sim::fairness::Mechanism;
use tendermint_sim::harness::run;
use tendermint_sim::scenarios;
use tendermint_sim::trace::Event;
use tendermint_sim::oneshot::TimerKind;

fn verdict(cfg: &tendermint_sim::config::RunConfig) -> String {
    let out = run(cfg);
    let audit = out.report.check.fairness.expect("repeated run");
    format!("{:<28} {:>2}/{:<2} violated  {}", cfg.name, audit.violations.len(), audit.audited.len(), audit.verdict.label())
}

fn main() {
    println!("slow validator p{} (delay {}):", scenarios::SLOW_VICTIM, scenarios::SLOW_DELAY);
    for m in scenarios::MECHANISMS {
        println!("  {}", verdict(&scenarios::fairness_violation(m)));
    }
    println!("synchronous:\n  {}", verdict(&scenarios::delayed_reward()));
    println!("asynchronous:");
    for m in scenarios::MECHANISMS {
        println!("  {}", verdict(&scenarios::asynchronous(m)));
    }

    let out = run(&scenarios::fairness_violation(Mechanism::Modulable));
    let trajectory: Vec<u64> = out
        .trace()
        .records()
        .iter()
        .filter_map(|r| match &r.event {
            Event::Timeout { timer: TimerKind::Commit, value, .. } if r.process.is_some_and(|p| p.0 == 1) => Some(*value),
            _ => None,
        })
        .collect();
    println!("p1 commit timeout under the modulable mechanism: {trajectory:?}");
}
