mod common;

use common::golden;
use tendermint_sim::check::Status;
use tendermint_sim::fairness::{FairnessVerdict, Mechanism};
use tendermint_sim::harness::run;
use tendermint_sim::oneshot::UnlockRule;
use tendermint_sim::scenarios;

#[test]
fn split_lock_legacy_matches_table() {
    let out = run(&scenarios::agreement_violation(UnlockRule::Legacy));
    golden::split_legacy(out.trace()).unwrap();
    assert_eq!(out.report.status("agreement"), Some(Status::Violated));
}

#[test]
fn split_lock_corrected_decides_b() {
    let out = run(&scenarios::agreement_violation(UnlockRule::Corrected));
    golden::split_corrected(out.trace()).unwrap();
    assert_eq!(out.report.status("agreement"), Some(Status::Holds));
}

#[test]
fn split_lock_vote_counts() {
    let out = run(&scenarios::agreement_violation(UnlockRule::Legacy));
    golden::split_vote_counts(out.trace()).unwrap();
}

#[test]
fn livelock_matches_tables() {
    let out = run(&scenarios::livelock());
    golden::livelock_tables(out.trace()).unwrap();
    golden::livelock_vote_counts(out.trace()).unwrap();
    assert!(out.report.decisions.is_empty());
    assert_eq!(out.report.status("assumption_t"), Some(Status::Absent));
}

#[test]
fn commit_timeout_catches_up_with_the_slow_validator() {
    let out = run(&scenarios::fairness_violation(Mechanism::ModulableF1Filter));
    let waits = common::commit_waits(out.trace(), scenarios::SLOW_VICTIM);
    let on_time = |w: &common::CommitWait| w.delay.is_some_and(|d| w.timeout >= d);
    let h_star = waits.iter().find(|w| on_time(w)).expect("timeout catches up").height;
    assert!(waits.iter().filter(|w| w.height >= h_star).all(on_time), "{waits:#?}");
    // Before catching up, the rewarding proposer's timeout grows by one per height.
    let before: Vec<_> = waits.iter().filter(|w| w.height < h_star).collect();
    for pair in before.windows(2) {
        assert_eq!(pair[1].timeout, pair[0].timeout + 1, "{pair:?}");
    }
    let audit = out.report.check.fairness.as_ref().unwrap();
    assert_eq!(audit.verdict, FairnessVerdict::EventuallyFair { from: h_star });
}

#[test]
fn every_scenario_meets_its_expectations() {
    for cfg in scenarios::all() {
        let out = run(&cfg);
        assert!(out.report.expectations_met, "{}", out.report.summary());
    }
}
