//! One line per acceptance criterion. Runs without the libtest harness so every
//! line is printed, then exits non-zero if any criterion failed.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::process::Command;
use std::time::Duration;

use common::{golden, timed};
use tendermint_sim::check::Status;
use tendermint_sim::fairness::FairnessVerdict;
use tendermint_sim::harness::{fuzz, run, Campaign};
use tendermint_sim::netsim::NetworkMode;
use tendermint_sim::oneshot::UnlockRule;
use tendermint_sim::scenarios;
use tendermint_sim::trace::Event;

const SPLIT_LIMIT: Duration = Duration::from_secs(1);
const LIVELOCK_LIMIT: Duration = Duration::from_secs(1);
const TERMINATION_LIMIT: Duration = Duration::from_secs(120);
const SAFETY_LIMIT: Duration = Duration::from_secs(300);
const ROTATION_LIMIT: Duration = Duration::from_secs(10);
const FAIRNESS_LIMIT: Duration = Duration::from_secs(5);
const DELAYED_LIMIT: Duration = Duration::from_secs(5);
const ASYNC_LIMIT: Duration = Duration::from_secs(5);

const TERMINATION_RUNS: u64 = 600;
const SAFETY_RUNS: u64 = 1200;
const ROTATION_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const CAMPAIGN_SEED: u64 = 1;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn split_lock() -> Outcome {
    let ((legacy, corrected), elapsed) = timed(|| {
        (run(&scenarios::agreement_violation(UnlockRule::Legacy)), run(&scenarios::agreement_violation(UnlockRule::Corrected)))
    });
    golden::split_legacy(legacy.trace())?;
    ensure(legacy.report.status("agreement") == Some(Status::Violated), || "legacy run kept agreement".into())?;
    golden::split_corrected(corrected.trace())?;
    ensure(corrected.report.status("agreement") == Some(Status::Holds), || "corrected run broke agreement".into())?;
    within(elapsed, SPLIT_LIMIT)?;
    Ok(format!("legacy: p1 B in r1, p2 B' in r6, 6 state lines match; corrected: agreement holds ({elapsed:.0?})"))
}

fn livelock() -> Outcome {
    let (out, elapsed) = timed(|| run(&scenarios::livelock()));
    let trace = out.trace();
    ensure(out.report.decisions.is_empty(), || format!("{} decisions", out.report.decisions.len()))?;
    let last_round = trace
        .records()
        .iter()
        .filter_map(|r| match &r.event {
            Event::RoundEntry { round, .. } => Some(*round),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    ensure(last_round >= 100, || format!("horizon ended at round {last_round}"))?;
    let checks = tendermint_sim::monitor::round_checks(trace);
    ensure(checks.iter().all(|c| !c.satisfied), || "a satisfying round exists".into())?;
    ensure(out.report.status("assumption_t") == Some(Status::Absent), || "monitor reports the side-condition".into())?;
    golden::livelock_tables(trace)?;
    within(elapsed, LIVELOCK_LIMIT)?;
    Ok(format!("0 decisions over {last_round} rounds, {} rounds examined, none satisfying; tables for r2,3,5,6,7 match ({elapsed:.0?})", checks.len()))
}

fn termination() -> Outcome {
    let campaign = Campaign::termination(CAMPAIGN_SEED, TERMINATION_RUNS);
    ensure(campaign.sizes == vec![4, 7], || "sizes must be {4, 7}".into())?;
    ensure(campaign.modes == vec![NetworkMode::EventuallySynchronous], || "eventually synchronous only".into())?;
    ensure(campaign.unlock_rule == UnlockRule::Corrected, || "corrected rules".into())?;
    let ((summary, _), elapsed) = timed(|| fuzz(&campaign));
    ensure(summary.termination_gaps == 0, || format!("{} runs with a satisfying round left a validator undecided", summary.termination_gaps))?;
    ensure(summary.violations.values().all(|v| *v == 0), || format!("safety violations {:?}", summary.violations))?;
    within(elapsed, TERMINATION_LIMIT)?;
    Ok(format!(
        "{} runs, {} with a satisfying round, {} fully decided, 0 gaps ({elapsed:.1?})",
        summary.runs, summary.assumption_t_runs, summary.decided_runs
    ))
}

fn safety() -> Outcome {
    let campaign = Campaign::safety(CAMPAIGN_SEED, SAFETY_RUNS);
    ensure(campaign.modes.len() == 3 && campaign.mixes.len() >= 5, || "campaign grid too small".into())?;
    let ((summary, _), elapsed) = timed(|| fuzz(&campaign));
    ensure(summary.violations.values().all(|v| *v == 0), || format!("violations {:?}", summary.violations))?;
    within(elapsed, SAFETY_LIMIT)?;
    Ok(format!("{} runs, 3 network modes, {} strategy mixes, 0 violations ({elapsed:.1?})", summary.runs, campaign.mixes.len()))
}

fn rotation() -> Outcome {
    let (outs, elapsed) = timed(|| ROTATION_SEEDS.iter().map(|s| run(&scenarios::rotation(*s))).collect::<Vec<_>>());
    for out in &outs {
        let r = &out.report;
        for p in ["agreement", "validity", "chain_linkage"] {
            ensure(r.status(p) == Some(Status::Holds), || format!("seed {}: {p} {:?}", r.seed, r.status(p)))?;
        }
        ensure(r.outputs_identical, || format!("seed {}: outputs differ", r.seed))?;
        ensure(r.outputs.values().all(|n| *n >= 20), || format!("seed {}: outputs {:?}", r.seed, r.outputs))?;
        let sets: BTreeSet<Vec<_>> = out
            .trace()
            .records()
            .iter()
            .filter_map(|rec| match &rec.event {
                Event::HeightStart { validators, .. } => Some(validators.clone()),
                _ => None,
            })
            .collect();
        ensure(sets.len() > 1, || format!("seed {}: validator set never rotated", r.seed))?;
    }
    within(elapsed, ROTATION_LIMIT)?;
    Ok(format!("{} seeds x 20 heights, 7 processes, sets rotate, outputs identical, blocks valid, chain linked ({elapsed:.0?})", outs.len()))
}

fn fairness() -> Outcome {
    use tendermint_sim::fairness::Mechanism;
    let ((original, filtered), elapsed) = timed(|| {
        (run(&scenarios::fairness_violation(Mechanism::Original)), run(&scenarios::fairness_violation(Mechanism::ModulableF1Filter)))
    });
    let audit = original.report.check.fairness.clone().ok_or("no audit")?;
    ensure(matches!(audit.verdict, FairnessVerdict::NotEventuallyFair { .. }), || audit.verdict.label())?;
    ensure(audit.audited.len() >= 50, || format!("only {} audited heights", audit.audited.len()))?;
    ensure(audit.audited.iter().all(|a| !a.holds), || "some height satisfied the rewards".into())?;

    let waits = common::commit_waits(filtered.trace(), scenarios::SLOW_VICTIM);
    let on_time = |w: &common::CommitWait| w.delay.is_some_and(|d| w.timeout >= d);
    let h_star = waits.iter().find(|w| on_time(w)).ok_or("timeout never catches up")?.height;
    ensure(waits.iter().filter(|w| w.height >= h_star).all(on_time), || "timeout falls behind again".into())?;
    let audit = filtered.report.check.fairness.clone().ok_or("no audit")?;
    ensure(audit.verdict == FairnessVerdict::EventuallyFair { from: h_star }, || format!("{} with H* = {h_star}", audit.verdict.label()))?;
    within(elapsed, FAIRNESS_LIMIT)?;
    Ok(format!("original violated at all {} audited heights; f+1 filter EVENTUALLY-FAIR({h_star}) = H* ({elapsed:.0?})", original.report.check.fairness.as_ref().map_or(0, |a| a.audited.len())))
}

fn delayed() -> Outcome {
    let (out, elapsed) = timed(|| run(&scenarios::delayed_reward()));
    let audit = out.report.check.fairness.clone().ok_or("no audit")?;
    ensure(audit.verdict == FairnessVerdict::Fair, || audit.verdict.label())?;
    ensure(audit.audited.len() >= 50, || format!("only {} audited heights", audit.audited.len()))?;
    ensure(audit.audited.iter().all(|a| a.holds), || "a height misrewarded".into())?;
    within(elapsed, DELAYED_LIMIT)?;
    Ok(format!("FAIR at all {} rewardable heights ({elapsed:.0?})", audit.audited.len()))
}

fn asynchrony() -> Outcome {
    let (outs, elapsed) = timed(|| scenarios::MECHANISMS.iter().map(|m| (*m, run(&scenarios::asynchronous(*m)))).collect::<Vec<_>>());
    let mut parts = Vec::new();
    for (m, out) in &outs {
        ensure(out.config.byzantine.is_empty(), || "faulty processes present".into())?;
        let audit = out.report.check.fairness.clone().ok_or("no audit")?;
        let last = audit.audited.last().map(|a| a.height).ok_or("nothing audited")?;
        ensure(matches!(audit.verdict, FairnessVerdict::NotEventuallyFair { .. }), || format!("{}: {}", m.label(), audit.verdict.label()))?;
        ensure(audit.violations.last() == Some(&last), || format!("{}: violations stop before height {last}", m.label()))?;
        parts.push(format!("{} {}/{}", m.label(), audit.violations.len(), audit.audited.len()));
    }
    within(elapsed, ASYNC_LIMIT)?;
    Ok(format!("violations through the last audited height: {} ({elapsed:.0?})", parts.join(", ")))
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_tmsim");
    let invoke = |args: &[&str]| -> Result<(), String> {
        let status = Command::new(bin).args(args).output().map_err(|e| e.to_string())?.status;
        ensure(status.code().is_some_and(|c| c <= 1), || format!("tmsim {args:?}: {status}"))
    };
    let dir = |s: &str| root.path().join(s).to_string_lossy().into_owned();
    let mut compared = 0;
    for scenario in ["agreement-violation-legacy", "livelock", "rotation", "fairness-modulable_f1_filter"] {
        for copy in ["a", "b"] {
            invoke(&["run", "--scenario", scenario, "--seed", "17", "--out", &dir(&format!("{scenario}-{copy}"))])?;
        }
        for file in ["trace.jsonl", "report.json", "config.toml"] {
            let a = fs::read(root.path().join(format!("{scenario}-a/{file}"))).map_err(|e| e.to_string())?;
            let b = fs::read(root.path().join(format!("{scenario}-b/{file}"))).map_err(|e| e.to_string())?;
            ensure(a == b, || format!("{scenario}/{file} differs"))?;
            compared += 1;
        }
    }
    for copy in ["a", "b"] {
        invoke(&["fuzz", "--seed", "17", "--runs", "40", "--out", &dir(&format!("fuzz-{copy}"))])?;
    }
    let listing = |c: &str| -> Result<Vec<(String, Vec<u8>)>, String> {
        let mut v: Vec<_> = fs::read_dir(root.path().join(format!("fuzz-{c}")))
            .map_err(|e| e.to_string())?
            .map(|e| {
                let e = e.expect("entry");
                (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).expect("readable"))
            })
            .collect();
        v.sort();
        Ok(v)
    };
    let (a, b) = (listing("a")?, listing("b")?);
    ensure(a == b, || "fuzz artifacts differ".into())?;
    compared += a.len();
    Ok(format!("{compared} artifact pairs byte-identical across repeated run and fuzz invocations"))
}

fn oracles() -> Outcome {
    let four = common::quorum_intersection(4)?;
    let seven = common::quorum_intersection(7)?;
    let split = run(&scenarios::agreement_violation(UnlockRule::Legacy));
    golden::split_vote_counts(split.trace())?;
    let live = run(&scenarios::livelock());
    golden::livelock_vote_counts(live.trace())?;
    Ok(format!(
        "intersection exhaustive ({four} cases n=4, {seven} n=7); {} + {} scripted vote counts match",
        golden::SPLIT_PREVOTE_QUORUMS.len() + golden::SPLIT_PRECOMMITS.len(),
        golden::LIVELOCK_PREVOTE_QUORUMS.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("lock-split agreement violation", split_lock),
        ("livelock without the side-condition", livelock),
        ("conditional termination", termination),
        ("safety fuzz", safety),
        ("repeated consensus with rotation", rotation),
        ("fairness violation and catch-up", fairness),
        ("delayed reward under synchrony", delayed),
        ("unfairness under asynchrony", asynchrony),
        ("determinism", determinism),
        ("unit oracles", oracles),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
