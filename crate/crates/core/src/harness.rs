//! Runs configurations end to end: simulate, check, compare expectations,
//! write artifacts, and drive fuzz campaigns.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary;
use crate::block::Mempool;
use crate::check::{check_trace, CheckReport, Status};
use crate::config::{AdversarySpec, RunConfig, Strategy};
use crate::netsim::{NetworkMode, RunResult, Sim};
use crate::oneshot::UnlockRule;
use crate::repeated::NodeConfig;
use crate::trace::{RunHeader, Trace, TRACE_VERSION};
use crate::types::{Height, ProcessId, Time};

/// Directory for run artifacts when no explicit path is given.
pub const ARTIFACT_DIR_ENV: &str = "TMSIM_OUT";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectationResult {
    pub property: String,
    pub expected: Status,
    pub actual: Option<Status>,
    pub met: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub process: ProcessId,
    pub height: Height,
    pub block: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub seed: u64,
    pub end_reason: String,
    pub end_time: Time,
    pub decisions: Vec<Decision>,
    pub outputs: BTreeMap<ProcessId, usize>,
    pub outputs_identical: bool,
    pub check: CheckReport,
    pub expectations: Vec<ExpectationResult>,
    pub expectations_met: bool,
}

impl Report {
    pub fn status(&self, property: &str) -> Option<Status> {
        self.check.status(property)
    }

    pub fn summary(&self) -> String {
        let mut s = format!("run {} (seed {}): {}\n", self.name, self.seed, self.end_reason);
        for v in &self.check.verdicts {
            s.push_str(&format!("  {v}\n"));
        }
        s.push_str(&format!(
            "  outputs identical across correct processes: {}\n",
            if self.outputs_identical { "yes" } else { "no" }
        ));
        for e in &self.expectations {
            let actual = e.actual.map_or("missing".to_string(), |a| a.to_string());
            let mark = if e.met { "ok" } else { "MISMATCH" };
            s.push_str(&format!("  expect {} = {} -> {} [{mark}]\n", e.property, e.expected, actual));
        }
        s
    }
}

pub struct Outcome {
    pub config: RunConfig,
    pub result: RunResult,
    pub report: Report,
}

impl Outcome {
    pub fn trace(&self) -> &Trace {
        &self.result.trace
    }
}

pub fn header(cfg: &RunConfig) -> RunHeader {
    RunHeader {
        version: TRACE_VERSION,
        name: cfg.name.clone(),
        seed: cfg.seed,
        roster: cfg.roster(),
        byzantine: cfg.byzantine.iter().map(|b| ProcessId(*b)).collect(),
        f: cfg.fault_bound(),
        gst: cfg.network.gst(),
        delta: cfg.network.delta,
        max_pre_gst: cfg.network.max_pre_gst,
        one_shot: cfg.protocol.one_shot,
        target_heights: if cfg.protocol.one_shot { None } else { cfg.horizon.heights },
        proposer_offset: cfg.protocol.proposer_offset,
        tail_window: cfg.reward.tail_window,
    }
}

pub fn node_config(cfg: &RunConfig) -> NodeConfig {
    NodeConfig {
        oneshot: cfg.oneshot(),
        delta_commit: cfg.timeouts.commit,
        mechanism: cfg.reward.mechanism,
        selector: cfg.selector(),
        mempool: Mempool::new(cfg.mempool_seed),
        f: cfg.fault_bound(),
        one_shot: cfg.protocol.one_shot,
    }
}

/// Simulates `cfg` and evaluates every property. Panics if `cfg` is invalid.
pub fn run(cfg: &RunConfig) -> Outcome {
    cfg.validate().expect("valid config");
    let sim = Sim::new(header(cfg), cfg.network.clone(), node_config(cfg), adversary::build(cfg));
    let result = sim.run(&cfg.stop_rule());
    let check = check_trace(&result.trace, false);
    let report = build_report(cfg, &result, check);
    Outcome { config: cfg.clone(), result, report }
}

fn build_report(cfg: &RunConfig, result: &RunResult, check: CheckReport) -> Report {
    let decisions: Vec<Decision> = result
        .trace
        .records()
        .iter()
        .filter_map(|r| match &r.event {
            crate::trace::Event::Decide { height, block, .. } => Some(Decision {
                process: r.process?,
                height: *height,
                block: block.digest().to_hex(),
            }),
            _ => None,
        })
        .collect();
    let outputs: BTreeMap<ProcessId, usize> = result.nodes.iter().map(|(p, n)| (*p, n.outputs().len())).collect();
    let outputs_identical = {
        let chains: Vec<&[crate::types::Block]> = result.nodes.values().map(|n| n.outputs()).collect();
        chains.windows(2).all(|w| {
            let k = w[0].len().min(w[1].len());
            w[0][..k] == w[1][..k]
        })
    };
    let expectations: Vec<ExpectationResult> = cfg
        .expect
        .iter()
        .map(|(prop, want)| {
            let actual = check.status(prop).or_else(|| match prop.as_str() {
                "outputs_identical" => Some(if outputs_identical { Status::Holds } else { Status::Violated }),
                _ => None,
            });
            ExpectationResult { property: prop.clone(), expected: *want, actual, met: actual == Some(*want) }
        })
        .collect();
    let expectations_met = expectations.iter().all(|e| e.met);
    Report {
        name: cfg.name.clone(),
        seed: cfg.seed,
        end_reason: result.end_reason.clone(),
        end_time: result.end_time,
        decisions,
        outputs,
        outputs_identical,
        check,
        expectations,
        expectations_met,
    }
}

pub fn report_json(report: &Report) -> String {
    serde_json::to_string_pretty(report).expect("report serializes") + "\n"
}

/// Writes `trace.jsonl`, `report.json` and the effective `config.toml` under `dir`.
pub fn write_artifacts(dir: &Path, outcome: &Outcome) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let trace = dir.join("trace.jsonl");
    let report = dir.join("report.json");
    let config = dir.join("config.toml");
    fs::write(&trace, outcome.trace().to_jsonl())?;
    fs::write(&report, report_json(&outcome.report))?;
    fs::write(&config, outcome.config.to_toml())?;
    Ok(vec![trace, report, config])
}

pub fn artifact_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(ARTIFACT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("tmsim-out"))
}

/// A batch of seeded runs over a grid of sizes, network modes and strategy mixes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Campaign {
    pub name: String,
    pub seed: u64,
    pub runs: u64,
    pub sizes: Vec<usize>,
    pub modes: Vec<NetworkMode>,
    pub mixes: Vec<Vec<Strategy>>,
    pub unlock_rule: UnlockRule,
    pub one_shot: bool,
    pub heights: u64,
    /// Use perturbed lock-split schedules instead of `mixes`; needs n = 4.
    #[serde(default)]
    pub targeted: bool,
}

impl Campaign {
    pub fn safety(seed: u64, runs: u64) -> Campaign {
        Campaign {
            name: "safety".into(),
            seed,
            runs,
            sizes: vec![4, 7],
            modes: vec![NetworkMode::Synchronous, NetworkMode::EventuallySynchronous, NetworkMode::Asynchronous],
            mixes: vec![
                vec![Strategy::Silent],
                vec![Strategy::Equivocate],
                vec![Strategy::SelectiveSend, Strategy::StaleReplay],
                vec![Strategy::InvalidProposal, Strategy::Equivocate],
                Strategy::ALL.to_vec(),
            ],
            unlock_rule: UnlockRule::Corrected,
            one_shot: true,
            heights: 3,
            targeted: false,
        }
    }

    /// Eventually-synchronous runs only, for the conditional-termination link.
    pub fn termination(seed: u64, runs: u64) -> Campaign {
        Campaign {
            name: "termination".into(),
            modes: vec![NetworkMode::EventuallySynchronous],
            one_shot: false,
            heights: 2,
            ..Campaign::safety(seed, runs)
        }
    }

    /// Perturbed lock-split schedules on four validators.
    pub fn targeted(seed: u64, runs: u64, unlock_rule: UnlockRule) -> Campaign {
        Campaign {
            name: "targeted".into(),
            sizes: vec![4],
            modes: vec![NetworkMode::Asynchronous],
            mixes: vec![Vec::new()],
            unlock_rule,
            targeted: true,
            ..Campaign::safety(seed, runs)
        }
    }

    /// The i-th run's configuration; a pure function of the campaign and `i`.
    pub fn config(&self, i: u64) -> RunConfig {
        let seed = self.seed.wrapping_mul(1_000_003).wrapping_add(i);
        let n = self.sizes[(i as usize) % self.sizes.len()];
        let mode = self.modes[(i as usize / self.sizes.len()) % self.modes.len()];
        let f = crate::quorum::max_faults(n);
        let mut c = RunConfig::honest(&format!("{}-{i}", self.name), n, seed);
        c.byzantine = ((n - f + 1)..=n).map(|p| p as u32).collect();
        c.network = crate::netsim::NetworkModel { mode, gst: if mode == NetworkMode::Synchronous { 0 } else { 150 }, delta: 3, max_pre_gst: 40 };
        c.timeouts = crate::config::Timeouts { propose: 12, prevote: 12, commit: 8 };
        c.protocol.unlock_rule = self.unlock_rule;
        c.protocol.one_shot = self.one_shot;
        c.horizon.heights = Some(self.heights);
        c.horizon.time = if mode == NetworkMode::Asynchronous { 4_000 } else { 20_000 };
        c.adversary = AdversarySpec::Random {
            mix: self.mixes[(i as usize / (self.sizes.len() * self.modes.len())) % self.mixes.len()].clone(),
        };
        if self.targeted {
            let base = crate::scenarios::agreement_violation(self.unlock_rule);
            c.network = base.network;
            c.timeouts = base.timeouts;
            c.protocol = base.protocol;
            c.horizon = base.horizon;
            c.adversary = AdversarySpec::SplitLock { spread: 2 };
        }
        c.mempool_seed = seed;
        c
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub run: u64,
    pub seed: u64,
    pub properties: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub campaign: String,
    pub runs: u64,
    /// Violation count per safety property.
    pub violations: BTreeMap<String, u64>,
    pub decided_runs: u64,
    pub assumption_t_runs: u64,
    /// Repeated-mode runs where the side-condition held but some correct validator did not decide.
    pub termination_gaps: u64,
    pub failures: Vec<Failure>,
}

pub const SAFETY_PROPERTIES: [&str; 3] = ["integrity", "validity", "agreement"];

/// Runs a campaign; each failing run's config is returned for persistence.
pub fn fuzz(campaign: &Campaign) -> (FuzzSummary, Vec<RunConfig>) {
    let mut violations: BTreeMap<String, u64> = SAFETY_PROPERTIES.iter().map(|p| (p.to_string(), 0)).collect();
    let (mut decided, mut with_t, mut gaps) = (0, 0, 0);
    let mut failures = Vec::new();
    let mut repro = Vec::new();
    for i in 0..campaign.runs {
        let cfg = campaign.config(i);
        let out = run(&cfg);
        let mut bad = Vec::new();
        for p in SAFETY_PROPERTIES {
            if out.report.status(p) == Some(Status::Violated) {
                *violations.get_mut(p).expect("listed") += 1;
                bad.push(p.to_string());
            }
        }
        let terminated = out.report.status("termination") == Some(Status::Pass);
        let t = out.report.status("assumption_t") == Some(Status::Present);
        decided += u64::from(terminated);
        with_t += u64::from(t);
        // One-shot processes halt on deciding, so a laggard can be left short of a quorum.
        if t && !terminated && !cfg.protocol.one_shot && cfg.network.mode != NetworkMode::Asynchronous {
            gaps += 1;
            bad.push("termination".to_string());
        }
        if !bad.is_empty() {
            failures.push(Failure { run: i, seed: cfg.seed, properties: bad });
            repro.push(cfg);
        }
    }
    let summary = FuzzSummary {
        campaign: campaign.name.clone(),
        runs: campaign.runs,
        violations,
        decided_runs: decided,
        assumption_t_runs: with_t,
        termination_gaps: gaps,
        failures,
    };
    (summary, repro)
}

/// Writes the summary and one reproducer config per failing run.
pub fn write_fuzz_artifacts(dir: &Path, summary: &FuzzSummary, repro: &[RunConfig]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(summary).expect("serializes") + "\n")?;
    for c in repro {
        fs::write(dir.join(format!("repro-{}.toml", c.name)), c.to_toml())?;
    }
    Ok(())
}
