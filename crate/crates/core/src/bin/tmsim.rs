use std::fs;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tendermint_sim::check::{check_trace, Status};
use tendermint_sim::config::RunConfig;
use tendermint_sim::fairness::Mechanism;
use tendermint_sim::harness::{self, Campaign, SAFETY_PROPERTIES};
use tendermint_sim::oneshot::UnlockRule;
use tendermint_sim::scenarios;
use tendermint_sim::trace::Trace;

const OK: u8 = 0;
const UNEXPECTED: u8 = 1;
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "tmsim", version, about = "Deterministic consensus simulator")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Simulate one configuration and write trace, report and effective config.
    Run(RunArgs),
    /// Run a seeded campaign and persist a reproducer per failing run.
    Fuzz(FuzzArgs),
    /// Re-evaluate every property on a recorded trace.
    Check {
        trace: PathBuf,
        /// Config whose `expect` table decides the exit status.
        #[arg(long)]
        expect: Option<PathBuf>,
    },
    /// Built-in scenarios.
    Scenarios {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    List,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
    #[arg(long)]
    seed: u64,
    /// Artifact directory; defaults to $TMSIM_OUT, then ./tmsim-out.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum)]
    unlock_rule: Option<Unlock>,
    /// original, modulable, modulable_f1_filter or delayed_<x>.
    #[arg(long, value_parser = parse_mechanism)]
    mechanism: Option<Mechanism>,
    #[arg(long)]
    heights: Option<u64>,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long)]
    time: Option<u64>,
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    runs: u64,
    #[arg(long, value_enum, default_value_t = CampaignKind::Safety)]
    campaign: CampaignKind,
    #[arg(long, value_enum, default_value_t = Unlock::Corrected)]
    unlock_rule: Unlock,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CampaignKind {
    Safety,
    Termination,
    Targeted,
}

#[derive(Clone, Copy, ValueEnum)]
enum Unlock {
    Corrected,
    Legacy,
}

impl From<Unlock> for UnlockRule {
    fn from(u: Unlock) -> Self {
        match u {
            Unlock::Corrected => UnlockRule::Corrected,
            Unlock::Legacy => UnlockRule::Legacy,
        }
    }
}

fn parse_mechanism(s: &str) -> Result<Mechanism, String> {
    match s {
        "original" => Ok(Mechanism::Original),
        "modulable" => Ok(Mechanism::Modulable),
        "modulable_f1_filter" => Ok(Mechanism::ModulableF1Filter),
        _ => s
            .strip_prefix("delayed_")
            .and_then(|x| x.parse().ok())
            .map(|x| Mechanism::Delayed { x })
            .ok_or_else(|| format!("unknown mechanism `{s}`")),
    }
}

fn load(args: &RunArgs) -> Result<RunConfig, String> {
    let mut cfg = match (&args.config, &args.scenario) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            RunConfig::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        (None, Some(name)) => scenarios::by_name(name).ok_or_else(|| format!("no scenario named `{name}`"))?,
        (None, None) => return Err("give a config file or --scenario".into()),
    };
    cfg.seed = args.seed;
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(u) = args.unlock_rule {
        cfg.protocol.unlock_rule = u.into();
    }
    if let Some(m) = args.mechanism {
        cfg.reward.mechanism = m;
    }
    if args.heights.is_some() {
        cfg.horizon.heights = args.heights;
    }
    if args.rounds.is_some() {
        cfg.horizon.rounds = args.rounds;
    }
    if let Some(t) = args.time {
        cfg.horizon.time = t;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<u8, String> {
    let cfg = load(&args)?;
    let outcome = harness::run(&cfg);
    let dir = harness::artifact_dir(args.out.as_deref());
    let written = harness::write_artifacts(&dir, &outcome).map_err(|e| format!("{}: {e}", dir.display()))?;
    print!("{}", outcome.report.summary());
    for p in written {
        println!("  wrote {}", p.display());
    }
    Ok(if outcome.report.expectations_met { OK } else { UNEXPECTED })
}

fn fuzz(args: FuzzArgs) -> Result<u8, String> {
    let rule = args.unlock_rule.into();
    let mut campaign = match args.campaign {
        CampaignKind::Safety => Campaign::safety(args.seed, args.runs),
        CampaignKind::Termination => Campaign::termination(args.seed, args.runs),
        CampaignKind::Targeted => Campaign::targeted(args.seed, args.runs, rule),
    };
    campaign.unlock_rule = rule;
    let (summary, repro) = harness::fuzz(&campaign);
    let dir = harness::artifact_dir(args.out.as_deref());
    harness::write_fuzz_artifacts(&dir, &summary, &repro).map_err(|e| format!("{}: {e}", dir.display()))?;
    println!("{}", serde_json::to_string_pretty(&summary).expect("serializes"));
    println!("wrote {}", dir.display());
    // Lock-split schedules under the legacy rule are expected to break agreement.
    let met = if campaign.targeted && rule == UnlockRule::Legacy {
        summary.violations["agreement"] > 0
    } else {
        summary.failures.is_empty()
    };
    Ok(if met { OK } else { UNEXPECTED })
}

fn check(path: PathBuf, expect: Option<PathBuf>) -> Result<u8, String> {
    let file = fs::File::open(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let (trace, truncated) = Trace::read_jsonl(BufReader::new(file)).map_err(|e| format!("{}: {e}", path.display()))?;
    let expected = match expect {
        Some(p) => {
            let text = fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
            Some(RunConfig::from_toml(&text).map_err(|e| format!("{}: {e}", p.display()))?.expect)
        }
        None => None,
    };
    let report = check_trace(&trace, truncated);
    if report.partial {
        println!("trace is truncated; verdicts are partial");
    }
    for v in &report.verdicts {
        println!("{v}");
    }
    let met = match expected {
        Some(want) => want.iter().all(|(p, s)| match report.status(p) {
            None => {
                println!("expected {p} = {s}: not evaluable from the trace alone, skipped");
                true
            }
            Some(got) if got != *s => {
                println!("expected {p} = {s}, got {got}");
                false
            }
            Some(_) => true,
        }),
        None => SAFETY_PROPERTIES.iter().all(|p| report.status(p) != Some(Status::Violated)),
    };
    Ok(if met { OK } else { UNEXPECTED })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.verb {
        Verb::Run(a) => run(a),
        Verb::Fuzz(a) => fuzz(a),
        Verb::Check { trace, expect } => check(trace, expect),
        Verb::Scenarios { action: ScenarioAction::List } => {
            for c in scenarios::all() {
                println!("{:<32} {}", c.name, c.description);
            }
            Ok(OK)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("tmsim: {e}");
            ExitCode::from(USAGE)
        }
    }
}
