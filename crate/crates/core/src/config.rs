//! Run and scenario configuration (TOML).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::check::Status;
use crate::fairness::Mechanism;
use crate::netsim::{NetworkMode, NetworkModel, StopRule};
use crate::oneshot::{OneShotConfig, PrevoteTimer, UnlockRule};
use crate::quorum::max_faults;
use crate::repeated::Selector;
use crate::types::{ProcessId, Round, Time};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timeouts {
    pub propose: u64,
    pub prevote: u64,
    pub commit: u64,
}

impl Default for Timeouts {
    fn default() -> Self {
        Timeouts { propose: 10, prevote: 10, commit: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Protocol {
    pub unlock_rule: UnlockRule,
    pub prevote_timer: PrevoteTimer,
    pub check_proposer: bool,
    pub proposer_offset: usize,
    /// Halt every process after its first decision.
    pub one_shot: bool,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            unlock_rule: UnlockRule::Corrected,
            prevote_timer: PrevoteTimer::AfterQuorum,
            check_proposer: true,
            proposer_offset: 0,
            one_shot: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Reward {
    pub mechanism: Mechanism,
    pub tail_window: u64,
}

impl Default for Reward {
    fn default() -> Self {
        Reward { mechanism: Mechanism::Original, tail_window: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizon {
    #[serde(default)]
    pub heights: Option<u64>,
    #[serde(default)]
    pub rounds: Option<Round>,
    pub time: Time,
    #[serde(default = "default_max_events")]
    pub max_events: u64,
}

fn default_max_events() -> u64 {
    5_000_000
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon { heights: Some(10), rounds: None, time: 100_000, max_events: default_max_events() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Silent,
    Equivocate,
    SelectiveSend,
    StaleReplay,
    InvalidProposal,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Silent,
        Strategy::Equivocate,
        Strategy::SelectiveSend,
        Strategy::StaleReplay,
        Strategy::InvalidProposal,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversarySpec {
    /// Model-drawn delays, Byzantine processes silent.
    #[default]
    None,
    /// Seeded Byzantine behavior drawn from `mix`, plus seeded pre-stabilization delays.
    Random { mix: Vec<Strategy> },
    /// The lock-split schedule with seeded timing perturbations of up to `spread` ticks.
    SplitLock { spread: i64 },
    /// Six-round schedule ending with two conflicting decisions under the legacy unlock rule.
    AgreementViolation,
    /// Just-in-time prevotes that keep correct processes locked on different blocks.
    Livelock,
    /// A declarative schedule for height 1.
    Script { actions: Vec<crate::adversary::script::Action> },
    /// `victim`'s proposals and commits take `delay`; all other traffic takes one tick.
    SlowValidator { victim: u32, delay: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Validators per height.
    pub n: usize,
    /// Total processes; defaults to `n`.
    #[serde(default)]
    pub processes: Option<usize>,
    #[serde(default)]
    pub byzantine: Vec<u32>,
    /// Fault bound; defaults to the largest the thresholds tolerate.
    #[serde(default)]
    pub f: Option<usize>,
    /// Permit f >= n/3.
    #[serde(default, rename = "unsafe")]
    pub unsafe_faults: bool,
    #[serde(default)]
    pub seed: u64,
    pub network: NetworkModel,
    #[serde(default)]
    pub timeouts: Timeouts,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default)]
    pub reward: Reward,
    #[serde(default)]
    pub selector: Option<Selector>,
    #[serde(default)]
    pub horizon: Horizon,
    #[serde(default)]
    pub adversary: AdversarySpec,
    #[serde(default)]
    pub mempool_seed: u64,
    /// Expected verdict status per property.
    #[serde(default)]
    pub expect: BTreeMap<String, Status>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// A small honest run: `n` validators, synchronous network.
    pub fn honest(name: &str, n: usize, seed: u64) -> RunConfig {
        RunConfig {
            name: name.into(),
            description: String::new(),
            n,
            processes: None,
            byzantine: Vec::new(),
            f: None,
            unsafe_faults: false,
            seed,
            network: NetworkModel::synchronous(3),
            timeouts: Timeouts::default(),
            protocol: Protocol::default(),
            reward: Reward::default(),
            selector: None,
            horizon: Horizon::default(),
            adversary: AdversarySpec::None,
            mempool_seed: 0,
            expect: BTreeMap::new(),
        }
    }

    pub fn roster(&self) -> Vec<ProcessId> {
        ProcessId::roster(self.processes.unwrap_or(self.n))
    }

    pub fn fault_bound(&self) -> usize {
        self.f.unwrap_or_else(|| max_faults(self.n))
    }

    pub fn selector(&self) -> Selector {
        self.selector.clone().unwrap_or(Selector::Static { n: self.n })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let total = self.processes.unwrap_or(self.n);
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if total < self.n {
            return bad(format!("processes ({total}) must be at least n ({})", self.n));
        }
        if self.selector().size() != self.n {
            return bad("selector size must equal n".into());
        }
        if let Some(Selector::StakeRotation { stakes, .. }) = &self.selector {
            if stakes.len() != total {
                return bad(format!("stakes must list {total} entries"));
            }
        }
        for b in &self.byzantine {
            if *b == 0 || *b as usize > total {
                return bad(format!("byzantine process p{b} is not in the roster"));
            }
        }
        let f = self.fault_bound();
        if !self.unsafe_faults {
            if 3 * f >= self.n {
                return bad(format!("f = {f} violates f < n/3 for n = {} (set unsafe = true to override)", self.n));
            }
            if self.byzantine.len() > f {
                return bad(format!("{} byzantine processes exceed f = {f}", self.byzantine.len()));
            }
        }
        let t = &self.timeouts;
        if t.propose == 0 || t.prevote == 0 || t.commit == 0 || self.network.delta == 0 {
            return bad("durations must be positive".into());
        }
        if self.network.mode == NetworkMode::Synchronous && self.network.gst != 0 {
            return bad("synchronous networks stabilize at time 0".into());
        }
        if let Mechanism::Delayed { x: 0 } = self.reward.mechanism {
            return bad("delayed reward needs x >= 1".into());
        }
        if self.horizon.time == 0 {
            return bad("horizon.time must be positive".into());
        }
        if let AdversarySpec::SlowValidator { victim, .. } = self.adversary {
            if victim == 0 || victim as usize > total {
                return bad(format!("victim p{victim} is not in the roster"));
            }
        }
        Ok(())
    }

    pub fn oneshot(&self) -> OneShotConfig {
        OneShotConfig {
            unlock_rule: self.protocol.unlock_rule,
            prevote_timer: self.protocol.prevote_timer,
            check_proposer: self.protocol.check_proposer,
            delta_propose: self.timeouts.propose,
            delta_prevote: self.timeouts.prevote,
            proposer_offset: self.protocol.proposer_offset,
        }
    }

    pub fn stop_rule(&self) -> StopRule {
        StopRule {
            heights: if self.protocol.one_shot { None } else { self.horizon.heights },
            rounds: self.horizon.rounds,
            time: self.horizon.time,
            max_events: self.horizon.max_events,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_toml() {
        let mut c = RunConfig::honest("x", 4, 9);
        c.byzantine = vec![4];
        c.adversary = AdversarySpec::Random { mix: Strategy::ALL.to_vec() };
        c.expect.insert("agreement".into(), Status::Holds);
        c.reward.mechanism = Mechanism::Delayed { x: 2 };
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_too_many_faults() {
        let mut c = RunConfig::honest("x", 4, 1);
        c.f = Some(2);
        assert!(c.validate().is_err());
        c.unsafe_faults = true;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(RunConfig::from_toml("n = \"four\""), Err(ConfigError::Parse(_))));
    }
}
