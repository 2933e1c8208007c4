//! Adversaries: scripted counter-example schedules, delay patterns and
//! seeded random Byzantine behavior.

mod agreement;
mod livelock;
mod random;
pub mod script;
mod slow;
mod split;

pub use agreement::agreement_violation;
pub use livelock::livelock;
pub use random::RandomByzantine;
pub use script::Script;
pub use slow::SlowValidator;
pub use split::split_lock;

use crate::config::{AdversarySpec, RunConfig};
use crate::netsim::{Adversary, Benign};

pub fn build(cfg: &RunConfig) -> Box<dyn Adversary> {
    match &cfg.adversary {
        AdversarySpec::None => Box::new(Benign),
        AdversarySpec::Random { mix } => Box::new(RandomByzantine::new(cfg, mix)),
        AdversarySpec::SplitLock { spread } => Box::new(split_lock(cfg.seed, *spread)),
        AdversarySpec::AgreementViolation => Box::new(Script::new(agreement_violation())),
        AdversarySpec::Livelock => Box::new(Script::new(livelock(cfg.horizon.rounds.unwrap_or(100)))),
        AdversarySpec::Script { actions } => Box::new(Script::new(actions.clone())),
        AdversarySpec::SlowValidator { victim, delay } => {
            Box::new(SlowValidator::new(crate::types::ProcessId(*victim), *delay))
        }
    }
}
