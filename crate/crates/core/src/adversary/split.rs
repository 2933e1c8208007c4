//! Seeded perturbations of the lock-split schedule, for guided fuzzing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::agreement::agreement_violation;
use super::script::{Action, Script, When};

fn shift(when: &mut When, rng: &mut ChaCha8Rng, spread: i64) {
    when.offset += rng.gen_range(0..=spread);
}

/// The lock-split schedule with every trigger offset shifted by up to `spread`
/// ticks and unscripted copies delayed by up to `spread + 1` ticks.
pub fn split_lock(seed: u64, spread: i64) -> Script {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5b11_7c0c_4a11_0002);
    let mut actions = agreement_violation();
    for a in &mut actions {
        match a {
            Action::Send { when, .. } => shift(when, &mut rng, spread),
            Action::Hold { until: Some(when), .. } => shift(when, &mut rng, spread),
            Action::Hold { until: None, .. } => {}
        }
    }
    Script::new(actions).with_jitter(rng, spread as u64 + 1)
}
