//! Six-round schedule in which the faulty p4 walks p2 and p3 through staggered
//! locks on B until p2 decides a fresh block B' after p1 already decided B.
//! Under the legacy unlock rule this splits decisions; under the corrected
//! rule the same schedule lets p2 keep its lock and re-propose B.

use crate::oneshot::Step;
use crate::types::{MsgKind, Round};

use super::script::{Action, ValueRef, When};

const BYZ: u32 = 4;

fn send(kind: MsgKind, round: Round, value: ValueRef, polc: Option<Round>, to: &[u32], when: When) -> Action {
    Action::Send { signer: BYZ, kind, round, value, polc, to: to.to_vec(), when }
}

fn proposal(round: Round) -> ValueRef {
    ValueRef::Proposal { round }
}

fn hold(kind: MsgKind, round: Round, signer: Option<u32>, to: u32, until: Option<When>) -> Action {
    Action::Hold { kind, round, signer, to, until }
}

/// Run with n = 4, p4 faulty, prevote timer armed on step entry, one-shot mode.
pub fn agreement_violation() -> Vec<Action> {
    use MsgKind::{Precommit, Prevote, Propose};
    let mut a = vec![
        // Round 1: p1 and p2 lock B; p3 sees the prevotes only after giving up.
        hold(Prevote, 1, None, 3, Some(When::step(3, 1, Step::Precommit, 1))),
        hold(Precommit, 1, Some(1), 2, None),
        hold(Precommit, 1, Some(1), 3, None),
        send(Prevote, 1, proposal(1), None, &[1, 2], When::step(1, 1, Step::Prevote, 1)),
        send(Precommit, 1, proposal(1), None, &[1, 2, 3], When::step(2, 1, Step::Precommit, 1)),
        // Round 2: only p3 completes the prevote quorum, locking (B, 2).
        send(Prevote, 2, proposal(2), None, &[3], When::step(3, 2, Step::Prevote, 1)),
        hold(Prevote, 2, Some(BYZ), 2, Some(When::step(2, 2, Step::Precommit, 1))),
        // Round 3: p3 re-proposes (B, 2); p2 unlocks, nobody relocks.
        send(Prevote, 3, proposal(3), None, &[3], When::step(3, 3, Step::Precommit, 1)),
        hold(Prevote, 3, Some(BYZ), 2, Some(When::step(2, 3, Step::Precommit, 1))),
        // Round 4: p4 proposes (B, 3), which unlocks p3.
        send(Propose, 4, proposal(3), Some(3), &[2, 3], When::step(3, 4, Step::Propose, 1)),
        // Round 6: p2 proposes B' and decides it with p3's and p4's votes.
        send(Prevote, 6, proposal(6), None, &[2, 3], When::step(3, 6, Step::Prevote, 1)),
        send(Precommit, 6, proposal(6), None, &[2], When::step(2, 6, Step::Precommit, 1)),
        hold(Precommit, 6, Some(BYZ), 3, None),
    ];
    // p1 has left, so p4's nil precommits are what lets p2 and p3 leave rounds 2 to 5.
    for r in 2..=5 {
        a.push(send(Precommit, r, ValueRef::Nil, None, &[2, 3], When::step(2, r, Step::Prevote, 1)));
    }
    a
}
