//! Just-in-time prevotes from the faulty p4 that keep p1 and p3 locked on
//! different blocks at ever higher rounds, so no proposer is ever followed.

use crate::oneshot::{proposer, Step, TimerKind};
use crate::types::{MsgKind, ProcessId, Round};

use super::script::{Action, ValueRef, When};

const BYZ: u32 = 4;

/// Run with n = 4, p4 faulty, prevote timer armed after a mixed quorum,
/// stabilization after round 1's votes are out and delta of at least 2.
pub fn livelock(rounds: Round) -> Vec<Action> {
    use MsgKind::{Prevote, Propose};
    let correct = [1u32, 2, 3];
    let mut a = vec![
        // Round 1: p1 alone sees a v1 quorum; p2 and p3 see p4's nil and each other's vote late.
        Action::Send {
            signer: BYZ,
            kind: Prevote,
            round: 1,
            value: ValueRef::Proposal { round: 1 },
            polc: None,
            to: vec![1],
            when: When::step(1, 1, Step::Prevote, 1),
        },
        Action::Send {
            signer: BYZ,
            kind: Prevote,
            round: 1,
            value: ValueRef::Nil,
            polc: None,
            to: vec![2, 3],
            when: When::step(1, 1, Step::Prevote, 1),
        },
        Action::Hold { kind: Prevote, round: 1, signer: Some(3), to: 2, until: Some(When::step(2, 1, Step::Precommit, 1)) },
        Action::Hold { kind: Prevote, round: 1, signer: Some(2), to: 3, until: Some(When::step(3, 1, Step::Precommit, 1)) },
    ];
    // Round 6: p4's round-4 proposal (v1, 1) shows up late and sets everyone's pointer to 1.
    for p in correct {
        a.push(Action::Send {
            signer: BYZ,
            kind: Propose,
            round: 4,
            value: ValueRef::Proposal { round: 1 },
            polc: Some(1),
            to: vec![p],
            when: When::step(p, 6, Step::Prevote, 1),
        });
    }
    let validators = ProcessId::roster(4);
    for r in 3..=rounds {
        let fav = proposer(&validators, 1, r, 0).0;
        if fav != 1 && fav != 3 {
            continue;
        }
        a.push(Action::Send {
            signer: BYZ,
            kind: Prevote,
            round: r,
            value: ValueRef::Proposal { round: r },
            polc: None,
            to: vec![fav],
            when: When::expiry(fav, r, TimerKind::Prevote, -1),
        });
        for q in correct.into_iter().filter(|q| *q != fav) {
            a.push(Action::Hold { kind: Prevote, round: r, signer: Some(BYZ), to: q, until: Some(When::step(q, r, Step::Precommit, 1)) });
        }
    }
    a
}
