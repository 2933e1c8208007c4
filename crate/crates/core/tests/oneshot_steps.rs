use tendermint_sim::block::ChainContext;
use tendermint_sim::oneshot::{proposer, Effect, LockCause, OneShot, OneShotConfig, PrevoteTimer, Step, TimerKind, UnlockRule};
use tendermint_sim::types::{Block, Digest, Message, MsgKind, ProcessId, TxId, Value};

fn p(i: u32) -> ProcessId {
    ProcessId(i)
}

fn block(tag: u64) -> Block {
    Block { height: 1, parent: Block::genesis().digest(), payload: vec![TxId(tag)], last_commit: Default::default() }
}

fn node(me: u32, cfg: OneShotConfig) -> OneShot {
    let ctx = ChainContext::after(&[Block::genesis()]);
    OneShot::new(p(me), 1, ProcessId::roster(4), cfg, ctx, block(u64::from(me)))
}

fn legacy() -> OneShotConfig {
    OneShotConfig { unlock_rule: UnlockRule::Legacy, ..OneShotConfig::default() }
}

fn sent(effects: &[Effect]) -> Vec<&Message> {
    effects
        .iter()
        .filter_map(|e| match e {
            Effect::Broadcast(m) => Some(m),
            _ => None,
        })
        .collect()
}

fn sent_kind(effects: &[Effect], kind: MsgKind) -> Option<&Message> {
    sent(effects).into_iter().find(|m| m.kind == kind)
}

fn timer(effects: &[Effect], kind: TimerKind) -> Option<(u64, u64)> {
    effects.iter().find_map(|e| match e {
        Effect::SetTimer { kind: k, gen, duration, .. } if *k == kind => Some((*gen, *duration)),
        _ => None,
    })
}

fn locks(effects: &[Effect]) -> Vec<(Option<Digest>, i64, LockCause)> {
    effects
        .iter()
        .filter_map(|e| match e {
            Effect::Lock { locked, llr, cause, .. } => Some((*locked, *llr, *cause)),
            _ => None,
        })
        .collect()
}

fn feed(n: &mut OneShot, msgs: &[Message]) -> Vec<Effect> {
    msgs.iter().flat_map(|m| n.on_message(m)).collect()
}

fn prevote(signer: u32, round: u64, value: Value) -> Message {
    Message::prevote(p(signer), 1, round, value, -1)
}

fn precommit(signer: u32, round: u64, value: Value) -> Message {
    Message::precommit(p(signer), 1, round, value)
}

/// p2 locked on block 1 at round 1, then pushed into round 3 by nil precommits for round 2.
fn p2_locked_in_round_three(cfg: OneShotConfig) -> OneShot {
    let mut n = node(2, cfg);
    n.start();
    let b = Value::Block(block(1));
    feed(&mut n, &[Message::propose(p(1), 1, 1, b.clone(), None), prevote(1, 1, b.clone()), prevote(3, 1, b)]);
    assert_eq!(n.llr(), 1);
    feed(&mut n, &[precommit(1, 2, Value::Nil), precommit(3, 2, Value::Nil), precommit(4, 2, Value::Nil)]);
    assert_eq!((n.round(), n.step()), (3, Step::Propose));
    n
}

#[test]
fn proposer_rotates_round_robin() {
    let v = ProcessId::roster(4);
    assert_eq!(proposer(&v, 1, 1, 0), p(1));
    assert_eq!(proposer(&v, 1, 2, 0), p(2));
    assert_eq!(proposer(&v, 2, 1, 0), p(2));
    assert_eq!(proposer(&v, 1, 4, 0), p(4));
    assert_eq!(proposer(&v, 1, 5, 0), p(1));
    assert_eq!(proposer(&v, 1, 1, 2), p(3));
}

#[test]
fn unlocked_proposer_sends_candidate_without_lock_round() {
    let mut n = node(1, OneShotConfig::default());
    let fx = n.start();
    let prop = sent_kind(&fx, MsgKind::Propose).unwrap();
    assert_eq!((prop.round, prop.polc_round, &prop.value), (1, None, &Value::Block(block(1))));
    assert_eq!(sent_kind(&fx, MsgKind::Prevote).unwrap().value, Value::Block(block(1)));
    assert_eq!(n.step(), Step::Prevote);
}

#[test]
fn follower_arms_propose_timer() {
    let mut n = node(2, OneShotConfig::default());
    let fx = n.start();
    assert!(sent(&fx).is_empty());
    assert_eq!(timer(&fx, TimerKind::Propose).map(|t| t.1), Some(10));
    assert!(fx.iter().any(|e| matches!(e, Effect::RoundEntry { round: 1, locked: None, llr: -1, left_polcr: None, .. })));
}

#[test]
fn propose_timeout_prevotes_nil_and_grows() {
    let mut n = node(2, OneShotConfig::default());
    let (gen, _) = timer(&n.start(), TimerKind::Propose).unwrap();
    let fx = n.on_timer(TimerKind::Propose, gen);
    assert!(fx.contains(&Effect::TimeoutBump { kind: TimerKind::Propose, value: 11 }));
    assert_eq!(sent_kind(&fx, MsgKind::Prevote).unwrap().value, Value::Nil);
    assert_eq!(n.timeout_propose(), 11);
}

#[test]
fn stale_timer_generation_is_ignored() {
    let mut n = node(2, OneShotConfig::default());
    let (gen, _) = timer(&n.start(), TimerKind::Propose).unwrap();
    assert!(n.on_timer(TimerKind::Propose, gen + 7).is_empty());
    assert_eq!(n.step(), Step::Propose);
}

#[test]
fn valid_proposal_is_prevoted() {
    let mut n = node(2, OneShotConfig::default());
    n.start();
    let fx = n.on_message(&Message::propose(p(1), 1, 1, Value::Block(block(1)), None));
    assert_eq!(sent_kind(&fx, MsgKind::Prevote).unwrap().value, Value::Block(block(1)));
    assert!(fx.iter().any(|e| matches!(e, Effect::Relay(m) if m.kind == MsgKind::Propose)));
}

#[test]
fn invalid_proposal_gets_nil() {
    let mut n = node(2, OneShotConfig::default());
    n.start();
    let mut bad = block(1);
    bad.parent = Digest([9; 32]);
    let fx = n.on_message(&Message::propose(p(1), 1, 1, Value::Block(bad), None));
    assert_eq!(sent_kind(&fx, MsgKind::Prevote).unwrap().value, Value::Nil);
}

#[test]
fn proposal_from_wrong_proposer_is_quarantined() {
    let mut n = node(2, OneShotConfig::default());
    n.start();
    let fx = n.on_message(&Message::propose(p(3), 1, 1, Value::Block(block(3)), None));
    assert!(matches!(fx.as_slice(), [Effect::Evidence(_)]));
    assert_eq!(n.evidence().len(), 1);
}

#[test]
fn prevote_quorum_locks_and_precommits() {
    let mut n = node(2, OneShotConfig::default());
    n.start();
    let b = Value::Block(block(1));
    let fx = feed(&mut n, &[Message::propose(p(1), 1, 1, b.clone(), None), prevote(1, 1, b.clone()), prevote(3, 1, b.clone())]);
    assert_eq!(locks(&fx), vec![(Some(block(1).digest()), 1, LockCause::Polc)]);
    assert_eq!(sent_kind(&fx, MsgKind::Precommit).unwrap().value, b);
    assert_eq!((n.step(), n.llr()), (Step::Precommit, 1));
}

#[test]
fn precommit_quorum_decides() {
    let mut n = node(2, OneShotConfig::default());
    n.start();
    let b = Value::Block(block(1));
    feed(&mut n, &[Message::propose(p(1), 1, 1, b.clone(), None), prevote(1, 1, b.clone()), prevote(3, 1, b.clone())]);
    let fx = feed(&mut n, &[precommit(1, 1, b.clone()), precommit(3, 1, b)]);
    assert!(fx.contains(&Effect::Decide { round: 1, block: block(1) }));
    assert_eq!(n.decided(), Some(&block(1)));
    assert!(n.on_message(&precommit(4, 1, Value::Nil)).is_empty());
}

#[test]
fn mixed_prevotes_arm_the_prevote_timer() {
    let mut n = node(2, OneShotConfig::default());
    n.start();
    let b = Value::Block(block(1));
    let fx = feed(&mut n, &[Message::propose(p(1), 1, 1, b.clone(), None), prevote(1, 1, b)]);
    assert_eq!(timer(&fx, TimerKind::Prevote), None);
    let fx = n.on_message(&prevote(3, 1, Value::Nil));
    let (gen, duration) = timer(&fx, TimerKind::Prevote).unwrap();
    assert_eq!(duration, 10);
    let fx = n.on_timer(TimerKind::Prevote, gen);
    assert!(fx.contains(&Effect::TimeoutBump { kind: TimerKind::Prevote, value: 11 }));
    assert_eq!(sent_kind(&fx, MsgKind::Precommit).unwrap().value, Value::Nil);
}

#[test]
fn on_entry_timer_starts_with_the_prevote() {
    let mut n = node(2, OneShotConfig { prevote_timer: PrevoteTimer::OnEntry, ..OneShotConfig::default() });
    n.start();
    let fx = n.on_message(&Message::propose(p(1), 1, 1, Value::Block(block(1)), None));
    assert!(sent_kind(&fx, MsgKind::Prevote).is_some());
    assert!(timer(&fx, TimerKind::Prevote).is_some());
}

#[test]
fn nil_quorum_at_precommit_entry_unlocks() {
    let mut n = p2_locked_in_round_three(OneShotConfig::default());
    let fx = feed(
        &mut n,
        &[
            Message::propose(p(3), 1, 3, Value::Block(block(3)), None),
            prevote(1, 3, Value::Nil),
            prevote(3, 3, Value::Nil),
            prevote(4, 3, Value::Nil),
        ],
    );
    assert_eq!(sent_kind(&fx, MsgKind::Prevote).unwrap().value, Value::Block(block(1)));
    // The mixed quorum armed the timer; the later nil quorum is read when it expires.
    let (gen, _) = timer(&fx, TimerKind::Prevote).unwrap();
    let fx = n.on_timer(TimerKind::Prevote, gen);
    assert!(locks(&fx).contains(&(None, -1, LockCause::NilPolc)));
    assert_eq!(n.locked(), None);
}

#[test]
fn locked_proposer_reproposes_with_its_lock_round() {
    let mut n = p2_locked_in_round_three(OneShotConfig::default());
    let fx = feed(&mut n, &[precommit(1, 5, Value::Nil), precommit(3, 5, Value::Nil), precommit(4, 5, Value::Nil)]);
    assert_eq!(n.round(), 6);
    let prop = sent_kind(&fx, MsgKind::Propose).unwrap();
    assert_eq!((prop.round, prop.polc_round, &prop.value), (6, Some(1), &Value::Block(block(1))));
}

#[test]
fn corrected_rule_keeps_a_lock_confirmed_by_a_later_quorum() {
    let mut n = p2_locked_in_round_three(OneShotConfig::default());
    let b = Value::Block(block(1));
    feed(&mut n, &[prevote(1, 2, b.clone()), prevote(3, 2, b.clone()), prevote(4, 2, b.clone())]);
    let fx = n.on_message(&Message::propose(p(3), 1, 3, b.clone(), Some(2)));
    assert!(locks(&fx).is_empty());
    assert_eq!(n.locked(), Some(&block(1)));
    assert_eq!(sent_kind(&fx, MsgKind::Prevote).unwrap().value, b);
}

#[test]
fn legacy_rule_unlocks_on_any_later_quorum() {
    let mut n = p2_locked_in_round_three(legacy());
    let b = Value::Block(block(1));
    feed(&mut n, &[prevote(1, 2, b.clone()), prevote(3, 2, b.clone()), prevote(4, 2, b.clone())]);
    let fx = n.on_message(&Message::propose(p(3), 1, 3, b.clone(), Some(2)));
    assert_eq!(locks(&fx), vec![(None, 1, LockCause::ProposalUnlock)]);
    assert_eq!(sent_kind(&fx, MsgKind::Prevote).unwrap().value, b);
}

#[test]
fn corrected_rule_unlocks_for_a_different_block() {
    let mut n = p2_locked_in_round_three(OneShotConfig::default());
    let other = Value::Block(block(3));
    feed(&mut n, &[prevote(1, 2, other.clone()), prevote(3, 2, other.clone()), prevote(4, 2, other.clone())]);
    let fx = n.on_message(&Message::propose(p(3), 1, 3, other.clone(), Some(2)));
    assert_eq!(locks(&fx), vec![(None, 1, LockCause::ProposalUnlock)]);
    assert_eq!(sent_kind(&fx, MsgKind::Prevote).unwrap().value, other);
}

#[test]
fn unlock_waits_for_the_lock_round_prevotes() {
    let mut n = p2_locked_in_round_three(legacy());
    let b = Value::Block(block(1));
    let fx = n.on_message(&Message::propose(p(3), 1, 3, b.clone(), Some(2)));
    assert!(sent_kind(&fx, MsgKind::Prevote).is_none());
    assert!(timer(&fx, TimerKind::UnlockWait).is_some());
    let fx = feed(&mut n, &[prevote(1, 2, b.clone()), prevote(3, 2, b.clone()), prevote(4, 2, b.clone())]);
    assert_eq!(locks(&fx), vec![(None, 1, LockCause::ProposalUnlock)]);
    assert_eq!(sent_kind(&fx, MsgKind::Prevote).unwrap().value, b);
}

#[test]
fn unlock_wait_expiry_votes_the_lock() {
    let mut n = p2_locked_in_round_three(legacy());
    let fx = n.on_message(&Message::propose(p(3), 1, 3, Value::Block(block(3)), Some(2)));
    let (gen, _) = timer(&fx, TimerKind::UnlockWait).unwrap();
    let fx = n.on_timer(TimerKind::UnlockWait, gen);
    assert_eq!(sent_kind(&fx, MsgKind::Prevote).unwrap().value, Value::Block(block(1)));
    assert!(locks(&fx).is_empty());
}

#[test]
fn equivocating_prevote_is_evidence_only() {
    let mut n = node(2, OneShotConfig::default());
    n.start();
    n.on_message(&prevote(4, 1, Value::Block(block(1))));
    let fx = n.on_message(&prevote(4, 1, Value::Nil));
    assert!(matches!(fx.as_slice(), [Effect::Evidence(_)]));
    let set = n.prevotes(1).unwrap();
    assert_eq!((set.len(), set.count(&Value::Nil)), (1, 0));
    assert!(n.on_message(&prevote(4, 1, Value::Block(block(1)))).is_empty());
}

#[test]
fn future_prevote_quorum_jumps_rounds() {
    let mut n = node(2, OneShotConfig::default());
    n.start();
    let fx = feed(&mut n, &[prevote(1, 4, Value::Nil), prevote(3, 4, Value::Nil), prevote(4, 4, Value::Nil)]);
    assert!(fx.iter().any(|e| matches!(e, Effect::RoundEntry { round: 4, jump: true, .. })));
    assert_eq!(n.round(), 5);
}

#[test]
fn non_validator_messages_are_ignored() {
    let mut n = node(2, OneShotConfig::default());
    n.start();
    assert!(n.on_message(&prevote(9, 1, Value::Nil)).is_empty());
}
