//! Total-order URB on top of FIFO-URB and three recycled consensus slots.
//!
//! Each do-forever iteration of a node is split into a start (stale-slot
//! cleanup, new query number, SYNC to everyone) and a finish that runs once a
//! SYNCack for the current query arrived from every trusted node
//! (aggregate, reconcile, recycle, propose, deliver). The simulator drives the
//! two halves so that each atomic step stays a single communication
//! operation.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::consensus::{Ctx, Effects, Outcome, Slot};
use crate::fifo_urb::{Delivery, FifoUrb};
use crate::smr::{Replica, ReplicaState};
use crate::types::{Message, NodeId, NodeSet, Outgoing, Proposal, ReadyVector};

pub type Slots = [Option<Slot>; 3];

/// One SYNCack payload.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncReply {
    pub seq: u64,
    pub obs: u64,
    pub ready: ReadyVector,
}

/// Result of aggregating one reply set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregate {
    pub all_ready: ReadyVector,
    pub max_seq: u64,
    pub all_seq: BTreeSet<u64>,
}

/// Round numbers held by active slots.
pub fn act_cs(cs: &Slots) -> BTreeSet<u64> {
    cs.iter().flatten().map(|s| s.seq).collect()
}

pub fn get_seq(obs_s: u64, cs: &Slots) -> u64 {
    cs.iter().flatten().map(|s| s.seq).fold(obs_s, u64::max)
}

/// The stale-information condition: a slot at the wrong index, a round number
/// below `obs_s`, or active rounds that are not one or two consecutive values.
pub fn needs_cleanup(obs_s: u64, cs: &Slots) -> bool {
    needs_cleanup_seqs(obs_s, &slot_seqs(cs))
}

/// Round number of each slot, `None` when inactive.
pub fn slot_seqs(cs: &Slots) -> [Option<u64>; 3] {
    [0, 1, 2].map(|k| cs[k].as_ref().map(|s| s.seq))
}

/// [`needs_cleanup`] over bare slot round numbers.
pub fn needs_cleanup_seqs(obs_s: u64, seqs: &[Option<u64>]) -> bool {
    let misplaced = seqs.iter().enumerate().any(|(k, s)| s.is_some_and(|s| s % 3 != k as u64));
    let lo = seqs.iter().flatten().min();
    let hi = seqs.iter().flatten().max();
    let inconsistent = match (lo, hi) {
        (Some(&lo), Some(&hi)) => obs_s > hi || hi - lo > 1,
        _ => false,
    };
    misplaced || inconsistent
}

pub fn stale_cleanup(obs_s: u64, cs: &mut Slots) -> bool {
    let fire = needs_cleanup(obs_s, cs);
    if fire {
        *cs = [None, None, None];
    }
    fire
}

/// Entry-wise minimum of the ready vectors, maximum of the round numbers and
/// the set of every reported round number.
pub fn aggregate<'a>(replies: impl IntoIterator<Item = &'a SyncReply>) -> Option<Aggregate> {
    let replies: Vec<&SyncReply> = replies.into_iter().collect();
    let all_ready = ReadyVector::entrywise_min(replies.iter().map(|r| &r.ready))?;
    let max_seq = replies.iter().map(|r| r.seq).max()?;
    let all_seq = replies.iter().flat_map(|r| [r.seq, r.obs]).collect();
    Some(Aggregate { all_ready, max_seq, all_seq })
}

/// New `obs_s` for `(x, y, z) = (obs_s, getSeq, maxSeq)`, or `None` when the
/// triple matches one of the three legal patterns.
pub fn reconcile(x: u64, y: u64, z: u64) -> Option<u64> {
    let legal = (x.checked_add(1) == Some(y) && y == z) || (x == y && y == z) || (x == y && y.checked_add(1) == Some(z));
    (!legal).then(|| x.max(y).max(z))
}

/// Slot indices that survive recycling.
pub fn keep_set(obs_s: u64, get_seq: u64, max_seq: u64, all_seq_len: usize) -> [bool; 3] {
    let mut keep = [false; 3];
    if obs_s < get_seq {
        keep[(obs_s % 3) as usize] = true;
    }
    keep[(get_seq % 3) as usize] = true;
    if all_seq_len == 1 {
        keep[(max_seq.wrapping_add(1) % 3) as usize] = true;
    }
    keep
}

/// Flush rule: enough ready messages, or some ready and no own
/// transmission still in progress.
pub fn exceed(ell: u64, all_terminated: bool, delta: u64) -> bool {
    (all_terminated && ell > 0) || delta <= ell
}

/// Inputs of a propose decision, recorded for the trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposeRecord {
    pub value: Proposal,
    pub ell: u64,
    pub all_terminated: bool,
    pub delta: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub seq: u64,
    /// False when the slot returned the internal-error result.
    pub decided: bool,
    pub deliveries: Vec<Delivery>,
    pub adopted: Option<ReplicaState>,
    pub resulting: Option<ReplicaState>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IterationReport {
    pub aggregate: Aggregate,
    pub proposed: Option<ProposeRecord>,
    pub round: Option<RoundRecord>,
    /// Decisions reached locally while proposing.
    pub decided: Vec<Proposal>,
    /// A counter reached the overflow bound.
    pub restart: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToUrb {
    me: NodeId,
    n: usize,
    delta: u64,
    max_counter: u64,
    pub(crate) cs: Slots,
    pub(crate) obs_s: u64,
    pub(crate) next_query: u64,
    pub(crate) querying: bool,
    pub(crate) replies: BTreeMap<NodeId, SyncReply>,
    pub(crate) last: Option<Aggregate>,
    /// Peers that reported having passed round `obs_s + 1` without a slot.
    pub(crate) passed: NodeSet,
    /// Peers waiting for round `obs_s + 1` without a value for it.
    pub(crate) empty_handed: NodeSet,
}

impl ToUrb {
    pub fn new(me: NodeId, n: usize, delta: u64, max_counter: u64) -> Self {
        ToUrb {
            me,
            n,
            delta: delta.max(1),
            max_counter,
            cs: [None, None, None],
            obs_s: 0,
            next_query: 0,
            querying: false,
            replies: BTreeMap::new(),
            last: None,
            passed: NodeSet::empty(),
            empty_handed: NodeSet::empty(),
        }
    }

    pub fn obs_s(&self) -> u64 {
        self.obs_s
    }

    pub fn next_query(&self) -> u64 {
        self.next_query
    }

    pub fn slots(&self) -> &Slots {
        &self.cs
    }

    pub fn get_seq(&self) -> u64 {
        get_seq(self.obs_s, &self.cs)
    }

    pub fn querying(&self) -> bool {
        self.querying
    }

    pub fn last_aggregate(&self) -> Option<&Aggregate> {
        self.last.as_ref()
    }

    pub fn delta(&self) -> u64 {
        self.delta
    }

    fn ctx(&self, trusted: NodeSet) -> Ctx {
        Ctx { me: self.me, n: self.n, trusted, max_counter: self.max_counter }
    }

    /// Cleanup plus a fresh query. Returns `(cleanup fired, overflow)`.
    pub fn start_iteration(&mut self, out: &mut Vec<Outgoing>) -> (bool, bool) {
        let fired = stale_cleanup(self.obs_s, &mut self.cs);
        self.next_query = self.next_query.saturating_add(1);
        self.querying = true;
        self.replies.clear();
        self.resend_sync(out);
        (fired, self.next_query >= self.max_counter)
    }

    /// SYNC to every node that has not answered the current query.
    pub fn resend_sync(&self, out: &mut Vec<Outgoing>) {
        if !self.querying {
            return;
        }
        for dst in (0..self.n).filter(|d| !self.replies.contains_key(d)) {
            out.push(Outgoing { dst, msg: Message::Sync { qn: self.next_query } });
        }
    }

    pub fn on_sync(&self, from: NodeId, qn: u64, urb: &FifoUrb) -> Outgoing {
        Outgoing {
            dst: from,
            msg: Message::SyncAck { qn, seq: self.get_seq(), obs: self.obs_s, ready: urb.max_ready() },
        }
    }

    pub fn on_sync_ack(&mut self, from: NodeId, qn: u64, reply: SyncReply) {
        if self.querying && qn == self.next_query && from < self.n {
            self.replies.insert(from, reply);
        }
    }

    pub fn ready_to_finish(&self, trusted: NodeSet) -> bool {
        self.querying && trusted.iter().all(|j| self.replies.contains_key(&j))
    }

    /// Aggregate, reconcile, recycle, propose and deliver. `replica` is
    /// present in replication mode.
    pub fn finish_iteration(
        &mut self,
        urb: &mut FifoUrb,
        trusted: NodeSet,
        replica: Option<&mut Replica>,
        out: &mut Vec<Outgoing>,
    ) -> IterationReport {
        self.querying = false;
        // the own reply is taken now rather than when the SYNC looped back
        let own = SyncReply { seq: self.get_seq(), obs: self.obs_s, ready: urb.max_ready() };
        self.replies.insert(self.me, own);
        let agg = aggregate(self.replies.values()).unwrap_or_else(|| Aggregate {
            all_ready: urb.max_ready(),
            max_seq: self.get_seq(),
            all_seq: [self.get_seq(), self.obs_s].into_iter().collect(),
        });
        self.replies.clear();

        if let Some(obs) = reconcile(self.obs_s, self.get_seq(), agg.max_seq) {
            self.obs_s = obs;
        }

        let keep = keep_set(self.obs_s, self.get_seq(), agg.max_seq, agg.all_seq.len());
        for (k, slot) in self.cs.iter_mut().enumerate() {
            if !keep[k] {
                *slot = None;
            }
        }

        let mut proposed = None;
        let mut decided = Vec::new();
        let ell = urb.ready_undelivered();
        let all_terminated = urb.all_have_terminated(trusted);
        if agg.all_seq.len() == 1 && exceed(ell, all_terminated, self.delta) {
            let seq = agg.max_seq.saturating_add(1);
            let value = Proposal {
                seq,
                ready: agg.all_ready.clone(),
                state: replica.as_ref().map(|r| r.get_state()),
            };
            let idx = (seq % 3) as usize;
            match &mut self.cs[idx] {
                Some(slot) => slot.propose(value.clone()),
                None => self.cs[idx] = Some(Slot::proposed(value.clone(), self.n)),
            }
            let ctx = self.ctx(trusted);
            if let Some(slot) = &mut self.cs[idx] {
                decided.extend(slot.tick(&ctx, out).decided);
            }
            proposed = Some(ProposeRecord { value, ell, all_terminated, delta: self.delta });
        }

        let mut round = None;
        let mut restart = false;
        let target = self.obs_s.saturating_add(1);
        if target == self.get_seq() {
            if let Some(slot) = &self.cs[(target % 3) as usize] {
                if slot.seq == target {
                    match slot.result().clone() {
                        Outcome::Undecided => {}
                        Outcome::Error => {
                            round = Some(RoundRecord { seq: target, decided: false, deliveries: Vec::new(), adopted: None, resulting: None });
                        }
                        Outcome::Decided(v) => {
                            let deliveries = urb.bulk_read(&v.ready);
                            let mut adopted = None;
                            let mut resulting = None;
                            if let Some(r) = replica {
                                if let Some(s) = v.state {
                                    r.set_state(s);
                                }
                                adopted = Some(r.get_state());
                                for d in &deliveries {
                                    r.apply(&d.payload.text);
                                }
                                resulting = Some(r.get_state());
                            }
                            round = Some(RoundRecord { seq: target, decided: true, deliveries, adopted, resulting });
                        }
                    }
                    if round.is_some() {
                        self.obs_s = target;
                        restart = self.obs_s >= self.max_counter;
                    }
                }
            }
        }
        self.passed = NodeSet::empty();
        self.empty_handed = NodeSet::empty();
        let next = self.obs_s.saturating_add(1);
        let own = self.cs[(next % 3) as usize].as_ref().filter(|s| s.seq == next);
        let waiting = own.is_none_or(|s| matches!(s.result(), Outcome::Undecided));
        if agg.max_seq == next && waiting {
            for dst in trusted.iter().filter(|&d| d != self.me) {
                out.push(Outgoing { dst, msg: Message::ConsQuery { seq: next } });
            }
        }
        self.last = Some(agg.clone());
        IterationReport { aggregate: agg, proposed, round, decided, restart }
    }

    /// Routes a consensus message to its slot, activating an idle slot for
    /// the round right after `obs_s`.
    pub fn on_consensus(&mut self, trusted: NodeSet, from: NodeId, msg: Message, out: &mut Vec<Outgoing>) -> Effects {
        let Some(seq) = msg.consensus_seq() else { return Effects::default() };
        let ctx = self.ctx(trusted);
        let idx = (seq % 3) as usize;
        match msg {
            Message::ConsQuery { .. } => {
                let reply = match &self.cs[idx] {
                    Some(s) if s.seq == seq => match s.result() {
                        Outcome::Decided(value) => Some(Message::ConsDec { seq, value: value.clone() }),
                        Outcome::Error if seq <= self.obs_s => Some(Message::ConsPassed { seq }),
                        _ if s.is_empty_handed() => Some(Message::ConsNoValue { seq }),
                        _ => None,
                    },
                    _ if seq <= self.obs_s => Some(Message::ConsPassed { seq }),
                    _ if seq == self.obs_s.wrapping_add(1) => Some(Message::ConsNoValue { seq }),
                    _ => None,
                };
                out.extend(reply.map(|msg| Outgoing { dst: from, msg }));
                return Effects::default();
            }
            Message::ConsPassed { .. } | Message::ConsNoValue { .. } => {
                if seq == self.obs_s.wrapping_add(1) && from < self.n {
                    if matches!(msg, Message::ConsPassed { .. }) {
                        self.passed.insert(from);
                    } else {
                        self.empty_handed.insert(from);
                    }
                    let mut others = trusted;
                    others.remove(self.me);
                    let answered = NodeSet(self.passed.0 | self.empty_handed.0);
                    if !self.passed.is_empty() && answered.is_superset(others) {
                        self.abandon(seq);
                    }
                }
                return Effects::default();
            }
            _ => {}
        }
        match &mut self.cs[idx] {
            Some(slot) if slot.seq == seq => slot.on_message(&ctx, from, msg, out),
            None if seq == self.obs_s.wrapping_add(1) && !matches!(msg, Message::ConsDecAck { .. }) => {
                // finished rounds below obsS would otherwise sit next to the
                // joined round and trip the stale-slot cleanup
                let obs = self.obs_s;
                for s in self.cs.iter_mut() {
                    if s.as_ref().is_some_and(|s| s.seq < obs) {
                        *s = None;
                    }
                }
                let mut slot = Slot::joined(seq, self.n);
                let fx = slot.on_message(&ctx, from, msg, out);
                self.cs[idx] = Some(slot);
                fx
            }
            _ => {
                if seq <= self.obs_s {
                    match msg {
                        Message::ConsDec { .. } => out.push(Outgoing { dst: from, msg: Message::ConsDecAck { seq } }),
                        Message::ConsDecAck { .. } => {}
                        _ => out.push(Outgoing { dst: from, msg: Message::ConsPassed { seq } }),
                    }
                }
                Effects::default()
            }
        }
    }

    /// Every trusted peer is past `seq` without a slot for it or waiting for
    /// it without a value, and at least one is past it, so the round can
    /// never be decided: its slot ends with the error result.
    fn abandon(&mut self, seq: u64) {
        let idx = (seq % 3) as usize;
        match &mut self.cs[idx] {
            Some(s) if s.seq == seq => {
                if matches!(s.result(), Outcome::Undecided) {
                    s.result = Outcome::Error;
                }
            }
            _ => {
                let mut s = Slot::joined(seq, self.n);
                s.result = Outcome::Error;
                self.cs[idx] = Some(s);
            }
        }
    }

    /// Periodic consensus work for every active slot. Returns decisions
    /// produced during the step.
    pub fn tick_slots(&mut self, trusted: NodeSet, out: &mut Vec<Outgoing>) -> Vec<Proposal> {
        let ctx = self.ctx(trusted);
        self.cs.iter_mut().flatten().filter_map(|s| s.tick(&ctx, out).decided).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::Outcome;

    fn slot(seq: u64) -> Option<Slot> {
        Some(Slot::joined(seq, 3))
    }

    fn reply(seq: u64, obs: u64, r: Vec<u64>) -> SyncReply {
        SyncReply { seq, obs, ready: ReadyVector(r) }
    }

    #[test]
    fn act_cs_and_get_seq() {
        assert!(act_cs(&[None, None, None]).is_empty());
        assert_eq!(act_cs(&[None, slot(4), None]), [4].into());
        assert_eq!(act_cs(&[slot(3), slot(4), None]), [3, 4].into());
        assert_eq!(get_seq(5, &[None, None, None]), 5);
        assert_eq!(get_seq(5, &[slot(6), None, None]), 6);
        assert_eq!(get_seq(9, &[slot(3), None, None]), 9);
    }

    #[test]
    fn cleanup_condition() {
        assert!(needs_cleanup(0, &[None, None, slot(4)]));
        assert!(needs_cleanup(0, &[slot(3), None, slot(5)]));
        assert!(!needs_cleanup(4, &[None, slot(4), slot(5)]));
        assert!(needs_cleanup(9, &[slot(3), None, None]));
        let mut cs = [slot(3), None, slot(5)];
        assert!(stale_cleanup(0, &mut cs));
        assert!(act_cs(&cs).is_empty());
    }

    #[test]
    fn aggregate_examples() {
        let x = [reply(4, 4, vec![3, 5]), reply(4, 4, vec![4, 2])];
        let a = aggregate(&x).unwrap();
        assert_eq!(a.all_ready, ReadyVector(vec![3, 2]));
        assert_eq!(a.max_seq, 4);
        assert_eq!(a.all_seq, [4].into());
        let y = [reply(4, 3, vec![0]), reply(3, 3, vec![0])];
        assert!(aggregate(&y).unwrap().all_seq.len() > 1);
    }

    #[test]
    fn reconcile_examples() {
        assert_eq!(reconcile(4, 5, 5), None);
        assert_eq!(reconcile(4, 4, 5), None);
        assert_eq!(reconcile(4, 4, 4), None);
        assert_eq!(reconcile(2, 7, 7), Some(7));
    }

    #[test]
    fn keep_set_examples() {
        assert_eq!(keep_set(4, 4, 4, 1), [false, true, true]);
        assert_eq!(keep_set(4, 5, 5, 2), [false, true, true]);
        assert_eq!(keep_set(4, 4, 4, 2), [false, true, false]);
    }

    #[test]
    fn exceed_examples() {
        assert!(!exceed(0, true, 5));
        assert!(!exceed(2, false, 5));
        assert!(exceed(5, false, 5));
        assert!(exceed(1, true, 5));
    }

    #[test]
    fn sync_reply_of_fresh_node() {
        let t = ToUrb::new(0, 3, 5, 1 << 20);
        let urb = FifoUrb::new(0, 3, 64, 4);
        let o = t.on_sync(2, 1, &urb);
        assert_eq!(o.msg, Message::SyncAck { qn: 1, seq: 0, obs: 0, ready: ReadyVector(vec![0, 0, 0]) });
    }

    #[test]
    fn begin_query_sends_to_everyone_including_self() {
        let mut t = ToUrb::new(1, 3, 5, 1 << 20);
        t.next_query = 7;
        let mut out = Vec::new();
        t.start_iteration(&mut out);
        assert_eq!(t.next_query(), 8);
        let dsts: Vec<usize> = out.iter().map(|o| o.dst).collect();
        assert_eq!(dsts, vec![0, 1, 2]);
        assert!(out.iter().all(|o| o.msg == Message::Sync { qn: 8 }));
    }

    #[test]
    fn round_passed_by_every_peer_is_abandoned() {
        let mut to = ToUrb::new(0, 3, 1, 1 << 20);
        to.obs_s = 4;
        let mut out = Vec::new();
        to.on_consensus(NodeSet::all(3), 1, Message::ConsPassed { seq: 5 }, &mut out);
        assert!(to.cs.iter().all(Option::is_none));
        to.on_consensus(NodeSet::all(3), 2, Message::ConsPassed { seq: 5 }, &mut out);
        let slot = to.cs[2].as_ref().unwrap();
        assert_eq!((slot.seq, slot.result()), (5, &Outcome::Error));
    }

    #[test]
    fn waiting_peers_without_value_do_not_block_abandonment() {
        let mut to = ToUrb::new(0, 3, 1, 1 << 20);
        to.obs_s = 4;
        let mut out = Vec::new();
        to.on_consensus(NodeSet::all(3), 1, Message::ConsNoValue { seq: 5 }, &mut out);
        to.on_consensus(NodeSet::all(3), 2, Message::ConsNoValue { seq: 5 }, &mut out);
        assert!(to.cs.iter().all(Option::is_none));
        to.on_consensus(NodeSet::all(3), 2, Message::ConsPassed { seq: 5 }, &mut out);
        assert_eq!(to.cs[2].as_ref().map(|s| s.result()), Some(&Outcome::Error));
    }

    #[test]
    fn waiting_node_reports_no_value_unless_it_holds_one() {
        let mut to = ToUrb::new(1, 3, 1, 1 << 20);
        to.obs_s = 4;
        let mut out = Vec::new();
        to.on_consensus(NodeSet::all(3), 0, Message::ConsQuery { seq: 5 }, &mut out);
        assert_eq!(out, vec![Outgoing { dst: 0, msg: Message::ConsNoValue { seq: 5 } }]);
        out.clear();
        let value = Proposal { seq: 5, ready: ReadyVector(vec![0, 0, 0]), state: None };
        to.cs[2] = Some(Slot::proposed(value, 3));
        to.on_consensus(NodeSet::all(3), 0, Message::ConsQuery { seq: 5 }, &mut out);
        assert!(out.is_empty());
    }

    #[test]
    fn query_is_answered_by_decision_or_passed() {
        let mut to = ToUrb::new(1, 3, 1, 1 << 20);
        to.obs_s = 5;
        let mut out = Vec::new();
        to.on_consensus(NodeSet::all(3), 0, Message::ConsQuery { seq: 5 }, &mut out);
        assert_eq!(out, vec![Outgoing { dst: 0, msg: Message::ConsPassed { seq: 5 } }]);
        out.clear();
        let value = Proposal { seq: 5, ready: ReadyVector(vec![0, 0, 0]), state: None };
        let mut s = Slot::joined(5, 3);
        s.result = Outcome::Decided(value.clone());
        to.cs[2] = Some(s);
        to.on_consensus(NodeSet::all(3), 0, Message::ConsQuery { seq: 5 }, &mut out);
        assert_eq!(out, vec![Outgoing { dst: 0, msg: Message::ConsDec { seq: 5, value } }]);
    }

    #[test]
    fn stale_ack_is_ignored() {
        let mut t = ToUrb::new(0, 2, 5, 1 << 20);
        t.next_query = 7;
        t.start_iteration(&mut Vec::new());
        t.on_sync_ack(1, 5, reply(0, 0, vec![0, 0]));
        assert!(t.replies.is_empty());
        t.on_sync_ack(1, 8, reply(0, 0, vec![0, 0]));
        assert_eq!(t.replies.len(), 1);
    }

    #[test]
    fn error_result_advances_without_delivery() {
        let mut t = ToUrb::new(0, 1, 5, 1 << 20);
        let mut urb = FifoUrb::new(0, 1, 64, 4);
        let mut s = Slot::joined(1, 1);
        s.result = Outcome::Error;
        t.cs[1] = Some(s);
        t.start_iteration(&mut Vec::new());
        t.on_sync_ack(0, 1, reply(1, 0, vec![0]));
        let rep = t.finish_iteration(&mut urb, NodeSet::all(1), None, &mut Vec::new());
        assert_eq!(rep.round.map(|r| r.decided), Some(false));
        assert_eq!(t.obs_s(), 1);
    }

    #[test]
    fn single_node_round_delivers_its_message() {
        let mut t = ToUrb::new(0, 1, 5, 1 << 20);
        let mut urb = FifoUrb::new(0, 1, 64, 4);
        let mut out = Vec::new();
        urb.broadcast(crate::types::AppMessage::new("m"), &mut out).unwrap();
        urb.refresh_ready(NodeSet::all(1));
        // iteration 1 proposes, iteration 2 delivers
        for _ in 0..2 {
            t.start_iteration(&mut out);
            let o = t.on_sync(0, t.next_query(), &urb);
            if let Message::SyncAck { qn, seq, obs, ready } = o.msg {
                t.on_sync_ack(0, qn, SyncReply { seq, obs, ready });
            }
            let rep = t.finish_iteration(&mut urb, NodeSet::all(1), None, &mut out);
            if let Some(r) = rep.round {
                assert_eq!(r.deliveries.len(), 1);
                assert_eq!(r.deliveries[0].number, 1);
            }
        }
        assert_eq!(t.obs_s(), 1);
    }
}
