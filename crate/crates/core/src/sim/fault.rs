//! Transient-fault injection: arbitrary but type-valid corruption of node
//! variables and channel contents. Program logic is left untouched.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use super::channel::Channel;
use super::scenario::FaultSpec;
use crate::consensus::{LeaderPhase, Outcome, Slot};
use crate::fifo_urb::Entry;
use crate::node::Node;
use crate::smr::ReplicaState;
use crate::to_urb::SyncReply;
use crate::types::{AppMessage, Message, NodeSet, Proposal, ReadyVector};

/// What one injection changed, for the trace summary.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FaultReport {
    pub nodes_touched: usize,
    pub variables: usize,
    pub planted: usize,
    pub deleted: usize,
}

impl FaultReport {
    pub fn summary(&self) -> String {
        format!(
            "nodes={} variables={} planted={} deleted={}",
            self.nodes_touched, self.variables, self.planted, self.deleted
        )
    }

    pub fn is_empty(&self) -> bool {
        self.variables == 0 && self.planted == 0 && self.deleted == 0
    }
}

struct Corruptor<'a> {
    rng: &'a mut ChaCha8Rng,
    max: u64,
    n: usize,
    window: u64,
}

impl Corruptor<'_> {
    /// A counter value in `[0, max)`: near the current one, small, or
    /// uniform over the whole domain.
    fn counter(&mut self, near: u64) -> u64 {
        let v = match self.rng.gen_range(0..10) {
            0..=4 => {
                let d = self.rng.gen_range(0..=2 * self.window);
                near.saturating_add(d).saturating_sub(self.window)
            }
            5..=7 => self.rng.gen_range(0..=2 * self.window),
            _ => self.rng.gen_range(0..self.max),
        };
        v.min(self.max - 1)
    }

    fn node_set(&mut self) -> NodeSet {
        NodeSet(self.rng.gen::<u64>() & NodeSet::all(self.n).0)
    }

    fn ready(&mut self, near: &[u64]) -> ReadyVector {
        ReadyVector(near.iter().map(|&v| self.counter(v)).collect())
    }

    fn proposal(&mut self, seq: u64, near: &[u64]) -> Proposal {
        let state = self.rng.gen_bool(0.5).then(|| self.replica());
        Proposal { seq, ready: self.ready(near), state }
    }

    fn replica(&mut self) -> ReplicaState {
        ReplicaState { counter: self.rng.gen_range(0..1000), log_digest: self.rng.gen() }
    }

    fn slot(&mut self, obs: u64, near: &[u64]) -> Option<Slot> {
        if self.rng.gen_bool(0.3) {
            return None;
        }
        let seq = if self.rng.gen_bool(0.7) { obs + self.rng.gen_range(0..3) } else { self.counter(obs) };
        let mut s = Slot::joined(seq, self.n);
        if self.rng.gen_bool(0.5) {
            s.proposal = Some(self.proposal(seq, near));
        }
        s.promised = self.rng.gen_range(0..4 * self.n as u64 + 8);
        if self.rng.gen_bool(0.3) {
            let b = self.rng.gen_range(0..=s.promised);
            s.accepted = Some((b, self.proposal(seq, near)));
        }
        s.round = self.rng.gen_range(0..4);
        if self.rng.gen_bool(0.3) {
            s.leader = LeaderPhase::Preparing { ballot: s.promised, promises: self.node_set(), best: None };
        }
        s.result = match self.rng.gen_range(0..4) {
            0 => Outcome::Decided(self.proposal(seq, near)),
            1 => Outcome::Error,
            _ => Outcome::Undecided,
        };
        s.dec_acks = self.node_set();
        Some(s)
    }

    fn message(&mut self, near_qn: u64, near: &[u64]) -> Message {
        let n = self.n;
        match self.rng.gen_range(0..9) {
            0 => Message::Sync { qn: self.counter(near_qn) },
            1 => {
                let seq = self.counter(near_qn);
                Message::SyncAck {
                    qn: self.counter(near_qn),
                    seq,
                    obs: seq.saturating_sub(self.rng.gen_range(0..2)),
                    ready: self.ready(near),
                }
            }
            2 => {
                let sender = self.rng.gen_range(0..n);
                let number = self.counter(near[sender]);
                Message::UrbData { sender, number, payload: AppMessage::ghost(format!("ghost-{number}")) }
            }
            3 => {
                let sender = self.rng.gen_range(0..n);
                Message::UrbAck { sender, number: self.counter(near[sender]), digest: self.rng.gen() }
            }
            4 => Message::UrbWm { have: self.ready(near), floor: self.counter(near[0]), top: self.counter(near[0]) },
            5 => {
                let seq = self.counter(near_qn);
                Message::ConsDec { seq, value: self.proposal(seq, near) }
            }
            6 => {
                let seq = self.counter(near_qn);
                Message::ConsAccept { seq, ballot: self.rng.gen_range(0..64), value: self.proposal(seq, near) }
            }
            7 => Message::ConsPrepare { seq: self.counter(near_qn), ballot: self.rng.gen_range(0..64) },
            _ => {
                let seq = self.counter(near_qn);
                Message::ConsProp { seq, value: self.proposal(seq, near) }
            }
        }
    }
}

/// Corrupts node state and channel contents. With `intensity = 0`,
/// `plant_per_channel = 0` and `delete = 0` nothing changes.
pub fn inject(nodes: &mut [Node], channels: &mut [Channel], spec: &FaultSpec, rng: &mut ChaCha8Rng) -> FaultReport {
    let mut rep = FaultReport::default();
    let n = nodes.len();
    let max = nodes.first().map_or(4, |x| x.cfg.max_counter);
    let window = nodes.first().map_or(1, |x| x.cfg.buffer_bound).max(1);
    let p = spec.intensity;
    let mut c = Corruptor { rng, max, n, window };

    for node in nodes.iter_mut() {
        let before = rep.variables;
        let delivered = node.urb.delivered.clone();
        if p > 0.0 && c.rng.gen_bool(p) {
            node.to.obs_s = c.counter(node.to.obs_s);
            rep.variables += 1;
        }
        if p > 0.0 && c.rng.gen_bool(p) {
            node.to.next_query = c.counter(node.to.next_query);
            rep.variables += 1;
        }
        if p > 0.0 && c.rng.gen_bool(p) {
            let obs = node.to.obs_s;
            node.to.cs = [0, 1, 2].map(|_| c.slot(obs, &delivered));
            rep.variables += 1;
        }
        if p > 0.0 && c.rng.gen_bool(p) {
            node.to.querying = c.rng.gen_bool(0.5);
            node.to.passed = c.node_set();
            node.to.empty_handed = c.node_set();
            node.to.replies = BTreeMap::new();
            for j in 0..n {
                if c.rng.gen_bool(0.5) {
                    let seq = c.counter(node.to.obs_s);
                    let reply = SyncReply { seq, obs: c.counter(seq), ready: c.ready(&delivered) };
                    node.to.replies.insert(j, reply);
                }
            }
            rep.variables += 1;
        }
        if p > 0.0 && c.rng.gen_bool(p) {
            for (k, &d) in delivered.iter().enumerate() {
                node.urb.delivered[k] = c.counter(d);
                node.urb.ready[k] = c.counter(d);
                node.urb.floor[k] = c.counter(d);
                node.urb.top[k] = c.counter(d);
                node.urb.lower[k] = c.rng.gen_range(0..4);
            }
            node.urb.next_send = c.counter(node.urb.next_send).max(1);
            rep.variables += 1;
        }
        if p > 0.0 && c.rng.gen_bool(p) {
            for k in 0..n {
                let d = node.urb.delivered[k];
                let bound = node.urb.bound();
                let buf = &mut node.urb.buffers[k];
                buf.retain(|&m, _| m > d && m <= d.saturating_add(bound));
                for e in buf.values_mut() {
                    if c.rng.gen_bool(0.5) {
                        e.acks = c.node_set();
                    }
                }
                for _ in 0..c.rng.gen_range(0..4) {
                    let m = d.saturating_add(c.rng.gen_range(1..=bound));
                    buf.entry(m).or_insert_with(|| Entry {
                        payload: AppMessage::ghost(format!("ghost-{k}-{m}")),
                        acks: NodeSet(c.rng.gen::<u64>() & NodeSet::all(n).0),
                    });
                }
            }
            rep.variables += 1;
        }
        // corrupted watermarks still bound the buffer to its window
        let bound = node.urb.bound();
        for (buf, &d) in node.urb.buffers.iter_mut().zip(&node.urb.delivered) {
            buf.retain(|&m, _| m > d && m <= d.saturating_add(bound));
        }
        if p > 0.0 && c.rng.gen_bool(p) {
            let th = node.detector.threshold();
            for j in 0..n {
                let v = c.rng.gen_range(0..=2 * th);
                node.detector.set_missed(j, v);
            }
            rep.variables += 1;
        }
        if p > 0.0 && c.rng.gen_bool(p) {
            if let Some(r) = node.replica.as_mut() {
                r.set_state(c.replica());
                rep.variables += 1;
            }
        }
        if rep.variables > before {
            rep.nodes_touched += 1;
        }
    }

    for ch in channels.iter_mut() {
        if spec.delete > 0.0 {
            rep.deleted += ch.delete_random(spec.delete, c.rng);
        }
        if spec.plant_per_channel > 0 {
            let k = c.rng.gen_range(0..=spec.plant_per_channel);
            let near_qn = nodes[ch.src].to.next_query.max(nodes[ch.dst].to.next_query);
            let near = nodes[ch.dst].urb.delivered.clone();
            for _ in 0..k {
                let msg = c.message(near_qn, &near);
                if ch.plant(msg, c.rng) {
                    rep.planted += 1;
                }
            }
        }
    }
    rep
}
