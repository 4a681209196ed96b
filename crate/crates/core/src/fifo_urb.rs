//! Bounded-memory FIFO-ordered uniform reliable broadcast.
//!
//! Every node relays every buffered message to each trusted peer that has not
//! acknowledged it. A message is URB-stable at a node once every trusted node
//! acknowledged holding it. Per sender the node keeps a delivered watermark
//! and a ready watermark; the buffer only holds numbers inside
//! `(delivered, delivered + B]`.
//!
//! Recovery from corrupted state relies on these local rules:
//! * acknowledgements carry a payload digest and only count when it matches,
//! * watermark gossip (`URB-WM`) clears acknowledgement bits a peer cannot
//!   back,
//! * a sender is the authority on its own stream: its direct copy replaces
//!   a differing payload and its send counter bounds what others may hold
//!   or relay,
//! * below the sender's floor, differing copies converge on the smaller
//!   digest,
//! * a sender's advertised floor lets receivers skip numbers that nobody can
//!   supply any more,
//! * the stored ready watermark is only kept while every number below it is
//!   still held or skippable,
//! * `bulk_read` sets the delivered watermark to the agreed bound, so after
//!   one agreed batch all nodes share the same watermark.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::types::{AppMessage, Message, NodeId, NodeSet, Outgoing, ReadyVector};

/// Watermarks in a row that must advertise a lower send counter before it
/// replaces the known one; fewer are treated as reordered.
const STALE_WATERMARKS: u8 = 3;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub payload: AppMessage,
    pub acks: NodeSet,
}

/// Returned when the local sender already has `B` undelivered messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("FIFO-URB backpressure: {outstanding} messages outstanding (bound {bound})")]
pub struct Backpressure {
    pub outstanding: u64,
    pub bound: u64,
}

/// One delivered FIFO-URB message.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub sender: NodeId,
    pub number: u64,
    pub payload: AppMessage,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FifoUrb {
    me: NodeId,
    bound: u64,
    window: usize,
    pub(crate) next_send: u64,
    pub(crate) delivered: Vec<u64>,
    pub(crate) ready: Vec<u64>,
    pub(crate) floor: Vec<u64>,
    /// Highest send counter known per peer; `u64::MAX` when unknown.
    pub(crate) top: Vec<u64>,
    /// Consecutive watermarks per peer advertising less than `top`.
    pub(crate) lower: Vec<u8>,
    pub(crate) buffers: Vec<BTreeMap<u64, Entry>>,
}

impl FifoUrb {
    /// `bound` is the per-sender buffer bound B; `window` caps how many
    /// relays one node sends to one peer per tick.
    pub fn new(me: NodeId, n: usize, bound: u64, window: usize) -> Self {
        FifoUrb {
            me,
            bound: bound.max(1),
            window: window.max(1),
            next_send: 1,
            delivered: vec![0; n],
            ready: vec![0; n],
            floor: vec![0; n],
            top: vec![u64::MAX; n],
            lower: vec![0; n],
            buffers: vec![BTreeMap::new(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.delivered.len()
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn next_send(&self) -> u64 {
        self.next_send
    }

    pub fn delivered(&self) -> &[u64] {
        &self.delivered
    }

    pub fn ready(&self) -> &[u64] {
        &self.ready
    }

    /// Peers' reported floors; the own entry is unused.
    pub fn floors(&self) -> &[u64] {
        &self.floor
    }

    /// Highest send counter known per peer.
    pub fn tops(&self) -> &[u64] {
        &self.top
    }

    pub fn buffered_len(&self) -> usize {
        self.buffers.iter().map(BTreeMap::len).sum()
    }

    pub fn buffer(&self, sender: NodeId) -> &BTreeMap<u64, Entry> {
        &self.buffers[sender]
    }

    /// Own messages sent but not yet delivered locally.
    pub fn outstanding(&self) -> u64 {
        self.next_send.saturating_sub(1).saturating_sub(self.delivered[self.me])
    }

    /// Assigns the next message number, stores the message locally and sends
    /// it to every other node.
    pub fn broadcast(&mut self, payload: AppMessage, out: &mut Vec<Outgoing>) -> Result<u64, Backpressure> {
        self.sanitize_numbering();
        let outstanding = self.outstanding();
        if outstanding >= self.bound {
            return Err(Backpressure { outstanding, bound: self.bound });
        }
        let number = self.next_send;
        self.next_send += 1;
        let mut acks = NodeSet::empty();
        acks.insert(self.me);
        self.buffers[self.me].insert(number, Entry { payload: payload.clone(), acks });
        for dst in (0..self.n()).filter(|&d| d != self.me) {
            out.push(Outgoing {
                dst,
                msg: Message::UrbData { sender: self.me, number, payload: payload.clone() },
            });
        }
        Ok(number)
    }

    /// Restores local consistency: the send counter is above every own
    /// number in use, the own stream is one run ending just below it, and
    /// every held entry carries this node's own ack.
    fn sanitize_numbering(&mut self) {
        let me = self.me;
        let own = &mut self.buffers[me];
        let own_max = own.keys().next_back().copied().unwrap_or(0);
        self.next_send = self.next_send.max(self.delivered[me] + 1).max(own_max + 1);
        let mut run_start = self.next_send;
        while run_start > 1 && own.contains_key(&(run_start - 1)) {
            run_start -= 1;
        }
        own.retain(|&m, _| m >= run_start);
        self.buffers.iter_mut().flat_map(|b| b.values_mut()).for_each(|e| e.acks.insert(me));
    }

    /// Handles a relayed payload from `from`.
    pub fn on_data(
        &mut self,
        from: NodeId,
        sender: NodeId,
        number: u64,
        payload: AppMessage,
        out: &mut Vec<Outgoing>,
    ) {
        if sender >= self.n() || number == 0 {
            return;
        }
        let d = self.delivered[sender];
        if number <= d {
            let digest = payload.digest();
            out.push(Outgoing { dst: from, msg: Message::UrbAck { sender, number, digest } });
            return;
        }
        if number > d.saturating_add(self.bound) {
            return;
        }
        let me = self.me;
        if sender == me {
            if number >= self.next_send {
                return;
            }
            match self.buffers[me].get(&number) {
                Some(e) if e.payload.text != payload.text => out.push(Outgoing {
                    dst: from,
                    msg: Message::UrbData { sender, number, payload: e.payload.clone() },
                }),
                _ => out.push(Outgoing { dst: from, msg: Message::UrbAck { sender, number, digest: payload.digest() } }),
            }
            return;
        }
        if from == sender {
            if number >= self.top[sender] {
                self.top[sender] = number + 1;
                self.lower[sender] = 0;
            }
        } else if number >= self.top[sender] {
            return;
        }
        let digest = payload.digest();
        let orphaned = number <= self.floor[sender];
        let buf = &mut self.buffers[sender];
        let replace = buf.get(&number).is_some_and(|e| {
            e.payload.text != payload.text && (from == sender || (orphaned && digest < e.payload.digest()))
        });
        if replace {
            buf.remove(&number);
        }
        let entry = buf.entry(number).or_insert_with(|| {
            let mut acks = NodeSet::empty();
            acks.insert(me);
            Entry { payload, acks }
        });
        let held = entry.payload.digest();
        if held == digest {
            entry.acks.insert(from);
        }
        entry.acks.insert(me);
        out.push(Outgoing { dst: from, msg: Message::UrbAck { sender, number, digest: held } });
    }

    /// Counts `from`'s acknowledgement if it holds the same payload. A sender
    /// answers a mismatch on its own stream with its copy.
    pub fn on_ack(&mut self, from: NodeId, sender: NodeId, number: u64, digest: u64, out: &mut Vec<Outgoing>) {
        let me = self.me;
        let Some(e) = self.buffers.get_mut(sender).and_then(|b| b.get_mut(&number)) else { return };
        if e.payload.digest() == digest {
            e.acks.insert(from);
        } else if sender == me && from != me {
            e.acks.remove(from);
            out.push(Outgoing { dst: from, msg: Message::UrbData { sender, number, payload: e.payload.clone() } });
        }
    }

    /// Applies a peer's watermark gossip: acknowledgement bits above the
    /// peer's contiguous-held watermark are cleared. On the peer's own
    /// stream, entries at or above its send counter `top` are dropped and
    /// entries at or below its floor count as acknowledged by it. A
    /// watermark older than the known send counter is ignored.
    pub fn on_watermark(&mut self, from: NodeId, have: &ReadyVector, floor: u64, top: u64) {
        if from >= self.n() || from == self.me {
            return;
        }
        if top < self.top[from] && self.top[from] != u64::MAX {
            self.lower[from] = self.lower[from].saturating_add(1);
            if self.lower[from] < STALE_WATERMARKS {
                return;
            }
        }
        self.lower[from] = 0;
        self.top[from] = top;
        self.floor[from] = floor;
        self.buffers[from].retain(|&m, _| m < top);
        for (_, e) in self.buffers[from].range_mut(..=floor) {
            e.acks.insert(from);
        }
        for (k, buf) in self.buffers.iter_mut().enumerate() {
            for (_, e) in buf.range_mut(have.get(k).saturating_add(1)..) {
                e.acks.remove(from);
            }
        }
    }

    /// Highest number per sender such that every number up to it is held or
    /// already delivered.
    pub fn have(&self) -> ReadyVector {
        ReadyVector(
            self.buffers
                .iter()
                .zip(&self.delivered)
                .map(|(buf, &d)| {
                    let mut h = d;
                    for (&m, _) in buf.range(d + 1..) {
                        if m != h + 1 {
                            break;
                        }
                        h = m;
                    }
                    h
                })
                .collect(),
        )
    }

    /// Numbers of the local stream at or below this value can no longer be
    /// supplied by this node.
    pub fn own_floor(&self) -> u64 {
        match self.buffers[self.me].keys().next() {
            Some(&m) => m - 1,
            None => self.next_send.saturating_sub(1),
        }
    }

    fn floor_of(&self, k: NodeId) -> u64 {
        if k == self.me {
            self.own_floor()
        } else {
            self.floor[k]
        }
    }

    /// Walks forward from the delivered watermark over held entries (stable
    /// ones only when `trusted` is given) and over skippable gaps.
    fn walk(&self, k: NodeId, trusted: Option<NodeSet>) -> u64 {
        let buf = &self.buffers[k];
        let floor = self.floor_of(k);
        let mut h = self.delivered[k];
        loop {
            let Some(next) = h.checked_add(1) else { return h };
            match buf.get(&next) {
                Some(e) => {
                    if let Some(t) = trusted {
                        if !e.acks.is_superset(t) {
                            return h;
                        }
                    }
                    h = next;
                }
                None if next <= floor => {
                    let next_held = buf.range(next..).next().map(|(&m, _)| m - 1).unwrap_or(floor);
                    h = floor.min(next_held);
                }
                None => return h,
            }
        }
    }

    /// Recomputes the ready watermarks for the given trusted set.
    pub fn refresh_ready(&mut self, trusted: NodeSet) {
        for k in 0..self.n() {
            let stable = self.walk(k, Some(trusted));
            let valid = self.walk(k, None);
            let d = self.delivered[k];
            self.ready[k] = stable.max(self.ready[k].min(valid)).max(d);
        }
    }

    /// Lowest ready-to-deliver number per sender.
    pub fn min_ready(&self) -> ReadyVector {
        ReadyVector(self.delivered.iter().zip(&self.ready).map(|(&d, &r)| d.min(r) + 1).collect())
    }

    /// Highest ready-to-deliver number per sender.
    pub fn max_ready(&self) -> ReadyVector {
        ReadyVector(self.ready.clone())
    }

    /// Number of ready but undelivered messages:
    /// `Σ (maxReady[k] − (minReady[k] − 1))`, clamped at zero per entry.
    pub fn ready_undelivered(&self) -> u64 {
        let min = self.min_ready();
        self.ready
            .iter()
            .zip(&min.0)
            .map(|(&r, &lo)| r.saturating_sub(lo - 1))
            .fold(0u64, u64::saturating_add)
    }

    /// True iff every message this node broadcast and still holds is
    /// acknowledged by every trusted node.
    pub fn all_have_terminated(&self, trusted: NodeSet) -> bool {
        self.buffers[self.me].values().all(|e| e.acks.is_superset(trusted))
    }

    /// Returns every held message with `delivered[k] < number ≤ bound[k]`,
    /// ordered by number then sender, and moves the delivered watermark to
    /// the bound.
    pub fn bulk_read(&mut self, bound: &ReadyVector) -> Vec<Delivery> {
        let mut batch = Vec::new();
        for k in 0..self.n().min(bound.len()) {
            let b = bound.0[k];
            let d = self.delivered[k];
            if b > d {
                let keys: Vec<u64> = self.buffers[k].range(d + 1..=b).map(|(&m, _)| m).collect();
                for m in keys {
                    let e = self.buffers[k].remove(&m).expect("key just listed");
                    batch.push(Delivery { sender: k, number: m, payload: e.payload });
                }
            }
            self.delivered[k] = b;
            let limit = if k == self.me { u64::MAX } else { b.saturating_add(self.bound) };
            self.buffers[k].retain(|&m, _| m > b && m <= limit);
            self.ready[k] = self.ready[k].max(b);
        }
        batch.sort_by_key(|dl| (dl.number, dl.sender));
        self.sanitize_numbering();
        batch
    }

    /// Periodic work: relays unacknowledged messages to trusted peers when
    /// `relay` is set, gossips watermarks when `gossip` is set, and
    /// recomputes ready watermarks.
    pub fn tick(&mut self, trusted: NodeSet, relay: bool, gossip: bool, out: &mut Vec<Outgoing>) {
        self.sanitize_numbering();
        for dst in trusted.iter().filter(|&d| relay && d != self.me && d < self.n()) {
            let mut sent = 0;
            'senders: for (k, buf) in self.buffers.iter().enumerate() {
                for (&m, e) in buf {
                    if sent >= self.window {
                        break 'senders;
                    }
                    if !e.acks.contains(dst) {
                        out.push(Outgoing {
                            dst,
                            msg: Message::UrbData { sender: k, number: m, payload: e.payload.clone() },
                        });
                        sent += 1;
                    }
                }
            }
        }
        if gossip {
            let mut have = self.have();
            have.0[self.me] = self.next_send - 1;
            let (floor, top) = (self.own_floor(), self.next_send);
            for dst in (0..self.n()).filter(|&d| d != self.me) {
                out.push(Outgoing { dst, msg: Message::UrbWm { have: have.clone(), floor, top } });
            }
        }
        self.refresh_ready(trusted);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stable_messages(urb: &mut FifoUrb, sender: NodeId, count: u64, n: usize) {
        for m in 1..=count {
            urb.buffers[sender].insert(m, Entry { payload: AppMessage::new(format!("{sender}-{m}")), acks: NodeSet::all(n) });
        }
        urb.floor[sender] = 0;
        urb.refresh_ready(NodeSet::all(n));
    }

    #[test]
    fn relays_beyond_advertised_top_are_refused() {
        let mut urb = FifoUrb::new(0, 3, 16, 4);
        let mut out = Vec::new();
        urb.on_watermark(1, &ReadyVector(vec![0, 2, 0]), 0, 3);
        urb.on_data(2, 1, 5, AppMessage::new("stale"), &mut out);
        assert!(urb.buffer(1).is_empty() && out.is_empty());
        urb.on_data(1, 1, 5, AppMessage::new("fresh"), &mut out);
        urb.on_data(2, 1, 6, AppMessage::new("relayed"), &mut out);
        assert_eq!(urb.buffer(1).keys().copied().collect::<Vec<_>>(), vec![5]);
        urb.on_data(2, 1, 4, AppMessage::new("relayed"), &mut out);
        assert!(urb.buffer(1).contains_key(&4));
    }

    #[test]
    fn reordered_watermark_keeps_fresh_copy() {
        let mut urb = FifoUrb::new(1, 2, 16, 4);
        let mut out = Vec::new();
        urb.on_watermark(0, &ReadyVector(vec![4, 0]), 0, 5);
        urb.on_data(0, 0, 5, AppMessage::new("fresh"), &mut out);
        urb.on_watermark(0, &ReadyVector(vec![4, 0]), 0, 5);
        assert!(urb.buffer(0).contains_key(&5));
        for _ in 0..STALE_WATERMARKS {
            urb.on_watermark(0, &ReadyVector(vec![3, 0]), 0, 4);
        }
        assert!(!urb.buffer(0).contains_key(&5));
    }

    #[test]
    fn sender_ignores_copies_it_never_issued() {
        let mut urb = FifoUrb::new(0, 2, 16, 4);
        let mut out = Vec::new();
        urb.on_data(1, 0, 3, AppMessage::new("ghost"), &mut out);
        assert!(out.is_empty());
    }

    #[test]
    fn fresh_state_has_nothing_ready() {
        let urb = FifoUrb::new(0, 3, 64, 4);
        assert_eq!(urb.min_ready(), ReadyVector(vec![1, 1, 1]));
        assert_eq!(urb.max_ready(), ReadyVector(vec![0, 0, 0]));
        assert!(urb.all_have_terminated(NodeSet::all(3)));
        assert_eq!(urb.ready_undelivered(), 0);
    }

    #[test]
    fn first_broadcast_gets_number_one() {
        let mut urb = FifoUrb::new(0, 3, 64, 4);
        let mut out = Vec::new();
        assert_eq!(urb.broadcast(AppMessage::new("a"), &mut out), Ok(1));
        assert_eq!(out.len(), 2);
        assert!(matches!(out[0].msg, Message::UrbData { sender: 0, number: 1, .. }));
        assert!(!urb.all_have_terminated(NodeSet::all(3)));
    }

    #[test]
    fn consecutive_numbers_and_backpressure() {
        let mut urb = FifoUrb::new(0, 2, 4, 4);
        let mut out = Vec::new();
        let nums: Vec<u64> = (0..4).map(|i| urb.broadcast(AppMessage::new(format!("{i}")), &mut out).unwrap()).collect();
        assert_eq!(nums, vec![1, 2, 3, 4]);
        assert_eq!(urb.broadcast(AppMessage::new("x"), &mut out), Err(Backpressure { outstanding: 4, bound: 4 }));
    }

    #[test]
    fn ready_and_bulk_read_bracket() {
        let mut urb = FifoUrb::new(0, 3, 64, 4);
        stable_messages(&mut urb, 2, 3, 3);
        assert_eq!(urb.min_ready().0[2], 1);
        assert_eq!(urb.max_ready().0[2], 3);
        let got = urb.bulk_read(&ReadyVector(vec![0, 0, 2]));
        assert_eq!(got.iter().map(|d| d.number).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(urb.min_ready().0[2], 3);
        assert_eq!(urb.max_ready().0[2], 3);
    }

    #[test]
    fn bulk_read_of_nothing_is_empty() {
        let mut urb = FifoUrb::new(0, 2, 64, 4);
        stable_messages(&mut urb, 1, 2, 2);
        let bound = ReadyVector(urb.min_ready().0.iter().map(|m| m - 1).collect());
        assert!(urb.bulk_read(&bound).is_empty());
    }

    #[test]
    fn bulk_read_orders_number_major_sender_minor() {
        let mut urb = FifoUrb::new(0, 2, 64, 4);
        stable_messages(&mut urb, 0, 1, 2);
        stable_messages(&mut urb, 1, 2, 2);
        let got: Vec<(usize, u64)> =
            urb.bulk_read(&ReadyVector(vec![1, 2])).iter().map(|d| (d.sender, d.number)).collect();
        assert_eq!(got, vec![(0, 1), (1, 1), (1, 2)]);
    }

    #[test]
    fn stability_needs_every_trusted_ack() {
        let mut urb = FifoUrb::new(1, 3, 64, 4);
        let mut out = Vec::new();
        urb.on_data(0, 0, 1, AppMessage::new("m"), &mut out);
        let digest = AppMessage::new("m").digest();
        assert_eq!(out, vec![Outgoing { dst: 0, msg: Message::UrbAck { sender: 0, number: 1, digest } }]);
        urb.refresh_ready(NodeSet::all(3));
        assert_eq!(urb.ready()[0], 0);
        urb.on_ack(2, 0, 1, digest ^ 1, &mut out);
        urb.refresh_ready(NodeSet::all(3));
        assert_eq!(urb.ready()[0], 0);
        urb.on_ack(2, 0, 1, digest, &mut out);
        urb.refresh_ready(NodeSet::all(3));
        assert_eq!(urb.ready()[0], 1);
    }

    #[test]
    fn crashed_peer_does_not_block_stability() {
        let mut urb = FifoUrb::new(1, 3, 64, 4);
        let mut out = Vec::new();
        urb.on_data(0, 0, 1, AppMessage::new("m"), &mut out);
        let mut trusted = NodeSet::all(3);
        trusted.remove(2);
        urb.refresh_ready(trusted);
        assert_eq!(urb.ready()[0], 1);
    }

    #[test]
    fn out_of_window_data_is_ignored() {
        let mut urb = FifoUrb::new(1, 2, 4, 4);
        let mut out = Vec::new();
        urb.on_data(0, 0, 5, AppMessage::new("far"), &mut out);
        assert_eq!(urb.buffered_len(), 0);
        assert!(out.is_empty());
    }

    #[test]
    fn relay_goes_only_to_non_ackers() {
        let mut urb = FifoUrb::new(0, 3, 64, 4);
        let mut out = Vec::new();
        urb.broadcast(AppMessage::new("a"), &mut out).unwrap();
        urb.on_ack(1, 0, 1, AppMessage::new("a").digest(), &mut out);
        out.clear();
        urb.tick(NodeSet::all(3), true, false, &mut out);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].dst, 2);
    }

    #[test]
    fn corrupted_acks_are_refreshed_by_watermark_gossip() {
        let mut urb = FifoUrb::new(0, 3, 64, 4);
        let mut out = Vec::new();
        urb.broadcast(AppMessage::new("a"), &mut out).unwrap();
        // corruption claims every node holds it, before ready is recomputed
        urb.buffers[0].get_mut(&1).unwrap().acks = NodeSet::all(3);
        assert!(urb.all_have_terminated(NodeSet::all(3)));
        urb.on_watermark(2, &ReadyVector(vec![0, 0, 0]), 0, 1);
        assert!(!urb.all_have_terminated(NodeSet::all(3)));
    }

    #[test]
    fn direct_copy_from_sender_replaces_planted_payload() {
        let mut urb = FifoUrb::new(1, 3, 64, 4);
        let mut out = Vec::new();
        urb.on_data(2, 0, 1, AppMessage::new("planted"), &mut out);
        urb.on_data(2, 0, 1, AppMessage::new("relayed"), &mut out);
        assert_eq!(urb.buffer(0)[&1].payload, AppMessage::new("planted"));
        urb.on_data(0, 0, 1, AppMessage::new("real"), &mut out);
        assert_eq!(urb.buffer(0)[&1].payload, AppMessage::new("real"));
        assert!(!urb.buffer(0)[&1].acks.contains(2));
    }

    #[test]
    fn orphaned_copies_converge_on_smaller_digest() {
        let (a, b) = (AppMessage::new("a"), AppMessage::new("b"));
        let (lo, hi) = if a.digest() < b.digest() { (a, b) } else { (b, a) };
        let mut urb = FifoUrb::new(1, 3, 64, 4);
        let mut out = Vec::new();
        urb.on_watermark(0, &ReadyVector(vec![0, 0, 0]), 5, 10);
        urb.on_data(2, 0, 3, hi.clone(), &mut out);
        urb.on_data(2, 0, 3, lo.clone(), &mut out);
        urb.on_data(2, 0, 3, hi, &mut out);
        assert_eq!(urb.buffer(0)[&3].payload, lo);
    }

    #[test]
    fn entries_beyond_senders_counter_are_dropped() {
        let mut urb = FifoUrb::new(1, 2, 64, 4);
        let mut out = Vec::new();
        for m in 1..=4 {
            urb.on_data(0, 0, m, AppMessage::new("x"), &mut out);
        }
        urb.on_watermark(0, &ReadyVector(vec![0, 0]), 0, 3);
        assert_eq!(urb.buffer(0).keys().copied().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn mismatched_ack_makes_sender_resend_its_copy() {
        let mut urb = FifoUrb::new(0, 2, 64, 4);
        let mut out = Vec::new();
        urb.broadcast(AppMessage::new("real"), &mut out).unwrap();
        out.clear();
        urb.on_ack(1, 0, 1, AppMessage::new("planted").digest(), &mut out);
        assert!(!urb.buffer(0)[&1].acks.contains(1));
        assert_eq!(
            out,
            vec![Outgoing { dst: 1, msg: Message::UrbData { sender: 0, number: 1, payload: AppMessage::new("real") } }]
        );
    }

    #[test]
    fn unsuppliable_gap_is_skipped_via_floor() {
        let mut urb = FifoUrb::new(1, 2, 64, 4);
        let mut out = Vec::new();
        urb.on_data(0, 0, 51, AppMessage::new("late"), &mut out);
        urb.on_ack(1, 0, 51, AppMessage::new("late").digest(), &mut out);
        urb.refresh_ready(NodeSet::all(2));
        assert_eq!(urb.ready()[0], 0);
        urb.on_watermark(0, &ReadyVector(vec![51, 0]), 50, 52);
        urb.refresh_ready(NodeSet::all(2));
        assert_eq!(urb.ready()[0], 51);
    }

    #[test]
    fn bulk_read_moves_watermark_to_agreed_bound() {
        let mut urb = FifoUrb::new(0, 2, 64, 4);
        urb.delivered[1] = 40;
        urb.ready[1] = 40;
        urb.bulk_read(&ReadyVector(vec![0, 3]));
        assert_eq!(urb.delivered()[1], 3);
    }
}
