//! One process: detector, FIFO-URB, the total-order layer and, optionally, a
//! replica, plus an outbox of pending sends.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::detector::FailureDetector;
use crate::fifo_urb::FifoUrb;
use crate::smr::Replica;
use crate::to_urb::{IterationReport, ProposeRecord, RoundRecord, SyncReply, ToUrb};
use crate::types::{AppMessage, Message, NodeId, NodeSet, Outgoing, Proposal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub n: usize,
    pub delta: u64,
    pub max_counter: u64,
    pub buffer_bound: u64,
    pub relay_window: usize,
    pub fd_threshold: u32,
    pub wm_every: u64,
    /// Internal steps between retransmissions of DATA and SYNC.
    pub retransmit_every: u64,
    pub tick_period: u64,
    pub smr: bool,
}

/// Observable outcomes of a node step, turned into trace events by the
/// simulator.
#[derive(Clone, Debug, PartialEq)]
pub enum NodeEvent {
    Broadcast { number: u64, payload: AppMessage },
    ReadyAdvanced { sender: NodeId, from: u64, to: u64 },
    Propose(ProposeRecord),
    Decide(Proposal),
    Round(RoundRecord),
    IterationStarted { cleanup: bool },
    IterationDone,
    Overflow(&'static str),
}

#[derive(Clone, Debug)]
pub struct Node {
    pub id: NodeId,
    pub cfg: NodeConfig,
    pub(crate) detector: FailureDetector,
    pub(crate) urb: FifoUrb,
    pub(crate) to: ToUrb,
    pub(crate) replica: Option<Replica>,
    pub(crate) outbox: VecDeque<Outgoing>,
    pub(crate) app_queue: VecDeque<AppMessage>,
    pub(crate) local_steps: u64,
    pub(crate) steps_since_tick: u64,
    pub(crate) ticks: u64,
    pub(crate) rr_in: usize,
}

impl Node {
    pub fn new(id: NodeId, cfg: NodeConfig) -> Self {
        let n = cfg.n;
        Node {
            id,
            detector: FailureDetector::new(id, n, cfg.fd_threshold),
            urb: FifoUrb::new(id, n, cfg.buffer_bound, cfg.relay_window),
            to: ToUrb::new(id, n, cfg.delta, cfg.max_counter),
            replica: cfg.smr.then(Replica::default),
            outbox: VecDeque::new(),
            app_queue: VecDeque::new(),
            local_steps: 0,
            steps_since_tick: 0,
            ticks: 0,
            rr_in: 0,
            cfg,
        }
    }

    /// Fresh protocol state, keeping queued application broadcasts.
    pub fn restarted(&self) -> Self {
        let mut fresh = Node::new(self.id, self.cfg.clone());
        fresh.app_queue = self.app_queue.clone();
        fresh
    }

    pub fn detector(&self) -> &FailureDetector {
        &self.detector
    }

    pub fn urb(&self) -> &FifoUrb {
        &self.urb
    }

    pub fn to_urb(&self) -> &ToUrb {
        &self.to
    }

    pub fn replica(&self) -> Option<&Replica> {
        self.replica.as_ref()
    }

    pub fn outbox(&self) -> &VecDeque<Outgoing> {
        &self.outbox
    }

    pub fn app_queue_len(&self) -> usize {
        self.app_queue.len()
    }

    pub fn trusted(&self) -> NodeSet {
        self.detector.trusted()
    }

    pub fn enqueue_broadcast(&mut self, payload: AppMessage) {
        self.app_queue.push_back(payload);
    }

    fn push_out(&mut self, items: Vec<Outgoing>) {
        for o in items {
            if !self.outbox.contains(&o) {
                self.outbox.push_back(o);
            }
        }
    }

    pub fn pop_outgoing(&mut self) -> Option<Outgoing> {
        self.outbox.pop_front()
    }

    /// Bookkeeping run once per scheduling of this node, before its action.
    pub fn begin_step(&mut self) {
        self.local_steps += 1;
        self.steps_since_tick += 1;
        if self.local_steps.is_multiple_of(self.cfg.tick_period.max(1)) {
            self.detector.step();
        }
    }

    /// True when the periodic internal step is due.
    pub fn tick_due(&self) -> bool {
        self.steps_since_tick >= self.cfg.tick_period && self.outbox.is_empty()
    }

    /// True when an idle node may take an early internal step.
    pub fn idle_tick_allowed(&self) -> bool {
        self.steps_since_tick >= self.cfg.tick_period / 2
    }

    /// Handles one received message.
    pub fn receive(&mut self, from: NodeId, msg: Message, events: &mut Vec<NodeEvent>) {
        if from >= self.cfg.n {
            return;
        }
        self.detector.heard_from(from);
        let trusted = self.trusted();
        let mut out = Vec::new();
        match msg {
            Message::Sync { qn } => out.push(self.to.on_sync(from, qn, &self.urb)),
            Message::SyncAck { qn, seq, obs, ready } => {
                self.to.on_sync_ack(from, qn, SyncReply { seq, obs, ready });
                if self.to.ready_to_finish(trusted) {
                    self.finish_and_restart_iteration(trusted, &mut out, events);
                }
            }
            Message::UrbData { sender, number, payload } => self.urb.on_data(from, sender, number, payload, &mut out),
            Message::UrbAck { sender, number, digest } => self.urb.on_ack(from, sender, number, digest, &mut out),
            Message::UrbWm { have, floor, top } => self.urb.on_watermark(from, &have, floor, top),
            other => {
                let fx = self.to.on_consensus(trusted, from, other, &mut out);
                events.extend(fx.decided.map(NodeEvent::Decide));
            }
        }
        self.push_out(out);
    }

    /// The periodic internal step: submit queued broadcasts, relay and
    /// gossip, advance consensus slots and the query loop.
    pub fn tick(&mut self, events: &mut Vec<NodeEvent>) {
        self.steps_since_tick = 0;
        self.ticks += 1;
        let trusted = self.trusted();
        let mut out = Vec::new();

        while let Some(payload) = self.app_queue.front() {
            match self.urb.broadcast(payload.clone(), &mut out) {
                Ok(number) => {
                    let payload = self.app_queue.pop_front().expect("front exists");
                    events.push(NodeEvent::Broadcast { number, payload });
                }
                Err(_) => break,
            }
        }
        if self.urb.next_send() >= self.cfg.max_counter {
            events.push(NodeEvent::Overflow("next_send"));
        }

        let before = self.urb.ready().to_vec();
        let gossip = self.ticks.is_multiple_of(self.cfg.wm_every.max(1));
        let retransmit = self.ticks.is_multiple_of(self.cfg.retransmit_every.max(1));
        self.urb.tick(trusted, retransmit, gossip, &mut out);
        for (sender, (&from, &to)) in before.iter().zip(self.urb.ready()).enumerate() {
            if to > from {
                events.push(NodeEvent::ReadyAdvanced { sender, from, to });
            }
        }

        events.extend(self.to.tick_slots(trusted, &mut out).into_iter().map(NodeEvent::Decide));

        if !self.to.querying() {
            self.start_iteration(&mut out, events);
        } else if self.to.ready_to_finish(trusted) {
            self.finish_and_restart_iteration(trusted, &mut out, events);
        } else if retransmit {
            self.to.resend_sync(&mut out);
        }
        self.push_out(out);
    }

    fn start_iteration(&mut self, out: &mut Vec<Outgoing>, events: &mut Vec<NodeEvent>) {
        let (cleanup, overflow) = self.to.start_iteration(out);
        events.push(NodeEvent::IterationStarted { cleanup });
        if overflow {
            events.push(NodeEvent::Overflow("next_query"));
        }
    }

    fn finish_and_restart_iteration(&mut self, trusted: NodeSet, out: &mut Vec<Outgoing>, events: &mut Vec<NodeEvent>) {
        let IterationReport { proposed, round, decided, restart, .. } =
            self.to.finish_iteration(&mut self.urb, trusted, self.replica.as_mut(), out);
        events.extend(decided.into_iter().map(NodeEvent::Decide));
        events.extend(proposed.map(NodeEvent::Propose));
        events.extend(round.map(NodeEvent::Round));
        events.push(NodeEvent::IterationDone);
        if restart {
            events.push(NodeEvent::Overflow("obs_s"));
        }
        self.start_iteration(out, events);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> NodeConfig {
        NodeConfig {
            n,
            delta: 5,
            max_counter: 1 << 30,
            buffer_bound: 64,
            relay_window: 4,
            fd_threshold: 40,
            wm_every: 2,
            retransmit_every: 1,
            tick_period: 4,
            smr: false,
        }
    }

    #[test]
    fn first_tick_starts_a_query_and_submits_broadcasts() {
        let mut node = Node::new(0, cfg(2));
        node.enqueue_broadcast(AppMessage::new("a"));
        let mut ev = Vec::new();
        node.tick(&mut ev);
        assert!(ev.contains(&NodeEvent::Broadcast { number: 1, payload: AppMessage::new("a") }));
        assert!(ev.contains(&NodeEvent::IterationStarted { cleanup: false }));
        assert!(node.outbox().iter().any(|o| o.msg == Message::Sync { qn: 1 } && o.dst == 0));
        assert_eq!(node.app_queue_len(), 0);
    }

    #[test]
    fn outbox_deduplicates() {
        let mut node = Node::new(0, cfg(2));
        let mut ev = Vec::new();
        node.tick(&mut ev);
        let len = node.outbox().len();
        node.to.resend_sync(&mut Vec::new());
        let mut out = Vec::new();
        node.to.resend_sync(&mut out);
        node.push_out(out);
        assert_eq!(node.outbox().len(), len);
    }

    #[test]
    fn restart_keeps_application_queue_only() {
        let mut node = Node::new(1, cfg(3));
        node.enqueue_broadcast(AppMessage::new("x"));
        node.to.obs_s = 77;
        let fresh = node.restarted();
        assert_eq!(fresh.to_urb().obs_s(), 0);
        assert_eq!(fresh.app_queue_len(), 1);
    }
}
