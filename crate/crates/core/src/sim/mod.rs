//! Deterministic discrete-event simulation of `n` nodes over bounded,
//! unreliable channels. One scheduler step runs one node action.

pub mod channel;
pub mod cycles;
pub mod fault;
pub mod scenario;
pub mod trace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::node::{Node, NodeEvent};
use crate::consensus::Outcome;
use crate::types::{AppMessage, Message, MessageKind, NodeId, NodeSet};
use channel::{Channel, Impairments, SendOutcome};
use cycles::CycleTracker;
use scenario::{Fairness, PayloadKind, Scenario, TraceLevel};
use trace::{EventBody, SlotStatus, SlotView, Snapshot, SnapshotReason, Trace, TraceEvent, TRACE_FORMAT};

/// Counters gathered while running, independent of the trace level.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub steps: u64,
    pub cycles: u64,
    pub sent: [u64; MessageKind::COUNT],
    pub received: u64,
    pub lost: u64,
    pub overflowed: u64,
    pub duplicated: u64,
    pub restarts: u64,
    pub cleanups: u64,
    pub end_reason: String,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trace: Trace,
    pub stats: RunStats,
}

pub struct Simulator {
    sc: Scenario,
    n: usize,
    nodes: Vec<Node>,
    channels: Vec<Channel>,
    rng: ChaCha8Rng,
    imp: Impairments,
    crashed: NodeSet,
    epoch: u64,
    step: u64,
    events: Vec<TraceEvent>,
    cycles: CycleTracker,
    cycle_index: u64,
    fault_cycle: Option<u64>,
    quiet_since: Option<u64>,
    rr: usize,
    turn: Vec<u64>,
    issued: u64,
    restart: Option<&'static str>,
    stats: RunStats,
}

impl Simulator {
    pub fn new(sc: &Scenario) -> Self {
        let n = sc.n;
        let cfg = sc.node_config();
        Simulator {
            n,
            nodes: (0..n).map(|i| Node::new(i, cfg.clone())).collect(),
            channels: (0..n * n).map(|k| Channel::new(k / n, k % n, sc.channel_capacity)).collect(),
            rng: ChaCha8Rng::seed_from_u64(sc.seed),
            imp: Impairments { loss: sc.loss, duplication: sc.duplication, reorder: sc.reorder, drop_cap: sc.drop_cap },
            crashed: NodeSet::empty(),
            epoch: 0,
            step: 0,
            events: Vec::new(),
            cycles: CycleTracker::new(n, sc.correct()),
            cycle_index: 0,
            fault_cycle: None,
            quiet_since: None,
            rr: 0,
            turn: vec![0; n],
            issued: 0,
            restart: None,
            stats: RunStats::default(),
            sc: sc.clone(),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    fn emit(&mut self, node: Option<NodeId>, body: EventBody) {
        let i = self.events.len() as u64;
        self.events.push(TraceEvent { i, step: self.step, node, body });
    }

    fn full(&self) -> bool {
        self.sc.trace_level == TraceLevel::Full
    }

    pub fn run(mut self) -> RunOutput {
        self.begin();
        while self.advance() {}
        self.finish()
    }

    /// Emits the run header. Call once before [`Simulator::advance`].
    pub fn begin(&mut self) {
        let sc = &self.sc;
        let body = EventBody::RunStart {
            format: TRACE_FORMAT.into(),
            scenario_digest: sc.digest(),
            n: sc.n,
            seed: sc.seed,
            delta: sc.delta,
            buffer_bound: sc.buffer_bound,
            max_counter: sc.max_counter,
            smr: sc.smr,
            stabilization_cycles: sc.stabilization_cycles,
        };
        self.emit(None, body);
    }

    /// Runs one scheduler step. Returns false once the run is over.
    pub fn advance(&mut self) -> bool {
        if self.step >= self.sc.max_steps || self.stats.end_reason == "quiescent" {
            return false;
        }
        let step = self.step;
        let crashes: Vec<NodeId> = self
            .sc
            .crashes
            .iter()
            .filter(|c| c.at_step == step && !self.crashed.contains(c.node))
            .map(|c| c.node)
            .collect();
        for i in crashes {
            self.crash(i);
        }
        if let Some(f) = self.sc.fault.clone() {
            if f.at_step == step {
                self.inject(&f);
            }
        }
        self.invoke_workload();
        if let Some(i) = self.pick() {
            self.node_step(i);
        }
        if let Some(why) = self.restart.take() {
            self.global_restart(why);
        }
        if step.is_multiple_of(64) && self.finished() {
            self.stats.end_reason = "quiescent".into();
            self.stats.steps = step + 1;
            return false;
        }
        self.step += 1;
        self.stats.steps = self.step;
        true
    }

    /// Emits final snapshots and the trailer.
    pub fn finish(mut self) -> RunOutput {
        if self.stats.end_reason.is_empty() {
            self.stats.end_reason = "max-steps".into();
        }
        self.step = self.step.min(self.stats.steps.saturating_sub(1)).max(self.events.last().map_or(0, |e| e.step));
        self.stats.cycles = self.cycle_index;
        for i in 0..self.n {
            if !self.crashed.contains(i) {
                let s = self.snapshot(i, SnapshotReason::Final);
                self.emit(Some(i), EventBody::StateSnapshot(Box::new(s)));
            }
        }
        let reason = self.stats.end_reason.clone();
        self.emit(None, EventBody::RunEnd { reason });
        RunOutput { trace: Trace { events: self.events }, stats: self.stats }
    }

    fn crash(&mut self, i: NodeId) {
        self.crashed.insert(i);
        self.nodes[i].outbox.clear();
        for j in 0..self.n {
            self.channels[j * self.n + i].clear();
        }
        self.emit(Some(i), EventBody::Crash);
    }

    fn inject(&mut self, spec: &scenario::FaultSpec) {
        let rep = fault::inject(&mut self.nodes, &mut self.channels, spec, &mut self.rng);
        for j in 0..self.n {
            if self.crashed.contains(j) {
                for k in 0..self.n {
                    self.channels[k * self.n + j].clear();
                }
            }
        }
        self.emit(None, EventBody::TransientFault { summary: rep.summary() });
        for i in 0..self.n {
            if !self.crashed.contains(i) {
                let s = self.snapshot(i, SnapshotReason::Fault);
                self.emit(Some(i), EventBody::StateSnapshot(Box::new(s)));
            }
        }
        self.cycles.reset(self.step);
        self.fault_cycle = Some(self.cycle_index);
        self.quiet_since = None;
    }

    fn invoke_workload(&mut self) {
        let w = &self.sc.workload;
        if self.issued >= w.broadcasts || self.step < w.start {
            return;
        }
        let off = self.step - w.start;
        if !off.is_multiple_of(w.interval.max(1)) {
            return;
        }
        for _ in 0..w.burst.max(1) {
            if self.issued >= w.broadcasts {
                break;
            }
            let k = self.issued;
            self.issued += 1;
            let sender = if w.senders.is_empty() {
                (k % self.n as u64) as usize
            } else {
                w.senders[(k % w.senders.len() as u64) as usize]
            };
            if self.crashed.contains(sender) {
                continue;
            }
            let payload = match w.payload {
                PayloadKind::Text => format!("m{k}"),
                PayloadKind::Inc => "inc".to_string(),
            };
            self.nodes[sender].enqueue_broadcast(AppMessage::new(payload));
        }
    }

    fn starved(&self, i: NodeId) -> bool {
        self.sc.fairness == Fairness::AdversarialWindow
            && self.sc.starve.iter().any(|s| s.node == i && (s.from..s.to).contains(&self.step))
    }

    fn pick(&mut self) -> Option<NodeId> {
        for k in 0..self.n {
            let i = (self.rr + k) % self.n;
            if !self.crashed.contains(i) && !self.starved(i) {
                self.rr = (i + 1) % self.n;
                return Some(i);
            }
        }
        None
    }

    fn node_step(&mut self, i: NodeId) {
        let mut evs = Vec::new();
        self.nodes[i].begin_step();
        if self.nodes[i].tick_due() {
            self.nodes[i].tick(&mut evs);
        } else {
            let recv_first = self.turn[i].is_multiple_of(2);
            #[allow(clippy::if_same_then_else)]
            let acted = if recv_first {
                self.try_receive(i, &mut evs) || self.try_send(i)
            } else {
                self.try_send(i) || self.try_receive(i, &mut evs)
            };
            if !acted && self.nodes[i].idle_tick_allowed() {
                self.nodes[i].tick(&mut evs);
            }
        }
        self.turn[i] += 1;
        self.record(i, evs);
    }

    fn try_receive(&mut self, i: NodeId, evs: &mut Vec<NodeEvent>) -> bool {
        let n = self.n;
        for k in 0..n {
            let j = (self.nodes[i].rr_in + k) % n;
            if let Some(env) = self.channels[j * n + i].recv() {
                self.nodes[i].rr_in = (j + 1) % n;
                self.stats.received += 1;
                if self.full() {
                    self.emit(Some(i), EventBody::Receive { src: j, msg: env.msg.summary(), planted: env.planted });
                }
                self.nodes[i].receive(j, env.msg, evs);
                return true;
            }
        }
        false
    }

    fn try_send(&mut self, i: NodeId) -> bool {
        let Some(o) = self.nodes[i].pop_outgoing() else {
            return false;
        };
        let n = self.n;
        if self.crashed.contains(o.dst) {
            if self.full() {
                let msg = o.msg.summary();
                self.emit(Some(i), EventBody::Drop { src: i, dst: o.dst, msg, reason: "crashed".into() });
            }
            return true;
        }
        self.stats.sent[o.msg.kind().index()] += 1;
        let summary = self.full().then(|| o.msg.summary());
        let outcome = self.channels[i * n + o.dst].send(o.msg, &self.imp, &mut self.rng);
        let dst = o.dst;
        match outcome {
            SendOutcome::Queued => {}
            SendOutcome::Duplicated => self.stats.duplicated += 1,
            SendOutcome::Lost => self.stats.lost += 1,
            SendOutcome::Full => self.stats.overflowed += 1,
        }
        if let Some(msg) = summary {
            self.emit(Some(i), EventBody::Send { dst, msg: msg.clone() });
            match outcome {
                SendOutcome::Queued => {}
                SendOutcome::Duplicated => self.emit(Some(i), EventBody::Duplicate { src: i, dst, msg }),
                SendOutcome::Lost => self.emit(Some(i), EventBody::Drop { src: i, dst, msg, reason: "loss".into() }),
                SendOutcome::Full => self.emit(Some(i), EventBody::Drop { src: i, dst, msg, reason: "full".into() }),
            }
        }
        true
    }

    fn record(&mut self, i: NodeId, evs: Vec<NodeEvent>) {
        let epoch = self.epoch;
        for ev in evs {
            match ev {
                NodeEvent::Broadcast { number, payload } => {
                    self.emit(Some(i), EventBody::ToBroadcast { epoch, number, payload: payload.text })
                }
                NodeEvent::ReadyAdvanced { sender, from, to } => {
                    if self.full() {
                        self.emit(Some(i), EventBody::FifoDeliverInternal { sender, from, to });
                    }
                }
                NodeEvent::Propose(r) => self.emit(
                    Some(i),
                    EventBody::Propose {
                        epoch,
                        seq: r.value.seq,
                        ready: r.value.ready,
                        state: r.value.state,
                        ell: r.ell,
                        all_terminated: r.all_terminated,
                        delta: r.delta,
                    },
                ),
                NodeEvent::Decide(p) => {
                    self.emit(Some(i), EventBody::Decide { epoch, seq: p.seq, ready: p.ready, state: p.state })
                }
                NodeEvent::Round(r) => {
                    let delivered = r.deliveries.len();
                    for d in r.deliveries {
                        self.emit(
                            Some(i),
                            EventBody::ToDeliver {
                                epoch,
                                sender: d.sender,
                                number: d.number,
                                payload: d.payload.text,
                                ghost: d.payload.ghost,
                            },
                        );
                    }
                    self.emit(
                        Some(i),
                        EventBody::RoundComplete {
                            epoch,
                            seq: r.seq,
                            decided: r.decided,
                            delivered,
                            adopted: r.adopted,
                            resulting: r.resulting,
                        },
                    );
                }
                NodeEvent::IterationStarted { cleanup } => {
                    if cleanup {
                        self.stats.cleanups += 1;
                    }
                }
                NodeEvent::IterationDone => {
                    let s = self.snapshot(i, SnapshotReason::Iteration);
                    self.emit(Some(i), EventBody::StateSnapshot(Box::new(s)));
                    if self.cycles.completed(i, self.step) {
                        self.cycle_index += 1;
                        let index = self.cycle_index;
                        self.emit(None, EventBody::CycleBoundary { epoch, index });
                    }
                }
                NodeEvent::Overflow(why) => {
                    self.restart.get_or_insert(why);
                }
            }
        }
    }

    fn global_restart(&mut self, why: &'static str) {
        self.epoch += 1;
        self.stats.restarts += 1;
        for node in &mut self.nodes {
            *node = node.restarted();
        }
        for ch in &mut self.channels {
            ch.clear();
        }
        self.cycles.reset(self.step);
        self.quiet_since = None;
        let epoch = self.epoch;
        self.emit(None, EventBody::GlobalRestart { epoch, reason: why.into() });
    }

    fn snapshot(&self, i: NodeId, reason: SnapshotReason) -> Snapshot {
        let n = self.n;
        let node = &self.nodes[i];
        let to = node.to_urb();
        let urb = node.urb();
        let sync_qn = |m: &Message, want_ack: bool| match m {
            Message::Sync { qn } if !want_ack => Some(*qn),
            Message::SyncAck { qn, .. } if want_ack => Some(*qn),
            _ => None,
        };
        let inflight_sync = (0..n)
            .flat_map(|j| self.channels[i * n + j].iter().filter_map(|e| sync_qn(&e.msg, false)))
            .chain(node.outbox().iter().filter_map(|o| sync_qn(&o.msg, false)))
            .max();
        let inflight_ack = (0..n)
            .flat_map(|j| self.channels[j * n + i].iter().filter_map(|e| sync_qn(&e.msg, true)))
            .chain(
                (0..n)
                    .filter(|&j| j != i && !self.crashed.contains(j))
                    .flat_map(|j| self.nodes[j].outbox().iter().filter(|o| o.dst == i))
                    .filter_map(|o| sync_qn(&o.msg, true)),
            )
            .max();
        let slots = to
            .slots()
            .iter()
            .map(|s| {
                s.as_ref().map(|s| SlotView {
                    seq: s.seq,
                    status: match s.result() {
                        Outcome::Undecided => SlotStatus::Undecided,
                        Outcome::Decided(_) => SlotStatus::Decided,
                        Outcome::Error => SlotStatus::Error,
                    },
                })
            })
            .collect();
        let agg = to.last_aggregate();
        Snapshot {
            reason,
            epoch: self.epoch,
            obs_s: to.obs_s(),
            next_query: to.next_query(),
            get_seq: to.get_seq(),
            max_seq: agg.map(|a| a.max_seq),
            all_seq: agg.map(|a| a.all_seq.iter().copied().collect()).unwrap_or_default(),
            slots,
            delivered: urb.delivered().to_vec(),
            ready: urb.ready().to_vec(),
            next_send: urb.next_send(),
            buffered: urb.buffered_len(),
            trusted: node.trusted().iter().collect(),
            inflight_sync,
            inflight_ack,
            replica: node.replica().map(|r| r.get_state()),
        }
    }

    /// All invocations issued and delivered everywhere, and enough cycles
    /// have passed since then and since the fault.
    fn finished(&mut self) -> bool {
        let w = &self.sc.workload;
        let correct: Vec<&Node> = (0..self.n).filter(|&i| !self.crashed.contains(i)).map(|i| &self.nodes[i]).collect();
        let quiet = self.issued >= w.broadcasts
            && correct.iter().all(|x| {
                x.app_queue_len() == 0 && x.urb().outstanding() == 0 && x.urb().ready_undelivered() == 0
            })
            && correct.windows(2).all(|p| p[0].urb().delivered() == p[1].urb().delivered());
        if !quiet {
            self.quiet_since = None;
            return false;
        }
        let since = *self.quiet_since.get_or_insert(self.cycle_index);
        let after_fault = self.fault_cycle.map_or(0, |c| c + self.sc.stabilization_cycles);
        self.cycle_index >= since + self.sc.settle_cycles
            && self.cycle_index >= after_fault + self.sc.settle_cycles
            && self.cycle_index >= self.sc.min_cycles
    }
}

/// Runs a scenario to completion.
pub fn run(sc: &Scenario) -> RunOutput {
    Simulator::new(sc).run()
}
