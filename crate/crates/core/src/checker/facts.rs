//! Trace facts extracted once and shared by the property checks.

use crate::sim::cycles::{correct_nodes, count_async_cycles, CycleCount};
use crate::sim::trace::{EventBody, Snapshot, SnapshotReason, Trace};
use crate::smr::ReplicaState;
use crate::types::{NodeId, NodeSet, ReadyVector};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Broadcast {
    pub i: u64,
    pub step: u64,
    pub node: NodeId,
    pub epoch: u64,
    pub number: u64,
    pub payload: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Deliver {
    pub i: u64,
    pub step: u64,
    pub node: NodeId,
    pub epoch: u64,
    pub sender: NodeId,
    pub number: u64,
    pub payload: String,
    pub ghost: bool,
}

impl Deliver {
    pub fn key(&self) -> (NodeId, u64, &str) {
        (self.sender, self.number, self.payload.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Value {
    pub i: u64,
    pub step: u64,
    pub node: NodeId,
    pub epoch: u64,
    pub seq: u64,
    pub ready: ReadyVector,
    pub state: Option<ReplicaState>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Propose {
    pub value: Value,
    pub ell: u64,
    pub all_terminated: bool,
    pub delta: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round {
    pub i: u64,
    pub step: u64,
    pub node: NodeId,
    pub epoch: u64,
    pub seq: u64,
    pub decided: bool,
    pub adopted: Option<ReplicaState>,
    pub resulting: Option<ReplicaState>,
}

#[derive(Clone, Debug)]
pub struct SnapshotAt<'a> {
    pub i: u64,
    pub step: u64,
    pub node: NodeId,
    pub snap: &'a Snapshot,
}

#[derive(Clone, Debug)]
pub struct Facts<'a> {
    pub n: usize,
    pub buffer_bound: u64,
    pub delta: u64,
    pub stabilization_cycles: u64,
    pub correct: NodeSet,
    pub final_epoch: u64,
    /// Step of the last transient fault.
    pub fault_step: Option<u64>,
    /// Steps of the cycle boundaries after the last origin.
    pub cycles: CycleCount,
    pub broadcasts: Vec<Broadcast>,
    pub deliveries: Vec<Deliver>,
    pub proposes: Vec<Propose>,
    pub decides: Vec<Value>,
    pub rounds: Vec<Round>,
    pub snapshots: Vec<SnapshotAt<'a>>,
    pub end_reason: Option<String>,
}

impl<'a> Facts<'a> {
    pub fn new(trace: &'a Trace) -> Self {
        let (buffer_bound, delta) = match trace.events.first().map(|e| &e.body) {
            Some(EventBody::RunStart { buffer_bound, delta, .. }) => (*buffer_bound, *delta),
            _ => (0, 0),
        };
        let mut f = Facts {
            n: trace.n(),
            buffer_bound,
            delta,
            stabilization_cycles: trace.stabilization_cycles(),
            correct: correct_nodes(trace),
            final_epoch: 0,
            fault_step: None,
            cycles: count_async_cycles(trace),
            broadcasts: Vec::new(),
            deliveries: Vec::new(),
            proposes: Vec::new(),
            decides: Vec::new(),
            rounds: Vec::new(),
            snapshots: Vec::new(),
            end_reason: None,
        };
        for e in &trace.events {
            let (i, step) = (e.i, e.step);
            let node = e.node.unwrap_or(0);
            match &e.body {
                EventBody::ToBroadcast { epoch, number, payload } => f.broadcasts.push(Broadcast {
                    i,
                    step,
                    node,
                    epoch: *epoch,
                    number: *number,
                    payload: payload.clone(),
                }),
                EventBody::ToDeliver { epoch, sender, number, payload, ghost } => f.deliveries.push(Deliver {
                    i,
                    step,
                    node,
                    epoch: *epoch,
                    sender: *sender,
                    number: *number,
                    payload: payload.clone(),
                    ghost: *ghost,
                }),
                EventBody::Propose { epoch, seq, ready, state, ell, all_terminated, delta } => f.proposes.push(Propose {
                    value: Value { i, step, node, epoch: *epoch, seq: *seq, ready: ready.clone(), state: *state },
                    ell: *ell,
                    all_terminated: *all_terminated,
                    delta: *delta,
                }),
                EventBody::Decide { epoch, seq, ready, state } => {
                    f.decides.push(Value { i, step, node, epoch: *epoch, seq: *seq, ready: ready.clone(), state: *state })
                }
                EventBody::RoundComplete { epoch, seq, decided, adopted, resulting, .. } => f.rounds.push(Round {
                    i,
                    step,
                    node,
                    epoch: *epoch,
                    seq: *seq,
                    decided: *decided,
                    adopted: *adopted,
                    resulting: *resulting,
                }),
                EventBody::StateSnapshot(s) => f.snapshots.push(SnapshotAt { i, step, node, snap: s }),
                EventBody::TransientFault { .. } => f.fault_step = Some(step),
                EventBody::GlobalRestart { epoch, .. } => f.final_epoch = *epoch,
                EventBody::RunEnd { reason } => f.end_reason = Some(reason.clone()),
                _ => {}
            }
        }
        f
    }

    /// Suffix starts for `c = 0, 1, ...` cycles after the last fault (or
    /// after the run start).
    pub fn cycle_starts(&self) -> Vec<u64> {
        let origin = self.fault_step.unwrap_or(0);
        std::iter::once(origin).chain(self.cycles.boundaries.iter().copied().filter(|&b| b >= origin)).collect()
    }

    /// Step from which gated properties must hold, if the run got that far.
    pub fn gate(&self) -> Option<u64> {
        if self.fault_step.is_none() {
            return Some(0);
        }
        self.cycle_starts().get(self.stabilization_cycles as usize).copied()
    }

    pub fn iteration_snapshots(&self) -> impl Iterator<Item = &SnapshotAt<'a>> {
        self.snapshots
            .iter()
            .filter(|s| s.snap.reason == SnapshotReason::Iteration && self.correct.contains(s.node))
    }
}
