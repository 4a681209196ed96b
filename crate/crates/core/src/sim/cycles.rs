//! Asynchronous-cycle accounting.
//!
//! An iteration of node `i` starts where its previous iteration completed
//! (or at the latest origin: run start, transient fault, global restart).
//! Cycle `k + 1` ends at the first step by which every correct node has
//! completed an iteration that started no earlier than the end of cycle `k`.

use super::trace::{EventBody, SnapshotReason, Trace};
use crate::types::{NodeId, NodeSet};

#[derive(Clone, Debug)]
pub struct CycleTracker {
    correct: NodeSet,
    last_boundary: u64,
    iter_start: Vec<u64>,
    done: NodeSet,
}

impl CycleTracker {
    pub fn new(n: usize, correct: NodeSet) -> Self {
        CycleTracker { correct, last_boundary: 0, iter_start: vec![0; n], done: NodeSet::empty() }
    }

    /// Starts counting afresh at `step`.
    pub fn reset(&mut self, step: u64) {
        self.last_boundary = step;
        self.iter_start.iter_mut().for_each(|s| *s = step);
        self.done = NodeSet::empty();
    }

    /// Records that `node` completed an iteration at `step`. Returns true
    /// when this closes a cycle.
    pub fn completed(&mut self, node: NodeId, step: u64) -> bool {
        let started = std::mem::replace(&mut self.iter_start[node], step);
        if !self.correct.contains(node) || started < self.last_boundary {
            return false;
        }
        self.done.insert(node);
        if self.done.is_superset(self.correct) {
            self.last_boundary = step;
            self.done = NodeSet::empty();
            return true;
        }
        false
    }
}

/// Boundaries found in a trace, plus the correct node that never completed
/// an iteration after the last origin, if any.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CycleCount {
    pub boundaries: Vec<u64>,
    pub unbounded: Option<NodeId>,
}

/// Nodes without a crash record.
pub fn correct_nodes(trace: &Trace) -> NodeSet {
    let mut s = NodeSet::all(trace.n());
    for e in &trace.events {
        if let (EventBody::Crash, Some(i)) = (&e.body, e.node) {
            s.remove(i);
        }
    }
    s
}

pub fn count_async_cycles(trace: &Trace) -> CycleCount {
    let n = trace.n();
    let correct = correct_nodes(trace);
    let mut tracker = CycleTracker::new(n, correct);
    let mut out = CycleCount::default();
    let mut since_origin = NodeSet::empty();
    for e in &trace.events {
        match &e.body {
            EventBody::TransientFault { .. } | EventBody::GlobalRestart { .. } => {
                tracker.reset(e.step);
                since_origin = NodeSet::empty();
            }
            EventBody::StateSnapshot(s) if s.reason == SnapshotReason::Iteration => {
                if let Some(i) = e.node {
                    since_origin.insert(i);
                    if tracker.completed(i, e.step) {
                        out.boundaries.push(e.step);
                    }
                }
            }
            _ => {}
        }
    }
    out.unbounded = correct.iter().find(|&i| !since_origin.contains(i));
    out
}
