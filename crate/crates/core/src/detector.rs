//! Heartbeat failure detector providing the `trusted` register.
//!
//! Every message received from a peer counts as a heartbeat. Each local
//! detector step increments the missed-count of every silent peer and resets
//! the count of every peer heard since the previous step. A peer is trusted
//! while its missed-count is below the threshold. All state is a bounded
//! counter per peer, so corrupted counters are overwritten by the first
//! heartbeat from that peer.

use serde::{Deserialize, Serialize};

use crate::types::{NodeId, NodeSet};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureDetector {
    me: NodeId,
    threshold: u32,
    missed: Vec<u32>,
    heard: NodeSet,
}

impl FailureDetector {
    pub fn new(me: NodeId, n: usize, threshold: u32) -> Self {
        FailureDetector { me, threshold: threshold.max(1), missed: vec![0; n], heard: NodeSet::empty() }
    }

    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    pub fn missed(&self, peer: NodeId) -> u32 {
        self.missed[peer]
    }

    /// Overwrite a missed-count (used by fault injection).
    pub fn set_missed(&mut self, peer: NodeId, value: u32) {
        self.missed[peer] = value;
    }

    /// Record an arrival from `peer`.
    pub fn heard_from(&mut self, peer: NodeId) {
        if peer < self.missed.len() {
            self.heard.insert(peer);
        }
    }

    /// One detector step: reset heard peers, age silent ones.
    pub fn step(&mut self) {
        for (j, m) in self.missed.iter_mut().enumerate() {
            if j == self.me || self.heard.contains(j) {
                *m = 0;
            } else {
                *m = m.saturating_add(1);
            }
        }
        self.heard = NodeSet::empty();
    }

    /// Currently trusted peers. Always contains the local node.
    pub fn trusted(&self) -> NodeSet {
        let mut s = NodeSet::empty();
        for (j, &m) in self.missed.iter().enumerate() {
            if m < self.threshold {
                s.insert(j);
            }
        }
        s.insert(self.me);
        s
    }
}
