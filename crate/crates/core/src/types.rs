//! Identifiers, payloads and the wire messages exchanged between nodes.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::hash::{Hash, Hasher};

use crate::smr::ReplicaState;

/// Index of a process in `0..n`.
pub type NodeId = usize;

/// Set of process ids packed into a bitmask. Limits the system to 64 nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeSet(pub u64);

impl NodeSet {
    pub const MAX_NODES: usize = 64;

    pub fn empty() -> Self {
        NodeSet(0)
    }

    pub fn all(n: usize) -> Self {
        if n >= 64 {
            NodeSet(u64::MAX)
        } else {
            NodeSet((1u64 << n) - 1)
        }
    }

    pub fn contains(self, id: NodeId) -> bool {
        id < 64 && self.0 & (1 << id) != 0
    }

    pub fn insert(&mut self, id: NodeId) {
        self.0 |= 1 << id;
    }

    pub fn remove(&mut self, id: NodeId) {
        self.0 &= !(1 << id);
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// `self ⊇ other`
    pub fn is_superset(self, other: NodeSet) -> bool {
        other.0 & !self.0 == 0
    }

    pub fn min(self) -> Option<NodeId> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as NodeId)
    }

    pub fn iter(self) -> impl Iterator<Item = NodeId> {
        (0..64).filter(move |i| self.0 & (1 << i) != 0)
    }
}

/// Per-sender FIFO-URB message numbers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReadyVector(pub Vec<u64>);

impl ReadyVector {
    pub fn zeros(n: usize) -> Self {
        ReadyVector(vec![0; n])
    }

    /// Entry-wise minimum over a non-empty collection of vectors.
    pub fn entrywise_min<'a>(vs: impl IntoIterator<Item = &'a ReadyVector>) -> Option<ReadyVector> {
        let mut it = vs.into_iter();
        let mut acc = it.next()?.clone();
        for v in it {
            for (a, b) in acc.0.iter_mut().zip(&v.0) {
                *a = (*a).min(*b);
            }
            // a shorter reply (corrupted) bounds the result
            acc.0.truncate(v.0.len());
        }
        Some(acc)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> u64 {
        self.0.get(k).copied().unwrap_or(0)
    }
}

impl fmt::Display for ReadyVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// Application payload carried by a toURB message.
///
/// `ghost` is provenance only: it marks payloads that were planted by a
/// transient-fault injection. Protocol logic never reads it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AppMessage {
    pub text: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ghost: bool,
}

impl AppMessage {
    pub fn new(text: impl Into<String>) -> Self {
        AppMessage { text: text.into(), ghost: false }
    }

    pub fn ghost(text: impl Into<String>) -> Self {
        AppMessage { text: text.into(), ghost: true }
    }

    /// Fingerprint of the text, carried by acknowledgements.
    pub fn digest(&self) -> u64 {
        let mut h = std::hash::DefaultHasher::new();
        self.text.hash(&mut h);
        h.finish()
    }
}

/// Value agreed upon by one consensus round: the round number, the ready
/// vector bounding the delivered batch and, in replication mode, the
/// automaton state to adopt.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Proposal {
    pub seq: u64,
    pub ready: ReadyVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<ReplicaState>,
}

/// Wire messages. Field order in each variant is the documented wire order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Message {
    /// Query for round numbers and ready vectors.
    Sync { qn: u64 },
    /// Reply carrying `getSeq()`, `obsS` and `maxReady()`.
    SyncAck { qn: u64, seq: u64, obs: u64, ready: ReadyVector },
    /// FIFO-URB payload relay.
    UrbData { sender: NodeId, number: u64, payload: AppMessage },
    /// The transmitting node holds `(sender, number)`.
    UrbAck { sender: NodeId, number: u64, digest: u64 },
    /// Periodic watermark gossip: contiguous-held vector plus the
    /// transmitter's own stream floor. Doubles as failure-detector beacon.
    UrbWm { have: ReadyVector, floor: u64, top: u64 },
    /// A proposer announces its proposal to the coordinator.
    ConsProp { seq: u64, value: Proposal },
    ConsPrepare { seq: u64, ballot: u64 },
    ConsPromise { seq: u64, ballot: u64, accepted: Option<(u64, Proposal)> },
    ConsNack { seq: u64, promised: u64 },
    ConsAccept { seq: u64, ballot: u64, value: Proposal },
    ConsAccepted { seq: u64, ballot: u64 },
    ConsDec { seq: u64, value: Proposal },
    ConsDecAck { seq: u64 },
    /// A lagging node asks whether its next round still exists anywhere.
    ConsQuery { seq: u64 },
    /// Answer from a node that is past `seq` and holds no slot for it.
    ConsPassed { seq: u64 },
    /// Answer from a node also waiting for `seq` that holds no value for it.
    ConsNoValue { seq: u64 },
}

/// Coarse message classes, used for per-kind fairness accounting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    Sync,
    SyncAck,
    UrbData,
    UrbAck,
    UrbWm,
    Consensus,
}

impl MessageKind {
    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        self as usize
    }
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::Sync { .. } => MessageKind::Sync,
            Message::SyncAck { .. } => MessageKind::SyncAck,
            Message::UrbData { .. } => MessageKind::UrbData,
            Message::UrbAck { .. } => MessageKind::UrbAck,
            Message::UrbWm { .. } => MessageKind::UrbWm,
            _ => MessageKind::Consensus,
        }
    }

    /// Consensus round a consensus message belongs to.
    pub fn consensus_seq(&self) -> Option<u64> {
        match self {
            Message::ConsProp { seq, .. }
            | Message::ConsPrepare { seq, .. }
            | Message::ConsPromise { seq, .. }
            | Message::ConsNack { seq, .. }
            | Message::ConsAccept { seq, .. }
            | Message::ConsAccepted { seq, .. }
            | Message::ConsDec { seq, .. }
            | Message::ConsDecAck { seq }
            | Message::ConsQuery { seq }
            | Message::ConsPassed { seq }
            | Message::ConsNoValue { seq } => Some(*seq),
            _ => None,
        }
    }

    /// Short human-readable form used in full-detail traces.
    pub fn summary(&self) -> String {
        match self {
            Message::Sync { qn } => format!("SYNC {qn}"),
            Message::SyncAck { qn, seq, obs, ready } => format!("SYNCACK {qn} {seq} {obs} {ready}"),
            Message::UrbData { sender, number, .. } => format!("URB-DATA {sender} {number}"),
            Message::UrbAck { sender, number, digest } => format!("URB-ACK {sender} {number} {digest:016x}"),
            Message::UrbWm { have, floor, top } => format!("URB-WM {have} {floor} {top}"),
            Message::ConsProp { seq, .. } => format!("CONS-PROP {seq}"),
            Message::ConsPrepare { seq, ballot } => format!("CONS-PREPARE {seq} {ballot}"),
            Message::ConsPromise { seq, ballot, .. } => format!("CONS-PROMISE {seq} {ballot}"),
            Message::ConsNack { seq, promised } => format!("CONS-NACK {seq} {promised}"),
            Message::ConsAccept { seq, ballot, .. } => format!("CONS-ACCEPT {seq} {ballot}"),
            Message::ConsAccepted { seq, ballot } => format!("CONS-ACCEPTED {seq} {ballot}"),
            Message::ConsDec { seq, value } => format!("CONS-DEC {seq} {}", value.ready),
            Message::ConsDecAck { seq } => format!("CONS-DECACK {seq}"),
            Message::ConsQuery { seq } => format!("CONS-QUERY {seq}"),
            Message::ConsPassed { seq } => format!("CONS-PASSED {seq}"),
            Message::ConsNoValue { seq } => format!("CONS-NOVALUE {seq}"),
        }
    }
}

/// A message addressed to a destination, waiting in a node's outbox.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outgoing {
    pub dst: NodeId,
    pub msg: Message,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_set_basics() {
        let mut s = NodeSet::empty();
        s.insert(3);
        s.insert(0);
        assert_eq!(s.len(), 2);
        assert_eq!(s.min(), Some(0));
        assert!(NodeSet::all(4).is_superset(s));
        s.remove(0);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![3]);
        assert!(!s.contains(0));
    }

    #[test]
    fn entrywise_min_matches_definition() {
        let a = ReadyVector(vec![3, 5]);
        let b = ReadyVector(vec![4, 2]);
        assert_eq!(ReadyVector::entrywise_min([&a, &b]), Some(ReadyVector(vec![3, 2])));
        assert_eq!(ReadyVector::entrywise_min(std::iter::empty()), None);
    }
}
