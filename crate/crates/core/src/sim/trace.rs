//! Trace records, one JSON object per line.
//!
//! Every record has `i` (strictly increasing record index), `step` (scheduler
//! step), `node` (absent for global events) and `kind`; the remaining fields
//! depend on the kind. The first record is always `run-start`, carrying the
//! format tag.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use crate::smr::ReplicaState;
use crate::types::{NodeId, ReadyVector};

pub const TRACE_FORMAT: &str = "stabcast-trace/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub i: u64,
    pub step: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    #[serde(flatten)]
    pub body: EventBody,
}

/// State of one consensus slot as seen in a snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlotStatus {
    Undecided,
    Decided,
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotView {
    pub seq: u64,
    pub status: SlotStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotReason {
    Iteration,
    Fault,
    Final,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub reason: SnapshotReason,
    pub epoch: u64,
    pub obs_s: u64,
    pub next_query: u64,
    pub get_seq: u64,
    /// From the most recent aggregation, if any.
    pub max_seq: Option<u64>,
    pub all_seq: Vec<u64>,
    pub slots: Vec<Option<SlotView>>,
    pub delivered: Vec<u64>,
    pub ready: Vec<u64>,
    pub next_send: u64,
    pub buffered: usize,
    pub trusted: Vec<NodeId>,
    /// Highest query number in a SYNC sent by this node and not yet received.
    pub inflight_sync: Option<u64>,
    /// Highest query number in a SYNCack addressed to this node and not yet
    /// received.
    pub inflight_ack: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replica: Option<ReplicaState>,
}

impl Snapshot {
    pub fn active_slots(&self) -> usize {
        self.slots.iter().flatten().count()
    }

    pub fn slot_seqs(&self) -> Vec<Option<u64>> {
        self.slots.iter().map(|s| s.map(|v| v.seq)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EventBody {
    RunStart {
        format: String,
        scenario_digest: String,
        n: usize,
        seed: u64,
        delta: u64,
        buffer_bound: u64,
        max_counter: u64,
        smr: bool,
        stabilization_cycles: u64,
    },
    ToBroadcast {
        epoch: u64,
        number: u64,
        payload: String,
    },
    ToDeliver {
        epoch: u64,
        sender: NodeId,
        number: u64,
        payload: String,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        ghost: bool,
    },
    /// The FIFO-URB ready watermark for `sender` advanced.
    FifoDeliverInternal {
        sender: NodeId,
        from: u64,
        to: u64,
    },
    Send {
        dst: NodeId,
        msg: String,
    },
    Receive {
        src: NodeId,
        msg: String,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        planted: bool,
    },
    Drop {
        src: NodeId,
        dst: NodeId,
        msg: String,
        reason: String,
    },
    Duplicate {
        src: NodeId,
        dst: NodeId,
        msg: String,
    },
    Crash,
    TransientFault {
        summary: String,
    },
    StateSnapshot(Box<Snapshot>),
    CycleBoundary {
        epoch: u64,
        index: u64,
    },
    Propose {
        epoch: u64,
        seq: u64,
        ready: ReadyVector,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state: Option<ReplicaState>,
        ell: u64,
        all_terminated: bool,
        delta: u64,
    },
    Decide {
        epoch: u64,
        seq: u64,
        ready: ReadyVector,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state: Option<ReplicaState>,
    },
    RoundComplete {
        epoch: u64,
        seq: u64,
        decided: bool,
        delivered: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        adopted: Option<ReplicaState>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resulting: Option<ReplicaState>,
    },
    GlobalRestart {
        epoch: u64,
        reason: String,
    },
    RunEnd {
        reason: String,
    },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("malformed trace: {0}")]
    Malformed(String),
}

impl Trace {
    pub fn write_jsonl(&self, mut w: impl Write) -> Result<(), TraceError> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e).map_err(|e| TraceError::Io(e.into()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Parses and validates a JSON-lines trace.
    pub fn read_jsonl(r: impl BufRead) -> Result<Trace, TraceError> {
        let mut events = Vec::new();
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: TraceEvent = serde_json::from_str(&line).map_err(|source| TraceError::Parse { line: k + 1, source })?;
            events.push(e);
        }
        let trace = Trace { events };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        match self.events.first().map(|e| &e.body) {
            Some(EventBody::RunStart { format, .. }) if format == TRACE_FORMAT => {}
            Some(EventBody::RunStart { format, .. }) => {
                return Err(TraceError::Malformed(format!("format tag {format:?}, expected {TRACE_FORMAT:?}")))
            }
            _ => return Err(TraceError::Malformed("first record is not run-start".into())),
        }
        let n = self.n();
        for w in self.events.windows(2) {
            if w[1].i <= w[0].i {
                return Err(TraceError::Malformed(format!("record index {} does not increase", w[1].i)));
            }
            if w[1].step < w[0].step {
                return Err(TraceError::Malformed(format!("step goes backwards at record {}", w[1].i)));
            }
        }
        if let Some(e) = self.events.iter().find(|e| e.node.is_some_and(|x| x >= n)) {
            return Err(TraceError::Malformed(format!("record {} names node outside 0..{n}", e.i)));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        match self.events.first().map(|e| &e.body) {
            Some(EventBody::RunStart { n, .. }) => *n,
            _ => 0,
        }
    }

    pub fn stabilization_cycles(&self) -> u64 {
        match self.events.first().map(|e| &e.body) {
            Some(EventBody::RunStart { stabilization_cycles, .. }) => *stabilization_cycles,
            _ => 0,
        }
    }

    pub fn last_step(&self) -> u64 {
        self.events.last().map_or(0, |e| e.step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn start() -> TraceEvent {
        TraceEvent {
            i: 0,
            step: 0,
            node: None,
            body: EventBody::RunStart {
                format: TRACE_FORMAT.into(),
                scenario_digest: "x".into(),
                n: 2,
                seed: 1,
                delta: 5,
                buffer_bound: 64,
                max_counter: 1024,
                smr: false,
                stabilization_cycles: 3,
            },
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let t = Trace {
            events: vec![
                start(),
                TraceEvent {
                    i: 1,
                    step: 4,
                    node: Some(1),
                    body: EventBody::ToDeliver { epoch: 0, sender: 0, number: 1, payload: "m0".into(), ghost: false },
                },
            ],
        };
        let text = t.to_jsonl();
        assert!(text.lines().nth(1).unwrap().contains("\"kind\":\"to-deliver\""));
        let back = Trace::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_non_increasing_index() {
        let mut e = start();
        e.i = 0;
        let t = Trace { events: vec![start(), TraceEvent { body: EventBody::Crash, node: Some(0), ..e }] };
        assert!(t.validate().is_err());
    }

    #[test]
    fn rejects_missing_header() {
        assert!(Trace::read_jsonl("{\"i\":0,\"step\":0,\"kind\":\"crash\"}\n".as_bytes()).is_err());
    }
}
