//! Machine-readable summary of one run: verdicts, convergence and a memory
//! proxy, serialized as JSON.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::checker::{self, CheckReport, Verdict};
use crate::sim::scenario::Scenario;
use crate::sim::trace::{EventBody, Trace};
use crate::sim::RunOutput;
use crate::types::MessageKind;

pub const REPORT_FORMAT: &str = "stabcast-report/1";

/// Traffic counters. Only available for runs executed in-process.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCounts {
    pub sent: BTreeMap<MessageKind, u64>,
    pub received: u64,
    pub lost: u64,
    pub duplicated: u64,
    pub channel_full: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub scenario_digest: String,
    pub seed: u64,
    pub n: usize,
    pub passed: bool,
    pub faulted: bool,
    pub gate: Option<u64>,
    pub cycles: usize,
    pub convergence_cycles: Option<u64>,
    pub ghost_deliveries: usize,
    pub end_reason: Option<String>,
    pub restarts: usize,
    pub verdicts: Vec<Verdict>,
    pub max_buffered: usize,
    pub max_active_slots: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub messages: Option<MessageCounts>,
}

/// Peak buffered FIFO entries and peak active slots over all snapshots.
pub fn memory_peaks(trace: &Trace) -> (usize, usize) {
    trace.events.iter().fold((0, 0), |(b, s), e| match &e.body {
        EventBody::StateSnapshot(snap) => (b.max(snap.buffered), s.max(snap.active_slots())),
        _ => (b, s),
    })
}

impl RunReport {
    /// Report for a trace read back from disk.
    pub fn from_trace(trace: &Trace) -> RunReport {
        RunReport::build(trace, checker::check(trace))
    }

    /// Report for an in-process run, including traffic counters.
    pub fn from_run(out: &RunOutput) -> RunReport {
        let mut r = RunReport::from_trace(&out.trace);
        let s = &out.stats;
        let kinds = [
            MessageKind::Sync,
            MessageKind::SyncAck,
            MessageKind::UrbData,
            MessageKind::UrbAck,
            MessageKind::UrbWm,
            MessageKind::Consensus,
        ];
        r.messages = Some(MessageCounts {
            sent: kinds.iter().map(|&k| (k, s.sent[k.index()])).collect(),
            received: s.received,
            lost: s.lost,
            duplicated: s.duplicated,
            channel_full: s.overflowed,
        });
        r
    }

    fn build(trace: &Trace, check: CheckReport) -> RunReport {
        let (digest, seed) = match trace.events.first().map(|e| &e.body) {
            Some(EventBody::RunStart { scenario_digest, seed, .. }) => (scenario_digest.clone(), *seed),
            _ => (String::new(), 0),
        };
        let restarts = trace.events.iter().filter(|e| matches!(e.body, EventBody::GlobalRestart { .. })).count();
        let (max_buffered, max_active_slots) = memory_peaks(trace);
        RunReport {
            format: REPORT_FORMAT.into(),
            scenario_digest: digest,
            seed,
            n: check.n,
            passed: check.passed(),
            faulted: check.faulted,
            gate: check.gate,
            cycles: check.cycles,
            convergence_cycles: check.convergence_cycles,
            ghost_deliveries: check.ghost_deliveries,
            end_reason: check.end_reason,
            restarts,
            verdicts: check.verdicts,
            max_buffered,
            max_active_slots,
            messages: None,
        }
    }

    /// One line per verdict followed by the summary fields.
    pub fn lines(&self) -> Vec<String> {
        let mut v: Vec<String> = self.verdicts.iter().map(Verdict::line).collect();
        let conv = self.convergence_cycles.map_or("none".into(), |c| c.to_string());
        v.push(format!(
            "seed {} cycles {} convergence {conv} restarts {} max-buffered {} max-slots {} ghost-deliveries {}",
            self.seed, self.cycles, self.restarts, self.max_buffered, self.max_active_slots, self.ghost_deliveries
        ));
        v
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Digest of the scenario that produced this report matches `sc`.
    pub fn is_for(&self, sc: &Scenario) -> bool {
        self.scenario_digest == sc.digest()
    }
}
