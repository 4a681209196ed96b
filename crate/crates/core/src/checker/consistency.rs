//! State-level checks on node snapshots: per-node consistency, the
//! standstill predicate, the flush rule and memory bounds.

use super::facts::{Facts, SnapshotAt};
use super::Violation;
use crate::sim::trace::{Snapshot, SnapshotReason};
use crate::to_urb::needs_cleanup_seqs;

/// Why a snapshot is not consistent, or `None` if it is.
pub fn inconsistency(s: &Snapshot) -> Option<String> {
    if needs_cleanup_seqs(s.obs_s, &s.slot_seqs()) {
        return Some(format!("stale slots {:?} with obs_s {}", s.slot_seqs(), s.obs_s));
    }
    if let Some(q) = s.inflight_sync.filter(|&q| q > s.next_query) {
        return Some(format!("in-flight SYNC {q} above next_query {}", s.next_query));
    }
    if let Some(q) = s.inflight_ack.filter(|&q| q > s.next_query) {
        return Some(format!("in-flight SYNCack {q} above next_query {}", s.next_query));
    }
    if s.get_seq < s.obs_s || s.get_seq > s.obs_s.saturating_add(1) {
        return Some(format!("get_seq {} outside [{}, {}+1]", s.get_seq, s.obs_s, s.obs_s));
    }
    None
}

/// Iteration snapshots of correct nodes in the suffix that are not
/// consistent.
pub fn consistency(f: &Facts, from: u64) -> Vec<Violation> {
    f.iteration_snapshots()
        .filter(|s| s.step >= from)
        .filter_map(|s| {
            inconsistency(s.snap).map(|why| Violation::at(s.step, format!("node {} (event {}): {why}", s.node, s.i)))
        })
        .collect()
}

/// Every proposal respects the flush rule.
pub fn flush_rule(f: &Facts, from: u64) -> Vec<Violation> {
    f.proposes
        .iter()
        .filter(|p| p.value.step >= from)
        .filter(|p| !((p.all_terminated && p.ell > 0) || p.ell >= p.delta))
        .map(|p| {
            Violation::at(
                p.value.step,
                format!(
                    "node {} proposed round {} with ell={} delta={} all_terminated={} (event {})",
                    p.value.node, p.value.seq, p.ell, p.delta, p.all_terminated, p.value.i
                ),
            )
        })
        .collect()
}

/// At most three active slots and at most `n * B` buffered messages.
pub fn bounded_state(f: &Facts, from: u64) -> Vec<Violation> {
    let cap = f.n as u64 * f.buffer_bound;
    f.snapshots
        .iter()
        .filter(|s| s.step >= from && s.snap.reason != SnapshotReason::Fault)
        .filter_map(|s| {
            let slots = s.snap.active_slots();
            let buffered = s.snap.buffered as u64;
            (slots > 3 || buffered > cap).then(|| {
                Violation::at(
                    s.step,
                    format!("node {} holds {slots} slots and {buffered} messages (cap {cap}, event {})", s.node, s.i),
                )
            })
        })
        .collect()
}

/// Standstill predicate over the latest snapshot of every correct node:
/// all of them report the same round `z` as `get_seq`, `max_seq`, `obs_s`
/// and `all_seq = {z}`.
pub fn pred(latest: &[Option<&Snapshot>]) -> bool {
    let mut z = None;
    for s in latest {
        let Some(s) = s else { return false };
        let ok = s.get_seq == s.obs_s && s.max_seq == Some(s.obs_s) && s.all_seq == [s.obs_s];
        if !ok || z.is_some_and(|z| z != s.obs_s) {
            return false;
        }
        z = Some(s.obs_s);
    }
    true
}

/// `(boundary step, pred)` at every cycle boundary after the last origin.
pub fn pred_at_boundaries(f: &Facts) -> Vec<(u64, bool)> {
    let correct: Vec<usize> = f.correct.iter().collect();
    let mut latest: Vec<Option<&SnapshotAt>> = vec![None; f.n];
    let mut it = f.iteration_snapshots().peekable();
    let mut out = Vec::new();
    for &b in &f.cycles.boundaries {
        while let Some(s) = it.next_if(|s| s.step <= b) {
            latest[s.node] = Some(s);
        }
        let view: Vec<Option<&Snapshot>> = correct.iter().map(|&k| latest[k].map(|s| s.snap)).collect();
        out.push((b, pred(&view)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::trace::{SlotStatus, SlotView};

    fn snap(obs: u64, slots: [Option<u64>; 3]) -> Snapshot {
        let get_seq = slots.iter().flatten().copied().fold(obs, u64::max);
        Snapshot {
            reason: SnapshotReason::Iteration,
            epoch: 0,
            obs_s: obs,
            next_query: 10,
            get_seq,
            max_seq: Some(obs),
            all_seq: vec![obs],
            slots: slots.iter().map(|s| s.map(|seq| SlotView { seq, status: SlotStatus::Decided })).collect(),
            delivered: vec![0],
            ready: vec![0],
            next_send: 1,
            buffered: 0,
            trusted: vec![0],
            inflight_sync: Some(10),
            inflight_ack: None,
            replica: None,
        }
    }

    #[test]
    fn consistent_pair_of_slots() {
        assert_eq!(inconsistency(&snap(4, [None, Some(4), Some(5)])), None);
    }

    #[test]
    fn detects_each_clause() {
        assert!(inconsistency(&snap(4, [Some(3), None, Some(5)])).is_some());
        assert!(inconsistency(&snap(4, [None, None, Some(2)])).is_some());
        let mut s = snap(4, [None, Some(4), None]);
        s.inflight_ack = Some(11);
        assert!(inconsistency(&s).is_some());
        let mut s = snap(4, [None, Some(4), None]);
        s.get_seq = 6;
        assert!(inconsistency(&s).is_some());
    }

    #[test]
    fn pred_needs_agreement() {
        let a = snap(4, [None, Some(4), None]);
        let b = snap(4, [None, None, None]);
        assert!(pred(&[Some(&a), Some(&b)]));
        let c = snap(5, [None, None, Some(5)]);
        assert!(!pred(&[Some(&a), Some(&c)]));
        assert!(!pred(&[Some(&a), None]));
    }
}
