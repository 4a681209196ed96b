//! Broadcast properties over the suffix of a trace starting at step `from`.
//! Every check works per epoch; completion only in the final epoch.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::facts::{Deliver, Facts};
use super::Violation;
use crate::types::NodeId;

type MsgKey<'a> = (NodeId, u64, &'a str);

fn suffix<'f>(f: &'f Facts, from: u64) -> impl Iterator<Item = &'f Deliver> {
    f.deliveries.iter().filter(move |d| d.step >= from)
}

/// Every delivered message was broadcast in the same epoch by its sender
/// with that number and payload. Planted messages are exempt and counted by
/// [`ghost_deliveries`].
pub fn validity(f: &Facts, from: u64) -> Vec<Violation> {
    let sent: HashSet<(u64, MsgKey)> =
        f.broadcasts.iter().map(|b| (b.epoch, (b.node, b.number, b.payload.as_str()))).collect();
    suffix(f, from)
        .filter(|d| !d.ghost && !sent.contains(&(d.epoch, d.key())))
        .map(|d| {
            Violation::at(
                d.step,
                format!(
                    "node {} delivered {}:{} {:?} that was never broadcast (event {})",
                    d.node, d.sender, d.number, d.payload, d.i
                ),
            )
        })
        .collect()
}

pub fn ghost_deliveries(f: &Facts, from: u64) -> usize {
    suffix(f, from).filter(|d| d.ghost).count()
}

/// No node delivers the same message twice in one epoch.
pub fn integrity(f: &Facts, from: u64) -> Vec<Violation> {
    let mut seen: HashMap<(NodeId, u64, MsgKey), u64> = HashMap::new();
    let mut out = Vec::new();
    for d in suffix(f, from) {
        if let Some(first) = seen.insert((d.node, d.epoch, d.key()), d.i) {
            out.push(Violation::at(
                d.step,
                format!("node {} delivered {}:{} twice (events {first} and {})", d.node, d.sender, d.number, d.i),
            ));
        }
    }
    out
}

/// Any two nodes deliver their common messages in the same relative order.
pub fn total_order(f: &Facts, from: u64) -> Vec<Violation> {
    let mut seqs: BTreeMap<(u64, NodeId), Vec<&Deliver>> = BTreeMap::new();
    for d in suffix(f, from) {
        seqs.entry((d.epoch, d.node)).or_default().push(d);
    }
    let mut out = Vec::new();
    let keys: Vec<(u64, NodeId)> = seqs.keys().copied().collect();
    for (a, &ka) in keys.iter().enumerate() {
        let pos: HashMap<MsgKey, (usize, u64)> =
            seqs[&ka].iter().enumerate().map(|(p, d)| (d.key(), (p, d.i))).collect();
        for &kb in keys[a + 1..].iter().filter(|k| k.0 == ka.0) {
            let mut last: Option<(usize, u64, u64)> = None;
            for d in &seqs[&kb] {
                let Some(&(p, ia)) = pos.get(&d.key()) else { continue };
                if let Some((lp, lia, lib)) = last {
                    if p < lp {
                        out.push(Violation::at(
                            d.step,
                            format!(
                                "nodes {} and {} disagree on order: events {lia},{ia} at node {} vs {lib},{} at node {}",
                                ka.1, kb.1, ka.1, d.i, kb.1
                            ),
                        ));
                        break;
                    }
                }
                last = Some((p, ia, d.i));
            }
        }
    }
    out
}

/// Per sender, each node delivers the sender's suffix broadcasts as a
/// prefix of their broadcast order.
pub fn fifo(f: &Facts, from: u64) -> Vec<Violation> {
    let mut order: HashMap<(u64, MsgKey), usize> = HashMap::new();
    let mut next: HashMap<(u64, NodeId), usize> = HashMap::new();
    for b in f.broadcasts.iter().filter(|b| b.step >= from) {
        let k = next.entry((b.epoch, b.node)).or_default();
        order.insert((b.epoch, (b.node, b.number, b.payload.as_str())), *k);
        *k += 1;
    }
    let mut expect: HashMap<(u64, NodeId, NodeId), usize> = HashMap::new();
    let mut out = Vec::new();
    for d in suffix(f, from) {
        let Some(&idx) = order.get(&(d.epoch, d.key())) else { continue };
        let e = expect.entry((d.epoch, d.node, d.sender)).or_default();
        if idx != *e {
            out.push(Violation::at(
                d.step,
                format!(
                    "node {} delivered broadcast #{idx} of sender {} while #{} was due (event {})",
                    d.node, d.sender, *e, d.i
                ),
            ));
        }
        *e = (*e).max(idx + 1);
    }
    out
}

fn delivered_by<'f>(f: &'f Facts, epoch: u64) -> HashMap<MsgKey<'f>, BTreeSet<NodeId>> {
    let mut m: HashMap<MsgKey, BTreeSet<NodeId>> = HashMap::new();
    for d in f.deliveries.iter().filter(|d| d.epoch == epoch) {
        m.entry(d.key()).or_default().insert(d.node);
    }
    m
}

/// Broadcasts of correct nodes in the suffix are delivered by every correct
/// node.
pub fn completion_from_broadcast(f: &Facts, from: u64) -> Vec<Violation> {
    let got = delivered_by(f, f.final_epoch);
    let empty = BTreeSet::new();
    f.broadcasts
        .iter()
        .filter(|b| b.step >= from && b.epoch == f.final_epoch && f.correct.contains(b.node))
        .filter_map(|b| {
            let key = (b.node, b.number, b.payload.as_str());
            let have = got.get(&key).unwrap_or(&empty);
            let missing: Vec<NodeId> = f.correct.iter().filter(|j| !have.contains(j)).collect();
            (!missing.is_empty()).then(|| {
                Violation::at(
                    b.step,
                    format!("broadcast {}:{} (event {}) never delivered at {missing:?}", b.node, b.number, b.i),
                )
            })
        })
        .collect()
}

/// A message broadcast after the last fault and delivered in the suffix by
/// any node is delivered by every correct node. Older copies may have been
/// overwritten by the fault.
pub fn completion_from_delivery(f: &Facts, from: u64) -> Vec<Violation> {
    let got = delivered_by(f, f.final_epoch);
    let origin = f.fault_step.unwrap_or(0);
    let fresh: HashSet<MsgKey> = f
        .broadcasts
        .iter()
        .filter(|b| b.epoch == f.final_epoch && b.step >= origin)
        .map(|b| (b.node, b.number, b.payload.as_str()))
        .collect();
    let mut reported = HashSet::new();
    let mut out = Vec::new();
    for d in suffix(f, from).filter(|d| d.epoch == f.final_epoch && fresh.contains(&d.key())) {
        if !reported.insert(d.key()) {
            continue;
        }
        let have = &got[&d.key()];
        let missing: Vec<NodeId> = f.correct.iter().filter(|j| !have.contains(j)).collect();
        if !missing.is_empty() {
            out.push(Violation::at(
                d.step,
                format!("{}:{} delivered by node {} (event {}) but never at {missing:?}", d.sender, d.number, d.node, d.i),
            ));
        }
    }
    out
}

/// All decisions for one `(epoch, seq)` are equal and were proposed.
pub fn consensus(f: &Facts, from: u64) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut first: HashMap<(u64, u64), &super::facts::Value> = HashMap::new();
    let proposed: HashSet<_> = f.proposes.iter().map(|p| (p.value.epoch, p.value.seq, &p.value.ready, p.value.state)).collect();
    for d in f.decides.iter().filter(|d| d.step >= from) {
        match first.get(&(d.epoch, d.seq)) {
            Some(v) if (v.ready != d.ready || v.state != d.state) => out.push(Violation::at(
                d.step,
                format!("round {} decided differently at events {} and {}", d.seq, v.i, d.i),
            )),
            Some(_) => {}
            None => {
                first.insert((d.epoch, d.seq), d);
            }
        }
        if !proposed.contains(&(d.epoch, d.seq, &d.ready, d.state)) {
            out.push(Violation::at(d.step, format!("round {} decided an unproposed value (event {})", d.seq, d.i)));
        }
    }
    out
}
