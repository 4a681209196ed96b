use proptest::prelude::*;
use std::collections::BTreeSet;

use stabcast_core::fifo_urb::FifoUrb;
use stabcast_core::types::{AppMessage, Message, NodeSet, Outgoing, ReadyVector};

const B: u64 = 8;

/// A receiver holding `held` (sender, number) pairs, each sent directly by
/// its sender.
fn receiver(n: usize, held: &BTreeSet<(usize, u64)>) -> FifoUrb {
    let mut urb = FifoUrb::new(n - 1, n, B, 4);
    let mut out = Vec::new();
    for &(k, m) in held {
        urb.on_data(k, k, m, AppMessage::new(format!("{k}:{m}")), &mut out);
    }
    urb
}

fn held_set(n: usize) -> impl Strategy<Value = BTreeSet<(usize, u64)>> {
    prop::collection::btree_set((0..n - 1, 1..=B), 0..24)
}

proptest! {
    #[test]
    fn bulk_read_is_number_major_and_within_bound(
        held in held_set(4),
        bound in prop::collection::vec(0..=B, 4),
    ) {
        let mut urb = receiver(4, &held);
        let got = urb.bulk_read(&ReadyVector(bound.clone()));
        let keys: Vec<(u64, usize)> = got.iter().map(|d| (d.number, d.sender)).collect();
        let mut expect: Vec<(u64, usize)> =
            held.iter().filter(|&&(k, m)| m <= bound[k]).map(|&(k, m)| (m, k)).collect();
        expect.sort();
        prop_assert_eq!(keys, expect);
        let intact = got.iter().all(|d| d.payload.text == format!("{}:{}", d.sender, d.number));
        prop_assert!(intact);
        prop_assert_eq!(urb.delivered(), &bound[..]);
        for (k, &b) in bound.iter().enumerate().take(3) {
            prop_assert!(urb.buffer(k).keys().all(|&m| m > b));
        }
    }

    #[test]
    fn second_bulk_read_with_same_bound_is_empty(held in held_set(3), bound in prop::collection::vec(0..=B, 3)) {
        let mut urb = receiver(3, &held);
        urb.bulk_read(&ReadyVector(bound.clone()));
        prop_assert!(urb.bulk_read(&ReadyVector(bound)).is_empty());
    }

    #[test]
    fn data_outside_window_is_not_buffered(number in B + 1..10 * B) {
        let mut urb = FifoUrb::new(1, 2, B, 4);
        urb.on_data(0, 0, number, AppMessage::new("far"), &mut Vec::new());
        prop_assert!(urb.buffer(0).is_empty());
    }
}

#[test]
fn broadcast_stops_at_the_buffer_bound() {
    let mut urb = FifoUrb::new(0, 2, B, 4);
    let mut out = Vec::new();
    for k in 1..=B {
        assert_eq!(urb.broadcast(AppMessage::new(format!("m{k}")), &mut out), Ok(k));
    }
    let err = urb.broadcast(AppMessage::new("one too many"), &mut out).unwrap_err();
    assert_eq!(err.bound, B);
    assert!(out.iter().all(|o| matches!(o.msg, Message::UrbData { sender: 0, .. })));
}

/// Shuttles messages between nodes over perfect links for 50 rounds.
fn exchange(nodes: &mut [FifoUrb], mut pending: Vec<(usize, Outgoing)>) {
    let all = NodeSet::all(nodes.len());
    for _ in 0..50 {
        for (i, node) in nodes.iter_mut().enumerate() {
            let mut out = Vec::new();
            node.tick(all, true, true, &mut out);
            pending.extend(out.into_iter().map(|o| (i, o)));
        }
        while let Some((from, o)) = pending.pop() {
            let mut out = Vec::new();
            let node = &mut nodes[o.dst];
            match o.msg {
                Message::UrbData { sender, number, payload } => node.on_data(from, sender, number, payload, &mut out),
                Message::UrbAck { sender, number, digest } => node.on_ack(from, sender, number, digest, &mut out),
                Message::UrbWm { have, floor, top } => node.on_watermark(from, &have, floor, top),
                _ => {}
            }
            pending.extend(out.into_iter().map(|o2| (o.dst, o2)));
        }
    }
}

#[test]
fn messages_become_ready_everywhere_over_perfect_links() {
    let mut nodes: Vec<FifoUrb> = (0..3).map(|i| FifoUrb::new(i, 3, B, 4)).collect();
    let mut pending = Vec::new();
    for (i, node) in nodes.iter_mut().enumerate() {
        for k in 0..3 {
            let mut out = Vec::new();
            node.broadcast(AppMessage::new(format!("{i}/{k}")), &mut out).unwrap();
            pending.extend(out.into_iter().map(|o| (i, o)));
        }
    }
    exchange(&mut nodes, pending);
    for node in &nodes {
        assert_eq!(node.ready(), &[3, 3, 3]);
    }
    let batches: Vec<Vec<(usize, u64)>> = nodes
        .iter_mut()
        .map(|u| u.bulk_read(&ReadyVector(vec![3, 3, 3])).iter().map(|d| (d.sender, d.number)).collect())
        .collect();
    assert!(batches.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(batches[0].len(), 9);
}
