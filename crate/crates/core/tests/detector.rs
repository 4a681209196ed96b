use proptest::prelude::*;

use stabcast_core::detector::FailureDetector;

proptest! {
    #[test]
    fn silent_peer_is_suspected_after_threshold_steps(threshold in 1u32..20, peer in 1usize..5) {
        let mut fd = FailureDetector::new(0, 5, threshold);
        for _ in 0..threshold {
            prop_assert!(fd.trusted().contains(peer));
            fd.step();
        }
        prop_assert!(!fd.trusted().contains(peer));
        prop_assert!(fd.trusted().contains(0));
    }

    #[test]
    fn heartbeat_overwrites_any_corrupted_count(threshold in 1u32..20, garbage in any::<u32>()) {
        let mut fd = FailureDetector::new(0, 3, threshold);
        fd.set_missed(2, garbage);
        fd.heard_from(2);
        fd.step();
        prop_assert_eq!(fd.missed(2), 0);
        prop_assert!(fd.trusted().contains(2));
    }
}

#[test]
fn chatty_peers_stay_trusted() {
    let mut fd = FailureDetector::new(1, 4, 3);
    for _ in 0..100 {
        for p in [0, 2, 3] {
            fd.heard_from(p);
        }
        fd.step();
    }
    assert_eq!(fd.trusted().len(), 4);
}
