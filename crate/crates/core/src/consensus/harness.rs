//! Stand-alone driver for a single consensus round.
//!
//! Runs `n` slots over a lossy, reordering message pool with crash-stop
//! failures and a detector that suspects a crashed node after a fixed delay.
//! Used by the property tests of the consensus object.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Ctx, Outcome, Slot};
use crate::types::{NodeId, NodeSet, Outgoing, Proposal};

#[derive(Clone, Debug)]
pub struct Instance {
    pub n: usize,
    pub seq: u64,
    /// `Some` for nodes that call `propose`.
    pub proposals: Vec<Option<Proposal>>,
    /// Step at which each node crashes, if it does.
    pub crash_at: Vec<Option<usize>>,
    /// Steps between a crash and its detection.
    pub detect_delay: usize,
    pub loss: f64,
    pub seed: u64,
    pub max_steps: usize,
}

#[derive(Clone, Debug)]
pub struct InstanceOutcome {
    pub results: Vec<Outcome>,
    /// Every decision each node produced, in order. Integrity means at most
    /// one entry per node.
    pub decisions: Vec<Vec<Proposal>>,
    /// Nodes that never crash.
    pub correct: NodeSet,
    /// Step at which the last correct node decided, if all did.
    pub all_decided_at: Option<usize>,
}

pub fn run_instance(inst: &Instance) -> InstanceOutcome {
    let n = inst.n;
    let mut rng = ChaCha8Rng::seed_from_u64(inst.seed);
    let mut slots: Vec<Slot> = inst
        .proposals
        .iter()
        .map(|p| match p {
            Some(v) => Slot::proposed(v.clone(), n),
            None => Slot::joined(inst.seq, n),
        })
        .collect();
    let mut decisions = vec![Vec::new(); n];
    let mut pool: Vec<(NodeId, Outgoing)> = Vec::new();
    let correct = NodeSet((0..n).filter(|&i| inst.crash_at[i].is_none()).fold(0, |m, i| m | 1 << i));
    let mut all_decided_at = None;
    let crashed = |i: NodeId, step: usize| inst.crash_at[i].is_some_and(|c| step >= c);

    for step in 0..inst.max_steps {
        let mut trusted = NodeSet::empty();
        for j in 0..n {
            if inst.crash_at[j].is_none_or(|c| step < c + inst.detect_delay) {
                trusted.insert(j);
            }
        }
        let tick = pool.is_empty() || (pool.len() < 8 * n * n && rng.gen_bool(0.3));
        let mut out = Vec::new();
        if tick {
            let i = rng.gen_range(0..n);
            if crashed(i, step) {
                continue;
            }
            let ctx = Ctx { me: i, n, trusted, max_counter: u64::MAX };
            let fx = slots[i].tick(&ctx, &mut out);
            decisions[i].extend(fx.decided);
            pool.extend(out.into_iter().map(|o| (i, o)));
        } else {
            let (src, o) = pool.swap_remove(rng.gen_range(0..pool.len()));
            if crashed(o.dst, step) || rng.gen_bool(inst.loss) {
                continue;
            }
            let i = o.dst;
            let ctx = Ctx { me: i, n, trusted, max_counter: u64::MAX };
            let fx = slots[i].on_message(&ctx, src, o.msg, &mut out);
            decisions[i].extend(fx.decided);
            pool.extend(out.into_iter().map(|o| (i, o)));
        }
        if all_decided_at.is_none() && correct.iter().all(|i| matches!(slots[i].result(), Outcome::Decided(_))) {
            all_decided_at = Some(step);
            break;
        }
    }
    InstanceOutcome { results: slots.into_iter().map(|s| s.result).collect(), decisions, correct, all_decided_at }
}
