//! Bounded, lossy, duplicating, reordering point-to-point channels.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

use crate::types::{Message, MessageKind, NodeId};

#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    pub msg: Message,
    /// Planted by a transient fault rather than sent by the source.
    pub planted: bool,
}

/// Fault rates applied on every send.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Impairments {
    pub loss: f64,
    pub duplication: f64,
    pub reorder: f64,
    pub drop_cap: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SendOutcome {
    Queued,
    Duplicated,
    Lost,
    Full,
}

#[derive(Clone, Debug)]
pub struct Channel {
    pub src: NodeId,
    pub dst: NodeId,
    capacity: usize,
    queue: VecDeque<Envelope>,
    /// Consecutive random losses per message kind.
    consecutive_losses: [u32; MessageKind::COUNT],
}

impl Channel {
    pub fn new(src: NodeId, dst: NodeId, capacity: usize) -> Self {
        Channel {
            src,
            dst,
            capacity: capacity.max(1),
            queue: VecDeque::new(),
            consecutive_losses: [0; MessageKind::COUNT],
        }
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Envelope> {
        self.queue.iter()
    }

    pub fn clear(&mut self) {
        self.queue.clear();
    }

    pub fn recv(&mut self) -> Option<Envelope> {
        self.queue.pop_front()
    }

    /// Sends `msg`. A full queue drops the new message. Random loss is
    /// suppressed once `drop_cap` consecutive losses of the same kind
    /// happened, which makes repeated sends eventually succeed.
    pub fn send(&mut self, msg: Message, imp: &Impairments, rng: &mut ChaCha8Rng) -> SendOutcome {
        let kind = msg.kind().index();
        if imp.loss > 0.0 && rng.gen_bool(imp.loss) && self.consecutive_losses[kind] < imp.drop_cap {
            self.consecutive_losses[kind] += 1;
            return SendOutcome::Lost;
        }
        self.consecutive_losses[kind] = 0;
        if self.queue.len() >= self.capacity {
            return SendOutcome::Full;
        }
        let dup = imp.duplication > 0.0 && rng.gen_bool(imp.duplication);
        let env = Envelope { msg, planted: false };
        if dup && self.queue.len() + 2 <= self.capacity {
            self.insert(env.clone(), imp, rng);
            self.insert(env, imp, rng);
            SendOutcome::Duplicated
        } else {
            self.insert(env, imp, rng);
            SendOutcome::Queued
        }
    }

    fn insert(&mut self, env: Envelope, imp: &Impairments, rng: &mut ChaCha8Rng) {
        if imp.reorder > 0.0 && !self.queue.is_empty() && rng.gen_bool(imp.reorder) {
            let at = rng.gen_range(0..=self.queue.len());
            self.queue.insert(at, env);
        } else {
            self.queue.push_back(env);
        }
    }

    /// Fault injection: put a message at a random position if there is room.
    pub fn plant(&mut self, msg: Message, rng: &mut ChaCha8Rng) -> bool {
        if self.queue.len() >= self.capacity {
            return false;
        }
        let at = rng.gen_range(0..=self.queue.len());
        self.queue.insert(at, Envelope { msg, planted: true });
        true
    }

    /// Fault injection: delete each queued message with probability `p`.
    pub fn delete_random(&mut self, p: f64, rng: &mut ChaCha8Rng) -> usize {
        let before = self.queue.len();
        self.queue.retain(|_| !rng.gen_bool(p));
        before - self.queue.len()
    }
}
