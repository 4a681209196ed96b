//! Recyclable multivalued consensus slot.
//!
//! The lowest trusted node coordinates. Proposers forward their value to the
//! coordinator, which runs a ballot (prepare/promise, accept/accepted) against
//! a majority of all `n` nodes and then disseminates the decision until every
//! trusted node acknowledges it. Ballots make agreement survive coordinator
//! changes. A slot is recycled by dropping it, so recycling erases every
//! piece of internal state.

use serde::{Deserialize, Serialize};

use crate::types::{Message, NodeId, NodeSet, Outgoing, Proposal};

pub mod harness;

/// What `result()` returns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Outcome {
    /// ⊥: still running.
    Undecided,
    Decided(Proposal),
    /// ☇: internal state error.
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeaderPhase {
    Idle,
    Preparing { ballot: u64, promises: NodeSet, best: Option<(u64, Proposal)> },
    Accepting { ballot: u64, value: Proposal, accepts: NodeSet },
}

/// Static parameters a slot needs for every step.
#[derive(Clone, Copy, Debug)]
pub struct Ctx {
    pub me: NodeId,
    pub n: usize,
    pub trusted: NodeSet,
    /// Ballots at or above this bound are treated as overflow.
    pub max_counter: u64,
}

impl Ctx {
    fn majority(&self) -> usize {
        self.n / 2 + 1
    }

    fn leader(&self) -> NodeId {
        self.trusted.min().unwrap_or(self.me)
    }
}

/// Side effects of one slot transition that the caller may want to trace.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Effects {
    /// Set when this transition produced the local decision.
    pub decided: Option<Proposal>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub seq: u64,
    pub proposal: Option<Proposal>,
    /// Lowest-id proposal heard from each proposer (coordinator side).
    pub known: Vec<Option<Proposal>>,
    pub promised: u64,
    pub accepted: Option<(u64, Proposal)>,
    pub round: u64,
    pub leader: LeaderPhase,
    pub result: Outcome,
    pub dec_acks: NodeSet,
}

impl Slot {
    /// Slot activated without a local proposal (acceptor-only participant).
    pub fn joined(seq: u64, n: usize) -> Self {
        Slot {
            seq,
            proposal: None,
            known: vec![None; n],
            promised: 0,
            accepted: None,
            round: 0,
            leader: LeaderPhase::Idle,
            result: Outcome::Undecided,
            dec_acks: NodeSet::empty(),
        }
    }

    pub fn proposed(value: Proposal, n: usize) -> Self {
        let mut s = Slot::joined(value.seq, n);
        s.proposal = Some(value);
        s
    }

    /// Undecided and holding no value that could still be decided.
    pub fn is_empty_handed(&self) -> bool {
        self.result == Outcome::Undecided
            && self.proposal.is_none()
            && self.accepted.is_none()
            && self.known.iter().all(Option::is_none)
            && self.leader == LeaderPhase::Idle
    }

    pub fn result(&self) -> &Outcome {
        &self.result
    }

    /// Re-proposal on an active slot. Same round number is idempotent, a
    /// different one is an internal-state error.
    pub fn propose(&mut self, value: Proposal) {
        if value.seq != self.seq {
            self.result = Outcome::Error;
        } else if self.proposal.is_none() {
            self.proposal = Some(value);
        }
    }

    fn malformed(&self, n: usize) -> bool {
        let wrong_seq = |p: &Proposal| p.seq != self.seq;
        self.known.len() != n
            || self.proposal.as_ref().is_some_and(wrong_seq)
            || self.known.iter().flatten().any(wrong_seq)
            || self.accepted.as_ref().is_some_and(|(b, p)| *b > self.promised || wrong_seq(p))
            || matches!(&self.result, Outcome::Decided(p) if wrong_seq(p))
            || match &self.leader {
                LeaderPhase::Idle => false,
                LeaderPhase::Preparing { best, .. } => best.as_ref().is_some_and(|(_, p)| wrong_seq(p)),
                LeaderPhase::Accepting { value, .. } => wrong_seq(value),
            }
    }

    fn decide(&mut self, value: Proposal, me: NodeId, fx: &mut Effects) {
        match &self.result {
            Outcome::Undecided => {
                self.result = Outcome::Decided(value.clone());
                self.dec_acks = NodeSet::empty();
                self.dec_acks.insert(me);
                fx.decided = Some(value);
            }
            Outcome::Decided(w) if *w != value => self.result = Outcome::Error,
            _ => {}
        }
    }

    /// Proposal of the lowest-id proposer the coordinator knows of.
    fn candidate(&self, me: NodeId) -> Option<Proposal> {
        self.known
            .iter()
            .enumerate()
            .find_map(|(i, k)| if i == me { self.proposal.as_ref() } else { k.as_ref() })
            .or(self.proposal.as_ref())
            .cloned()
    }

    fn next_ballot(&mut self, ctx: &Ctx) -> Option<u64> {
        let n = ctx.n as u64;
        let floor_round = self.promised / n.max(1);
        self.round = self.round.max(floor_round) + 1;
        let b = self.round.checked_mul(n)?.checked_add(ctx.me as u64 + 1)?;
        (b < ctx.max_counter).then_some(b)
    }

    /// Periodic step: resend outstanding protocol messages and move the
    /// coordinator state machine forward.
    pub fn tick(&mut self, ctx: &Ctx, out: &mut Vec<Outgoing>) -> Effects {
        let mut fx = Effects::default();
        if self.malformed(ctx.n) {
            self.result = Outcome::Error;
        }
        match self.result.clone() {
            Outcome::Error => return fx,
            Outcome::Decided(value) => {
                for dst in ctx.trusted.iter().filter(|&d| d != ctx.me && !self.dec_acks.contains(d)) {
                    out.push(Outgoing { dst, msg: Message::ConsDec { seq: self.seq, value: value.clone() } });
                }
                return fx;
            }
            Outcome::Undecided => {}
        }
        let leader = ctx.leader();
        if leader != ctx.me {
            self.leader = LeaderPhase::Idle;
            if let Some(p) = &self.proposal {
                out.push(Outgoing { dst: leader, msg: Message::ConsProp { seq: self.seq, value: p.clone() } });
            }
            return fx;
        }
        if matches!(self.leader, LeaderPhase::Idle) {
            if self.candidate(ctx.me).is_none() && self.accepted.is_none() {
                return fx;
            }
            let Some(ballot) = self.next_ballot(ctx) else {
                self.result = Outcome::Error;
                return fx;
            };
            self.leader = LeaderPhase::Preparing { ballot, promises: NodeSet::empty(), best: None };
        }
        // Local acceptor answers without a network hop.
        self.self_deliver(ctx, &mut fx);
        match &self.leader {
            LeaderPhase::Preparing { ballot, promises, .. } => {
                for dst in (0..ctx.n).filter(|&d| d != ctx.me && !promises.contains(d)) {
                    out.push(Outgoing { dst, msg: Message::ConsPrepare { seq: self.seq, ballot: *ballot } });
                }
            }
            LeaderPhase::Accepting { ballot, value, accepts } => {
                for dst in (0..ctx.n).filter(|&d| d != ctx.me && !accepts.contains(d)) {
                    out.push(Outgoing {
                        dst,
                        msg: Message::ConsAccept { seq: self.seq, ballot: *ballot, value: value.clone() },
                    });
                }
            }
            LeaderPhase::Idle => {}
        }
        fx
    }

    fn self_deliver(&mut self, ctx: &Ctx, fx: &mut Effects) {
        match self.leader.clone() {
            LeaderPhase::Preparing { ballot, promises, .. } if !promises.contains(ctx.me) => {
                if ballot >= self.promised {
                    self.promised = ballot;
                    let acc = self.accepted.clone();
                    self.on_promise(ctx, ctx.me, ballot, acc, fx);
                }
            }
            LeaderPhase::Accepting { ballot, value, accepts } if !accepts.contains(ctx.me)
                && ballot >= self.promised => {
                    self.promised = ballot;
                    self.accepted = Some((ballot, value));
                    self.on_accepted(ctx, ctx.me, ballot, fx);
                }
            _ => {}
        }
    }

    fn on_promise(&mut self, ctx: &Ctx, from: NodeId, b: u64, acc: Option<(u64, Proposal)>, fx: &mut Effects) {
        let LeaderPhase::Preparing { ballot, promises, best } = &mut self.leader else { return };
        if b != *ballot {
            return;
        }
        promises.insert(from);
        if let Some((ab, p)) = acc {
            if best.as_ref().is_none_or(|(bb, _)| ab > *bb) {
                *best = Some((ab, p));
            }
        }
        if promises.len() >= ctx.majority() {
            let ballot = *ballot;
            let chosen = best.as_ref().map(|(_, p)| p.clone()).or_else(|| self.candidate(ctx.me));
            match chosen {
                Some(value) => {
                    self.leader = LeaderPhase::Accepting { ballot, value, accepts: NodeSet::empty() };
                    self.self_deliver(ctx, fx);
                }
                None => self.leader = LeaderPhase::Idle,
            }
        }
    }

    fn on_accepted(&mut self, ctx: &Ctx, from: NodeId, b: u64, fx: &mut Effects) {
        let LeaderPhase::Accepting { ballot, value, accepts } = &mut self.leader else { return };
        if b != *ballot {
            return;
        }
        accepts.insert(from);
        if accepts.len() >= ctx.majority() {
            let value = value.clone();
            self.leader = LeaderPhase::Idle;
            self.decide(value, ctx.me, fx);
        }
    }

    /// Handles one consensus message addressed to this slot.
    pub fn on_message(&mut self, ctx: &Ctx, from: NodeId, msg: Message, out: &mut Vec<Outgoing>) -> Effects {
        let mut fx = Effects::default();
        if from >= ctx.n || matches!(self.result, Outcome::Error) {
            return fx;
        }
        let seq = self.seq;
        match msg {
            Message::ConsProp { value, .. } => {
                if value.seq == seq && self.known.get(from).is_some() {
                    self.known[from] = Some(value);
                }
            }
            Message::ConsPrepare { ballot, .. } => {
                if ballot >= ctx.max_counter {
                    self.result = Outcome::Error;
                } else if let Outcome::Decided(v) = &self.result {
                    out.push(Outgoing { dst: from, msg: Message::ConsDec { seq, value: v.clone() } });
                } else if ballot >= self.promised {
                    self.promised = ballot;
                    out.push(Outgoing {
                        dst: from,
                        msg: Message::ConsPromise { seq, ballot, accepted: self.accepted.clone() },
                    });
                } else {
                    out.push(Outgoing { dst: from, msg: Message::ConsNack { seq, promised: self.promised } });
                }
            }
            Message::ConsAccept { ballot, value, .. } => {
                if ballot >= ctx.max_counter || value.seq != seq {
                    self.result = Outcome::Error;
                } else if let Outcome::Decided(v) = &self.result {
                    out.push(Outgoing { dst: from, msg: Message::ConsDec { seq, value: v.clone() } });
                } else if ballot >= self.promised {
                    self.promised = ballot;
                    self.accepted = Some((ballot, value));
                    out.push(Outgoing { dst: from, msg: Message::ConsAccepted { seq, ballot } });
                } else {
                    out.push(Outgoing { dst: from, msg: Message::ConsNack { seq, promised: self.promised } });
                }
            }
            Message::ConsPromise { ballot, accepted, .. } => {
                if accepted.as_ref().is_some_and(|(_, p)| p.seq != seq) {
                    self.result = Outcome::Error;
                } else {
                    self.on_promise(ctx, from, ballot, accepted, &mut fx);
                }
            }
            Message::ConsAccepted { ballot, .. } => self.on_accepted(ctx, from, ballot, &mut fx),
            Message::ConsNack { promised, .. } => {
                let current = match &self.leader {
                    LeaderPhase::Preparing { ballot, .. } | LeaderPhase::Accepting { ballot, .. } => Some(*ballot),
                    LeaderPhase::Idle => None,
                };
                if current.is_some_and(|b| promised >= b) {
                    self.promised = self.promised.max(promised);
                    self.leader = LeaderPhase::Idle;
                }
            }
            Message::ConsDec { value, .. } => {
                if value.seq != seq {
                    self.result = Outcome::Error;
                } else {
                    self.decide(value, ctx.me, &mut fx);
                    if matches!(self.result, Outcome::Decided(_)) {
                        out.push(Outgoing { dst: from, msg: Message::ConsDecAck { seq } });
                    }
                }
            }
            Message::ConsDecAck { .. } => self.dec_acks.insert(from),
            _ => {}
        }
        fx
    }
}
