//! Demo replicated automaton: a counter plus a digest of an append-only log.
//!
//! Command grammar, one command per toURB payload:
//! * `inc` increments the counter,
//! * `append:<token>` folds `<token>` into the log digest,
//! * anything else leaves the state unchanged.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReplicaState {
    pub counter: u64,
    pub log_digest: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command<'a> {
    Inc,
    Append(&'a str),
    Noop,
}

impl<'a> Command<'a> {
    pub fn parse(text: &'a str) -> Self {
        if text == "inc" {
            Command::Inc
        } else if let Some(tok) = text.strip_prefix("append:") {
            Command::Append(tok)
        } else {
            Command::Noop
        }
    }
}

impl ReplicaState {
    /// Deterministic, total transition function.
    pub fn apply(self, command: &str) -> ReplicaState {
        match Command::parse(command) {
            Command::Inc => ReplicaState { counter: self.counter.wrapping_add(1), ..self },
            Command::Append(tok) => {
                let mut h = Sha256::new();
                h.update(self.log_digest.to_le_bytes());
                h.update(tok.as_bytes());
                let out = h.finalize();
                let mut first = [0u8; 8];
                first.copy_from_slice(&out[..8]);
                ReplicaState { log_digest: u64::from_le_bytes(first), ..self }
            }
            Command::Noop => self,
        }
    }
}

/// Per-node replica: holds the automaton state between rounds.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replica {
    state: ReplicaState,
}

impl Replica {
    pub fn get_state(&self) -> ReplicaState {
        self.state
    }

    pub fn set_state(&mut self, s: ReplicaState) {
        self.state = s;
    }

    pub fn apply(&mut self, command: &str) {
        self.state = self.state.apply(command);
    }
}
