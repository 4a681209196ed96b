//! Scenario files: TOML with a format tag, validated on load.
//!
//! ```toml
//! format = "stabcast-scenario/1"
//! n = 5
//! t = 2
//! seed = 7
//! loss = 0.1
//!
//! [workload]
//! broadcasts = 500
//! interval = 40
//!
//! [[crashes]]
//! node = 4
//! at_step = 20000
//!
//! [fault]
//! at_step = 0
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use crate::node::NodeConfig;
use crate::types::NodeSet;

pub const SCENARIO_FORMAT: &str = "stabcast-scenario/1";

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fairness {
    #[default]
    Fair,
    /// The scheduler skips the nodes listed in `starve` during their windows.
    AdversarialWindow,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceLevel {
    /// Every channel operation is recorded.
    Full,
    /// Protocol-level events only.
    #[default]
    Protocol,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayloadKind {
    /// `m<k>` text payloads.
    #[default]
    Text,
    /// `inc` commands for the replicated counter.
    Inc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Workload {
    pub broadcasts: u64,
    /// Scheduler steps between consecutive invocations.
    pub interval: u64,
    pub start: u64,
    /// Invoking nodes, used round-robin. Empty means all nodes.
    pub senders: Vec<usize>,
    /// Invocations issued back to back at each invocation step.
    pub burst: u64,
    pub payload: PayloadKind,
}

impl Default for Workload {
    fn default() -> Self {
        Workload { broadcasts: 0, interval: 50, start: 0, senders: Vec::new(), burst: 1, payload: PayloadKind::Text }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Crash {
    pub node: usize,
    pub at_step: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Starve {
    pub node: usize,
    pub from: u64,
    pub to: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultSpec {
    pub at_step: u64,
    /// Probability that any one variable group of a node is corrupted.
    pub intensity: f64,
    /// Upper bound on planted messages per channel.
    pub plant_per_channel: usize,
    /// Probability that an in-flight message is deleted.
    pub delete: f64,
}

impl Default for FaultSpec {
    fn default() -> Self {
        FaultSpec { at_step: 0, intensity: 1.0, plant_per_channel: 4, delete: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub format: String,
    pub n: usize,
    pub t: usize,
    pub delta: u64,
    pub channel_capacity: usize,
    pub max_counter: u64,
    pub seed: u64,
    pub fairness: Fairness,
    pub starve: Vec<Starve>,
    pub loss: f64,
    pub duplication: f64,
    pub reorder: f64,
    /// Longest run of consecutive random losses per (src, dst, kind).
    pub drop_cap: u32,
    pub fd_threshold: u32,
    pub buffer_bound: u64,
    pub relay_window: usize,
    pub wm_every: u64,
    /// Internal steps between retransmissions.
    pub retransmit_every: u64,
    /// Local steps between periodic internal steps. 0 selects `2n + 2`.
    pub tick_period: u64,
    pub max_steps: u64,
    /// Cycles to keep running once the workload is fully delivered.
    pub settle_cycles: u64,
    /// The run lasts at least this many cycles.
    pub min_cycles: u64,
    pub trace_level: TraceLevel,
    pub smr: bool,
    /// Cycles after the fault from which gated verdicts must hold.
    pub stabilization_cycles: u64,
    pub workload: Workload,
    pub crashes: Vec<Crash>,
    pub fault: Option<FaultSpec>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            format: SCENARIO_FORMAT.to_string(),
            n: 3,
            t: 0,
            delta: 5,
            channel_capacity: 64,
            max_counter: 1 << 40,
            seed: 1,
            fairness: Fairness::Fair,
            starve: Vec::new(),
            loss: 0.0,
            duplication: 0.0,
            reorder: 0.0,
            drop_cap: 4,
            fd_threshold: 40,
            buffer_bound: 64,
            relay_window: 4,
            wm_every: 4,
            retransmit_every: 4,
            tick_period: 0,
            max_steps: 3_000_000,
            settle_cycles: 4,
            min_cycles: 0,
            trace_level: TraceLevel::Protocol,
            smr: false,
            stabilization_cycles: 10,
            workload: Workload::default(),
            crashes: Vec::new(),
            fault: None,
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario, ScenarioError> {
        let table: toml::Table = toml::from_str(text)?;
        if !table.contains_key("format") {
            return Err(ScenarioError::Invalid(format!("missing format tag {SCENARIO_FORMAT:?}")));
        }
        let s: Scenario = table.try_into()?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        Scenario::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.format != SCENARIO_FORMAT {
            return bad(format!("format tag {:?}, expected {SCENARIO_FORMAT:?}", self.format));
        }
        // TOML integers are signed 64-bit
        if self.seed > i64::MAX as u64 {
            return bad(format!("seed {} exceeds {}", self.seed, i64::MAX));
        }
        if self.n == 0 || self.n > NodeSet::MAX_NODES {
            return bad(format!("n = {} outside 1..={}", self.n, NodeSet::MAX_NODES));
        }
        if 2 * self.t >= self.n {
            return bad(format!("t = {} violates t < n/2 for n = {}", self.t, self.n));
        }
        if self.delta < 1 {
            return bad("delta must be at least 1".into());
        }
        if self.max_counter < 4 {
            return bad("max_counter must be at least 4".into());
        }
        if self.channel_capacity == 0 {
            return bad("channel_capacity must be positive".into());
        }
        if self.buffer_bound < self.delta {
            return bad(format!("buffer_bound {} below delta {}", self.buffer_bound, self.delta));
        }
        for (name, p) in [("loss", self.loss), ("duplication", self.duplication), ("reorder", self.reorder)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.loss > 0.0 && self.drop_cap == 0 {
            return bad("loss requires drop_cap >= 1 for fair communication".into());
        }
        let mut crashed = NodeSet::empty();
        for c in &self.crashes {
            if c.node >= self.n {
                return bad(format!("crash of unknown node {}", c.node));
            }
            crashed.insert(c.node);
        }
        if crashed.len() > self.t {
            return bad(format!("{} crashing nodes exceed t = {}", crashed.len(), self.t));
        }
        if let Some(s) = self.workload.senders.iter().find(|&&s| s >= self.n) {
            return bad(format!("workload sender {s} out of range"));
        }
        if let Some(s) = self.starve.iter().find(|s| s.node >= self.n) {
            return bad(format!("starved node {} out of range", s.node));
        }
        if let Some(f) = &self.fault {
            if !(0.0..=1.0).contains(&f.intensity) || !(0.0..=1.0).contains(&f.delete) {
                return bad("fault intensity and delete must be probabilities".into());
            }
        }
        Ok(())
    }

    pub fn tick_period(&self) -> u64 {
        if self.tick_period == 0 {
            2 * self.n as u64 + 2
        } else {
            self.tick_period
        }
    }

    pub fn node_config(&self) -> NodeConfig {
        NodeConfig {
            n: self.n,
            delta: self.delta,
            max_counter: self.max_counter,
            buffer_bound: self.buffer_bound,
            relay_window: self.relay_window,
            fd_threshold: self.fd_threshold,
            wm_every: self.wm_every,
            retransmit_every: self.retransmit_every,
            tick_period: self.tick_period(),
            smr: self.smr,
        }
    }

    /// Nodes that never crash.
    pub fn correct(&self) -> NodeSet {
        let mut s = NodeSet::all(self.n);
        for c in &self.crashes {
            s.remove(c.node);
        }
        s
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Same scenario with another seed.
    pub fn with_seed(&self, seed: u64) -> Scenario {
        Scenario { seed, ..self.clone() }
    }
}
