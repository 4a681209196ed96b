//! Trace checker: broadcast, consensus and state properties, each judged on
//! the suffix that starts a fixed number of asynchronous cycles after the
//! last transient fault (or on the whole run when there is none).

pub mod consistency;
pub mod facts;
pub mod total_order;

use serde::{Deserialize, Serialize};

use crate::sim::trace::Trace;
use facts::Facts;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub step: u64,
    pub detail: String,
}

impl Violation {
    pub fn at(step: u64, detail: String) -> Self {
        Violation { step, detail }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Validity,
    Integrity,
    TotalOrder,
    CompletionBroadcast,
    CompletionDelivery,
    FifoDelivery,
    Consensus,
    Consistency,
    FlushRule,
    BoundedState,
}

impl Property {
    pub const ALL: [Property; 10] = [
        Property::Validity,
        Property::Integrity,
        Property::TotalOrder,
        Property::CompletionBroadcast,
        Property::CompletionDelivery,
        Property::FifoDelivery,
        Property::Consensus,
        Property::Consistency,
        Property::FlushRule,
        Property::BoundedState,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Validity => "validity",
            Property::Integrity => "integrity",
            Property::TotalOrder => "total-order",
            Property::CompletionBroadcast => "completion-broadcast",
            Property::CompletionDelivery => "completion-delivery",
            Property::FifoDelivery => "fifo-delivery",
            Property::Consensus => "consensus",
            Property::Consistency => "consistency",
            Property::FlushRule => "flush-rule",
            Property::BoundedState => "bounded-state",
        }
    }

    /// Violations in the suffix starting at step `from`. For every property
    /// a violation-free suffix stays violation-free when shortened.
    pub fn check(self, f: &Facts, from: u64) -> Vec<Violation> {
        match self {
            Property::Validity => total_order::validity(f, from),
            Property::Integrity => total_order::integrity(f, from),
            Property::TotalOrder => total_order::total_order(f, from),
            Property::CompletionBroadcast => total_order::completion_from_broadcast(f, from),
            Property::CompletionDelivery => total_order::completion_from_delivery(f, from),
            Property::FifoDelivery => total_order::fifo(f, from),
            Property::Consensus => total_order::consensus(f, from),
            Property::Consistency => consistency::consistency(f, from),
            Property::FlushRule => consistency::flush_rule(f, from),
            Property::BoundedState => consistency::bounded_state(f, from),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub property: Property,
    pub pass: bool,
    /// Fewest cycles after the fault from which the property holds.
    pub holds_from_cycle: Option<u64>,
    /// Violations inside the judged suffix, at most [`MAX_REPORTED`].
    pub violations: Vec<Violation>,
    pub violation_count: usize,
}

pub const MAX_REPORTED: usize = 8;

impl Verdict {
    pub fn line(&self) -> String {
        let from = self.holds_from_cycle.map_or("never".to_string(), |c| format!("from cycle {c}"));
        let mut s = format!("{:<22} {}  holds {from}", self.property.name(), if self.pass { "PASS" } else { "FAIL" });
        if let Some(v) = self.violations.first() {
            s.push_str(&format!("; first violation at step {}: {}", v.step, v.detail));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub n: usize,
    pub faulted: bool,
    pub stabilization_cycles: u64,
    /// Cycles completed after the last fault or run start.
    pub cycles: usize,
    /// Step from which properties are judged; `None` if the run ended first.
    pub gate: Option<u64>,
    /// Cycles after the fault until every later snapshot is consistent.
    pub convergence_cycles: Option<u64>,
    pub end_reason: Option<String>,
    /// Deliveries of messages planted by the fault, over the whole run.
    pub ghost_deliveries: usize,
    pub verdicts: Vec<Verdict>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.gate.is_some() && self.verdicts.iter().all(|v| v.pass)
    }

    pub fn verdict(&self, p: Property) -> &Verdict {
        self.verdicts.iter().find(|v| v.property == p).expect("every property is checked")
    }

    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.gate.is_none() {
            out.push(format!(
                "run ended after {} of the {} cycles required after the fault",
                self.cycles, self.stabilization_cycles
            ));
        }
        out.extend(self.verdicts.iter().map(Verdict::line));
        out
    }
}

/// Smallest index whose suffix has no violation, by binary search over
/// the monotone predicate.
fn first_clean(starts: &[u64], clean: impl Fn(u64) -> bool) -> Option<usize> {
    let (mut lo, mut hi) = (0, starts.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if clean(starts[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    (lo < starts.len()).then_some(lo)
}

pub fn check(trace: &Trace) -> CheckReport {
    check_facts(&Facts::new(trace))
}

pub fn check_facts(f: &Facts) -> CheckReport {
    let starts = f.cycle_starts();
    let gate = f.gate();
    let allowed = if f.fault_step.is_some() { f.stabilization_cycles } else { 0 };
    let verdicts: Vec<Verdict> = Property::ALL
        .iter()
        .map(|&p| {
            let holds = first_clean(&starts, |s| p.check(f, s).is_empty()).map(|c| c as u64);
            let judged = gate.map(|g| p.check(f, g)).unwrap_or_default();
            Verdict {
                property: p,
                pass: gate.is_some() && judged.is_empty() && holds.is_some_and(|c| c <= allowed),
                holds_from_cycle: holds,
                violation_count: judged.len(),
                violations: judged.into_iter().take(MAX_REPORTED).collect(),
            }
        })
        .collect();
    let convergence_cycles = verdicts.iter().find(|v| v.property == Property::Consistency).and_then(|v| v.holds_from_cycle);
    CheckReport {
        n: f.n,
        faulted: f.fault_step.is_some(),
        stabilization_cycles: f.stabilization_cycles,
        cycles: starts.len() - 1,
        gate,
        convergence_cycles,
        end_reason: f.end_reason.clone(),
        ghost_deliveries: total_order::ghost_deliveries(f, 0),
        verdicts,
    }
}
