//! Seed sweeps. Each run is sequential and deterministic; with the
//! `parallel` feature the runs of a sweep execute on the rayon pool.

use serde::{Deserialize, Serialize};
use std::ops::RangeInclusive;

use crate::report::RunReport;
use crate::sim::{run, scenario::Scenario};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub passed: bool,
    pub convergence_cycles: Option<u64>,
    pub cycles: usize,
    pub max_buffered: usize,
    pub max_active_slots: usize,
    pub failed: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub scenario_digest: String,
    pub rows: Vec<SweepRow>,
    pub failures: usize,
    /// Worst convergence over the seeds; `None` if any seed never converged.
    pub max_convergence_cycles: Option<u64>,
    pub max_buffered: usize,
    pub max_active_slots: usize,
}

impl SweepSummary {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn table(&self) -> Vec<String> {
        let mut v = vec![format!("{:>8} {:>6} {:>11} {:>7} {:>9} {:>6}", "seed", "verdict", "convergence", "cycles", "buffered", "slots")];
        for r in &self.rows {
            v.push(format!(
                "{:>8} {:>6} {:>11} {:>7} {:>9} {:>6}{}",
                r.seed,
                if r.passed { "PASS" } else { "FAIL" },
                r.convergence_cycles.map_or("-".into(), |c| c.to_string()),
                r.cycles,
                r.max_buffered,
                r.max_active_slots,
                if r.failed.is_empty() { String::new() } else { format!("  {}", r.failed.join(",")) }
            ));
        }
        let conv = self.max_convergence_cycles.map_or("unbounded".into(), |c| c.to_string());
        v.push(format!(
            "seeds {} failures {} max-convergence {conv} max-buffered {} max-slots {}",
            self.rows.len(),
            self.failures,
            self.max_buffered,
            self.max_active_slots
        ));
        v
    }
}

/// Runs one seed and condenses its report.
pub fn run_seed(sc: &Scenario, seed: u64) -> SweepRow {
    let r = RunReport::from_run(&run(&sc.with_seed(seed)));
    SweepRow {
        seed,
        passed: r.passed,
        convergence_cycles: r.convergence_cycles,
        cycles: r.cycles,
        max_buffered: r.max_buffered,
        max_active_slots: r.max_active_slots,
        failed: r.verdicts.iter().filter(|v| !v.pass).map(|v| v.property.name().to_string()).collect(),
    }
}

pub fn summarize(sc: &Scenario, rows: Vec<SweepRow>) -> SweepSummary {
    let max_convergence_cycles =
        rows.iter().try_fold(0, |m, r| r.convergence_cycles.map(|c| m.max(c))).filter(|_| !rows.is_empty());
    SweepSummary {
        scenario_digest: sc.digest(),
        failures: rows.iter().filter(|r| !r.passed).count(),
        max_convergence_cycles,
        max_buffered: rows.iter().map(|r| r.max_buffered).max().unwrap_or(0),
        max_active_slots: rows.iter().map(|r| r.max_active_slots).max().unwrap_or(0),
        rows,
    }
}

pub fn sweep_sequential(sc: &Scenario, seeds: RangeInclusive<u64>) -> SweepSummary {
    summarize(sc, seeds.map(|s| run_seed(sc, s)).collect())
}

#[cfg(feature = "parallel")]
pub fn sweep_parallel(sc: &Scenario, seeds: RangeInclusive<u64>) -> SweepSummary {
    use rayon::prelude::*;
    summarize(sc, seeds.into_par_iter().map(|s| run_seed(sc, s)).collect())
}

/// Parallel when the `parallel` feature is on, sequential otherwise.
pub fn sweep(sc: &Scenario, seeds: RangeInclusive<u64>) -> SweepSummary {
    #[cfg(feature = "parallel")]
    return sweep_parallel(sc, seeds);
    #[cfg(not(feature = "parallel"))]
    return sweep_sequential(sc, seeds);
}
