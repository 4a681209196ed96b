//! `stabcast`: run scenarios, check traces, sweep seeds.
//!
//! Exit status: 0 when every gated verdict passes, 1 on a property
//! violation, 2 on unreadable or malformed input.

use clap::{Parser, Subcommand};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use stabcast_core::report::RunReport;
use stabcast_core::sim::{run, scenario::Scenario, trace::Trace};
use stabcast_core::sweep;

const EXIT_VIOLATION: u8 = 1;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "stabcast", version, about = "Self-stabilizing total-order broadcast simulator and trace checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and check the resulting trace.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Run the replicated state machine on top of the broadcast.
        #[arg(long)]
        smr: bool,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a JSON-lines trace.
    Check {
        trace: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a scenario over a range of seeds and tabulate convergence.
    Sweep {
        scenario: PathBuf,
        /// Inclusive seed range, `a..b`.
        #[arg(long, value_parser = parse_seeds)]
        seeds: RangeInclusive<u64>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        smr: bool,
        /// Run seeds one after another on the calling thread.
        #[arg(long)]
        sequential: bool,
    },
}

fn parse_seeds(s: &str) -> Result<RangeInclusive<u64>, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected a..b, got {s:?}"))?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let a: u64 = a.trim().parse().map_err(|e| format!("bad seed {a:?}: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("bad seed {b:?}: {e}"))?;
    if a > b {
        return Err(format!("empty seed range {a}..{b}"));
    }
    if b > i64::MAX as u64 {
        return Err(format!("seed {b} exceeds {}", i64::MAX));
    }
    Ok(a..=b)
}

struct Failure(u8, String);

fn input_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure(EXIT_INPUT, format!("{}: {e}", path.display()))
}

fn load_scenario(path: &Path, smr: bool) -> Result<Scenario, Failure> {
    let mut sc = Scenario::load(path).map_err(|e| input_err(path, e))?;
    sc.smr |= smr;
    Ok(sc)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), Failure> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| input_err(path, e))?);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| input_err(path, e))
}

fn finish(lines: &[String], passed: bool) -> Result<u8, Failure> {
    for l in lines {
        println!("{l}");
    }
    Ok(if passed { 0 } else { EXIT_VIOLATION })
}

fn execute(cmd: Command) -> Result<u8, Failure> {
    match cmd {
        Command::Run { scenario, trace_out, report, smr, seed } => {
            let mut sc = load_scenario(&scenario, smr)?;
            if let Some(s) = seed {
                sc.seed = s;
                sc.validate().map_err(|e| Failure(EXIT_INPUT, format!("--seed: {e}")))?;
            }
            let out = run(&sc);
            if let Some(p) = &trace_out {
                write_file(p, |w| out.trace.write_jsonl(w).map_err(std::io::Error::other))?;
            }
            let r = RunReport::from_run(&out);
            if let Some(p) = &report {
                write_file(p, |w| w.write_all(r.to_json().as_bytes()))?;
            }
            finish(&r.lines(), r.passed)
        }
        Command::Check { trace, report } => {
            let file = File::open(&trace).map_err(|e| input_err(&trace, e))?;
            let t = Trace::read_jsonl(BufReader::new(file)).map_err(|e| input_err(&trace, e))?;
            let r = RunReport::from_trace(&t);
            if let Some(p) = &report {
                write_file(p, |w| w.write_all(r.to_json().as_bytes()))?;
            }
            finish(&r.lines(), r.passed)
        }
        Command::Sweep { scenario, seeds, report, smr, sequential } => {
            let sc = load_scenario(&scenario, smr)?;
            let s = if sequential { sweep::sweep_sequential(&sc, seeds) } else { sweep::sweep(&sc, seeds) };
            if let Some(p) = &report {
                let json = serde_json::to_string_pretty(&s).map_err(|e| input_err(p, e))?;
                write_file(p, |w| w.write_all(json.as_bytes()))?;
            }
            finish(&s.table(), s.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("stabcast: {msg}");
            ExitCode::from(code)
        }
    }
}
