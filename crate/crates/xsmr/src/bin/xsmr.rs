//! `xsmr`: validate, run, check and replay scenarios.
//!
//! Exit codes: 0 success, 1 a property failed or a replay diverged, 2 bad
//! input (configuration or trace).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use xsmr::check::{self, Status, Verdict};
use xsmr::trace::{from_jsonl, TraceEvent};
use xsmr::{run_scenario, suite, RunResult, ScenarioConfig};
use xsmr_core::replica::Mode;

#[derive(Parser)]
#[command(name = "xsmr", version, about = "Cross-chain state machine replication simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Pessimistic,
    Optimistic,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Pessimistic => Mode::Pessimistic,
            ModeArg::Optimistic => Mode::Optimistic,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    Delivery,
    Safety,
    Consistency,
    Timing,
    Optimistic,
    All,
}

impl SuiteArg {
    fn run(self, run: &RunResult) -> Vec<Verdict> {
        let (cfg, trace) = (&run.config, &run.trace);
        match self {
            SuiteArg::All => {
                let mut v = check::check_run(run);
                v.push(check::compare_optimistic(cfg));
                v
            }
            SuiteArg::Optimistic => vec![check::compare_optimistic(cfg)],
            other => other.on_trace(cfg, trace),
        }
    }

    fn on_trace(self, cfg: &ScenarioConfig, trace: &[TraceEvent]) -> Vec<Verdict> {
        match self {
            SuiteArg::Delivery => vec![check::check_delivery(cfg, trace)],
            SuiteArg::Safety => vec![check::check_safety(cfg, trace)],
            SuiteArg::Consistency => vec![check::check_consistency(cfg, trace)],
            SuiteArg::Timing => vec![check::check_timing(cfg, trace)],
            SuiteArg::Optimistic => Vec::new(),
            SuiteArg::All => check::check_trace(cfg, trace),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a scenario file.
    Validate { config: PathBuf },
    /// Run a scenario and print its outcome.
    Run {
        config: PathBuf,
        /// Write the JSONL trace here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Check a property suite on a scenario, or on the shipped matrix.
    Check {
        #[arg(value_enum)]
        suite: SuiteArg,
        /// Scenario file; the shipped adversarial matrix if omitted.
        config: Option<PathBuf>,
        /// Number of random-delay seeds; 1 runs the scenario's own network.
        #[arg(long, default_value_t = 1)]
        runs: u64,
        /// First seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Check this trace instead of running the scenario.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Re-run a scenario and compare with a recorded trace byte for byte.
    Replay {
        config: PathBuf,
        trace: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
}

enum Failure {
    Violation,
    Input(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config } => validate(&config),
        Command::Run { config, out, seed, mode } => run(&config, out.as_deref(), seed, mode),
        Command::Check { suite, config, runs, seed, mode, replay } => {
            check_cmd(suite, config.as_deref(), runs, seed, mode, replay.as_deref())
        }
        Command::Replay { config, trace, seed, mode } => replay(&config, &trace, seed, mode),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load(path: &Path, seed: Option<u64>, mode: Option<ModeArg>) -> Result<ScenarioConfig, Failure> {
    let mut cfg = ScenarioConfig::load(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(mode) = mode {
        cfg.mode = mode.into();
    }
    Ok(cfg)
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("reports serialize"));
}

fn validate(path: &Path) -> Result<(), Failure> {
    let cfg = load(path, None, None)?;
    println!("{}", cfg.to_json());
    Ok(())
}

#[derive(Serialize)]
struct RunSummary {
    name: String,
    seed: u64,
    mode: Mode,
    network: &'static str,
    is_final: bool,
    completion_tick: Option<u64>,
    end_tick: u64,
    cap_hit: bool,
    events: usize,
    invariant_checks: u64,
    invariant_violations: u64,
    utilities: BTreeMap<String, i64>,
    balances: BTreeMap<String, BTreeMap<String, i64>>,
}

fn run(path: &Path, out: Option<&Path>, seed: Option<u64>, mode: Option<ModeArg>) -> Result<(), Failure> {
    let cfg = load(path, seed, mode)?;
    let result = run_scenario(&cfg);
    if let Some(out) = out {
        std::fs::write(out, result.trace_jsonl())
            .map_err(|e| Failure::Input(format!("{}: {e}", out.display())))?;
    }
    let name_of = |id| cfg.agent(id).map_or_else(|| id.to_string(), |a| a.name.clone());
    let utilities = result.utilities().into_iter().map(|(id, u)| (name_of(id), u)).collect();
    let balances = cfg
        .agents
        .iter()
        .map(|a| {
            let held = cfg.assets.iter().map(|s| (s.name.clone(), result.final_long(a.id, s.id))).collect();
            (a.name.clone(), held)
        })
        .collect();
    print_json(&RunSummary {
        name: cfg.name.clone(),
        seed: cfg.seed,
        mode: cfg.mode,
        network: cfg.network.name(),
        is_final: result.is_final(),
        completion_tick: result.completion_tick().map(|t| t.0),
        end_tick: result.end_tick.0,
        cap_hit: result.cap_hit,
        events: result.trace.len(),
        invariant_checks: result.invariant_checks,
        invariant_violations: result.invariant_violations,
        utilities,
        balances,
    });
    if result.invariant_violations > 0 {
        return Err(Failure::Violation);
    }
    Ok(())
}

#[derive(Default, Serialize)]
struct PropertyReport {
    pass: u64,
    fail: u64,
    not_applicable: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    first_failure: Option<FailureReport>,
}

#[derive(Serialize)]
struct FailureReport {
    scenario: String,
    seed: u64,
    verdict: Verdict,
}

#[derive(Serialize)]
struct CheckReport {
    runs: u64,
    passed: bool,
    properties: BTreeMap<&'static str, PropertyReport>,
}

fn check_cmd(
    suite: SuiteArg,
    config: Option<&Path>,
    runs: u64,
    seed: Option<u64>,
    mode: Option<ModeArg>,
    replay: Option<&Path>,
) -> Result<(), Failure> {
    let mut report = CheckReport { runs: 0, passed: true, properties: BTreeMap::new() };
    let mut add = |scenario: &str, seed: u64, verdicts: Vec<Verdict>| {
        report.runs += 1;
        for v in verdicts {
            let entry = report.properties.entry(v.property).or_default();
            match v.status {
                Status::Pass => entry.pass += 1,
                Status::NotApplicable => entry.not_applicable += 1,
                Status::Fail => {
                    entry.fail += 1;
                    report.passed = false;
                    if entry.first_failure.is_none() {
                        entry.first_failure = Some(FailureReport { scenario: scenario.to_string(), seed, verdict: v });
                    }
                }
            }
        }
    };
    if let Some(trace_path) = replay {
        let Some(config) = config else {
            return Err(Failure::Input("--replay needs the scenario file the trace came from".into()));
        };
        let cfg = load(config, seed, mode)?;
        let text = std::fs::read_to_string(trace_path)
            .map_err(|e| Failure::Input(format!("{}: {e}", trace_path.display())))?;
        let trace = from_jsonl(&text).map_err(|e| Failure::Input(format!("{}: {e}", trace_path.display())))?;
        add(&cfg.name, cfg.seed, suite.on_trace(&cfg, &trace));
    } else {
        let scenarios = match config {
            Some(path) => vec![load(path, None, mode)?],
            None => {
                let mut m = suite::matrix();
                if let Some(mode) = mode {
                    m.retain(|c| c.mode == Mode::from(mode));
                }
                m
            }
        };
        if runs <= 1 {
            for cfg in &scenarios {
                let mut cfg = cfg.clone();
                cfg.seed = seed.unwrap_or(cfg.seed);
                add(&cfg.name, cfg.seed, suite.run(&run_scenario(&cfg)));
            }
        } else {
            let first = seed.unwrap_or(0);
            let results = suite::sweep(&scenarios, first..first + runs, |r| {
                (r.config.name.clone(), r.config.seed, suite.run(r))
            });
            for (name, seed, verdicts) in results {
                add(&name, seed, verdicts);
            }
        }
    }
    let passed = report.passed;
    print_json(&report);
    if passed {
        Ok(())
    } else {
        Err(Failure::Violation)
    }
}

fn replay(path: &Path, trace: &Path, seed: Option<u64>, mode: Option<ModeArg>) -> Result<(), Failure> {
    let cfg = load(path, seed, mode)?;
    let recorded =
        std::fs::read_to_string(trace).map_err(|e| Failure::Input(format!("{}: {e}", trace.display())))?;
    let fresh = run_scenario(&cfg).trace_jsonl();
    if fresh == recorded {
        println!("identical: {} events", fresh.lines().count());
        return Ok(());
    }
    let line = fresh
        .lines()
        .zip(recorded.lines())
        .position(|(a, b)| a != b)
        .unwrap_or(fresh.lines().count().min(recorded.lines().count()));
    println!("diverged at line {}", line + 1);
    Err(Failure::Violation)
}
