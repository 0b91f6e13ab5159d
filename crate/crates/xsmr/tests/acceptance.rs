//! The acceptance suite: one line per criterion, `PASS` or `FAIL`, with the
//! measured quantity next to its pinned bound. Exits non-zero if any
//! criterion fails.
//!
//! Run with `cargo test -p xsmr --test acceptance`.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xsmr::check::{self, reconstruct_logs, Status};
use xsmr::config::NetworkPolicy;
use xsmr::sim::run_scenario;
use xsmr::suite::{self, ALICE, BOB, CAROL};
use xsmr::trace::Event;
use xsmr::ScenarioConfig;
use xsmr_core::game::auction::{seal, sealed_bid, unseal};
use xsmr_core::game::{AuctionParams, GameSpec, GameState, Machine};
use xsmr_core::replica::{Mode, SendOutcome};
use xsmr_core::{AgentId, AssetId, MoveDescriptor};

const SEEDS: u64 = 1000;
const MATRIX_SEEDS: u64 = 200;
const DELIVERY_BUDGET: Duration = Duration::from_secs(60);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random(cfg: &ScenarioConfig, seed: u64) -> ScenarioConfig {
    suite::seeded(cfg, seed, NetworkPolicy::UniformRandom)
}

/// 1. Every request a compliant agent issues is buffered at every replica
///    within Δ, with one agent never relaying.
fn compliant_delivery() -> Outcome {
    let start = Instant::now();
    let results = suite::sweep(&[suite::delivery_auction()], 0..SEEDS, |r| {
        let v = check::check_delivery(&r.config, &r.trace);
        (v.status == Status::Fail, v.checked)
    });
    let elapsed = start.elapsed();
    let violations = results.iter().filter(|(f, _)| *f).count();
    let checked: u64 = results.iter().map(|(_, c)| c).sum();
    outcome(
        violations == 0 && elapsed < DELIVERY_BUDGET,
        format!(
            "{violations} violations over {SEEDS} seeds ({checked} deliveries); {:.1} s < {} s",
            elapsed.as_secs_f64(),
            DELIVERY_BUDGET.as_secs()
        ),
    )
}

/// Literal form of the relay theorem: a request buffered somewhere strictly
/// before its round starts is at every replica by `start + nΔ`. Returns
/// (premise instances, violations).
fn relay_literal(cfg: &ScenarioConfig, trace: &[xsmr::trace::TraceEvent]) -> (u64, u64) {
    let n = cfg.n() as u64;
    let mut starts: BTreeMap<u64, u64> = BTreeMap::new();
    for e in trace {
        if let Event::Execute { round, start, .. } | Event::Skip { round, start, .. } = &e.event {
            starts.insert(*round, *start);
        }
    }
    let mut early = Vec::new();
    let mut seen: BTreeMap<(&xsmr_core::Request, AssetId), u64> = BTreeMap::new();
    for e in trace {
        if let Event::Buffer { replica, request, outcome, .. } = &e.event {
            if matches!(outcome, SendOutcome::Buffered | SendOutcome::Duplicate | SendOutcome::Unfunded) {
                seen.entry((request, *replica)).or_insert(e.tick);
            }
            if *outcome == SendOutcome::Buffered && starts.get(&request.round).is_some_and(|s| e.tick < *s) {
                early.push(request);
            }
        }
    }
    let mut violations = 0;
    for request in &early {
        let deadline = starts[&request.round] + n * cfg.delta;
        for asset in cfg.asset_ids() {
            if seen.get(&(*request, asset)).is_none_or(|t| *t > deadline) {
                violations += 1;
            }
        }
    }
    (early.len() as u64, violations)
}

/// 2. With one compliant agent and two adversaries, requests reach every
///    replica within nΔ.
fn relay_bound() -> Outcome {
    let cfg = suite::relay_stress();
    let bound = cfg.n() as u64 * cfg.delta;
    let results = suite::sweep(&[cfg], 0..SEEDS, |r| {
        let (v, lag) = check::check_relay_bound(&r.config, &r.trace, bound);
        let (premise, literal) = relay_literal(&r.config, &r.trace);
        (v.status == Status::Fail, v.checked, lag, premise, literal)
    });
    let violations = results.iter().filter(|r| r.0).count() as u64;
    let checked: u64 = results.iter().map(|r| r.1).sum();
    let worst = results.iter().map(|r| r.2).max().unwrap_or(0);
    let premise: u64 = results.iter().map(|r| r.3).sum();
    let literal: u64 = results.iter().map(|r| r.4).sum();
    outcome(
        violations + literal == 0 && checked > 0,
        format!(
            "{} violations over {SEEDS} seeds; {checked} request/replica pairs, largest lag {worst} ≤ nΔ = {bound}; \
             {premise} requests buffered before their round",
            violations + literal
        ),
    )
}

/// 3. Equivocation ends with identical logs and the attacked round skipped.
fn consistency_under_equivocation() -> Outcome {
    let mut scenarios = Vec::new();
    for base in suite::base_scenarios() {
        let cfg = suite::with_adversary(&base, "equivocator");
        scenarios.push(suite::with_mode(&cfg, Mode::Optimistic));
        scenarios.push(cfg);
    }
    let results = suite::sweep(&scenarios, 0..MATRIX_SEEDS, |r| {
        let logs = reconstruct_logs(&r.config, &r.trace);
        let identical = logs.values().all(|l| Some(l) == logs.values().next());
        let mut issued: BTreeMap<(AgentId, u64), usize> = BTreeMap::new();
        for e in &r.trace {
            if let Event::Issue { agent, request, .. } = &e.event {
                *issued.entry((*agent, request.round)).or_default() += 1;
            }
        }
        let attacked: Vec<u64> = issued.iter().filter(|(_, c)| **c > 1).map(|((_, round), _)| *round).collect();
        let skipped = !attacked.is_empty()
            && attacked.iter().all(|round| {
                logs.values().all(|l| l.iter().any(|(r, q)| r == round && q.is_none()))
            });
        identical && skipped
    });
    let bad = results.iter().filter(|ok| !**ok).count();
    outcome(
        bad == 0,
        format!("{bad} mismatches over {} scenarios × {MATRIX_SEEDS} seeds", scenarios.len()),
    )
}

struct MatrixRun {
    name: String,
    safe: bool,
    events: usize,
    checks: u64,
    violations: u64,
}

fn matrix_runs() -> Vec<MatrixRun> {
    suite::sweep(&suite::matrix(), 0..MATRIX_SEEDS, |r| MatrixRun {
        name: r.config.name.clone(),
        safe: check::check_safety(&r.config, &r.trace).passed(),
        events: r.trace.len(),
        checks: r.invariant_checks,
        violations: r.invariant_violations + u64::from(!check::check_invariant(&r.trace).passed()),
    })
}

/// 4. No compliant agent ends with negative utility anywhere in the matrix.
fn safety(runs: &[MatrixRun]) -> Outcome {
    let bad: Vec<&str> = runs.iter().filter(|r| !r.safe).map(|r| r.name.as_str()).collect();
    let scenarios = suite::matrix().len();
    outcome(
        bad.is_empty() && scenarios >= 15,
        format!("{} violations over {scenarios} scenarios × {MATRIX_SEEDS} seeds", bad.len()),
    )
}

/// 5. All-compliant games finish with every staked agent better off, and the
///    swap finishes exactly at (n+1)Δ + 3nΔ.
fn liveness() -> Outcome {
    let mut failures = Vec::new();
    for cfg in suite::base_scenarios() {
        for seed in 0..MATRIX_SEEDS {
            let c = if seed == 0 { cfg.clone() } else { random(&cfg, seed) };
            let r = run_scenario(&c);
            if !check::check_liveness(&r).passed() {
                failures.push(format!("{} seed {seed}", cfg.name));
            }
        }
    }
    let swap = suite::swap();
    let (n, delta) = (swap.n() as u64, swap.delta);
    let expected = (n + 1) * delta + 3 * n * delta;
    let ticks: Vec<u64> = (0..MATRIX_SEEDS)
        .map(|seed| run_scenario(&random(&swap, seed)).completion_tick().map_or(u64::MAX, |t| t.0))
        .collect();
    let exact = ticks.iter().all(|t| *t == expected) && expected == 90;
    outcome(
        failures.is_empty() && exact,
        format!(
            "{} liveness failures over 3 games × {MATRIX_SEEDS} schedules; swap completes at ticks {}..={} (expected {expected}, ±0)",
            failures.len(),
            ticks.iter().min().unwrap_or(&0),
            ticks.iter().max().unwrap_or(&0),
        ),
    )
}

/// 6. The account invariant holds after every replica step of the suite.
fn account_invariant(runs: &[MatrixRun]) -> Outcome {
    let events: usize = runs.iter().map(|r| r.events).sum();
    let checks: u64 = runs.iter().map(|r| r.checks).sum();
    let violations: u64 = runs.iter().map(|r| r.violations).sum();
    outcome(
        violations == 0 && events >= 10_000,
        format!("{violations} violations in {checks} checks over {events} trace events"),
    )
}

/// 7. The invalid funder is expelled and slashed, and nobody else can tell
///    it apart from a silent agent.
fn dynamic_funding() -> Outcome {
    let invalid = suite::with_adversary(&suite::auction(), "invalid_funder");
    let mut silent = suite::with_adversary(&suite::auction(), "silent");
    silent.premium = invalid.premium;
    silent.top_up = invalid.top_up;
    silent.leader = invalid.leader;
    let mut bad = Vec::new();
    for seed in 0..MATRIX_SEEDS {
        let (ci, cs) = if seed == 0 {
            (invalid.clone(), silent.clone())
        } else {
            (random(&invalid, seed), random(&silent, seed))
        };
        let (a, b) = (run_scenario(&ci), run_scenario(&cs));
        let expelled = a.replicas.iter().all(|r| !r.is_funded(BOB))
            && a.trace.iter().any(|e| matches!(&e.event, Event::Defund { agents, .. } if agents.contains(&BOB)));
        let forfeited = a.replicas.iter().all(|r| ci.asset_ids().iter().all(|s| r.deposit(BOB, *s) == 0))
            && a.trace.iter().any(|e| matches!(&e.event, Event::Slash { offender, .. } if *offender == BOB))
            && a.final_long(BOB, suite::FLORIN)
                < ci.agent(BOB).map_or(0, |x| x.holdings[&suite::FLORIN]) - ci.agent(BOB).map_or(0, |x| x.fund[&suite::FLORIN]);
        let same = [ALICE, CAROL].iter().all(|p| ci.asset_ids().iter().all(|s| a.final_long(*p, *s) == b.final_long(*p, *s)));
        if !(expelled && forfeited && same) {
            bad.push(seed);
        }
    }
    outcome(
        bad.is_empty(),
        format!("{} mismatches over {MATRIX_SEEDS} schedules (expelled, deposit forfeited, others' balances equal)", bad.len()),
    )
}

/// 8. Optimistic execution of the all-compliant auction: same log, done by
///    (r+2n)Δ; pessimistic takes at least r·n·Δ.
fn optimistic_speedup() -> Outcome {
    let base = suite::auction();
    let (n, delta) = (base.n() as u64, base.delta);
    let r = base.game.max_rounds();
    let (fast_bound, slow_bound) = ((r + 2 * n) * delta, r * n * delta);
    let mut worst_fast = 0;
    let mut best_slow = u64::MAX;
    let mut mismatches = 0;
    for seed in 0..MATRIX_SEEDS {
        let p = if seed == 0 { base.clone() } else { random(&base, seed) };
        let o = suite::with_mode(&p, Mode::Optimistic);
        let (rp, ro) = (run_scenario(&p), run_scenario(&o));
        let lp: Vec<_> = reconstruct_logs(&p, &rp.trace).into_values().collect();
        let lo: Vec<_> = reconstruct_logs(&o, &ro.trace).into_values().collect();
        if lp != lo || lp[0].len() as u64 != r {
            mismatches += 1;
        }
        worst_fast = worst_fast.max(ro.completion_tick().map_or(u64::MAX, |t| t.0));
        best_slow = best_slow.min(rp.completion_tick().map_or(0, |t| t.0));
    }
    outcome(
        mismatches == 0 && worst_fast <= fast_bound && best_slow >= slow_bound,
        format!(
            "r = {r}, n = {n}, Δ = {delta}: logs differ in {mismatches} runs; optimistic ≤ {worst_fast} (bound {fast_bound}), \
             pessimistic ≥ {best_slow} (bound {slow_bound})"
        ),
    )
}

/// 9. A commitment opens only with its own bid and nonce.
fn commitment_binding() -> Outcome {
    const TRIALS: u64 = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ea1);
    let params = AuctionParams { seller: CAROL, bidders: vec![ALICE, BOB], florin: suite::FLORIN, nft: suite::NFT };
    let mut violations = 0;
    for _ in 0..TRIALS {
        let bid: i64 = rng.random_range(0..1000);
        let nonce: Vec<u8> = (0..rng.random_range(0..24)).map(|_| rng.random()).collect();
        let (fake_bid, fake_nonce) = if rng.random_bool(0.5) {
            (bid, nonce.iter().map(|b| b ^ 1).chain([rng.random()]).collect::<Vec<u8>>())
        } else {
            (rng.random_range(0..1000), nonce.clone())
        };
        if (fake_bid, &fake_nonce) == (bid, &nonce) {
            continue;
        }
        if seal(fake_bid, &fake_nonce) == seal(bid, &nonce) {
            violations += 1;
        }
        let mut m = GameSpec::Auction(params.clone()).initial_state(&BTreeMap::new());
        for p in [ALICE, BOB] {
            m.accounts_mut().credit(p, suite::FLORIN, 1000);
        }
        m.apply(ALICE, &sealed_bid(bid, &nonce)).unwrap();
        m.apply(BOB, &MoveDescriptor::skip()).unwrap();
        // Alice opens with the wrong pair; Bob, who sealed nothing, tries
        // to open Alice's commitment with the right one.
        m.apply(ALICE, &unseal(fake_bid, &fake_nonce)).unwrap();
        m.apply(BOB, &unseal(bid, &nonce)).unwrap();
        let GameState::Auction(s) = &m else { unreachable!() };
        if !s.bid.is_empty() {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations in {TRIALS} trials"))
}

/// 10. Running a shipped scenario twice gives byte-identical traces.
fn determinism() -> Outcome {
    let mut differing = Vec::new();
    let shipped = suite::shipped();
    for (name, cfg) in &shipped {
        let mut cfgs = vec![cfg.clone(), random(cfg, 7)];
        if cfg.mode == Mode::Pessimistic {
            cfgs.push(suite::with_mode(cfg, Mode::Optimistic));
        }
        for c in cfgs {
            if run_scenario(&c).trace_jsonl() != run_scenario(&c).trace_jsonl() {
                differing.push(name.clone());
            }
        }
    }
    outcome(
        differing.is_empty(),
        format!("{} differing traces over {} shipped configs", differing.len(), shipped.len()),
    )
}

fn main() {
    let matrix = matrix_runs();
    type Criterion<'a> = (&'a str, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("compliant delivery within Δ", Box::new(compliant_delivery)),
        ("relay bound nΔ", Box::new(relay_bound)),
        ("consistency under equivocation", Box::new(consistency_under_equivocation)),
        ("safety over the matrix", Box::new(|| safety(&matrix))),
        ("liveness and swap completion tick", Box::new(liveness)),
        ("account invariant", Box::new(|| account_invariant(&matrix))),
        ("dynamic funding", Box::new(dynamic_funding)),
        ("optimistic speedup", Box::new(optimistic_speedup)),
        ("commitment binding", Box::new(commitment_binding)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += usize::from(!o.pass);
        println!("criterion {:>2} {}: {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
