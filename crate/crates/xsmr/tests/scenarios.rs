//! Shipped scenarios, pinned outcomes and negative controls for every
//! checker.

use std::path::Path;

use proptest::prelude::*;
use xsmr::check::{self, Status};
use xsmr::config::NetworkPolicy;
use xsmr::sim::run_scenario;
use xsmr::suite::{self, ALICE, BOB, DUCAT, FLORIN};
use xsmr::trace::{from_jsonl, Event, TraceEvent};
use xsmr::ScenarioConfig;
use xsmr_core::replica::{Mode, SendOutcome};

fn configs_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/configs"))
}

fn fails(v: &check::Verdict) -> bool {
    v.status == Status::Fail
}

#[test]
fn shipped_configs_match_the_suite() {
    let shipped = suite::shipped();
    let files = std::fs::read_dir(configs_dir()).unwrap().count();
    assert_eq!(files, shipped.len());
    for (stem, cfg) in shipped {
        let loaded = ScenarioConfig::load(&configs_dir().join(format!("{stem}.json"))).unwrap();
        assert_eq!(loaded, cfg, "configs/{stem}.json is stale");
    }
}

/// Regenerates `configs/` from the suite builders.
#[test]
#[ignore]
fn regenerate_configs() {
    for (stem, cfg) in suite::shipped() {
        std::fs::write(configs_dir().join(format!("{stem}.json")), cfg.to_json() + "\n").unwrap();
    }
}

#[test]
fn every_shipped_config_passes_every_check() {
    for (stem, cfg) in suite::shipped() {
        let run = run_scenario(&cfg);
        for v in check::check_run(&run) {
            assert!(v.passed(), "{stem}: {v:?}");
        }
        assert!(!run.cap_hit, "{stem} hit the tick cap");
    }
}

/// Completion ticks by phase counting: round 1 starts at (n+1)Δ, each round
/// takes nΔ under the pessimistic schedule, and the last window ends nΔ
/// after the last start.
#[test]
fn completion_ticks_follow_the_schedule() {
    let pessimistic = |n: u64, r: u64, d: u64| (n + 1) * d + (r - 1) * n * d + n * d;
    let cases = [(suite::swap(), 3), (suite::dao(), 4), (suite::auction(), 6)];
    for (cfg, rounds) in cases {
        let run = run_scenario(&cfg);
        let n = cfg.n() as u64;
        assert_eq!(run.completion_tick().unwrap().0, pessimistic(n, rounds, cfg.delta), "{}", cfg.name);
    }
    assert_eq!(run_scenario(&suite::swap()).completion_tick().unwrap().0, 90);
    assert_eq!(run_scenario(&suite::dao()).completion_tick().unwrap().0, 210);
    assert_eq!(run_scenario(&suite::auction()).completion_tick().unwrap().0, 220);
    // Optimistic, worst-case delays: each round executes Δ after it starts
    // and the last window closes nΔ later.
    let opt = suite::with_mode(&suite::auction(), Mode::Optimistic);
    assert_eq!(run_scenario(&opt).completion_tick().unwrap().0, 40 + 5 * 10 + 30);
}

#[test]
fn the_swap_exchanges_one_coin_each() {
    let run = run_scenario(&suite::swap());
    assert_eq!((run.final_long(ALICE, FLORIN), run.final_long(ALICE, DUCAT)), (4, 1));
    assert_eq!((run.final_long(BOB, FLORIN), run.final_long(BOB, DUCAT)), (1, 4));
    assert_eq!(run.utility(ALICE), 1);
    assert_eq!(run.utility(BOB), 1);
}

#[test]
fn the_auction_goes_to_the_highest_bid() {
    let run = run_scenario(&suite::auction());
    // Bob bid 7, Alice 5: Bob pays 7 for the NFT, Alice is refunded.
    assert_eq!(run.final_long(BOB, FLORIN), 13);
    assert_eq!(run.final_long(BOB, suite::NFT), 1);
    assert_eq!(run.final_long(ALICE, FLORIN), 20);
    assert_eq!(run.final_long(suite::CAROL, FLORIN), 7);
    assert_eq!(run.utilities().values().copied().collect::<Vec<_>>(), [0, 3, 6]);
}

#[test]
fn the_dao_grants_the_treasury() {
    let run = run_scenario(&suite::dao());
    assert!(run.granted());
    assert_eq!(run.final_long(ALICE, FLORIN), 100);
    for lp in [BOB, suite::CAROL, suite::DAVE] {
        assert_eq!(run.final_long(lp, suite::TOKEN), 60);
    }
}

#[test]
fn seeds_change_the_trace_but_not_the_outcome() {
    for cfg in suite::base_scenarios() {
        let runs: Vec<_> = (0..8).map(|s| run_scenario(&suite::seeded(&cfg, s, NetworkPolicy::UniformRandom))).collect();
        assert!(runs.windows(2).any(|w| w[0].trace_jsonl() != w[1].trace_jsonl()));
        for r in &runs {
            assert_eq!(r.utilities(), runs[0].utilities(), "{}", cfg.name);
        }
    }
}

#[test]
fn golden_swap_trace_is_stable() {
    let golden = include_str!("golden/swap.jsonl");
    assert_eq!(run_scenario(&suite::swap()).trace_jsonl(), golden);
    assert_eq!(from_jsonl(golden).unwrap().len(), golden.lines().count());
}

/// Regenerates the golden trace after an intended format change.
#[test]
#[ignore]
fn regenerate_golden() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/swap.jsonl");
    std::fs::write(path, run_scenario(&suite::swap()).trace_jsonl()).unwrap();
}

fn swap_trace() -> (ScenarioConfig, Vec<TraceEvent>) {
    let cfg = suite::swap();
    let trace = run_scenario(&cfg).trace;
    (cfg, trace)
}

#[test]
fn consistency_catches_a_divergent_log() {
    let (cfg, mut trace) = swap_trace();
    assert!(check::check_consistency(&cfg, &trace).passed());
    let i = trace.iter().position(|e| matches!(e.event, Event::Execute { ref replica, .. } if *replica == DUCAT)).unwrap();
    let Event::Execute { replica, round, start, .. } = trace[i].event.clone() else { unreachable!() };
    trace[i].event = Event::Skip { replica, round, start, reason: xsmr_core::replica::SkipReason::Silence };
    let v = check::check_consistency(&cfg, &trace);
    assert!(fails(&v));
    assert!(v.witness.is_some());
}

#[test]
fn safety_catches_a_short_redeem() {
    let (cfg, mut trace) = swap_trace();
    assert!(check::check_safety(&cfg, &trace).passed());
    for e in &mut trace {
        if let Event::Redeem { agent, amount, .. } = &mut e.event {
            if *agent == ALICE {
                *amount = 0;
            }
        }
    }
    assert!(fails(&check::check_safety(&cfg, &trace)));
}

#[test]
fn delivery_catches_a_late_buffer() {
    let (cfg, mut trace) = swap_trace();
    assert!(check::check_delivery(&cfg, &trace).passed());
    for e in &mut trace {
        if matches!(e.event, Event::Buffer { outcome: SendOutcome::Buffered, .. }) {
            e.tick += cfg.delta + 1;
        }
    }
    assert!(fails(&check::check_delivery(&cfg, &trace)));
}

#[test]
fn timing_catches_a_shifted_round() {
    let (cfg, mut trace) = swap_trace();
    assert!(check::check_timing(&cfg, &trace).passed());
    let e = trace.iter_mut().find(|e| matches!(e.event, Event::Execute { round: 2, .. })).unwrap();
    if let Event::Execute { start, .. } = &mut e.event {
        *start += 1;
    }
    assert!(fails(&check::check_timing(&cfg, &trace)));
}

#[test]
fn timing_catches_late_funding() {
    let (cfg, mut trace) = swap_trace();
    let e = trace.iter_mut().find(|e| matches!(e.event, Event::Fund { ok: true, .. })).unwrap();
    e.tick = cfg.delta + 1;
    assert!(fails(&check::check_timing(&cfg, &trace)));
}

#[test]
fn relay_bound_catches_a_lost_relay() {
    let cfg = suite::with_adversary(&suite::swap(), "withholder");
    let mut trace = run_scenario(&cfg).trace;
    let bound = cfg.n() as u64 * cfg.delta;
    assert!(check::check_relay_bound(&cfg, &trace, bound).0.passed());
    // Drop the relayed copies of Bob's withheld requests at the ducat replica.
    trace.retain(|e| !matches!(&e.event, Event::Buffer { replica, request, .. } if *replica == DUCAT && request.agent == BOB));
    assert!(fails(&check::check_relay_bound(&cfg, &trace, bound).0));
}

#[test]
fn fairness_catches_a_dropped_move() {
    let (cfg, mut trace) = swap_trace();
    assert!(check::check_fairness(&cfg, &trace).passed());
    let e = trace.iter_mut().rfind(|e| matches!(e.event, Event::Execute { round: 1, .. })).unwrap();
    let Event::Execute { replica, round, start, .. } = e.event.clone() else { unreachable!() };
    e.event = Event::Skip { replica, round, start, reason: xsmr_core::replica::SkipReason::Silence };
    assert!(fails(&check::check_fairness(&cfg, &trace)));
}

#[test]
fn invariant_check_reads_the_simulator_verdict() {
    let (_, mut trace) = swap_trace();
    assert!(check::check_invariant(&trace).passed());
    trace.push(TraceEvent::new(99, Event::Check { check: "invariant".into(), ok: false, detail: "forged".into() }));
    assert!(fails(&check::check_invariant(&trace)));
    assert!(fails(&check::check_invariant(&[])));
}

#[test]
fn liveness_needs_everyone_compliant() {
    let run = run_scenario(&suite::with_adversary(&suite::swap(), "silent"));
    assert_eq!(check::check_liveness(&run).status, Status::NotApplicable);
    assert_eq!(check::check_liveness(&run_scenario(&suite::swap())).status, Status::Pass);
}

#[test]
fn optimistic_matches_pessimistic_when_everyone_complies() {
    for cfg in suite::base_scenarios() {
        assert_eq!(check::compare_optimistic(&cfg).status, Status::Pass, "{}", cfg.name);
    }
}

#[test]
fn silent_offender_is_slashed_to_the_others() {
    let mut cfg = suite::with_adversary(&suite::swap(), "silent");
    cfg.premium = Some(2);
    let run = run_scenario(&cfg);
    // Alice gets Bob's 2-ducat deposit on top of her refund.
    assert_eq!(run.final_long(ALICE, FLORIN), 5);
    assert_eq!(run.final_long(ALICE, DUCAT), 2);
    assert!(check::check_safety(&cfg, &run.trace).passed());
}

fn arb_scenario() -> impl Strategy<Value = ScenarioConfig> {
    let games = prop_oneof![Just(suite::swap()), Just(suite::dao()), Just(suite::auction())];
    let adversary = proptest::sample::select(suite::ADVERSARIES.to_vec());
    let mode = prop_oneof![Just(Mode::Pessimistic), Just(Mode::Optimistic)];
    (games, adversary, mode, proptest::collection::vec(1u64..=10, 0..400), any::<u64>()).prop_map(
        |(game, adversary, mode, delays, seed)| {
            let mut cfg = suite::with_mode(&suite::with_adversary(&game, adversary), mode);
            cfg.network = NetworkPolicy::Scripted { delays };
            cfg.seed = seed;
            cfg
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Any delay schedule within the synchrony bound keeps every property.
    #[test]
    fn scripted_schedules_keep_every_property(cfg in arb_scenario()) {
        cfg.validate().unwrap();
        let run = run_scenario(&cfg);
        for v in check::check_run(&run) {
            prop_assert!(v.passed(), "{}: {:?}", cfg.name, v);
        }
        prop_assert_eq!(run.invariant_violations, 0);
        prop_assert!(!run.cap_hit);
    }
}
