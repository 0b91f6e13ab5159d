//! Property checkers.
//!
//! Each checker decides one property from a scenario and its trace (plus,
//! for liveness and the optimistic comparison, the finished run) and
//! returns a [`Verdict`] carrying the first offending trace event when it
//! fails. Everything is reconstructed from the trace, so a trace read back
//! from disk is checked exactly like a fresh one.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use xsmr_core::agent::StrategyKind;
use xsmr_core::game::{util_from_deltas, GameSpec, GameState, Machine};
use xsmr_core::replica::{Mode, SendOutcome};
use xsmr_core::{AgentId, AssetId, MoveDescriptor, Request};

use crate::config::ScenarioConfig;
use crate::sim::{run_scenario, RunResult};
use crate::trace::{Event, TraceEvent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The property's premise does not hold for this scenario.
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    /// Index of the event in the trace.
    pub index: usize,
    pub event: TraceEvent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub property: &'static str,
    pub status: Status,
    /// Number of individual facts checked.
    pub checked: u64,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl Verdict {
    fn pass(property: &'static str, checked: u64, detail: impl Into<String>) -> Self {
        Verdict { property, status: Status::Pass, checked, detail: detail.into(), witness: None }
    }

    fn fail(property: &'static str, checked: u64, detail: impl Into<String>) -> Self {
        Verdict { property, status: Status::Fail, checked, detail: detail.into(), witness: None }
    }

    fn not_applicable(property: &'static str, detail: impl Into<String>) -> Self {
        Verdict { property, status: Status::NotApplicable, checked: 0, detail: detail.into(), witness: None }
    }

    fn at(mut self, trace: &[TraceEvent], index: usize) -> Self {
        self.witness = trace.get(index).map(|e| Witness { index, event: e.clone() });
        self
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

/// Each replica's final log, rebuilt from execute, skip, rollback and abort
/// events. `None` stands for a replica-imposed `Skip`.
pub type Logs = BTreeMap<AssetId, Vec<(u64, Option<Request>)>>;

pub fn reconstruct_logs(cfg: &ScenarioConfig, trace: &[TraceEvent]) -> Logs {
    let mut logs: Logs = cfg.asset_ids().into_iter().map(|a| (a, Vec::new())).collect();
    for e in trace {
        match &e.event {
            Event::Execute { replica, round, request, .. } => {
                logs.entry(*replica).or_default().push((*round, Some(request.clone())));
            }
            Event::Skip { replica, round, .. } => logs.entry(*replica).or_default().push((*round, None)),
            Event::Rollback { replica, round } => logs.entry(*replica).or_default().retain(|(r, _)| r < round),
            Event::Abort { replica } => logs.entry(*replica).or_default().clear(),
            _ => {}
        }
    }
    logs
}

/// Replays replica `asset`'s final log through a fresh machine, after
/// crediting the escrow its successful fundings and top-ups recorded.
/// Slashing payouts are not replayed; they never enable or disable a move
/// of the shipped games.
pub fn replay_log(cfg: &ScenarioConfig, trace: &[TraceEvent], asset: AssetId) -> GameState {
    let mut m = cfg.game.initial_state(&cfg.contract_funds);
    for e in trace {
        if let Event::Fund { replica, agent, ok: true, credit, .. }
        | Event::Topup { replica, agent, ok: true, credit, .. } = &e.event
        {
            if *replica == asset {
                for c in credit {
                    m.accounts_mut().credit(*agent, c.asset, c.amount);
                }
            }
        }
    }
    let logs = reconstruct_logs(cfg, trace);
    for (_, entry) in logs.get(&asset).into_iter().flatten() {
        let (sender, mv) = match entry {
            Some(r) => (r.agent, r.mv.clone()),
            None => match m.enabled() {
                Some(p) => (p, MoveDescriptor::skip()),
                None => break,
            },
        };
        let _ = m.apply(sender, &mv);
    }
    m
}

/// Every replica ends with the same log, hence the same state.
pub fn check_consistency(cfg: &ScenarioConfig, trace: &[TraceEvent]) -> Verdict {
    const P: &str = "consistency";
    let logs = reconstruct_logs(cfg, trace);
    let Some((first_asset, reference)) = logs.iter().next() else {
        return Verdict::not_applicable(P, "no replicas");
    };
    let mut checked = 0;
    for (asset, log) in &logs {
        checked += log.len() as u64;
        if log != reference {
            let round = log
                .iter()
                .zip(reference)
                .position(|(a, b)| a != b)
                .map_or(log.len().min(reference.len()) as u64 + 1, |i| i as u64 + 1);
            let index = last_resolution(trace, *asset, round);
            return Verdict::fail(
                P,
                checked,
                format!("replicas {first_asset} and {asset} disagree from round {round}"),
            )
            .at(trace, index.unwrap_or(trace.len().saturating_sub(1)));
        }
    }
    Verdict::pass(P, checked, format!("{} replicas agree on {} rounds", logs.len(), reference.len()))
}

fn last_resolution(trace: &[TraceEvent], asset: AssetId, round: u64) -> Option<usize> {
    trace.iter().rposition(|e| match &e.event {
        Event::Execute { replica, round: r, .. } | Event::Skip { replica, round: r, .. } => {
            *replica == asset && *r == round
        }
        _ => false,
    })
}

/// Final long balances rebuilt from the trace: initial holdings minus what
/// went into escrow plus what came back.
pub fn reconstruct_balances(cfg: &ScenarioConfig, trace: &[TraceEvent]) -> BTreeMap<(AgentId, AssetId), i64> {
    let mut long: BTreeMap<(AgentId, AssetId), i64> = BTreeMap::new();
    for a in &cfg.agents {
        for asset in cfg.asset_ids() {
            long.insert((a.id, asset), a.holdings.get(&asset).copied().unwrap_or(0));
        }
    }
    for e in trace {
        match &e.event {
            Event::Fund { replica, agent, ok: true, amount, .. }
            | Event::Topup { replica, agent, ok: true, amount, .. } => {
                *long.entry((*agent, *replica)).or_default() -= amount;
            }
            Event::Redeem { replica, agent, amount } => *long.entry((*agent, *replica)).or_default() += amount,
            _ => {}
        }
    }
    long
}

/// Utility of every agent, from the trace alone.
pub fn reconstruct_utilities(cfg: &ScenarioConfig, trace: &[TraceEvent]) -> BTreeMap<AgentId, i64> {
    let long = reconstruct_balances(cfg, trace);
    let granted = cfg
        .assets
        .first()
        .is_some_and(|a| replay_log(cfg, trace, a.id).proposal_granted());
    cfg.agents
        .iter()
        .map(|a| {
            let deltas: BTreeMap<AssetId, i64> = cfg
                .asset_ids()
                .into_iter()
                .map(|asset| (asset, long[&(a.id, asset)] - a.holdings.get(&asset).copied().unwrap_or(0)))
                .collect();
            (a.id, util_from_deltas(&cfg.utility, a.id, &deltas, granted))
        })
        .collect()
}

/// No compliant agent ends worse off than it started.
pub fn check_safety(cfg: &ScenarioConfig, trace: &[TraceEvent]) -> Verdict {
    const P: &str = "safety";
    let utils = reconstruct_utilities(cfg, trace);
    let mut checked = 0;
    for a in cfg.agents.iter().filter(|a| a.strategy == StrategyKind::Compliant) {
        checked += 1;
        let u = utils[&a.id];
        if u < 0 {
            let index = trace.iter().rposition(|e| match &e.event {
                Event::Redeem { agent, .. } | Event::Fund { agent, .. } => *agent == a.id,
                _ => false,
            });
            return Verdict::fail(P, checked, format!("compliant {} ends with utility {u}", a.name))
                .at(trace, index.unwrap_or(0));
        }
    }
    Verdict::pass(P, checked, format!("compliant utilities {:?}", utils_of(cfg, &utils, true)))
}

fn utils_of(cfg: &ScenarioConfig, utils: &BTreeMap<AgentId, i64>, compliant: bool) -> Vec<(String, i64)> {
    cfg.agents
        .iter()
        .filter(|a| !compliant || a.strategy == StrategyKind::Compliant)
        .map(|a| (a.name.clone(), utils[&a.id]))
        .collect()
}

/// The balances the trace implies agree with the replicas' final state.
pub fn check_balances_match(run: &RunResult) -> Verdict {
    const P: &str = "balances";
    let long = reconstruct_balances(&run.config, &run.trace);
    for ((agent, asset), v) in &long {
        let actual = run.final_long(*agent, *asset);
        if actual != *v {
            return Verdict::fail(P, long.len() as u64, format!("{agent} holds {actual} {asset}, trace says {v}"));
        }
    }
    Verdict::pass(P, long.len() as u64, "trace and replicas agree")
}

/// Agents whose utility must be strictly positive when everyone complies.
pub fn staked_agents(cfg: &ScenarioConfig, fin: &GameState) -> BTreeSet<AgentId> {
    match (&cfg.game, fin) {
        (GameSpec::Auction(p), GameState::Auction(s)) => {
            let mut staked: BTreeSet<AgentId> = s.winner.into_iter().collect();
            staked.insert(p.seller);
            staked
        }
        _ => cfg.agents.iter().map(|a| a.id).collect(),
    }
}

/// With every agent compliant, the game reaches a final state and every
/// staked agent gains; nobody loses.
pub fn check_liveness(run: &RunResult) -> Verdict {
    const P: &str = "liveness";
    let cfg = &run.config;
    if cfg.agents.iter().any(|a| a.strategy != StrategyKind::Compliant) {
        return Verdict::not_applicable(P, "some agent deviates");
    }
    let Some(first) = cfg.assets.first() else { return Verdict::not_applicable(P, "no replicas") };
    let fin = replay_log(cfg, &run.trace, first.id);
    if !fin.is_final() || !run.is_final() {
        return Verdict::fail(P, 1, format!("not final after {} rounds", fin.turn()))
            .at(&run.trace, run.trace.len().saturating_sub(1));
    }
    let utils = reconstruct_utilities(cfg, &run.trace);
    let staked = staked_agents(cfg, &fin);
    for a in &cfg.agents {
        let u = utils[&a.id];
        if (staked.contains(&a.id) && u <= 0) || u < 0 {
            return Verdict::fail(P, cfg.agents.len() as u64, format!("{} ends with utility {u}", a.name));
        }
    }
    let done = run.completion_tick().map_or(0, |t| t.0);
    Verdict::pass(
        P,
        cfg.agents.len() as u64,
        format!("final at tick {done}, utilities {:?}", utils_of(cfg, &utils, false)),
    )
}

/// Issue events by `(agent, round)`: event index, request and recipients.
type Issued<'a> = BTreeMap<(AgentId, u64), Vec<(usize, &'a Request, &'a [AssetId])>>;

/// Requests each agent issued, by `(agent, round)`, with the issuing
/// event's index.
fn issued(trace: &[TraceEvent]) -> Issued<'_> {
    let mut out = Issued::new();
    for (i, e) in trace.iter().enumerate() {
        if let Event::Issue { agent, request, to } = &e.event {
            out.entry((*agent, request.round)).or_default().push((i, request, to));
        }
    }
    out
}

/// A compliant agent that issued exactly one move for a round, to every
/// replica, sees that move in the round's slot of every final log.
pub fn check_fairness(cfg: &ScenarioConfig, trace: &[TraceEvent]) -> Verdict {
    const P: &str = "fairness";
    let logs = reconstruct_logs(cfg, trace);
    let all: BTreeSet<AssetId> = cfg.asset_ids().into_iter().collect();
    let mut checked = 0;
    for ((agent, round), reqs) in issued(trace) {
        if !cfg.is_compliant(agent) || reqs.len() != 1 {
            continue;
        }
        let (index, request, to) = reqs[0];
        if to.iter().copied().collect::<BTreeSet<_>>() != all {
            continue;
        }
        for (asset, log) in &logs {
            checked += 1;
            let entry = log.iter().find(|(r, _)| *r == round).and_then(|(_, q)| q.as_ref());
            if entry != Some(request) {
                return Verdict::fail(P, checked, format!("{request} missing from round {round} at replica {asset}"))
                    .at(trace, index);
            }
        }
    }
    Verdict::pass(P, checked, "every compliant move was executed in its round")
}

/// Ticks at which each agent stopped relaying: a halt or its redemption.
fn stopped_at(trace: &[TraceEvent]) -> BTreeMap<AgentId, u64> {
    let mut out = BTreeMap::new();
    for e in trace {
        match &e.event {
            Event::Halt { agent, .. } => {
                out.entry(*agent).or_insert(e.tick);
            }
            Event::Send { from, op, .. } if op == "redeem" => {
                out.entry(*from).or_insert(e.tick);
            }
            _ => {}
        }
    }
    out
}

/// Whether `outcome` means the replica has (or has consciously dropped) the
/// request: buffered now or before, or refused because the sender is not
/// funded there.
fn reached(outcome: SendOutcome) -> bool {
    matches!(outcome, SendOutcome::Buffered | SendOutcome::Duplicate | SendOutcome::Unfunded)
}

/// Every request first buffered at some replica at tick `t` has reached
/// every replica by `t + bound`, as long as a compliant relayer was active
/// at `t` and the run lasted past `t + bound`. Returns the verdict and the
/// largest lag seen.
pub fn check_relay_bound(cfg: &ScenarioConfig, trace: &[TraceEvent], bound: u64) -> (Verdict, u64) {
    const P: &str = "relay_bound";
    let end = trace.last().map_or(0, |e| e.tick);
    let stopped = stopped_at(trace);
    let relayers: Vec<AgentId> = cfg
        .agents
        .iter()
        .filter(|a| a.strategy == StrategyKind::Compliant)
        .map(|a| a.id)
        .collect();
    // First buffering anywhere, and first arrival per replica.
    let mut first: BTreeMap<&Request, (u64, usize)> = BTreeMap::new();
    let mut arrival: BTreeMap<(&Request, AssetId), u64> = BTreeMap::new();
    for (i, e) in trace.iter().enumerate() {
        if let Event::Buffer { replica, request, outcome, .. } = &e.event {
            if *outcome == SendOutcome::Buffered {
                first.entry(request).or_insert((e.tick, i));
            }
            if reached(*outcome) {
                arrival.entry((request, *replica)).or_insert(e.tick);
            }
        }
    }
    let mut checked = 0;
    let mut worst = 0;
    for (request, (t0, index)) in &first {
        let active = relayers.iter().any(|p| stopped.get(p).is_none_or(|s| *s > *t0));
        if !active || t0 + bound > end {
            continue;
        }
        for asset in cfg.asset_ids() {
            checked += 1;
            match arrival.get(&(*request, asset)) {
                Some(t) if *t <= t0 + bound => worst = worst.max(t - t0),
                Some(t) => {
                    let v = Verdict::fail(P, checked, format!("{request} reached replica {asset} {} ticks after {t0}", t - t0));
                    return (v.at(trace, *index), t - t0);
                }
                None => {
                    let v = Verdict::fail(P, checked, format!("{request} never reached replica {asset}"));
                    return (v.at(trace, *index), u64::MAX);
                }
            }
        }
    }
    (Verdict::pass(P, checked, format!("largest lag {worst} ticks (bound {bound})")), worst)
}

/// Funding closes by Δ, requests propagate within nΔ, and round start times
/// follow the schedule: `(n+1)Δ` then every `nΔ` (pessimistic), or never
/// earlier than the previous round's start (optimistic). No round resolves
/// before its start.
pub fn check_timing(cfg: &ScenarioConfig, trace: &[TraceEvent]) -> Verdict {
    const P: &str = "timing";
    let n = cfg.n() as u64;
    let delta = cfg.delta;
    let mut checked = 0;
    for (i, e) in trace.iter().enumerate() {
        if let Event::Fund { ok: true, .. } = &e.event {
            checked += 1;
            if e.tick > delta {
                return Verdict::fail(P, checked, format!("funding accepted at tick {}", e.tick)).at(trace, i);
            }
        }
    }
    let mut starts: BTreeMap<AssetId, BTreeMap<u64, u64>> = BTreeMap::new();
    for (i, e) in trace.iter().enumerate() {
        let (replica, round, start) = match &e.event {
            Event::Execute { replica, round, start, .. } | Event::Skip { replica, round, start, .. } => {
                (*replica, *round, *start)
            }
            _ => continue,
        };
        checked += 1;
        let expected = match cfg.mode {
            Mode::Pessimistic => Some((n + 1) * delta + (round - 1) * n * delta),
            Mode::Optimistic => (round == 1).then_some((n + 1) * delta),
        };
        if expected.is_some_and(|s| s != start) {
            return Verdict::fail(P, checked, format!("round {round} started at {start}")).at(trace, i);
        }
        let earliest = match cfg.mode {
            Mode::Pessimistic => start + n * delta + 1,
            Mode::Optimistic => start,
        };
        if e.tick < earliest {
            return Verdict::fail(P, checked, format!("round {round} resolved early at {}", e.tick)).at(trace, i);
        }
        let per = starts.entry(replica).or_default();
        if let Some(prev) = round.checked_sub(1).and_then(|r| per.get(&r)) {
            if start < *prev {
                return Verdict::fail(P, checked, format!("round {round} starts before round {}", round - 1))
                    .at(trace, i);
            }
        }
        per.insert(round, start);
    }
    let (relay, _) = check_relay_bound(cfg, trace, n * delta);
    if relay.status == Status::Fail {
        return Verdict { property: P, ..relay };
    }
    Verdict::pass(P, checked + relay.checked, format!("schedule respected; {}", relay.detail))
}

/// Every request a compliant agent issues is buffered at each replica it
/// was sent to within Δ ticks.
pub fn check_delivery(cfg: &ScenarioConfig, trace: &[TraceEvent]) -> Verdict {
    const P: &str = "delivery";
    let mut arrival: BTreeMap<(&Request, AssetId), u64> = BTreeMap::new();
    for e in trace {
        if let Event::Buffer { replica, request, outcome, .. } = &e.event {
            if matches!(outcome, SendOutcome::Buffered | SendOutcome::Duplicate) {
                arrival.entry((request, *replica)).or_insert(e.tick);
            }
        }
    }
    let mut checked = 0;
    for (i, e) in trace.iter().enumerate() {
        let Event::Issue { agent, request, to } = &e.event else { continue };
        if !cfg.is_compliant(*agent) {
            continue;
        }
        for asset in to {
            checked += 1;
            let ok = arrival.get(&(request, *asset)).is_some_and(|t| *t >= e.tick && *t <= e.tick + cfg.delta);
            if !ok {
                return Verdict::fail(P, checked, format!("{request} not buffered at replica {asset} within Δ"))
                    .at(trace, i);
            }
        }
    }
    Verdict::pass(P, checked, "every compliant request buffered within Δ")
}

/// The simulator found the account invariant intact after every replica
/// step.
pub fn check_invariant(trace: &[TraceEvent]) -> Verdict {
    const P: &str = "invariant";
    let mut summary = None;
    for (i, e) in trace.iter().enumerate() {
        if let Event::Check { check, ok, detail } = &e.event {
            if check == "invariant" {
                if !ok {
                    return Verdict::fail(P, 1, detail.clone()).at(trace, i);
                }
                summary = Some(detail.clone());
            }
        }
    }
    match summary {
        Some(detail) => Verdict::pass(P, 1, detail),
        None => Verdict::fail(P, 0, "the trace records no invariant check"),
    }
}

/// Runs `cfg` pessimistically and optimistically: both must agree on the
/// log and on every balance, and optimistic must finish no later.
pub fn compare_optimistic(cfg: &ScenarioConfig) -> Verdict {
    const P: &str = "optimistic";
    if cfg.agents.iter().any(|a| a.strategy != StrategyKind::Compliant) {
        return Verdict::not_applicable(P, "some agent deviates");
    }
    let mut pess = cfg.clone();
    pess.mode = Mode::Pessimistic;
    let mut opt = cfg.clone();
    opt.mode = Mode::Optimistic;
    let (p, o) = (run_scenario(&pess), run_scenario(&opt));
    let strip = |logs: Logs| -> Vec<Vec<(u64, Option<Request>)>> { logs.into_values().collect() };
    if strip(reconstruct_logs(&pess, &p.trace)) != strip(reconstruct_logs(&opt, &o.trace)) {
        return Verdict::fail(P, 1, "optimistic and pessimistic logs differ");
    }
    let (lp, lo) = (reconstruct_balances(&pess, &p.trace), reconstruct_balances(&opt, &o.trace));
    if lp != lo {
        return Verdict::fail(P, 2, "optimistic and pessimistic balances differ");
    }
    match (p.completion_tick(), o.completion_tick()) {
        (Some(tp), Some(to)) if to > tp => {
            Verdict::fail(P, 3, format!("optimistic finished at {} after pessimistic {}", to.0, tp.0))
        }
        (tp, to) => Verdict::pass(
            P,
            3,
            format!("same outcome; completion {:?} vs {:?}", to.map(|t| t.0), tp.map(|t| t.0)),
        ),
    }
}

/// Every trace-based property plus liveness and the balance cross-check.
pub fn check_run(run: &RunResult) -> Vec<Verdict> {
    let mut out = check_trace(&run.config, &run.trace);
    out.push(check_liveness(run));
    out.push(check_balances_match(run));
    out
}

/// The properties decidable from a scenario and its trace alone.
pub fn check_trace(cfg: &ScenarioConfig, trace: &[TraceEvent]) -> Vec<Verdict> {
    vec![
        check_consistency(cfg, trace),
        check_safety(cfg, trace),
        check_fairness(cfg, trace),
        check_timing(cfg, trace),
        check_delivery(cfg, trace),
        check_invariant(trace),
    ]
}
