//! The discrete-time simulator.
//!
//! Each tick runs, in order:
//!
//! 1. delivery of every message due, in send order; the receiving replica
//!    is woken after each call;
//! 2. relay steps in `AgentId` order, each relaying agent waking every
//!    replica;
//! 3. front-end steps in `AgentId` order, against the replicas' current
//!    state and their one-tick projection;
//! 4. termination: the network is empty and every agent is done, or the
//!    tick cap `startTime(max_rounds) + 2nΔ` is reached.
//!
//! Nothing depends on wall-clock time or hash-map order, so a scenario and a
//! seed determine the trace byte for byte.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xsmr_core::agent::{AgentNote, AgentPlan, AgentRuntime, Call, Timeline};
use xsmr_core::game::{util_from_deltas, GameState, Machine};
use xsmr_core::replica::{Replica, ReplicaCall, ReplicaConfig, ReplicaEvent};
use xsmr_core::timing::scheduled_round_start;
use xsmr_core::{Address, AgentId, AssetId, KeyedHashProvider, Tick};

use crate::config::ScenarioConfig;
use crate::net::{Message, Network};
use crate::trace::{to_jsonl, Amount, Event, Payout, TraceEvent};

/// Everything a finished run leaves behind.
pub struct RunResult {
    pub config: ScenarioConfig,
    pub trace: Vec<TraceEvent>,
    pub replicas: Vec<Replica>,
    pub agents: Vec<AgentSummary>,
    pub end_tick: Tick,
    pub cap_hit: bool,
    pub invariant_checks: u64,
    pub invariant_violations: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentSummary {
    pub id: AgentId,
    pub strategy: &'static str,
    pub compliant: bool,
    pub halted: bool,
}

impl RunResult {
    pub fn replica(&self, asset: AssetId) -> Option<&Replica> {
        self.replicas.iter().find(|r| r.asset() == asset)
    }

    /// Whether every replica reached a final state.
    pub fn is_final(&self) -> bool {
        self.replicas.iter().all(|r| r.machine().is_final())
    }

    /// End of the last round's window, the latest over replicas, once the
    /// machine is final everywhere.
    pub fn completion_tick(&self) -> Option<Tick> {
        self.is_final().then(|| self.replicas.iter().map(|r| r.completion_tick()).max().unwrap_or_default())
    }

    pub fn final_long(&self, agent: AgentId, asset: AssetId) -> i64 {
        self.replica(asset).map_or(0, |r| r.long(agent))
    }

    /// Change in each long balance of `agent` over the run.
    pub fn deltas(&self, agent: AgentId) -> BTreeMap<AssetId, i64> {
        let initial = self.config.agent(agent).map(|a| a.holdings.clone()).unwrap_or_default();
        self.config
            .asset_ids()
            .into_iter()
            .map(|a| (a, self.final_long(agent, a) - initial.get(&a).copied().unwrap_or(0)))
            .collect()
    }

    pub fn granted(&self) -> bool {
        self.replicas.first().is_some_and(|r| r.machine().proposal_granted())
    }

    pub fn utility(&self, agent: AgentId) -> i64 {
        util_from_deltas(&self.config.utility, agent, &self.deltas(agent), self.granted())
    }

    pub fn utilities(&self) -> BTreeMap<AgentId, i64> {
        self.config.agents.iter().map(|a| (a.id, self.utility(a.id))).collect()
    }

    pub fn trace_jsonl(&self) -> String {
        to_jsonl(&self.trace)
    }
}

/// The commitment nonce an agent uses in a run: derived from the seed so
/// that runs replay exactly.
pub fn nonce_for(seed: u64, agent: AgentId) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(agent.0) + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut nonce = vec![0u8; 16];
    rng.fill_bytes(&mut nonce);
    nonce
}

/// The last tick a run may reach.
pub fn tick_cap(cfg: &ScenarioConfig) -> Tick {
    let n = cfg.n();
    let delta = Tick(cfg.delta);
    scheduled_round_start(cfg.game.max_rounds(), n, delta) + delta * (2 * n as u64)
}

struct Sim {
    cfg: ScenarioConfig,
    provider: KeyedHashProvider,
    timeline: Timeline,
    assets: Vec<AssetId>,
    replicas: Vec<Replica>,
    agents: Vec<AgentRuntime>,
    net: Network,
    trace: Vec<TraceEvent>,
    now: Tick,
    checks: u64,
    violations: u64,
}

/// Runs a validated scenario to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> RunResult {
    let mut sim = Sim::new(cfg.clone());
    let cap = tick_cap(cfg);
    let mut cap_hit = false;
    loop {
        sim.tick();
        if sim.net.is_empty() && sim.agents.iter().all(|a| a.is_done()) {
            break;
        }
        if sim.now >= cap {
            cap_hit = true;
            let detail = format!("tick cap {} reached before every agent finished", cap.0);
            sim.record(Event::Check { check: "tick_cap".into(), ok: false, detail });
            break;
        }
        sim.now = sim.now + Tick(1);
    }
    let detail = format!("{} checks, {} violations", sim.checks, sim.violations);
    let ok = sim.violations == 0;
    sim.record(Event::Check { check: "invariant".into(), ok, detail });
    RunResult {
        agents: sim
            .agents
            .iter()
            .map(|a| AgentSummary {
                id: a.id,
                strategy: a.kind.name(),
                compliant: a.is_compliant(),
                halted: a.is_halted(),
            })
            .collect(),
        config: sim.cfg,
        trace: sim.trace,
        replicas: sim.replicas,
        end_tick: sim.now,
        cap_hit,
        invariant_checks: sim.checks,
        invariant_violations: sim.violations,
    }
}

impl Sim {
    fn new(cfg: ScenarioConfig) -> Self {
        let n = cfg.n();
        let delta = Tick(cfg.delta);
        let machine = cfg.game.initial_state(&cfg.contract_funds);
        let replicas = cfg
            .assets
            .iter()
            .map(|asset| {
                let rc = ReplicaConfig {
                    asset: asset.id,
                    n,
                    delta,
                    mode: cfg.mode,
                    conflict: cfg.conflict,
                    premium: cfg.premium,
                    leader: cfg.leader,
                };
                let mut long: BTreeMap<Address, i64> = cfg
                    .agents
                    .iter()
                    .map(|a| (Address::Agent(a.id), a.holdings.get(&asset.id).copied().unwrap_or(0)))
                    .collect();
                long.insert(Address::Contract, cfg.contract_funds.get(&asset.id).copied().unwrap_or(0));
                Replica::new(rc, machine.clone(), long)
            })
            .collect();
        let mut agents: Vec<AgentRuntime> = cfg
            .agents
            .iter()
            .map(|a| {
                let plan = AgentPlan {
                    fund: a.fund.clone(),
                    top_up: a.top_up.clone(),
                    bid: a.bid,
                    nonce: nonce_for(cfg.seed, a.id),
                };
                AgentRuntime::new(a.id, a.strategy.clone(), plan)
            })
            .collect();
        agents.sort_by_key(|a| a.id);
        Sim {
            provider: KeyedHashProvider::from_seed(cfg.seed),
            timeline: Timeline { n, delta, top_up: cfg.top_up, leader: cfg.leader },
            assets: cfg.asset_ids(),
            replicas,
            agents,
            net: Network::new(cfg.network.clone(), cfg.delta, cfg.seed),
            trace: Vec::new(),
            now: Tick::ZERO,
            checks: 0,
            violations: 0,
            cfg,
        }
    }

    fn record(&mut self, event: Event) {
        self.trace.push(TraceEvent::new(self.now.0, event));
    }

    fn tick(&mut self) {
        for msg in self.net.due(self.now) {
            self.deliver_message(msg);
        }
        for i in 0..self.agents.len() {
            let (calls, wake) = self.agents[i].relay_step(&self.replicas, &self.provider);
            let from = self.agents[i].id;
            self.submit(from, calls);
            if wake {
                for r in 0..self.replicas.len() {
                    self.wake(r);
                }
            }
        }
        let projected: Vec<Replica> = if self.now >= self.timeline.play_from() {
            self.replicas.iter().map(|r| r.projected(self.now)).collect()
        } else {
            self.replicas.clone()
        };
        let expected = self.cfg.funding_expectation();
        for i in 0..self.agents.len() {
            let out = self.agents[i].step(
                self.now,
                &self.replicas,
                &projected,
                &self.timeline,
                &expected,
                &self.provider,
            );
            let from = self.agents[i].id;
            for note in out.notes {
                let event = match note {
                    AgentNote::Issued { request, to } => Event::Issue { agent: from, request, to },
                    AgentNote::Verified { ok, inconsistent } => Event::Verify { agent: from, ok, inconsistent },
                    AgentNote::Halted { reason } => Event::Halt { agent: from, reason },
                };
                self.record(event);
            }
            self.submit(from, out.calls);
        }
    }

    fn submit(&mut self, from: AgentId, calls: Vec<Call>) {
        for call in calls {
            let msg = self.net.send(from, call, self.now);
            let (request, path) = match &msg.call.op {
                ReplicaCall::Send { ps } => (Some(ps.request.clone()), Some(ps.path.clone())),
                _ => (None, None),
            };
            self.record(Event::Send {
                seq: msg.seq,
                from,
                to: msg.call.to,
                op: msg.call.op.name().to_string(),
                request,
                path,
                arrive: msg.arrive.0,
            });
        }
    }

    fn deliver_message(&mut self, msg: Message) {
        let Some(r) = self.assets.iter().position(|a| *a == msg.call.to) else { return };
        let before = self.replicas[r].long(msg.from);
        let events = self.replicas[r].handle(msg.from, &msg.call.op, self.now, &self.provider);
        let paid = before - self.replicas[r].long(msg.from);
        let credit = match &msg.call.op {
            ReplicaCall::Initialize { fund } | ReplicaCall::TopUp { fund } => {
                fund.iter().map(|(asset, amount)| Amount { asset: *asset, amount: *amount }).collect()
            }
            _ => Vec::new(),
        };
        self.absorb(r, events, paid, credit);
        self.wake(r);
    }

    fn wake(&mut self, r: usize) {
        let events = self.replicas[r].deliver(self.now);
        self.absorb(r, events, 0, Vec::new());
    }

    /// Records a replica's events and checks its invariant.
    fn absorb(&mut self, r: usize, events: Vec<ReplicaEvent>, paid: i64, credit: Vec<Amount>) {
        let replica = self.assets[r];
        for e in events {
            let event = match e {
                ReplicaEvent::Funded { agent, ok } => Event::Fund { replica, agent, ok, amount: paid, credit: credit.clone() },
                ReplicaEvent::FundingClosed { agent } => Event::FundingClosed { replica, agent },
                ReplicaEvent::Buffered { request, path_len, outcome } => {
                    Event::Buffer { replica, request, path_len, outcome }
                }
                ReplicaEvent::Executed { round, request, start } => {
                    Event::Execute { replica, round, request, start: start.0 }
                }
                ReplicaEvent::Skipped { round, start, reason } => {
                    Event::Skip { replica, round, start: start.0, reason }
                }
                ReplicaEvent::Slashed { offender, payouts } => Event::Slash {
                    replica,
                    offender,
                    payouts: payouts
                        .into_iter()
                        .map(|(agent, asset, amount)| Payout { agent, asset, amount })
                        .collect(),
                },
                ReplicaEvent::ToppedUp { agent, ok } => Event::Topup { replica, agent, ok, amount: paid, credit: credit.clone() },
                ReplicaEvent::Defunded { by, agents, authorized } => {
                    Event::Defund { replica, by, agents, authorized }
                }
                ReplicaEvent::Redeemed { agent, amount } => Event::Redeem { replica, agent, amount },
                ReplicaEvent::RedeemDeferred { agent } => Event::RedeemDeferred { replica, agent },
                ReplicaEvent::RolledBack { round } => Event::Rollback { replica, round },
                ReplicaEvent::Aborted => Event::Abort { replica },
            };
            self.record(event);
        }
        self.checks += 1;
        if !self.replicas[r].invariant_holds() {
            self.violations += 1;
            let detail = format!("account invariant broken on replica {replica}");
            self.record(Event::Check { check: "invariant".into(), ok: false, detail });
        }
    }
}

/// The state every replica agrees a game ended in, if they agree.
pub fn agreed_final_state(run: &RunResult) -> Option<&GameState> {
    let first = run.replicas.first()?.machine();
    run.replicas.iter().all(|r| r.machine() == first).then_some(first)
}
