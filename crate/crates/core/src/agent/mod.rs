//! The untrusted agent: front-end calls, the relay loop and a strategy.
//!
//! Agents never touch replicas directly. Every operation returns the
//! [`Call`]s to submit, which the caller routes through the network; every
//! decision is a function of the replicas' public state and the agent's own
//! memory.
//!
//! Initialization timeline, with `d` the synchrony bound:
//!
//! | tick | event |
//! |------|-------|
//! | 0    | every agent calls `initialize` on every replica |
//! | d    | agents verify funding; top-ups are sent if the scenario has them |
//! | 2d   | unverified top-up: agents verify. Verified top-up: the leader defunds |
//! | 3d   | verified top-up: agents verify |
//! | (n+1)d | round 1 starts |

pub mod strategy;

pub use strategy::{compliant_move, AgentPlan, Strategy, StrategyKind};

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::game::Machine;
use crate::ids::{AgentId, AssetId, Tick};
use crate::path::{extend_path, sign_request, SignatureProvider};
use crate::replica::{Replica, ReplicaCall};
use crate::request::{MoveDescriptor, Request};
use crate::timing::first_round_start;

/// A call to the replica of asset `to`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Call {
    pub to: AssetId,
    pub op: ReplicaCall,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum TopUpMode {
    #[default]
    None,
    /// Everyone tops up, then everyone verifies.
    Unverified,
    /// Everyone tops up, the leader defunds failed top-ups, then everyone
    /// verifies.
    Verified,
}

/// How much each agent must have escrowed for the execution to go ahead.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FundingExpectation {
    pub amounts: BTreeMap<AgentId, BTreeMap<AssetId, i64>>,
    /// Exact amounts, every listed agent must be funded. Otherwise minimums
    /// that apply to agents that are funded somewhere.
    pub exact: bool,
}

/// Public parameters every agent knows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Timeline {
    pub n: usize,
    pub delta: Tick,
    pub top_up: TopUpMode,
    pub leader: Option<AgentId>,
}

impl Timeline {
    pub fn top_up_tick(&self) -> Option<Tick> {
        (self.top_up != TopUpMode::None).then_some(self.delta)
    }

    pub fn defund_tick(&self) -> Option<Tick> {
        (self.top_up == TopUpMode::Verified).then_some(self.delta * 2)
    }

    /// When agents check the escrow: after funding, and again after a
    /// top-up phase.
    pub fn verify_ticks(&self) -> Vec<Tick> {
        let mut ticks = alloc::vec![self.delta];
        match self.top_up {
            TopUpMode::None => {}
            TopUpMode::Unverified => ticks.push(self.delta * 2),
            TopUpMode::Verified => ticks.push(self.delta * 3),
        }
        ticks
    }

    pub fn play_from(&self) -> Tick {
        first_round_start(self.n, self.delta)
    }
}

/// Something an agent did that is worth tracing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AgentNote {
    Issued { request: Request, to: Vec<AssetId> },
    Verified { ok: bool, inconsistent: Vec<AgentId> },
    Halted { reason: HaltReason },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum HaltReason {
    InconsistentAccounts,
    UnexpectedFunding,
    Expelled,
    Redeemed,
}

#[derive(Default)]
pub struct StepOutput {
    pub calls: Vec<Call>,
    pub notes: Vec<AgentNote>,
}

pub struct AgentRuntime {
    pub id: AgentId,
    pub kind: StrategyKind,
    pub plan: AgentPlan,
    strategy: Box<dyn Strategy + Send>,
    seen: BTreeSet<Request>,
    issued: BTreeSet<u64>,
    halted: bool,
    redeemed: bool,
}

impl AgentRuntime {
    pub fn new(id: AgentId, kind: StrategyKind, plan: AgentPlan) -> Self {
        AgentRuntime {
            id,
            strategy: kind.build(),
            kind,
            plan,
            seen: BTreeSet::new(),
            issued: BTreeSet::new(),
            halted: false,
            redeemed: false,
        }
    }

    pub fn is_compliant(&self) -> bool {
        self.strategy.is_compliant()
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    /// Nothing left to do: halted, redeemed, or never acting again.
    pub fn is_done(&self) -> bool {
        self.halted || self.redeemed || !self.strategy.participates()
    }

    pub fn seen(&self) -> &BTreeSet<Request> {
        &self.seen
    }

    /// Funds the scenario's stake on every replica.
    pub fn fe_initialize(&self, assets: &[AssetId], timeline: &Timeline) -> Vec<Call> {
        let fund = self.strategy.funding(&self.plan, timeline.top_up != TopUpMode::None);
        broadcast(assets, ReplicaCall::Initialize { fund })
    }

    /// Signs `(self, mv, round)` and sends it to every replica.
    pub fn fe_send(
        &self,
        provider: &dyn SignatureProvider,
        mv: MoveDescriptor,
        round: u64,
        assets: &[AssetId],
    ) -> Vec<Call> {
        let ps = sign_request(provider, self.id, Request::new(self.id, mv, round))
            .expect("an agent signs its own requests");
        broadcast(assets, ReplicaCall::Send { ps })
    }

    pub fn fe_top_up(&self, assets: &[AssetId]) -> Vec<Call> {
        let fund = self.strategy.top_up(&self.plan);
        if fund.values().all(|v| *v == 0) {
            return Vec::new();
        }
        broadcast(assets, ReplicaCall::TopUp { fund })
    }

    /// The leader's half of a verified top-up: expel everyone whose escrow
    /// the replicas disagree on.
    pub fn fe_defund(&self, replicas: &[Replica], assets: &[AssetId]) -> Vec<Call> {
        let votes: BTreeSet<AgentId> = inconsistent_agents(replicas).into_iter().collect();
        broadcast(assets, ReplicaCall::Defund { votes })
    }

    pub fn fe_redeem(&mut self, assets: &[AssetId]) -> Vec<Call> {
        self.redeemed = true;
        broadcast(assets, ReplicaCall::Redeem)
    }

    /// Extends every unseen buffered request with this agent's signature and
    /// sends it to every replica. Returns whether the agent relays at all, in
    /// which case the caller wakes every replica afterwards.
    pub fn relay_step(
        &mut self,
        replicas: &[Replica],
        provider: &dyn SignatureProvider,
    ) -> (Vec<Call>, bool) {
        if self.halted || !self.strategy.relays() {
            return (Vec::new(), false);
        }
        let assets: Vec<AssetId> = replicas.iter().map(|r| r.asset()).collect();
        let mut calls = Vec::new();
        for replica in replicas {
            for ps in replica.all_buffered() {
                if self.seen.contains(&ps.request) {
                    continue;
                }
                // The originator already sent its own request everywhere,
                // and a signer cannot appear twice; another agent relays.
                if let Ok(ext) = extend_path(provider, self.id, ps) {
                    calls.extend(broadcast(&assets, ReplicaCall::Send { ps: ext }));
                }
                self.seen.insert(ps.request.clone());
            }
        }
        (calls, true)
    }

    /// Front-end logic for tick `now`. `projected` holds each replica's
    /// state after its next wake (see [`Replica::projected`]).
    pub fn step(
        &mut self,
        now: Tick,
        replicas: &[Replica],
        projected: &[Replica],
        timeline: &Timeline,
        expected: &FundingExpectation,
        provider: &dyn SignatureProvider,
    ) -> StepOutput {
        let mut out = StepOutput::default();
        let assets: Vec<AssetId> = replicas.iter().map(|r| r.asset()).collect();
        if now == Tick::ZERO {
            out.calls = self.fe_initialize(&assets, timeline);
            return out;
        }
        if self.is_done() {
            return out;
        }
        if timeline.verify_ticks().contains(&now) {
            self.verify(replicas, expected, &assets, &mut out);
            if self.halted {
                return out;
            }
        }
        if timeline.top_up_tick() == Some(now) {
            out.calls.extend(self.fe_top_up(&assets));
        }
        if timeline.defund_tick() == Some(now) && timeline.leader == Some(self.id) {
            out.calls.extend(self.fe_defund(replicas, &assets));
        }
        if now >= timeline.play_from() {
            self.play(projected, &assets, provider, &mut out);
        }
        if replicas.iter().all(|r| r.is_settled(now)) {
            out.calls.extend(self.fe_redeem(&assets));
        }
        out
    }

    fn verify(
        &mut self,
        replicas: &[Replica],
        expected: &FundingExpectation,
        assets: &[AssetId],
        out: &mut StepOutput,
    ) {
        let inconsistent = inconsistent_agents(replicas);
        let ok = inconsistent.is_empty();
        out.notes.push(AgentNote::Verified { ok, inconsistent });
        let reason = if !ok {
            Some(HaltReason::InconsistentAccounts)
        } else if !replicas.iter().all(|r| r.is_funded(self.id)) {
            Some(HaltReason::Expelled)
        } else if !funding_as_expected(replicas, expected) {
            Some(HaltReason::UnexpectedFunding)
        } else {
            None
        };
        if let Some(reason) = reason {
            out.calls.extend(self.fe_redeem(assets));
            self.halted = true;
            out.notes.push(AgentNote::Halted { reason });
        }
    }

    fn play(
        &mut self,
        projected: &[Replica],
        assets: &[AssetId],
        provider: &dyn SignatureProvider,
        out: &mut StepOutput,
    ) {
        let Some(state) = projected
            .iter()
            .map(|r| r.machine())
            .find(|m| m.enabled() == Some(self.id) && !self.issued.contains(&(m.turn() + 1)))
        else {
            return;
        };
        let round = state.turn() + 1;
        let Some(mv) = self.strategy.on_turn(state, self.id, &self.plan) else { return };
        self.issued.insert(round);
        let mut by_move: BTreeMap<MoveDescriptor, Vec<AssetId>> = BTreeMap::new();
        for (asset, m) in self.strategy.route(mv, assets) {
            by_move.entry(m).or_default().push(asset);
        }
        for (m, to) in by_move {
            let request = Request::new(self.id, m.clone(), round);
            self.seen.insert(request.clone());
            out.calls.extend(self.fe_send(provider, m, round, &to));
            out.notes.push(AgentNote::Issued { request, to });
        }
    }
}

fn broadcast(assets: &[AssetId], op: ReplicaCall) -> Vec<Call> {
    assets.iter().map(|a| Call { to: *a, op: op.clone() }).collect()
}

/// Agents funded at some replica whose escrow or deposit in some asset is
/// recorded differently by two replicas.
pub fn inconsistent_agents(replicas: &[Replica]) -> Vec<AgentId> {
    let agents: BTreeSet<AgentId> = replicas.iter().flat_map(|r| r.funded_agents()).collect();
    let assets: Vec<AssetId> = replicas.iter().map(|r| r.asset()).collect();
    agents
        .into_iter()
        .filter(|q| {
            assets.iter().any(|a| {
                let view = |r: &Replica| (r.short(*q, *a), r.deposit(*q, *a));
                replicas.windows(2).any(|w| view(&w[0]) != view(&w[1]))
            })
        })
        .collect()
}

/// `true` iff accounts are consistent and every agent's escrow matches the
/// agreed amounts.
pub fn verify_accounts(replicas: &[Replica]) -> bool {
    inconsistent_agents(replicas).is_empty()
}

fn funding_as_expected(replicas: &[Replica], expected: &FundingExpectation) -> bool {
    let Some(first) = replicas.first() else { return true };
    expected.amounts.iter().all(|(q, amounts)| {
        let funded = replicas.iter().all(|r| r.is_funded(*q));
        if !funded {
            // Under minimums an agent that funded nowhere is simply out.
            return !expected.exact && replicas.iter().all(|r| !r.is_funded(*q));
        }
        amounts.iter().all(|(a, v)| {
            let have = first.short(*q, *a);
            if expected.exact {
                have == *v
            } else {
                have >= *v
            }
        })
    })
}
