//! The per-asset replica: a passive automaton that buffers path signatures,
//! resolves each round to the unique valid move or `Skip`, and keeps the
//! long-lived accounts of its asset.
//!
//! Every replica keeps a full copy of the machine. The machine's accounts
//! are the short-lived accounts: replica `A`'s machine holds `A`'s view of
//! every agent's escrowed balance in every asset, and only the entries for
//! `A`'s own asset are backed by real holdings. The account invariant is
//!
//! ```text
//! long(Contract) = Σ_addr machine.account(addr, own) + Σ_P deposit(P, own)
//! ```
//!
//! which extends the two-sided invariant with the contract's own machine
//! balance (treasury, escrow) and premium deposits.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::game::{GameState, Machine};
use crate::ids::{Address, AgentId, AssetId, Tick};
use crate::path::{verify_path_signature, PathSignature, SignatureProvider};
use crate::request::{MoveDescriptor, Request};
use crate::timing::{age, first_round_start, live_for_len};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum Mode {
    /// Execute a round once its window has closed.
    #[default]
    Pessimistic,
    /// Execute a unique live move at once, roll back on a conflict.
    Optimistic,
}

/// What an optimistic replica does when a conflict shows up inside an
/// executed round's window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum ConflictPolicy {
    /// Roll back to the round and resolve it as `Skip`.
    #[default]
    Skip,
    /// Restore the state at round 1 and stop; everyone redeems their stake.
    Abort,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplicaConfig {
    pub asset: AssetId,
    /// Number of agents.
    pub n: usize,
    pub delta: Tick,
    pub mode: Mode,
    pub conflict: ConflictPolicy,
    /// Deposit taken in every asset an agent funds, slashed on silence or
    /// equivocation.
    pub premium: Option<i64>,
    pub leader: Option<AgentId>,
}

impl ReplicaConfig {
    fn window(&self) -> Tick {
        self.delta * self.n as u64
    }
}

/// An entry point call, as submitted by an agent.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(tag = "op", rename_all = "snake_case"))]
pub enum ReplicaCall {
    Initialize { fund: BTreeMap<AssetId, i64> },
    Send { ps: PathSignature },
    TopUp { fund: BTreeMap<AssetId, i64> },
    Defund { votes: BTreeSet<AgentId> },
    Redeem,
}

impl ReplicaCall {
    pub fn name(&self) -> &'static str {
        match self {
            ReplicaCall::Initialize { .. } => "initialize",
            ReplicaCall::Send { .. } => "send",
            ReplicaCall::TopUp { .. } => "top_up",
            ReplicaCall::Defund { .. } => "defund",
            ReplicaCall::Redeem => "redeem",
        }
    }
}

/// Why a path signature was or was not buffered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum SendOutcome {
    Buffered,
    Duplicate,
    Malformed,
    NotLive,
    Unfunded,
}

/// Why a round resolved to `Skip`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum SkipReason {
    /// No valid request from the enabled agent.
    Silence,
    /// Two or more valid requests from the enabled agent.
    Equivocation,
}

/// Something the replica did, reported for the trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReplicaEvent {
    Funded { agent: AgentId, ok: bool },
    FundingClosed { agent: AgentId },
    Buffered { request: Request, path_len: usize, outcome: SendOutcome },
    Executed { round: u64, request: Request, start: Tick },
    Skipped { round: u64, start: Tick, reason: SkipReason },
    Slashed { offender: AgentId, payouts: Vec<(AgentId, AssetId, i64)> },
    ToppedUp { agent: AgentId, ok: bool },
    Defunded { by: AgentId, agents: Vec<AgentId>, authorized: bool },
    Redeemed { agent: AgentId, amount: i64 },
    RedeemDeferred { agent: AgentId },
    RolledBack { round: u64 },
    Aborted,
}

/// One resolved round.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LogEntry {
    pub round: u64,
    /// `None` for a replica-imposed `Skip`.
    pub request: Option<Request>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Snapshot {
    machine: GameState,
    deposits: BTreeMap<(AgentId, AssetId), i64>,
    log_len: usize,
    journal_len: usize,
}

/// A change to escrow made by an entry point rather than by a move. A
/// rollback restores a snapshot and then re-applies these.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Adjustment {
    Credit(AgentId, AssetId, i64),
    Deposit(AgentId, AssetId, i64),
}

#[derive(Clone, Debug)]
pub struct Replica {
    pub cfg: ReplicaConfig,
    buffer: BTreeMap<AgentId, BTreeMap<Request, PathSignature>>,
    funded: BTreeMap<AgentId, bool>,
    initialized: BTreeSet<AgentId>,
    machine: GameState,
    log: Vec<LogEntry>,
    start_time: BTreeMap<u64, Tick>,
    long: BTreeMap<Address, i64>,
    deposits: BTreeMap<(AgentId, AssetId), i64>,
    snapshots: BTreeMap<u64, Snapshot>,
    journal: Vec<Adjustment>,
    pending_redeems: BTreeSet<AgentId>,
    aborted: bool,
}

impl Replica {
    /// `long` holds everyone's real balance of this asset, the contract's
    /// included; `machine` must already credit the contract with its part.
    pub fn new(cfg: ReplicaConfig, machine: GameState, long: BTreeMap<Address, i64>) -> Self {
        let mut start_time = BTreeMap::new();
        start_time.insert(1, first_round_start(cfg.n, cfg.delta));
        Replica {
            cfg,
            buffer: BTreeMap::new(),
            funded: BTreeMap::new(),
            initialized: BTreeSet::new(),
            machine,
            log: Vec::new(),
            start_time,
            long,
            deposits: BTreeMap::new(),
            snapshots: BTreeMap::new(),
            journal: Vec::new(),
            pending_redeems: BTreeSet::new(),
            aborted: false,
        }
    }

    pub fn asset(&self) -> AssetId {
        self.cfg.asset
    }

    pub fn machine(&self) -> &GameState {
        &self.machine
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn is_funded(&self, agent: AgentId) -> bool {
        self.funded.get(&agent).copied().unwrap_or(false)
    }

    /// Agents this replica has seen fund successfully, funded or not now.
    pub fn funded_agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.funded.iter().filter(|(_, f)| **f).map(|(a, _)| *a)
    }

    pub fn start_time(&self, round: u64) -> Option<Tick> {
        self.start_time.get(&round).copied()
    }

    pub fn long(&self, who: impl Into<Address>) -> i64 {
        self.long.get(&who.into()).copied().unwrap_or(0)
    }

    /// This replica's view of `agent`'s escrow in `asset`.
    pub fn short(&self, agent: AgentId, asset: AssetId) -> i64 {
        self.machine.accounts().get(agent, asset)
    }

    pub fn deposit(&self, agent: AgentId, asset: AssetId) -> i64 {
        self.deposits.get(&(agent, asset)).copied().unwrap_or(0)
    }

    pub fn is_aborted(&self) -> bool {
        self.aborted
    }

    /// Every request buffered from `agent`, in request order.
    pub fn buffered(&self, agent: AgentId) -> impl Iterator<Item = &PathSignature> + '_ {
        self.buffer.get(&agent).into_iter().flat_map(|m| m.values())
    }

    pub fn all_buffered(&self) -> impl Iterator<Item = &PathSignature> + '_ {
        self.buffer.values().flat_map(|m| m.values())
    }

    pub fn has_buffered(&self, request: &Request) -> bool {
        self.buffer.get(&request.agent).is_some_and(|m| m.contains_key(request))
    }

    /// The account invariant and non-negativity of every balance.
    pub fn invariant_holds(&self) -> bool {
        let own = self.cfg.asset;
        let escrow: i64 = self
            .machine
            .accounts()
            .iter()
            .filter(|(_, a, _)| *a == own)
            .map(|(_, _, v)| v)
            .sum::<i64>()
            + self.deposits.iter().filter(|((_, a), _)| *a == own).map(|(_, v)| v).sum::<i64>();
        escrow == self.long(Address::Contract)
            && self.machine.accounts().min_balance() >= 0
            && self.long.values().all(|v| *v >= 0)
            && self.deposits.values().all(|v| *v >= 0)
    }

    /// The machine is final and, in optimistic mode, no executed round can
    /// still be challenged.
    pub fn is_settled(&self, now: Tick) -> bool {
        self.aborted || (self.machine.is_final() && !self.window_open(now))
    }

    /// End of the last resolved round's window; the execution's logical
    /// completion time.
    pub fn completion_tick(&self) -> Tick {
        let last = self.machine.turn().max(1);
        self.start_time(last).unwrap_or(Tick::ZERO) + self.cfg.window()
    }

    /// The state this replica will be in after a wake at `now + 1`, given
    /// the current buffer. Once a round's window has closed at `now` no
    /// further request for it can become live, so this is what the replica
    /// will execute.
    pub fn projected(&self, now: Tick) -> Replica {
        let mut r = self.clone();
        r.deliver(now + Tick(1));
        r
    }

    /// Applies an entry point call. The caller is expected to wake
    /// [`deliver`](Self::deliver) afterwards.
    pub fn handle(
        &mut self,
        sender: AgentId,
        call: &ReplicaCall,
        now: Tick,
        provider: &dyn SignatureProvider,
    ) -> Vec<ReplicaEvent> {
        match call {
            ReplicaCall::Initialize { fund } => self.initialize(sender, fund, now),
            ReplicaCall::Send { ps } => self.send(ps, now, provider),
            ReplicaCall::TopUp { fund } => self.top_up(sender, fund),
            ReplicaCall::Defund { votes } => self.defund(sender, votes),
            ReplicaCall::Redeem => self.redeem(sender, now),
        }
    }

    /// Accepted only in the funding window `now <= delta`, once per agent.
    pub fn initialize(
        &mut self,
        sender: AgentId,
        fund: &BTreeMap<AssetId, i64>,
        now: Tick,
    ) -> Vec<ReplicaEvent> {
        if now > self.cfg.delta || !self.initialized.insert(sender) {
            return alloc::vec![ReplicaEvent::FundingClosed { agent: sender }];
        }
        let own = self.cfg.asset;
        let premium = self.cfg.premium.unwrap_or(0);
        let deposit = |amount: i64| if amount > 0 { premium } else { 0 };
        let amount = fund.get(&own).copied().unwrap_or(0);
        let due = amount + deposit(amount);
        let ok = fund.values().all(|v| *v >= 0) && self.pay_in(sender, due);
        if ok {
            for (asset, v) in fund {
                self.adjust(Adjustment::Credit(sender, *asset, *v), true);
                let d = deposit(*v);
                if d > 0 {
                    self.adjust(Adjustment::Deposit(sender, *asset, d), true);
                }
            }
            self.funded.insert(sender, true);
        }
        alloc::vec![ReplicaEvent::Funded { agent: sender, ok }]
    }

    fn pay_in(&mut self, from: AgentId, amount: i64) -> bool {
        let have = self.long(from);
        if amount < 0 || have < amount {
            return false;
        }
        self.long.insert(from.into(), have - amount);
        *self.long.entry(Address::Contract).or_insert(0) += amount;
        true
    }

    fn pay_out(&mut self, to: AgentId, amount: i64) {
        *self.long.entry(Address::Contract).or_insert(0) -= amount;
        *self.long.entry(to.into()).or_insert(0) += amount;
    }

    /// Buffers `ps` if it verifies, is live and its originator is funded.
    pub fn send(
        &mut self,
        ps: &PathSignature,
        now: Tick,
        provider: &dyn SignatureProvider,
    ) -> Vec<ReplicaEvent> {
        let request = ps.request.clone();
        let outcome = self.admit(ps, now, provider);
        if outcome == SendOutcome::Buffered {
            self.buffer.entry(request.agent).or_default().insert(request.clone(), ps.clone());
        }
        alloc::vec![ReplicaEvent::Buffered { request, path_len: ps.len(), outcome }]
    }

    fn admit(&self, ps: &PathSignature, now: Tick, provider: &dyn SignatureProvider) -> SendOutcome {
        if !verify_path_signature(ps, provider) {
            return SendOutcome::Malformed;
        }
        if !self.is_funded(ps.request.agent) {
            return SendOutcome::Unfunded;
        }
        if self.has_buffered(&ps.request) {
            return SendOutcome::Duplicate;
        }
        // A round whose start is not yet known has not begun: age 0.
        let start = self.start_time(ps.request.round).unwrap_or(now);
        if !live_for_len(ps.len(), now, start, self.cfg.delta) {
            return SendOutcome::NotLive;
        }
        SendOutcome::Buffered
    }

    pub fn top_up(&mut self, sender: AgentId, fund: &BTreeMap<AssetId, i64>) -> Vec<ReplicaEvent> {
        if !self.is_funded(sender) || fund.values().all(|v| *v == 0) {
            return Vec::new();
        }
        let amount = fund.get(&self.cfg.asset).copied().unwrap_or(0);
        let ok = fund.values().all(|v| *v >= 0) && self.pay_in(sender, amount);
        if ok {
            for (asset, v) in fund {
                self.adjust(Adjustment::Credit(sender, *asset, *v), true);
            }
        } else {
            // Freeze: the agent forfeits its escrow and deposit.
            self.funded.insert(sender, false);
        }
        alloc::vec![ReplicaEvent::ToppedUp { agent: sender, ok }]
    }

    pub fn defund(&mut self, sender: AgentId, votes: &BTreeSet<AgentId>) -> Vec<ReplicaEvent> {
        let authorized = self.cfg.leader == Some(sender);
        let mut agents = Vec::new();
        if authorized {
            for p in votes {
                if self.is_funded(*p) {
                    self.funded.insert(*p, false);
                    agents.push(*p);
                }
            }
        }
        alloc::vec![ReplicaEvent::Defunded { by: sender, agents, authorized }]
    }

    /// Pays out the sender's escrow and deposit in this asset and stops
    /// accepting its moves. Deferred while an optimistic round can still be
    /// rolled back.
    pub fn redeem(&mut self, sender: AgentId, now: Tick) -> Vec<ReplicaEvent> {
        if !self.is_funded(sender) {
            return Vec::new();
        }
        if self.window_open(now) {
            self.pending_redeems.insert(sender);
            return alloc::vec![ReplicaEvent::RedeemDeferred { agent: sender }];
        }
        self.settle_redeem(sender)
    }

    fn settle_redeem(&mut self, sender: AgentId) -> Vec<ReplicaEvent> {
        self.pending_redeems.remove(&sender);
        if !self.is_funded(sender) {
            return Vec::new();
        }
        let own = self.cfg.asset;
        let (short, deposit) = (self.short(sender, own), self.deposit(sender, own));
        self.adjust(Adjustment::Credit(sender, own, -short), true);
        self.adjust(Adjustment::Deposit(sender, own, 0), true);
        let amount = short + deposit;
        self.pay_out(sender, amount);
        self.funded.insert(sender, false);
        alloc::vec![ReplicaEvent::Redeemed { agent: sender, amount }]
    }

    /// Splits `offender`'s deposits among the other funded agents, equal
    /// integer shares, remainder to the lowest `AgentId`.
    pub fn slash(&mut self, offender: AgentId) -> Vec<ReplicaEvent> {
        self.slash_with(offender, true)
    }

    /// `external` slashes survive a rollback; the ones a round's resolution
    /// triggers are rolled back with it.
    fn slash_with(&mut self, offender: AgentId, external: bool) -> Vec<ReplicaEvent> {
        let victims: Vec<AgentId> = self.funded_agents().filter(|p| *p != offender).collect();
        let owed: Vec<(AssetId, i64)> = self
            .deposits
            .iter()
            .filter(|((p, _), v)| *p == offender && **v > 0)
            .map(|((_, a), v)| (*a, *v))
            .collect();
        if victims.is_empty() || owed.is_empty() {
            return Vec::new();
        }
        let mut payouts = Vec::new();
        for (asset, d) in owed {
            let k = victims.len() as i64;
            for (i, v) in victims.iter().enumerate() {
                let share = d / k + if i == 0 { d % k } else { 0 };
                self.adjust(Adjustment::Credit(*v, asset, share), external);
                payouts.push((*v, asset, share));
            }
            self.adjust(Adjustment::Deposit(offender, asset, 0), external);
        }
        alloc::vec![ReplicaEvent::Slashed { offender, payouts }]
    }

    /// Whether some optimistically executed round's window is still open.
    fn window_open(&self, now: Tick) -> bool {
        self.cfg.mode == Mode::Optimistic
            && self.log.iter().any(|e| {
                e.request.is_some()
                    && self.start_time(e.round).is_some_and(|s| now <= s + self.cfg.window())
            })
    }

    /// Distinct buffered requests of `agent` for `round`.
    fn candidates(&self, agent: AgentId, round: u64) -> Vec<Request> {
        self.buffer
            .get(&agent)
            .map(|m| m.keys().filter(|r| r.round == round).cloned().collect())
            .unwrap_or_default()
    }

    /// Resolves every round that can be resolved at `now`.
    pub fn deliver(&mut self, now: Tick) -> Vec<ReplicaEvent> {
        let mut events = Vec::new();
        if self.cfg.mode == Mode::Optimistic {
            while !self.aborted && self.detect_conflicts(now, &mut events) {}
        }
        while !self.aborted && !self.machine.is_final() {
            let round = self.machine.turn() + 1;
            let Some(start) = self.start_time(round) else { break };
            let Some(enabled) = self.machine.enabled() else { break };
            let buffered = self.candidates(enabled, round);
            let valid: Vec<&Request> =
                buffered.iter().filter(|r| self.machine.permits(&r.mv)).collect();
            let closed = age(now, start) > self.cfg.window();
            let optimistic = self.cfg.mode == Mode::Optimistic;
            let started = now >= start;
            if valid.len() == 1 && (closed || (optimistic && started && buffered.len() == 1)) {
                let request = valid[0].clone();
                self.snapshot(round);
                // `permits` held, so the machine accepts the move.
                let _ = self.machine.apply(request.agent, &request.mv);
                self.log.push(LogEntry { round, request: Some(request.clone()) });
                let next = if closed { start + self.cfg.window() } else { now };
                self.start_time.insert(round + 1, next);
                events.push(ReplicaEvent::Executed { round, request, start });
            } else if closed {
                self.snapshot(round);
                let reason =
                    if valid.len() > 1 { SkipReason::Equivocation } else { SkipReason::Silence };
                self.resolve_skip(round, enabled, reason, start, &mut events);
                self.start_time.insert(round + 1, start + self.cfg.window());
            } else {
                break;
            }
        }
        if !self.window_open(now) {
            for p in core::mem::take(&mut self.pending_redeems) {
                events.extend(self.settle_redeem(p));
            }
        }
        events
    }

    fn adjust(&mut self, adj: Adjustment, journal: bool) {
        match &adj {
            Adjustment::Credit(p, a, v) => self.machine.accounts_mut().credit(*p, *a, *v),
            Adjustment::Deposit(p, a, 0) => {
                self.deposits.remove(&(*p, *a));
            }
            Adjustment::Deposit(p, a, v) => {
                self.deposits.insert((*p, *a), *v);
            }
        }
        if journal && self.cfg.mode == Mode::Optimistic {
            self.journal.push(adj);
        }
    }

    fn restore(&mut self, snap: Snapshot) {
        self.machine = snap.machine;
        self.deposits = snap.deposits;
        self.log.truncate(snap.log_len);
        for i in snap.journal_len..self.journal.len() {
            let adj = self.journal[i].clone();
            self.adjust(adj, false);
        }
    }

    fn snapshot(&mut self, round: u64) {
        if self.cfg.mode == Mode::Optimistic {
            let snap = Snapshot {
                machine: self.machine.clone(),
                deposits: self.deposits.clone(),
                log_len: self.log.len(),
                journal_len: self.journal.len(),
            };
            self.snapshots.insert(round, snap);
        }
    }

    fn resolve_skip(
        &mut self,
        round: u64,
        enabled: AgentId,
        reason: SkipReason,
        start: Tick,
        events: &mut Vec<ReplicaEvent>,
    ) {
        let _ = self.machine.apply(enabled, &MoveDescriptor::skip());
        self.log.push(LogEntry { round, request: None });
        events.push(ReplicaEvent::Skipped { round, start, reason });
        if self.cfg.premium.is_some() {
            events.extend(self.slash_with(enabled, false));
        }
    }

    /// Rolls back the earliest optimistically executed round that now has a
    /// second valid request inside its window.
    fn detect_conflicts(&mut self, now: Tick, events: &mut Vec<ReplicaEvent>) -> bool {
        let window = self.cfg.window();
        let conflicted = self.log.iter().find_map(|e| {
            let req = e.request.as_ref()?;
            let start = self.start_time(e.round)?;
            let open = now <= start + window;
            (open && self.candidates(req.agent, e.round).len() > 1).then_some((e.round, req.agent))
        });
        let Some((round, agent)) = conflicted else { return false };
        let snap = self.snapshots[&round].clone();
        events.push(ReplicaEvent::RolledBack { round });
        if self.cfg.conflict == ConflictPolicy::Abort {
            let first = self.snapshots.get(&1).cloned().unwrap_or(snap);
            self.restore(first);
            self.aborted = true;
            events.push(ReplicaEvent::Aborted);
            return true;
        }
        self.restore(snap);
        self.snapshots.retain(|r, _| *r < round);
        self.start_time.retain(|r, _| *r <= round);
        let start = self.start_time[&round];
        self.snapshot(round);
        self.resolve_skip(round, agent, SkipReason::Equivocation, start, events);
        self.start_time.insert(round + 1, now);
        true
    }
}
