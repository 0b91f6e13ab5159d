//! The execution trace: one JSON object per line, each carrying the schema
//! version `"v": 1`, the tick and an event `kind`.

use serde::{Deserialize, Serialize};
use xsmr_core::agent::HaltReason;
use xsmr_core::replica::{SendOutcome, SkipReason};
use xsmr_core::{AgentId, AssetId, Request};

pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub v: u32,
    pub tick: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Payout {
    pub agent: AgentId,
    pub asset: AssetId,
    pub amount: i64,
}

/// An amount of one asset. Maps keyed by asset would not survive the
/// flattened event encoding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Amount {
    pub asset: AssetId,
    pub amount: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    /// A call put on the network.
    Send {
        seq: u64,
        from: AgentId,
        to: AssetId,
        op: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request: Option<Request>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<Vec<AgentId>>,
        arrive: u64,
    },
    /// An agent signed a new request of its own.
    Issue { agent: AgentId, request: Request, to: Vec<AssetId> },
    /// A replica received a path signature.
    Buffer { replica: AssetId, request: Request, path_len: usize, outcome: SendOutcome },
    Execute { replica: AssetId, round: u64, request: Request, start: u64 },
    Skip { replica: AssetId, round: u64, start: u64, reason: SkipReason },
    /// `amount` is what left the agent's long account, deposit included;
    /// `credit` is the escrow the replica records in every asset.
    Fund { replica: AssetId, agent: AgentId, ok: bool, amount: i64, credit: Vec<Amount> },
    FundingClosed { replica: AssetId, agent: AgentId },
    Topup { replica: AssetId, agent: AgentId, ok: bool, amount: i64, credit: Vec<Amount> },
    Defund { replica: AssetId, by: AgentId, agents: Vec<AgentId>, authorized: bool },
    Redeem { replica: AssetId, agent: AgentId, amount: i64 },
    RedeemDeferred { replica: AssetId, agent: AgentId },
    Slash { replica: AssetId, offender: AgentId, payouts: Vec<Payout> },
    Rollback { replica: AssetId, round: u64 },
    Abort { replica: AssetId },
    Verify { agent: AgentId, ok: bool, inconsistent: Vec<AgentId> },
    Halt { agent: AgentId, reason: HaltReason },
    /// A check the simulator ran while executing.
    Check { check: String, ok: bool, detail: String },
}

impl TraceEvent {
    pub fn new(tick: u64, event: Event) -> Self {
        TraceEvent { v: VERSION, tick, event }
    }
}

pub fn to_jsonl(trace: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in trace {
        out.push_str(&serde_json::to_string(e).expect("trace events serialize"));
        out.push('\n');
    }
    out
}

#[derive(Debug, thiserror::Error)]
#[error("trace line {line}: {message}")]
pub struct TraceError {
    pub line: usize,
    pub message: String,
}

pub fn from_jsonl(text: &str) -> Result<Vec<TraceEvent>, TraceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let e: TraceEvent = serde_json::from_str(l)
                .map_err(|err| TraceError { line: i + 1, message: err.to_string() })?;
            if e.v != VERSION {
                return Err(TraceError { line: i + 1, message: format!("unsupported version {}", e.v) });
            }
            Ok(e)
        })
        .collect()
}
