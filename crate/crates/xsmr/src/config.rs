//! Scenario files: JSON, validated before anything runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use xsmr_core::agent::{FundingExpectation, StrategyKind, TopUpMode};
use xsmr_core::game::{GameSpec, UtilityConfig};
use xsmr_core::replica::{ConflictPolicy, Mode};
use xsmr_core::{AgentId, AssetId};

/// A configuration problem, anchored to the line of the offending key when
/// it can be located.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    /// The JSON key the problem is about, if any.
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl ConfigError {
    fn at(key: &str, message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            key: Some(key.to_string()),
            message: format!("`{key}`: {}", message.into()),
        }
    }

    /// Resolves the line from the first occurrence of the key in `text`.
    fn anchor(mut self, text: &str) -> Self {
        if let Some(key) = &self.key {
            let needle = format!("\"{key}\"");
            self.line = text.lines().position(|l| l.contains(&needle)).map(|i| i + 1);
        }
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum NetworkPolicy {
    /// Every message takes exactly Δ ticks.
    #[default]
    WorstCase,
    /// Delays drawn uniformly from [1, Δ] with the scenario seed.
    UniformRandom,
    /// Delays taken in send order from the list; Δ once it runs out.
    Scripted { delays: Vec<u64> },
}

impl NetworkPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            NetworkPolicy::WorstCase => "worst_case",
            NetworkPolicy::UniformRandom => "uniform_random",
            NetworkPolicy::Scripted { .. } => "scripted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetConfig {
    pub id: AssetId,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub id: AgentId,
    pub name: String,
    #[serde(default = "compliant")]
    pub strategy: StrategyKind,
    /// Long holdings before the exchange.
    #[serde(default)]
    pub holdings: BTreeMap<AssetId, i64>,
    /// Escrow put in at initialization.
    #[serde(default)]
    pub fund: BTreeMap<AssetId, i64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub top_up: BTreeMap<AssetId, i64>,
    /// Auction bid.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub bid: i64,
}

fn compliant() -> StrategyKind {
    StrategyKind::Compliant
}

fn is_zero(v: &i64) -> bool {
    *v == 0
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedFunding {
    #[serde(default)]
    pub exact: bool,
    #[serde(default)]
    pub amounts: BTreeMap<AgentId, BTreeMap<AssetId, i64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub game: GameSpec,
    pub assets: Vec<AssetConfig>,
    pub agents: Vec<AgentConfig>,
    /// Balances the contract holds on each replica before funding.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub contract_funds: BTreeMap<AssetId, i64>,
    pub delta: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub network: NetworkPolicy,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub conflict: ConflictPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub premium: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader: Option<AgentId>,
    #[serde(default)]
    pub top_up: TopUpMode,
    #[serde(default)]
    pub expected_funding: ExpectedFunding,
    #[serde(default)]
    pub utility: UtilityConfig,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError {
            line: (e.line() > 0).then_some(e.line()),
            key: None,
            message: strip_position(&e.to_string()),
        })?;
        cfg.validate().map_err(|e| e.anchor(text))?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            key: None,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn asset_ids(&self) -> Vec<AssetId> {
        self.assets.iter().map(|a| a.id).collect()
    }

    pub fn agent(&self, id: AgentId) -> Option<&AgentConfig> {
        self.agents.iter().find(|a| a.id == id)
    }

    pub fn is_compliant(&self, id: AgentId) -> bool {
        self.agent(id).is_some_and(|a| a.strategy == StrategyKind::Compliant)
    }

    pub fn funding_expectation(&self) -> FundingExpectation {
        FundingExpectation {
            amounts: self.expected_funding.amounts.clone(),
            exact: self.expected_funding.exact,
        }
    }

    /// Checks everything serde cannot: ranges and cross references.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.delta == 0 {
            return Err(ConfigError::at("delta", "must be at least 1"));
        }
        if self.agents.len() < 2 {
            return Err(ConfigError::at("agents", "at least two agents are required"));
        }
        if self.assets.is_empty() {
            return Err(ConfigError::at("assets", "at least one asset is required"));
        }
        let agents: BTreeSet<AgentId> = self.agents.iter().map(|a| a.id).collect();
        if agents.len() != self.agents.len() {
            return Err(ConfigError::at("agents", "agent ids must be unique"));
        }
        let assets: BTreeSet<AssetId> = self.assets.iter().map(|a| a.id).collect();
        if assets.len() != self.assets.len() {
            return Err(ConfigError::at("assets", "asset ids must be unique"));
        }
        let agent_ok = |key: &str, id: AgentId| {
            if agents.contains(&id) {
                Ok(())
            } else {
                Err(ConfigError::at(key, format!("unknown agent {id}")))
            }
        };
        let asset_ok = |key: &str, id: AssetId| {
            if assets.contains(&id) {
                Ok(())
            } else {
                Err(ConfigError::at(key, format!("unknown asset {id}")))
            }
        };
        match &self.game {
            GameSpec::Swap(p) => {
                agent_ok("alice", p.alice)?;
                agent_ok("bob", p.bob)?;
                asset_ok("florin", p.florin)?;
                asset_ok("ducat", p.ducat)?;
                if p.alice == p.bob {
                    return Err(ConfigError::at("bob", "the two parties must differ"));
                }
            }
            GameSpec::Dao(p) => {
                agent_ok("director", p.director)?;
                agent_ok("beneficiary", p.beneficiary)?;
                for lp in &p.lps {
                    agent_ok("lps", *lp)?;
                }
                if p.lps.is_empty() {
                    return Err(ConfigError::at("lps", "at least one LP is required"));
                }
                asset_ok("token", p.token)?;
                asset_ok("florin", p.florin)?;
                if p.threshold < 0 || p.grant < 0 {
                    return Err(ConfigError::at("grant", "threshold and grant must be non-negative"));
                }
            }
            GameSpec::Auction(p) => {
                agent_ok("seller", p.seller)?;
                for b in &p.bidders {
                    agent_ok("bidders", *b)?;
                }
                if p.bidders.is_empty() {
                    return Err(ConfigError::at("bidders", "at least one bidder is required"));
                }
                if p.bidders.contains(&p.seller) {
                    return Err(ConfigError::at("seller", "the seller cannot bid"));
                }
                asset_ok("florin", p.florin)?;
                asset_ok("nft", p.nft)?;
            }
        }
        for a in &self.agents {
            for (asset, v) in a.holdings.iter().chain(&a.fund).chain(&a.top_up) {
                asset_ok("agents", *asset)?;
                if *v < 0 {
                    return Err(ConfigError::at("agents", format!("{}: negative amount", a.name)));
                }
            }
            if let StrategyKind::Withholder { target: Some(t) } = a.strategy {
                asset_ok("target", t)?;
            }
        }
        for asset in self.contract_funds.keys() {
            asset_ok("contract_funds", *asset)?;
        }
        if self.premium.is_some_and(|p| p < 0) {
            return Err(ConfigError::at("premium", "must be non-negative"));
        }
        if let Some(leader) = self.leader {
            agent_ok("leader", leader)?;
        }
        if self.top_up == TopUpMode::Verified && self.leader.is_none() {
            return Err(ConfigError::at("top_up", "a verified top-up needs a `leader`"));
        }
        if let NetworkPolicy::Scripted { delays } = &self.network {
            if let Some(d) = delays.iter().find(|d| **d == 0 || **d > self.delta) {
                return Err(ConfigError::at(
                    "delays",
                    format!("delay {d} outside [1, {}]", self.delta),
                ));
            }
        }
        for (agent, amounts) in &self.expected_funding.amounts {
            agent_ok("expected_funding", *agent)?;
            for asset in amounts.keys() {
                asset_ok("expected_funding", *asset)?;
            }
        }
        for (agent, values) in &self.utility.valuations {
            agent_ok("valuations", *agent)?;
            for asset in values.keys() {
                asset_ok("valuations", *asset)?;
            }
        }
        Ok(())
    }
}

/// serde_json appends " at line L column C"; the line is reported
/// separately.
fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message.to_string(),
    }
}
