//! Linear utilities over asset holdings.
//!
//! An agent's utility for a final state is the value of its net holdings
//! change, `Σ_asset (final − initial) · value(asset)`, plus a fixed bonus if
//! a DAO proposal it cares about was granted. Unchanged holdings are worth 0.

use alloc::collections::BTreeMap;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::{GameState, Machine};
use crate::ids::{AgentId, AssetId};
use crate::Error;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct UtilityConfig {
    /// `valuations[agent][asset]`: what one unit of `asset` is worth to
    /// `agent`. Unlisted assets are worth 1.
    pub valuations: BTreeMap<AgentId, BTreeMap<AssetId, i64>>,
    /// What a granted proposal is worth to each agent.
    pub proposal_bonus: BTreeMap<AgentId, i64>,
}

impl UtilityConfig {
    pub fn value(&self, agent: AgentId, asset: AssetId) -> i64 {
        self.valuations.get(&agent).and_then(|m| m.get(&asset)).copied().unwrap_or(1)
    }

    /// Utility of `agent` for the final state `fin`, relative to the holdings
    /// in `initial` (the state right after funding).
    pub fn machine_util(
        &self,
        agent: AgentId,
        initial: &GameState,
        fin: &GameState,
    ) -> Result<i64, Error> {
        if !fin.is_final() {
            return Err(Error::NotFinal);
        }
        let mut deltas = BTreeMap::new();
        for (who, asset, v) in fin.accounts().iter().chain(initial.accounts().iter().map(|(w, a, v)| (w, a, -v))) {
            if who == agent.into() {
                *deltas.entry(asset).or_insert(0) += v;
            }
        }
        Ok(util_from_deltas(self, agent, &deltas, fin.proposal_granted()))
    }
}

/// Utility from per-asset holding changes.
pub fn util_from_deltas(
    cfg: &UtilityConfig,
    agent: AgentId,
    deltas: &BTreeMap<AssetId, i64>,
    granted: bool,
) -> i64 {
    let holdings: i64 = deltas.iter().map(|(asset, d)| d * cfg.value(agent, *asset)).sum();
    let bonus = if granted { cfg.proposal_bonus.get(&agent).copied().unwrap_or(0) } else { 0 };
    holdings + bonus
}
