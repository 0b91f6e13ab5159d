//! Compliant and Byzantine behaviors.
//!
//! A strategy decides what an agent funds, which move it plays on its turn,
//! which replicas each move is sent to and whether it relays. Everything not
//! overridden follows the compliant protocol.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::game::{auction, dao, swap, GameState};
use crate::ids::{AgentId, AssetId};
use crate::request::MoveDescriptor;

/// What an agent intends to stake and play, fixed by the scenario.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AgentPlan {
    pub fund: BTreeMap<AssetId, i64>,
    pub top_up: BTreeMap<AssetId, i64>,
    /// Auction bid and commitment nonce.
    pub bid: i64,
    pub nonce: Vec<u8>,
}

/// The move the compliant protocol prescribes for `me` in `state`, if it is
/// `me`'s turn.
pub fn compliant_move(state: &GameState, me: AgentId, plan: &AgentPlan) -> Option<MoveDescriptor> {
    match state {
        GameState::Swap(s) => swap::compliant_move(s, me),
        GameState::Dao(s) => dao::compliant_move(s, me),
        GameState::Auction(s) => auction::compliant_move(s, me, plan.bid, &plan.nonce),
    }
}

/// The shipped strategies, as named in scenario files.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(tag = "kind", rename_all = "snake_case"))]
pub enum StrategyKind {
    Compliant,
    /// Sends its first move to half the replicas and `Skip` to the rest.
    Equivocator,
    /// Sends its moves to one replica only.
    Withholder {
        #[cfg_attr(feature = "serde", serde(default))]
        target: Option<AssetId>,
    },
    /// Claims `claim` units of each asset it funds that it does not have, at
    /// the top-up if there is one, else at initialization.
    InvalidFunder { claim: i64 },
    /// Funds, then does nothing at all.
    Silent,
    /// Plays and redeems like a compliant agent but never relays.
    NonRelayer,
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Compliant => "compliant",
            StrategyKind::Equivocator => "equivocator",
            StrategyKind::Withholder { .. } => "withholder",
            StrategyKind::InvalidFunder { .. } => "invalid_funder",
            StrategyKind::Silent => "silent",
            StrategyKind::NonRelayer => "non_relayer",
        }
    }

    pub fn build(&self) -> Box<dyn Strategy + Send> {
        match self {
            StrategyKind::Compliant => Box::new(Compliant),
            StrategyKind::Equivocator => Box::new(Equivocator { done: false }),
            StrategyKind::Withholder { target } => Box::new(Withholder { target: *target }),
            StrategyKind::InvalidFunder { claim } => Box::new(InvalidFunder { claim: *claim }),
            StrategyKind::Silent => Box::new(Silent),
            StrategyKind::NonRelayer => Box::new(NonRelayer),
        }
    }
}

pub trait Strategy {
    fn is_compliant(&self) -> bool {
        false
    }

    fn relays(&self) -> bool {
        false
    }

    /// Whether the agent acts at all after funding: plays, verifies,
    /// redeems.
    fn participates(&self) -> bool {
        true
    }

    /// The funding claimed at initialization.
    fn funding(&self, plan: &AgentPlan, top_up_phase: bool) -> BTreeMap<AssetId, i64> {
        let _ = top_up_phase;
        plan.fund.clone()
    }

    /// The funding claimed at the top-up.
    fn top_up(&self, plan: &AgentPlan) -> BTreeMap<AssetId, i64> {
        plan.top_up.clone()
    }

    /// The move to play in `state` on `me`'s turn.
    fn on_turn(&mut self, state: &GameState, me: AgentId, plan: &AgentPlan) -> Option<MoveDescriptor> {
        compliant_move(state, me, plan)
    }

    /// Which move goes to which replica.
    fn route(&mut self, mv: MoveDescriptor, assets: &[AssetId]) -> Vec<(AssetId, MoveDescriptor)> {
        assets.iter().map(|a| (*a, mv.clone())).collect()
    }
}

pub struct Compliant;

impl Strategy for Compliant {
    fn is_compliant(&self) -> bool {
        true
    }

    fn relays(&self) -> bool {
        true
    }
}

pub struct NonRelayer;

impl Strategy for NonRelayer {}

pub struct Silent;

impl Strategy for Silent {
    fn participates(&self) -> bool {
        false
    }
}

pub struct Equivocator {
    done: bool,
}

impl Strategy for Equivocator {
    fn route(&mut self, mv: MoveDescriptor, assets: &[AssetId]) -> Vec<(AssetId, MoveDescriptor)> {
        if self.done {
            return assets.iter().map(|a| (*a, mv.clone())).collect();
        }
        self.done = true;
        let other = if mv.is_skip() {
            MoveDescriptor::nullary(swap::AGREE)
        } else {
            MoveDescriptor::skip()
        };
        if assets.len() == 1 {
            return alloc::vec![(assets[0], mv), (assets[0], other)];
        }
        let half = assets.len() / 2;
        assets
            .iter()
            .enumerate()
            .map(|(i, a)| (*a, if i < half { mv.clone() } else { other.clone() }))
            .collect()
    }
}

pub struct Withholder {
    target: Option<AssetId>,
}

impl Strategy for Withholder {
    fn route(&mut self, mv: MoveDescriptor, assets: &[AssetId]) -> Vec<(AssetId, MoveDescriptor)> {
        let target = self.target.filter(|t| assets.contains(t)).or(assets.first().copied());
        target.into_iter().map(|a| (a, mv.clone())).collect()
    }
}

pub struct InvalidFunder {
    claim: i64,
}

impl InvalidFunder {
    fn inflate(&self, fund: &BTreeMap<AssetId, i64>) -> BTreeMap<AssetId, i64> {
        fund.iter().map(|(a, v)| (*a, if *v > 0 { *v + self.claim } else { 0 })).collect()
    }
}

impl Strategy for InvalidFunder {
    fn funding(&self, plan: &AgentPlan, top_up_phase: bool) -> BTreeMap<AssetId, i64> {
        if top_up_phase {
            plan.fund.clone()
        } else {
            self.inflate(&plan.fund)
        }
    }

    fn top_up(&self, plan: &AgentPlan) -> BTreeMap<AssetId, i64> {
        let mut claim = self.inflate(&plan.fund);
        for (a, v) in &plan.top_up {
            *claim.entry(*a).or_insert(0) += v;
        }
        claim.iter_mut().for_each(|(a, v)| *v -= plan.fund.get(a).copied().unwrap_or(0));
        claim
    }
}
