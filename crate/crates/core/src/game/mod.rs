//! Replicated state machines.
//!
//! A machine is a finite game tree: in every non-final state exactly one
//! agent is enabled, it picks one of the enabled moves, and the machine
//! advances to the next turn. `Skip` is enabled in every non-final state and
//! changes nothing but the turn.
//!
//! [`apply`](Machine::apply) does not check whose turn it is or whether the
//! move is in [`permits`](Machine::permits); the replica filters requests
//! before applying them. Guards inside a move (balances, commitments) that
//! fail make the move a no-op that still consumes the turn.

mod accounts;
pub mod auction;
pub mod dao;
pub mod swap;
mod util;

pub use accounts::Accounts;
pub use auction::{seal, AuctionParams, AuctionState};
pub use dao::{DaoParams, DaoState};
pub use swap::{SwapParams, SwapState};
pub use util::{util_from_deltas, UtilityConfig};

use alloc::collections::BTreeMap;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::ids::{AgentId, AssetId};
use crate::request::MoveDescriptor;
use crate::Error;

pub trait Machine {
    /// The agent whose turn it is, `None` once final.
    fn enabled(&self) -> Option<AgentId>;

    /// Names of the moves enabled in this state, `Skip` included.
    fn move_names(&self) -> &'static [&'static str];

    /// Whether `mv` is an enabled move with well-formed arguments.
    fn permits(&self, mv: &MoveDescriptor) -> bool;

    fn apply(&mut self, sender: AgentId, mv: &MoveDescriptor) -> Result<(), Error>;

    fn is_final(&self) -> bool;

    /// Number of moves applied so far. Round `r` is turn `r - 1`.
    fn turn(&self) -> u64;

    fn accounts(&self) -> &Accounts;

    fn accounts_mut(&mut self) -> &mut Accounts;
}

/// The parameters that pick and configure a machine.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(tag = "kind", rename_all = "snake_case"))]
pub enum GameSpec {
    Swap(SwapParams),
    Dao(DaoParams),
    Auction(AuctionParams),
}

impl GameSpec {
    /// The initial state, with the contract already holding `contract_funds`
    /// (the DAO treasury, for instance). Agents' balances are credited by
    /// initialization.
    pub fn initial_state(&self, contract_funds: &BTreeMap<AssetId, i64>) -> GameState {
        let mut accounts = Accounts::default();
        for (asset, amount) in contract_funds {
            accounts.set(crate::ids::Address::Contract, *asset, *amount);
        }
        match self {
            GameSpec::Swap(p) => GameState::Swap(SwapState::new(p.clone(), accounts)),
            GameSpec::Dao(p) => GameState::Dao(DaoState::new(p.clone(), accounts)),
            GameSpec::Auction(p) => GameState::Auction(AuctionState::new(p.clone(), accounts)),
        }
    }

    /// Upper bound on the number of rounds any execution can take.
    pub fn max_rounds(&self) -> u64 {
        match self {
            GameSpec::Swap(_) => swap::MAX_TURNS,
            GameSpec::Dao(p) => p.lps.len() as u64 + 1,
            GameSpec::Auction(p) => 3 * p.bidders.len() as u64,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GameSpec::Swap(_) => "swap",
            GameSpec::Dao(_) => "dao",
            GameSpec::Auction(_) => "auction",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GameState {
    Swap(SwapState),
    Dao(DaoState),
    Auction(AuctionState),
}

macro_rules! dispatch {
    ($self:expr, $s:ident => $e:expr) => {
        match $self {
            GameState::Swap($s) => $e,
            GameState::Dao($s) => $e,
            GameState::Auction($s) => $e,
        }
    };
}

impl Machine for GameState {
    fn enabled(&self) -> Option<AgentId> {
        dispatch!(self, s => s.enabled())
    }

    fn move_names(&self) -> &'static [&'static str] {
        dispatch!(self, s => s.move_names())
    }

    fn permits(&self, mv: &MoveDescriptor) -> bool {
        dispatch!(self, s => s.permits(mv))
    }

    fn apply(&mut self, sender: AgentId, mv: &MoveDescriptor) -> Result<(), Error> {
        dispatch!(self, s => s.apply(sender, mv))
    }

    fn is_final(&self) -> bool {
        dispatch!(self, s => s.is_final())
    }

    fn turn(&self) -> u64 {
        dispatch!(self, s => s.turn())
    }

    fn accounts(&self) -> &Accounts {
        dispatch!(self, s => s.accounts())
    }

    fn accounts_mut(&mut self) -> &mut Accounts {
        dispatch!(self, s => s.accounts_mut())
    }
}

impl GameState {
    /// DAO only: whether the grant was paid out.
    pub fn proposal_granted(&self) -> bool {
        matches!(self, GameState::Dao(s) if s.granted)
    }

    /// The state with the turn cursor cleared, for comparing states modulo
    /// whose turn it is.
    pub fn without_turn(&self) -> GameState {
        let mut s = self.clone();
        match &mut s {
            GameState::Swap(x) => x.turn = 0,
            GameState::Dao(x) => x.turn = 0,
            GameState::Auction(x) => x.turn = 0,
        }
        s
    }
}

/// Moves present in `names`, matched by name only.
pub(crate) fn named(names: &[&str], mv: &MoveDescriptor) -> bool {
    names.iter().any(|n| *n == mv.name)
}
