//! Sealed-bid auction: bidders commit to bids, open them, then resolve.
//!
//! Three phases of one turn per bidder each, in the configured order:
//! `SealedBid(commitment)`, `Unseal(bid, nonce)`, `Resolve`. Opening a bid
//! escrows it in the contract. On its `Resolve` turn the best bidder (ties go
//! to the larger `AgentId`) receives the seller's NFT and the seller receives
//! the bid; every other bidder gets its escrow back.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{named, Accounts, Machine};
use crate::ids::{Address, AgentId, AssetId};
use crate::request::{put_bytes, MoveArg, MoveDescriptor, SKIP};
use crate::Error;

pub const SEALED_BID: &str = "SealedBid";
pub const UNSEAL: &str = "Unseal";
pub const RESOLVE: &str = "Resolve";

/// Commitment to a bid: SHA-256 over `bid:i64 LE ‖ len:u32 LE ‖ nonce`.
pub fn seal(bid: i64, nonce: &[u8]) -> [u8; 32] {
    let mut bytes = Vec::with_capacity(12 + nonce.len());
    bytes.extend_from_slice(&bid.to_le_bytes());
    put_bytes(&mut bytes, nonce);
    Sha256::digest(&bytes).into()
}

pub fn sealed_bid(bid: i64, nonce: &[u8]) -> MoveDescriptor {
    MoveDescriptor::new(SEALED_BID, vec![MoveArg::Bytes(seal(bid, nonce).to_vec())])
}

pub fn unseal(bid: i64, nonce: &[u8]) -> MoveDescriptor {
    MoveDescriptor::new(UNSEAL, vec![MoveArg::Int(bid), MoveArg::Bytes(nonce.to_vec())])
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AuctionParams {
    pub seller: AgentId,
    /// Bidders, in turn order.
    pub bidders: Vec<AgentId>,
    pub florin: AssetId,
    pub nft: AssetId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Seal,
    Unseal,
    Resolve,
    Done,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuctionState {
    pub params: AuctionParams,
    pub accounts: Accounts,
    pub sealed: BTreeMap<AgentId, Vec<u8>>,
    pub bid: BTreeMap<AgentId, i64>,
    /// Bidders whose escrow has been paid out, to the seller or back.
    pub settled: BTreeSet<AgentId>,
    pub winner: Option<AgentId>,
    pub turn: u64,
}

enum AuctionMove<'a> {
    Seal(&'a [u8]),
    Unseal(i64, &'a [u8]),
    Resolve,
    Skip,
}

fn parse(mv: &MoveDescriptor) -> Result<AuctionMove<'_>, Error> {
    match (mv.name.as_str(), mv.args.as_slice()) {
        (SEALED_BID, [MoveArg::Bytes(c)]) => Ok(AuctionMove::Seal(c)),
        (UNSEAL, [MoveArg::Int(b), MoveArg::Bytes(n)]) => Ok(AuctionMove::Unseal(*b, n)),
        (RESOLVE, []) => Ok(AuctionMove::Resolve),
        (SKIP, []) => Ok(AuctionMove::Skip),
        _ => Err(Error::UnknownMove(mv.name.clone())),
    }
}

impl AuctionState {
    pub fn new(params: AuctionParams, accounts: Accounts) -> Self {
        AuctionState {
            params,
            accounts,
            sealed: BTreeMap::new(),
            bid: BTreeMap::new(),
            settled: BTreeSet::new(),
            winner: None,
            turn: 0,
        }
    }

    pub fn phase(&self) -> Phase {
        let b = self.params.bidders.len() as u64;
        match self.turn.checked_div(b).unwrap_or(3) {
            0 => Phase::Seal,
            1 => Phase::Unseal,
            2 => Phase::Resolve,
            _ => Phase::Done,
        }
    }

    /// Whether `who`'s opened bid beats every other opened bid.
    pub fn is_best(&self, who: AgentId) -> bool {
        let Some(mine) = self.bid.get(&who) else { return false };
        self.bid.iter().filter(|(p, _)| **p != who).all(|(p, b)| mine > b || (mine == b && who > *p))
    }

    fn enabled_now(&self, sender: AgentId, phase: Phase) -> bool {
        self.phase() == phase && self.enabled() == Some(sender)
    }

    fn do_unseal(&mut self, sender: AgentId, b: i64, nonce: &[u8]) {
        let opens = self.sealed.get(&sender).is_some_and(|c| c[..] == seal(b, nonce)[..]);
        if !opens || self.bid.contains_key(&sender) {
            return;
        }
        if self.accounts.transfer(sender, Address::Contract, self.params.florin, b) {
            self.bid.insert(sender, b);
        }
    }

    fn do_resolve(&mut self, sender: AgentId) {
        let Some(&b) = self.bid.get(&sender) else { return };
        if !self.settled.insert(sender) {
            return;
        }
        let AuctionParams { seller, florin, nft, .. } = self.params;
        if self.is_best(sender) && self.accounts.transfer(seller, sender, nft, 1) {
            self.accounts.transfer(Address::Contract, seller, florin, b);
            self.winner = Some(sender);
        } else {
            self.accounts.transfer(Address::Contract, sender, florin, b);
        }
    }
}

impl Machine for AuctionState {
    fn enabled(&self) -> Option<AgentId> {
        if self.is_final() {
            return None;
        }
        let b = self.params.bidders.len() as u64;
        Some(self.params.bidders[(self.turn % b) as usize])
    }

    fn move_names(&self) -> &'static [&'static str] {
        match self.phase() {
            Phase::Seal => &[SEALED_BID, SKIP],
            Phase::Unseal => &[UNSEAL, SKIP],
            Phase::Resolve => &[RESOLVE, SKIP],
            Phase::Done => &[],
        }
    }

    fn permits(&self, mv: &MoveDescriptor) -> bool {
        parse(mv).is_ok() && named(self.move_names(), mv)
    }

    fn apply(&mut self, sender: AgentId, mv: &MoveDescriptor) -> Result<(), Error> {
        match parse(mv)? {
            AuctionMove::Seal(c) => {
                if self.enabled_now(sender, Phase::Seal) {
                    self.sealed.insert(sender, c.to_vec());
                }
            }
            AuctionMove::Unseal(b, n) => {
                if self.enabled_now(sender, Phase::Unseal) {
                    self.do_unseal(sender, b, n);
                }
            }
            // Before the unseal phase is over this is a no-op.
            AuctionMove::Resolve => {
                if self.enabled_now(sender, Phase::Resolve) {
                    self.do_resolve(sender);
                }
            }
            AuctionMove::Skip => {}
        }
        self.turn += 1;
        Ok(())
    }

    fn is_final(&self) -> bool {
        self.phase() == Phase::Done
    }

    fn turn(&self) -> u64 {
        self.turn
    }

    fn accounts(&self) -> &Accounts {
        &self.accounts
    }

    fn accounts_mut(&mut self) -> &mut Accounts {
        &mut self.accounts
    }
}

/// The compliant move for a bidder that bids `bid` with `nonce`.
pub fn compliant_move(
    state: &AuctionState,
    me: AgentId,
    bid: i64,
    nonce: &[u8],
) -> Option<MoveDescriptor> {
    if state.enabled() != Some(me) {
        return None;
    }
    Some(match state.phase() {
        Phase::Seal => sealed_bid(bid, nonce),
        Phase::Unseal => unseal(bid, nonce),
        Phase::Resolve => MoveDescriptor::nullary(RESOLVE),
        Phase::Done => return None,
    })
}
