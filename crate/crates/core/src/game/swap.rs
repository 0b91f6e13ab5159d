//! Simple swap: Alice trades one florin for one of Bob's ducats.
//!
//! Turns alternate Alice, Bob, Alice, Bob. The first two are `Agree` turns,
//! the last two `Complete` turns; the first `Complete` ends the execution,
//! so an all-compliant run takes three rounds.

use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::{named, Accounts, Machine};
use crate::ids::{AgentId, AssetId};
use crate::request::{MoveDescriptor, SKIP};
use crate::Error;

pub const AGREE: &str = "Agree";
pub const COMPLETE: &str = "Complete";
pub(crate) const MAX_TURNS: u64 = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SwapParams {
    pub alice: AgentId,
    pub bob: AgentId,
    pub florin: AssetId,
    pub ducat: AssetId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwapState {
    pub params: SwapParams,
    pub accounts: Accounts,
    pub alice_yes: bool,
    pub bob_yes: bool,
    pub all_done: bool,
    pub turn: u64,
}

enum SwapMove {
    Agree,
    Complete,
    Skip,
}

fn parse(mv: &MoveDescriptor) -> Result<SwapMove, Error> {
    if !mv.args.is_empty() {
        return Err(Error::UnknownMove(mv.name.clone()));
    }
    match mv.name.as_str() {
        AGREE => Ok(SwapMove::Agree),
        COMPLETE => Ok(SwapMove::Complete),
        SKIP => Ok(SwapMove::Skip),
        _ => Err(Error::UnknownMove(mv.name.clone())),
    }
}

impl SwapState {
    pub fn new(params: SwapParams, accounts: Accounts) -> Self {
        SwapState { params, accounts, alice_yes: false, bob_yes: false, all_done: false, turn: 0 }
    }

    fn complete(&mut self) {
        if self.all_done {
            return;
        }
        let SwapParams { alice, bob, florin, ducat } = self.params;
        // A party that already cashed out on one chain cannot pay; the swap
        // then fails as a whole rather than half-way.
        let solvent = self.accounts.get(alice, florin) >= 1 && self.accounts.get(bob, ducat) >= 1;
        if self.alice_yes && self.bob_yes && solvent {
            self.accounts.transfer(alice, bob, florin, 1);
            self.accounts.transfer(bob, alice, ducat, 1);
        }
        self.all_done = true;
    }

    pub fn completed_exchange(&self) -> bool {
        self.all_done && self.alice_yes && self.bob_yes
    }
}

impl Machine for SwapState {
    fn enabled(&self) -> Option<AgentId> {
        if self.is_final() {
            None
        } else if self.turn.is_multiple_of(2) {
            Some(self.params.alice)
        } else {
            Some(self.params.bob)
        }
    }

    fn move_names(&self) -> &'static [&'static str] {
        if self.is_final() {
            &[]
        } else if self.turn < 2 {
            &[AGREE, SKIP]
        } else {
            &[COMPLETE, SKIP]
        }
    }

    fn permits(&self, mv: &MoveDescriptor) -> bool {
        parse(mv).is_ok() && named(self.move_names(), mv)
    }

    fn apply(&mut self, sender: AgentId, mv: &MoveDescriptor) -> Result<(), Error> {
        match parse(mv)? {
            SwapMove::Agree => {
                let p = &self.params;
                if sender == p.alice && self.accounts.get(p.alice, p.florin) >= 1 {
                    self.alice_yes = true;
                } else if sender == p.bob && self.accounts.get(p.bob, p.ducat) >= 1 {
                    self.bob_yes = true;
                }
            }
            SwapMove::Complete => self.complete(),
            SwapMove::Skip => {}
        }
        self.turn += 1;
        Ok(())
    }

    fn is_final(&self) -> bool {
        self.all_done || self.turn >= MAX_TURNS
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

/// The compliant move for `me` in `state`.
pub fn compliant_move(state: &SwapState, me: AgentId) -> Option<MoveDescriptor> {
    if state.enabled() != Some(me) {
        return None;
    }
    let name = if state.turn < 2 { AGREE } else { COMPLETE };
    Some(MoveDescriptor::new(name, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALICE: AgentId = AgentId(0);
    const BOB: AgentId = AgentId(1);
    const FLORIN: AssetId = AssetId(0);
    const DUCAT: AssetId = AssetId(1);

    fn funded() -> SwapState {
        let mut a = Accounts::default();
        a.set(ALICE, FLORIN, 1);
        a.set(BOB, DUCAT, 1);
        SwapState::new(SwapParams { alice: ALICE, bob: BOB, florin: FLORIN, ducat: DUCAT }, a)
    }

    fn m(name: &str) -> MoveDescriptor {
        MoveDescriptor::nullary(name)
    }

    #[test]
    fn both_agree_then_complete_exchanges_coins() {
        let mut s = funded();
        s.apply(ALICE, &m(AGREE)).unwrap();
        s.apply(BOB, &m(AGREE)).unwrap();
        s.apply(ALICE, &m(COMPLETE)).unwrap();
        assert!(s.is_final() && s.all_done);
        assert_eq!(s.accounts.get(ALICE, FLORIN), 0);
        assert_eq!(s.accounts.get(ALICE, DUCAT), 1);
        assert_eq!(s.accounts.get(BOB, FLORIN), 1);
        assert_eq!(s.accounts.get(BOB, DUCAT), 0);
        assert_eq!(s.turn, 3);
    }

    #[test]
    fn skip_only_advances_turn() {
        let mut s = funded();
        let before = s.clone();
        s.apply(ALICE, &MoveDescriptor::skip()).unwrap();
        assert_eq!(s.turn, 1);
        assert!(s.without_turn_eq(&before));
    }

    impl SwapState {
        fn without_turn_eq(&self, other: &SwapState) -> bool {
            let mut a = self.clone();
            let mut b = other.clone();
            a.turn = 0;
            b.turn = 0;
            a == b
        }
    }

    #[test]
    fn premature_complete_exchanges_nothing() {
        let mut s = funded();
        s.apply(ALICE, &m(AGREE)).unwrap();
        s.apply(BOB, &MoveDescriptor::skip()).unwrap();
        s.apply(ALICE, &m(COMPLETE)).unwrap();
        assert!(s.all_done && s.is_final());
        assert_eq!(s.accounts, funded().accounts);
    }

    #[test]
    fn agree_without_coin_sets_nothing() {
        let mut s = funded();
        s.accounts.set(ALICE, FLORIN, 0);
        s.apply(ALICE, &m(AGREE)).unwrap();
        assert!(!s.alice_yes);
    }

    #[test]
    fn unknown_move_is_an_error() {
        let mut s = funded();
        assert_eq!(s.apply(ALICE, &m("Bid")), Err(Error::UnknownMove("Bid".into())));
        assert!(!s.permits(&m(COMPLETE)));
        assert!(s.permits(&m(AGREE)));
    }

    #[test]
    fn four_turns_at_most() {
        let mut s = funded();
        for who in [ALICE, BOB, ALICE, BOB] {
            assert_eq!(s.enabled(), Some(who));
            s.apply(who, &MoveDescriptor::skip()).unwrap();
        }
        assert!(s.is_final());
        assert_eq!(s.enabled(), None);
    }
}
