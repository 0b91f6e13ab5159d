//! DAO vote: liquidity providers vote governance tokens on a grant proposal,
//! then the director resolves it.
//!
//! One vote turn per LP in the configured order, then the director's
//! `Resolve` turn. The grant is paid from the contract's treasury to the
//! beneficiary iff the yes tally meets the threshold. The machine halts after
//! the director's turn either way.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::{named, Accounts, Machine};
use crate::ids::{Address, AgentId, AssetId};
use crate::request::{MoveArg, MoveDescriptor, SKIP};
use crate::Error;

pub const VOTE_YES: &str = "VoteYes";
pub const VOTE_NO: &str = "VoteNo";
pub const RESOLVE: &str = "Resolve";

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DaoParams {
    pub director: AgentId,
    pub beneficiary: AgentId,
    /// Voters, in turn order.
    pub lps: Vec<AgentId>,
    pub token: AssetId,
    pub florin: AssetId,
    pub threshold: i64,
    pub grant: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DaoState {
    pub params: DaoParams,
    pub accounts: Accounts,
    pub yes_votes: BTreeMap<AgentId, i64>,
    pub no_votes: BTreeMap<AgentId, i64>,
    pub voted: BTreeMap<AgentId, bool>,
    pub granted: bool,
    pub halted: bool,
    pub turn: u64,
}

enum DaoMove {
    Yes(i64),
    No(i64),
    Resolve,
    Skip,
}

fn parse(mv: &MoveDescriptor) -> Result<DaoMove, Error> {
    let bad = || Error::UnknownMove(mv.name.clone());
    match (mv.name.as_str(), mv.args.as_slice()) {
        (VOTE_YES, [MoveArg::Int(k)]) => Ok(DaoMove::Yes(*k)),
        (VOTE_NO, [MoveArg::Int(k)]) => Ok(DaoMove::No(*k)),
        (RESOLVE, []) => Ok(DaoMove::Resolve),
        (SKIP, []) => Ok(DaoMove::Skip),
        _ => Err(bad()),
    }
}

pub fn vote_yes(k: i64) -> MoveDescriptor {
    MoveDescriptor::new(VOTE_YES, vec![MoveArg::Int(k)])
}

pub fn vote_no(k: i64) -> MoveDescriptor {
    MoveDescriptor::new(VOTE_NO, vec![MoveArg::Int(k)])
}

impl DaoState {
    /// A treasury that cannot cover the grant halts the machine before the
    /// first vote.
    pub fn new(params: DaoParams, accounts: Accounts) -> Self {
        let mut s = DaoState {
            params,
            accounts,
            yes_votes: BTreeMap::new(),
            no_votes: BTreeMap::new(),
            voted: BTreeMap::new(),
            granted: false,
            halted: false,
            turn: 0,
        };
        s.check_treasury();
        s
    }

    /// Re-evaluates the treasury guard; called again once agents are funded.
    pub fn check_treasury(&mut self) {
        if self.turn == 0 {
            self.halted = self.accounts.get(Address::Contract, self.params.florin) < self.params.grant;
        }
    }

    pub fn yes_total(&self) -> i64 {
        self.yes_votes.values().sum()
    }

    fn in_vote_phase(&self) -> bool {
        (self.turn as usize) < self.params.lps.len()
    }

    fn vote(&mut self, sender: AgentId, k: i64, yes: bool) {
        let enabled = self.enabled() == Some(sender) && self.in_vote_phase();
        let already = self.voted.get(&sender).copied().unwrap_or(false);
        if !enabled || already || k < 0 || self.accounts.get(sender, self.params.token) < k {
            return;
        }
        let tally = if yes { &mut self.yes_votes } else { &mut self.no_votes };
        tally.insert(sender, k);
        self.voted.insert(sender, true);
    }

    fn resolve(&mut self, sender: AgentId) {
        if sender != self.params.director || self.in_vote_phase() {
            return;
        }
        if self.yes_total() >= self.params.threshold {
            let p = &self.params;
            self.granted =
                self.accounts.transfer(Address::Contract, p.beneficiary, p.florin, p.grant);
        }
        self.halted = true;
    }
}

impl Machine for DaoState {
    fn enabled(&self) -> Option<AgentId> {
        if self.is_final() {
            None
        } else if self.in_vote_phase() {
            Some(self.params.lps[self.turn as usize])
        } else {
            Some(self.params.director)
        }
    }

    fn move_names(&self) -> &'static [&'static str] {
        if self.is_final() {
            &[]
        } else if self.in_vote_phase() {
            &[VOTE_YES, VOTE_NO, SKIP]
        } else {
            &[RESOLVE, SKIP]
        }
    }

    fn permits(&self, mv: &MoveDescriptor) -> bool {
        parse(mv).is_ok() && named(self.move_names(), mv)
    }

    fn apply(&mut self, sender: AgentId, mv: &MoveDescriptor) -> Result<(), Error> {
        match parse(mv)? {
            DaoMove::Yes(k) => self.vote(sender, k, true),
            DaoMove::No(k) => self.vote(sender, k, false),
            DaoMove::Resolve => self.resolve(sender),
            DaoMove::Skip => {}
        }
        self.turn += 1;
        Ok(())
    }

    /// After the director's turn, or at once if the treasury was short.
    fn is_final(&self) -> bool {
        self.halted || self.turn as usize > self.params.lps.len()
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

/// The compliant move: an LP votes all its tokens yes (Skip when it holds
/// none), the director resolves.
pub fn compliant_move(state: &DaoState, me: AgentId) -> Option<MoveDescriptor> {
    if state.enabled() != Some(me) {
        return None;
    }
    if state.in_vote_phase() {
        let tokens = state.accounts.get(me, state.params.token);
        Some(if tokens > 0 { vote_yes(tokens) } else { MoveDescriptor::skip() })
    } else {
        Some(MoveDescriptor::nullary(RESOLVE))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALICE: AgentId = AgentId(0);
    const FLORIN: AssetId = AssetId(0);
    const TOKEN: AssetId = AssetId(1);

    fn lps() -> [AgentId; 3] {
        [AgentId(1), AgentId(2), AgentId(3)]
    }

    fn initial() -> DaoState {
        let mut a = Accounts::default();
        a.set(Address::Contract, FLORIN, 100);
        for lp in lps() {
            a.set(lp, TOKEN, 50);
        }
        let params = DaoParams {
            director: ALICE,
            beneficiary: ALICE,
            lps: lps().to_vec(),
            token: TOKEN,
            florin: FLORIN,
            threshold: 75,
            grant: 100,
        };
        DaoState::new(params, a)
    }

    #[test]
    fn two_yes_votes_fund_alice() {
        let mut s = initial();
        s.apply(AgentId(1), &vote_yes(50)).unwrap();
        s.apply(AgentId(2), &vote_yes(50)).unwrap();
        s.apply(AgentId(3), &MoveDescriptor::skip()).unwrap();
        assert_eq!(s.enabled(), Some(ALICE));
        s.apply(ALICE, &MoveDescriptor::nullary(RESOLVE)).unwrap();
        assert!(s.is_final() && s.granted);
        assert_eq!(s.accounts.get(ALICE, FLORIN), 100);
        assert_eq!(s.accounts.get(Address::Contract, FLORIN), 0);
    }

    #[test]
    fn overvote_leaves_tallies() {
        let mut s = initial();
        s.apply(AgentId(1), &vote_yes(51)).unwrap();
        assert!(s.yes_votes.is_empty() && s.voted.is_empty());
        assert_eq!(s.turn, 1);
    }

    #[test]
    fn all_skip_then_resolve_halts_without_transfer() {
        let mut s = initial();
        for lp in lps() {
            s.apply(lp, &MoveDescriptor::skip()).unwrap();
        }
        s.apply(ALICE, &MoveDescriptor::nullary(RESOLVE)).unwrap();
        assert!(s.is_final() && !s.granted);
        assert_eq!(s.accounts.get(Address::Contract, FLORIN), 100);
    }

    /// Every yes/no/skip combination with k in {0, 50}: the grant is paid
    /// exactly when the independently summed yes votes reach 75.
    #[test]
    fn brute_force_vote_combinations() {
        let choices = [
            MoveDescriptor::skip(),
            vote_yes(0),
            vote_yes(50),
            vote_no(0),
            vote_no(50),
        ];
        let mut granted = 0;
        for a in &choices {
            for b in &choices {
                for c in &choices {
                    let mut s = initial();
                    for (lp, mv) in lps().into_iter().zip([a, b, c]) {
                        s.apply(lp, mv).unwrap();
                    }
                    s.apply(ALICE, &MoveDescriptor::nullary(RESOLVE)).unwrap();
                    let yes: i64 = [a, b, c]
                        .iter()
                        .filter(|m| m.name == VOTE_YES)
                        .map(|m| m.int_arg(0).unwrap())
                        .sum();
                    assert_eq!(s.granted, yes >= 75, "{a} {b} {c}");
                    assert_eq!(s.accounts.get(ALICE, FLORIN), if yes >= 75 { 100 } else { 0 });
                    assert!(s.is_final());
                    granted += s.granted as u32;
                }
            }
        }
        // Two or three 50-token yes votes out of three slots, five choices each.
        assert_eq!(granted, 3 * 4 + 1);
    }

    #[test]
    fn short_treasury_halts_immediately() {
        let mut s = initial();
        s.accounts.set(Address::Contract, FLORIN, 99);
        s.check_treasury();
        assert!(s.is_final());
        assert_eq!(s.enabled(), None);
    }

    #[test]
    fn out_of_turn_resolve_is_ignored() {
        let mut s = initial();
        s.apply(ALICE, &MoveDescriptor::nullary(RESOLVE)).unwrap();
        assert!(!s.halted);
        assert!(!s.permits(&MoveDescriptor::nullary(RESOLVE)));
        assert!(s.permits(&vote_yes(3)));
        assert!(!s.permits(&MoveDescriptor::nullary(VOTE_YES)));
    }

    #[test]
    fn compliant_lp_without_tokens_skips() {
        let mut s = initial();
        s.accounts.set(AgentId(1), TOKEN, 0);
        assert_eq!(compliant_move(&s, AgentId(1)), Some(MoveDescriptor::skip()));
        assert_eq!(compliant_move(&s, AgentId(2)), None);
    }
}
