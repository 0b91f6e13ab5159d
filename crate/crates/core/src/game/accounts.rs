use alloc::collections::BTreeMap;

use crate::ids::{Address, AssetId};

/// `account: ADDR x ASSET -> Z`. Missing entries are zero.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Accounts {
    balances: BTreeMap<(Address, AssetId), i64>,
}

impl Accounts {
    pub fn get(&self, who: impl Into<Address>, asset: AssetId) -> i64 {
        self.balances.get(&(who.into(), asset)).copied().unwrap_or(0)
    }

    pub fn set(&mut self, who: impl Into<Address>, asset: AssetId, amount: i64) {
        let key = (who.into(), asset);
        if amount == 0 {
            self.balances.remove(&key);
        } else {
            self.balances.insert(key, amount);
        }
    }

    pub fn credit(&mut self, who: impl Into<Address>, asset: AssetId, amount: i64) {
        let who = who.into();
        let v = self.get(who, asset) + amount;
        self.set(who, asset, v);
    }

    /// Moves `amount` from `from` to `to` if `from` can cover it.
    pub fn transfer(
        &mut self,
        from: impl Into<Address>,
        to: impl Into<Address>,
        asset: AssetId,
        amount: i64,
    ) -> bool {
        let (from, to) = (from.into(), to.into());
        if amount < 0 || self.get(from, asset) < amount {
            return false;
        }
        self.credit(from, asset, -amount);
        self.credit(to, asset, amount);
        true
    }

    /// Sum over every holder, the contract included.
    pub fn total(&self, asset: AssetId) -> i64 {
        self.balances.iter().filter(|((_, a), _)| *a == asset).map(|(_, v)| v).sum()
    }

    pub fn min_balance(&self) -> i64 {
        self.balances.values().copied().min().unwrap_or(0).min(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Address, AssetId, i64)> + '_ {
        self.balances.iter().map(|((who, asset), v)| (*who, *asset, *v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::AgentId;

    #[test]
    fn transfer_is_guarded() {
        let mut a = Accounts::default();
        let (x, y, coin) = (AgentId(0), AgentId(1), AssetId(0));
        a.set(x, coin, 3);
        assert!(!a.transfer(x, y, coin, 4));
        assert!(!a.transfer(x, y, coin, -1));
        assert!(a.transfer(x, y, coin, 3));
        assert_eq!((a.get(x, coin), a.get(y, coin)), (0, 3));
        assert_eq!(a.total(coin), 3);
    }
}
