//! The synchronous network: every message arrives within Δ ticks and none
//! is lost. Delivery order is deterministic: by arrival tick, then by send
//! order.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xsmr_core::agent::Call;
use xsmr_core::{AgentId, Tick};

use crate::config::NetworkPolicy;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub seq: u64,
    pub from: AgentId,
    pub sent: Tick,
    pub arrive: Tick,
    pub call: Call,
}

pub struct Network {
    policy: NetworkPolicy,
    delta: u64,
    rng: ChaCha8Rng,
    queue: BTreeMap<(Tick, u64), Message>,
    next_seq: u64,
}

impl Network {
    pub fn new(policy: NetworkPolicy, delta: u64, seed: u64) -> Self {
        Network {
            policy,
            delta,
            rng: ChaCha8Rng::seed_from_u64(seed),
            queue: BTreeMap::new(),
            next_seq: 0,
        }
    }

    fn delay(&mut self) -> u64 {
        match &self.policy {
            NetworkPolicy::WorstCase => self.delta,
            NetworkPolicy::UniformRandom => self.rng.random_range(1..=self.delta),
            NetworkPolicy::Scripted { delays } => {
                delays.get(self.next_seq as usize).copied().unwrap_or(self.delta)
            }
        }
    }

    /// Queues `call` and returns the message as scheduled.
    pub fn send(&mut self, from: AgentId, call: Call, now: Tick) -> Message {
        let delay = self.delay().clamp(1, self.delta);
        let msg = Message { seq: self.next_seq, from, sent: now, arrive: now + Tick(delay), call };
        self.next_seq += 1;
        self.queue.insert((msg.arrive, msg.seq), msg.clone());
        msg
    }

    /// Removes and returns every message due at `now`, in send order.
    pub fn due(&mut self, now: Tick) -> Vec<Message> {
        let mut out = Vec::new();
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().0 > now {
                break;
            }
            out.push(entry.remove());
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use xsmr_core::replica::ReplicaCall;
    use xsmr_core::AssetId;

    fn call() -> Call {
        Call { to: AssetId(0), op: ReplicaCall::Redeem }
    }

    #[test]
    fn random_delays_stay_in_bounds() {
        let mut net = Network::new(NetworkPolicy::UniformRandom, 10, 7);
        for i in 0..1000 {
            let m = net.send(AgentId(0), call(), Tick(i));
            assert!((1..=10).contains(&(m.arrive - m.sent).0));
        }
    }

    #[test]
    fn delivery_is_ordered_by_arrival_then_send() {
        let mut net = Network::new(NetworkPolicy::Scripted { delays: vec![3, 1, 3] }, 3, 0);
        for _ in 0..3 {
            net.send(AgentId(0), call(), Tick(0));
        }
        assert_eq!(net.due(Tick(1)).iter().map(|m| m.seq).collect::<Vec<_>>(), [1]);
        assert!(net.due(Tick(2)).is_empty());
        assert_eq!(net.due(Tick(3)).iter().map(|m| m.seq).collect::<Vec<_>>(), [0, 2]);
        assert!(net.is_empty());
    }
}
