//! The shipped scenarios and the adversarial matrix built from them.

use std::collections::BTreeMap;

use rayon::prelude::*;
use xsmr_core::agent::{StrategyKind, TopUpMode};
use xsmr_core::game::{AuctionParams, DaoParams, GameSpec, SwapParams, UtilityConfig};
use xsmr_core::replica::Mode;
use xsmr_core::{AgentId, AssetId};

use crate::config::{AgentConfig, AssetConfig, ExpectedFunding, NetworkPolicy, ScenarioConfig};
use crate::sim::{run_scenario, RunResult};

pub const FLORIN: AssetId = AssetId(0);
pub const DUCAT: AssetId = AssetId(1);
pub const TOKEN: AssetId = AssetId(1);
pub const NFT: AssetId = AssetId(1);

pub const ALICE: AgentId = AgentId(0);
pub const BOB: AgentId = AgentId(1);
pub const CAROL: AgentId = AgentId(2);
pub const DAVE: AgentId = AgentId(3);

/// Over-claim used by the invalid funder.
pub const INVALID_CLAIM: i64 = 1_000_000;
/// Premium used by scenarios with deposits.
pub const PREMIUM: i64 = 2;

fn asset(id: AssetId, name: &str) -> AssetConfig {
    AssetConfig { id, name: name.into() }
}

fn agent(id: AgentId, name: &str, holdings: &[(AssetId, i64)], fund: &[(AssetId, i64)]) -> AgentConfig {
    AgentConfig {
        id,
        name: name.into(),
        strategy: StrategyKind::Compliant,
        holdings: holdings.iter().copied().collect(),
        fund: fund.iter().copied().collect(),
        top_up: BTreeMap::new(),
        bid: 0,
    }
}

fn amounts(entries: &[(AgentId, AssetId, i64)]) -> BTreeMap<AgentId, BTreeMap<AssetId, i64>> {
    let mut out: BTreeMap<AgentId, BTreeMap<AssetId, i64>> = BTreeMap::new();
    for (p, a, v) in entries {
        out.entry(*p).or_default().insert(*a, *v);
    }
    out
}

/// Alice trades one florin for Bob's ducat. Each values the other's coin at
/// two, so a completed swap is worth +1 to both.
pub fn swap() -> ScenarioConfig {
    ScenarioConfig {
        name: "swap".into(),
        game: GameSpec::Swap(SwapParams { alice: ALICE, bob: BOB, florin: FLORIN, ducat: DUCAT }),
        assets: vec![asset(FLORIN, "florin"), asset(DUCAT, "ducat")],
        agents: vec![
            agent(ALICE, "alice", &[(FLORIN, 5)], &[(FLORIN, 1)]),
            agent(BOB, "bob", &[(DUCAT, 5)], &[(DUCAT, 1)]),
        ],
        contract_funds: BTreeMap::new(),
        delta: 10,
        seed: 1,
        network: NetworkPolicy::WorstCase,
        mode: Mode::Pessimistic,
        conflict: Default::default(),
        premium: None,
        leader: None,
        top_up: TopUpMode::None,
        expected_funding: ExpectedFunding {
            exact: true,
            amounts: amounts(&[(ALICE, FLORIN, 1), (BOB, DUCAT, 1)]),
        },
        utility: UtilityConfig {
            valuations: amounts(&[(ALICE, DUCAT, 2), (BOB, FLORIN, 2)]),
            proposal_bonus: BTreeMap::new(),
        },
    }
}

/// Alice directs a DAO whose treasury holds 100 florins and asks for all of
/// it. Three LPs with 50 tokens each vote; 75 yes tokens carry the grant.
pub fn dao() -> ScenarioConfig {
    let lps = [(BOB, "bob"), (CAROL, "carol"), (DAVE, "dave")];
    let mut agents = vec![agent(ALICE, "alice", &[], &[])];
    agents.extend(lps.iter().map(|(id, name)| agent(*id, name, &[(TOKEN, 60)], &[(TOKEN, 50)])));
    ScenarioConfig {
        name: "dao".into(),
        game: GameSpec::Dao(DaoParams {
            director: ALICE,
            beneficiary: ALICE,
            lps: lps.iter().map(|(id, _)| *id).collect(),
            token: TOKEN,
            florin: FLORIN,
            threshold: 75,
            grant: 100,
        }),
        assets: vec![asset(FLORIN, "florin"), asset(TOKEN, "token")],
        agents,
        contract_funds: BTreeMap::from([(FLORIN, 100)]),
        delta: 10,
        seed: 1,
        network: NetworkPolicy::WorstCase,
        mode: Mode::Pessimistic,
        conflict: Default::default(),
        premium: None,
        leader: None,
        top_up: TopUpMode::None,
        expected_funding: ExpectedFunding {
            exact: false,
            amounts: amounts(&[(BOB, TOKEN, 50), (CAROL, TOKEN, 50), (DAVE, TOKEN, 50)]),
        },
        utility: UtilityConfig {
            valuations: BTreeMap::new(),
            proposal_bonus: lps.iter().map(|(id, _)| (*id, 1)).collect(),
        },
    }
}

/// Carol auctions an NFT; Alice bids 5 and Bob bids 7 florins. Bidders value
/// the NFT at 10, Carol at 1.
pub fn auction() -> ScenarioConfig {
    let mut alice = agent(ALICE, "alice", &[(FLORIN, 20)], &[(FLORIN, 10)]);
    alice.bid = 5;
    let mut bob = agent(BOB, "bob", &[(FLORIN, 20)], &[(FLORIN, 10)]);
    bob.bid = 7;
    ScenarioConfig {
        name: "auction".into(),
        game: GameSpec::Auction(AuctionParams {
            seller: CAROL,
            bidders: vec![ALICE, BOB],
            florin: FLORIN,
            nft: NFT,
        }),
        assets: vec![asset(FLORIN, "florin"), asset(NFT, "nft")],
        agents: vec![alice, bob, agent(CAROL, "carol", &[(NFT, 3)], &[(NFT, 1)])],
        contract_funds: BTreeMap::new(),
        delta: 10,
        seed: 1,
        network: NetworkPolicy::WorstCase,
        mode: Mode::Pessimistic,
        conflict: Default::default(),
        premium: None,
        leader: None,
        top_up: TopUpMode::None,
        expected_funding: ExpectedFunding {
            exact: false,
            amounts: amounts(&[(ALICE, FLORIN, 10), (BOB, FLORIN, 10), (CAROL, NFT, 1)]),
        },
        utility: UtilityConfig {
            valuations: amounts(&[(ALICE, NFT, 10), (BOB, NFT, 10), (CAROL, NFT, 1)]),
            proposal_bonus: BTreeMap::new(),
        },
    }
}

/// The three all-compliant games.
pub fn base_scenarios() -> Vec<ScenarioConfig> {
    vec![swap(), dao(), auction()]
}

/// The agent the matrix makes Byzantine in each game, and a compliant agent
/// to lead the verified top-up.
fn roles(cfg: &ScenarioConfig) -> (AgentId, AgentId) {
    match &cfg.game {
        GameSpec::Swap(_) => (BOB, ALICE),
        GameSpec::Dao(_) => (BOB, ALICE),
        GameSpec::Auction(_) => (BOB, CAROL),
    }
}

/// The adversaries of the matrix, by name.
pub const ADVERSARIES: [&str; 5] = ["compliant", "equivocator", "withholder", "silent", "invalid_funder"];

/// `base` with one agent replaced by `adversary`. The invalid funder comes
/// with a premium and a verified top-up led by a compliant agent.
pub fn with_adversary(base: &ScenarioConfig, adversary: &str) -> ScenarioConfig {
    let mut cfg = base.clone();
    let (victim, leader) = roles(&cfg);
    let strategy = match adversary {
        "compliant" => StrategyKind::Compliant,
        "equivocator" => StrategyKind::Equivocator,
        "withholder" => StrategyKind::Withholder { target: Some(cfg.assets[0].id) },
        "silent" => StrategyKind::Silent,
        "invalid_funder" => {
            cfg.premium = Some(PREMIUM);
            cfg.top_up = TopUpMode::Verified;
            cfg.leader = Some(leader);
            StrategyKind::InvalidFunder { claim: INVALID_CLAIM }
        }
        other => panic!("unknown adversary {other}"),
    };
    if let Some(a) = cfg.agents.iter_mut().find(|a| a.id == victim) {
        a.strategy = strategy;
    }
    cfg.name = format!("{}-{adversary}", base.name);
    cfg
}

pub fn with_mode(base: &ScenarioConfig, mode: Mode) -> ScenarioConfig {
    let mut cfg = base.clone();
    cfg.mode = mode;
    if mode == Mode::Optimistic {
        cfg.name = format!("{}-optimistic", cfg.name);
    }
    cfg
}

/// Every game × adversary × mode: 30 scenarios.
pub fn matrix() -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for base in base_scenarios() {
        for adversary in ADVERSARIES {
            let cfg = with_adversary(&base, adversary);
            out.push(with_mode(&cfg, Mode::Optimistic));
            out.push(cfg);
        }
    }
    out
}

/// `cfg` with the given seed and network policy.
pub fn seeded(cfg: &ScenarioConfig, seed: u64, network: NetworkPolicy) -> ScenarioConfig {
    let mut cfg = cfg.clone();
    cfg.seed = seed;
    cfg.network = network;
    cfg
}

/// Runs every scenario under `seeds` random-delay seeds in parallel and
/// folds each run with `f`. Results come back in scenario, then seed order.
pub fn sweep<T: Send>(
    scenarios: &[ScenarioConfig],
    seeds: std::ops::Range<u64>,
    f: impl Fn(&RunResult) -> T + Sync,
) -> Vec<T> {
    let jobs: Vec<(usize, u64)> =
        (0..scenarios.len()).flat_map(|i| seeds.clone().map(move |s| (i, s))).collect();
    jobs.into_par_iter()
        .map(|(i, seed)| f(&run_scenario(&seeded(&scenarios[i], seed, NetworkPolicy::UniformRandom))))
        .collect()
}

/// An auction where the seller is the only compliant agent: Alice withholds
/// her moves from the NFT replica and Bob equivocates. Everything either
/// replica sees must still reach the other through the seller's relays.
pub fn relay_stress() -> ScenarioConfig {
    let mut cfg = auction();
    cfg.name = "auction-relay".into();
    for a in &mut cfg.agents {
        a.strategy = match a.id {
            ALICE => StrategyKind::Withholder { target: Some(FLORIN) },
            BOB => StrategyKind::Equivocator,
            _ => StrategyKind::Compliant,
        };
    }
    cfg
}

/// The auction with Bob playing and redeeming but never relaying.
pub fn delivery_auction() -> ScenarioConfig {
    let mut cfg = auction();
    cfg.name = "auction-nonrelayer".into();
    if let Some(bob) = cfg.agents.iter_mut().find(|a| a.id == BOB) {
        bob.strategy = StrategyKind::NonRelayer;
    }
    cfg
}

/// The scenario files shipped in `configs/`, by file stem.
pub fn shipped() -> Vec<(String, ScenarioConfig)> {
    let mut out: Vec<ScenarioConfig> = base_scenarios();
    out.push(with_mode(&auction(), Mode::Optimistic));
    out.push(with_adversary(&swap(), "equivocator"));
    out.push(with_adversary(&dao(), "withholder"));
    out.push(with_adversary(&auction(), "invalid_funder"));
    out.push(relay_stress());
    out.push(delivery_auction());
    let mut scripted = swap();
    scripted.name = "swap-scripted".into();
    scripted.network = NetworkPolicy::Scripted { delays: vec![10, 1, 1, 10, 5, 5, 3, 7] };
    out.push(scripted);
    out.into_iter().map(|c| (c.name.clone(), c)).collect()
}
