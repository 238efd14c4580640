//! Deterministic synthetic chains with known owners.
//!
//! A scenario describes a set of existing chains and one airdrop chain. On
//! the existing chains every entity owns a few *core wallets*: fixed address
//! sets that are funded once and then consolidated in a single transaction,
//! so each core wallet is exactly one cluster. All later spending is scoped
//! to one wallet, and fresh receive or change addresses become single-address
//! wallets that are never co-spent with anything. At the configured snapshot
//! heights every address with a non-dust balance is granted one output on the
//! airdrop chain, and entities claim those grants according to their
//! behaviour. The generator therefore knows every multi-address cluster by
//! construction and records it in the [`GroundTruth`].

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chain::{AddressKey, ChainId, ChainSnapshot, OutputRecord, RawTx, SnapshotBuilder};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("claim behaviour probabilities must be in [0, 1] and sum to 1 (sum is {0})")]
    ClaimProbabilities(f64),
    #[error("{name} must be in [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("invalid scenario: {0}")]
    Invalid(&'static str),
    #[error("duplicate chain id {0}")]
    DuplicateChain(ChainId),
    #[error("generated chain failed validation: {0}")]
    Chain(#[from] crate::chain::ChainError),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChainParams {
    pub id: ChainId,
    /// Seconds between blocks.
    pub block_interval: u64,
    /// Last height included in the airdrop snapshot.
    pub snapshot_height: u64,
    /// Payments per core wallet before the snapshot.
    pub payments_before: f64,
    /// Payments per core wallet after the snapshot.
    pub payments_after: f64,
    /// Probability that an entity is active on this chain.
    pub presence: f64,
}

impl ChainParams {
    fn new(id: &str, block_interval: u64, snapshot_height: u64) -> Self {
        Self {
            id: ChainId::new(id).expect("static id"),
            block_interval,
            snapshot_height,
            payments_before: 1.5,
            payments_after: 1.5,
            presence: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AirdropParams {
    pub chain: ChainId,
    pub block_interval: u64,
    /// Value of each grant in base units (4.6 coins at 10^8 units per coin).
    pub grant_value: u64,
    /// Balances below this are dust and receive no grant.
    pub dust_threshold: u64,
    pub grants_per_tx: usize,
    /// Gap between the last snapshot block and the airdrop genesis.
    pub delay_secs: u64,
    /// Length of the era in which grants are paid out.
    pub grant_era_secs: u64,
    /// Length of the era in which grants are claimed.
    pub claim_era_secs: u64,
}

impl Default for AirdropParams {
    fn default() -> Self {
        Self {
            chain: ChainId::new("clam").expect("static id"),
            block_interval: 60,
            grant_value: 460_000_000,
            dust_threshold: 1,
            grants_per_tx: 20,
            delay_secs: 86_400,
            grant_era_secs: 7 * 86_400,
            claim_era_secs: 30 * 86_400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Behavior {
    /// Spends every granted output in one transaction.
    SweepAll,
    /// Spends each granted output on its own.
    PerAddressClaim,
    NoClaim,
    /// Sells some keys to a buyer and sweeps the rest.
    KeySale,
    /// Extra entity that buys keys and sweeps them.
    KeyBuyer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClaimMix {
    pub sweep_all: f64,
    pub per_address_claim: f64,
    pub no_claim: f64,
    pub key_sale: f64,
}

impl ClaimMix {
    pub fn only(b: Behavior) -> Self {
        let mut m = Self {
            sweep_all: 0.0,
            per_address_claim: 0.0,
            no_claim: 0.0,
            key_sale: 0.0,
        };
        match b {
            Behavior::SweepAll => m.sweep_all = 1.0,
            Behavior::PerAddressClaim => m.per_address_claim = 1.0,
            Behavior::NoClaim => m.no_claim = 1.0,
            Behavior::KeySale => m.key_sale = 1.0,
            Behavior::KeyBuyer => {}
        }
        m
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Behavior {
        let u: f64 = rng.gen();
        if u < self.sweep_all {
            Behavior::SweepAll
        } else if u < self.sweep_all + self.per_address_claim {
            Behavior::PerAddressClaim
        } else if u < self.sweep_all + self.per_address_claim + self.no_claim {
            Behavior::NoClaim
        } else if self.key_sale > 0.0 {
            Behavior::KeySale
        } else {
            Behavior::NoClaim
        }
    }
}

impl Default for ClaimMix {
    fn default() -> Self {
        Self {
            sweep_all: 0.5,
            per_address_claim: 0.2,
            no_claim: 0.2,
            key_sale: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct Scenario {
    pub seed: u64,
    pub n_entities: usize,
    pub genesis_time: i64,
    /// The existing chains whose holders receive the airdrop.
    pub chains: Vec<ChainParams>,
    pub airdrop: AirdropParams,
    pub claims: ClaimMix,
    /// Probability that a payment or change output reuses an existing address.
    pub address_reuse: f64,
    /// Probability that a core-wallet address reuses the entity's key from an
    /// earlier chain.
    pub key_reuse: f64,
    pub max_wallets: usize,
    pub max_wallet_size: usize,
    pub key_buyers: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 1,
            n_entities: 200,
            genesis_time: 1_388_534_400,
            // Snapshot heights chosen so all three snapshots fall 30 days in.
            chains: vec![
                ChainParams::new("btc", 600, 4_319),
                ChainParams::new("ltc", 150, 17_279),
                ChainParams::new("doge", 60, 43_199),
            ],
            airdrop: AirdropParams::default(),
            claims: ClaimMix::default(),
            address_reuse: 0.3,
            key_reuse: 0.3,
            max_wallets: 3,
            max_wallet_size: 4,
            key_buyers: 3,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SynthError> {
        let c = &self.claims;
        let probs = [c.sweep_all, c.per_address_claim, c.no_claim, c.key_sale];
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-9 {
            return Err(SynthError::ClaimProbabilities(sum));
        }
        let mut named = vec![("address_reuse", self.address_reuse), ("key_reuse", self.key_reuse)];
        named.extend(self.chains.iter().map(|ch| ("presence", ch.presence)));
        for (name, value) in named {
            if !(0.0..=1.0).contains(&value) {
                return Err(SynthError::Probability { name, value });
            }
        }
        if self.chains.is_empty() {
            return Err(SynthError::Invalid("at least one existing chain is required"));
        }
        let mut ids = BTreeSet::new();
        for id in self.chains.iter().map(|c| &c.id).chain([&self.airdrop.chain]) {
            if !ids.insert(id) {
                return Err(SynthError::DuplicateChain(id.clone()));
            }
        }
        if self.chains.iter().any(|c| c.block_interval == 0) || self.airdrop.block_interval == 0 {
            return Err(SynthError::Invalid("block intervals must be positive"));
        }
        if self.chains.iter().any(|c| !(c.payments_before >= 0.0 && c.payments_after >= 0.0)) {
            return Err(SynthError::Invalid("payment rates must be non-negative"));
        }
        if self.airdrop.grants_per_tx == 0 {
            return Err(SynthError::Invalid("grants_per_tx must be positive"));
        }
        if self.max_wallets == 0 || self.max_wallet_size == 0 {
            return Err(SynthError::Invalid("wallet limits must be positive"));
        }
        if self.claims.key_sale > 0.0 && self.key_buyers == 0 {
            return Err(SynthError::Invalid("key sales need at least one key buyer"));
        }
        if self.n_entities == 0 {
            return Err(SynthError::Invalid("n_entities must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EntityTruth {
    pub id: u32,
    pub behavior: Behavior,
    pub addresses: BTreeMap<ChainId, Vec<AddressKey>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExpectedImpact {
    pub source: ChainId,
    pub target: ChainId,
    pub components: usize,
    pub impacted_clusters: usize,
    pub stars: usize,
    pub non_stars: usize,
    /// Owners of the impacted target clusters.
    pub impacted_entities: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundTruth {
    pub airdrop_chain: ChainId,
    pub source_chains: Vec<ChainId>,
    pub snapshot_heights: BTreeMap<ChainId, u64>,
    /// `[start, end)` timestamps of the grant era.
    pub grant_era: (i64, i64),
    pub entities: Vec<EntityTruth>,
    /// Every cluster with two or more addresses, per chain, members sorted.
    /// Addresses not listed are singletons.
    pub clusters: BTreeMap<ChainId, Vec<Vec<AddressKey>>>,
    /// Impact of the airdrop chain on each source chain.
    pub expected: Vec<ExpectedImpact>,
}

impl GroundTruth {
    pub fn owner_map(&self, chain: &ChainId) -> HashMap<&str, u32> {
        let mut m = HashMap::new();
        for e in &self.entities {
            if let Some(addrs) = e.addresses.get(chain) {
                for a in addrs {
                    m.insert(a.as_str(), e.id);
                }
            }
        }
        m
    }
}

/// Derives the impact of `source`'s clustering on `target` from the ground
/// truth alone.
pub fn expected_impact(gt: &GroundTruth, source: &ChainId, target: &ChainId) -> ExpectedImpact {
    let owners = gt.owner_map(target);
    let empty = Vec::new();
    let target_clusters = gt.clusters.get(target).unwrap_or(&empty);
    let source_clusters = gt.clusters.get(source).unwrap_or(&empty);

    // Target cluster id: index of a listed cluster, or a fresh id per singleton.
    let mut target_id: HashMap<&str, usize> = HashMap::new();
    for (i, cl) in target_clusters.iter().enumerate() {
        for a in cl {
            target_id.insert(a.as_str(), i);
        }
    }
    let mut next = target_clusters.len();
    let mut cluster_owner: BTreeMap<usize, u32> = BTreeMap::new();
    let mut singles: Vec<&str> = owners.keys().copied().collect();
    singles.sort_unstable();
    for a in singles {
        let id = *target_id.entry(a).or_insert_with(|| {
            next += 1;
            next - 1
        });
        cluster_owner.insert(id, owners[a]);
    }

    // Seeds: source clusters touching two or more target clusters.
    let mut seeds: Vec<Vec<usize>> = Vec::new();
    for cl in source_clusters {
        let mut touched: Vec<usize> = cl
            .iter()
            .filter_map(|a| target_id.get(a.as_str()).copied())
            .collect();
        touched.sort_unstable();
        touched.dedup();
        if touched.len() >= 2 {
            seeds.push(touched);
        }
    }

    // Components of the bipartite seed/target-cluster graph by flood fill.
    let mut seeds_of: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (s, touched) in seeds.iter().enumerate() {
        for &t in touched {
            seeds_of.entry(t).or_default().push(s);
        }
    }
    let mut seed_done = vec![false; seeds.len()];
    let mut components = 0;
    let mut stars = 0;
    for start in 0..seeds.len() {
        if seed_done[start] {
            continue;
        }
        components += 1;
        let mut n_seeds = 0;
        let mut queue = vec![start];
        seed_done[start] = true;
        while let Some(s) = queue.pop() {
            n_seeds += 1;
            for t in &seeds[s] {
                for &s2 in &seeds_of[t] {
                    if !seed_done[s2] {
                        seed_done[s2] = true;
                        queue.push(s2);
                    }
                }
            }
        }
        if n_seeds == 1 {
            stars += 1;
        }
    }
    let mut impacted_entities: Vec<u32> = seeds_of.keys().map(|t| cluster_owner[t]).collect();
    impacted_entities.sort_unstable();
    impacted_entities.dedup();

    ExpectedImpact {
        source: source.clone(),
        target: target.clone(),
        components,
        impacted_clusters: seeds_of.len(),
        stars,
        non_stars: components - stars,
        impacted_entities,
    }
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Unique opaque labels. The mixer is a bijection on `u64`, so distinct
/// counters never collide.
struct Labels {
    salt: u64,
    next: u64,
}

impl Labels {
    fn next(&mut self) -> String {
        let v = mix64(self.salt ^ self.next);
        self.next += 1;
        format!("{v:016x}")
    }

    fn address(&mut self) -> AddressKey {
        AddressKey::new(&self.next()).expect("non-empty")
    }
}

struct Wallet {
    owner: u32,
    addresses: Vec<AddressKey>,
    utxos: Vec<(AddressKey, u64)>,
}

struct ChainSim<'a> {
    rng: &'a mut ChaCha8Rng,
    labels: &'a mut Labels,
    reuse: f64,
    wallets: Vec<Wallet>,
    by_owner: BTreeMap<u32, Vec<usize>>,
    spendable: Vec<usize>,
    spendable_pos: Vec<usize>,
    txs: Vec<(Vec<AddressKey>, Vec<OutputRecord>)>,
}

const NOT_SPENDABLE: usize = usize::MAX;

impl ChainSim<'_> {
    fn add_wallet(&mut self, owner: u32, addresses: Vec<AddressKey>) -> usize {
        let w = self.wallets.len();
        self.wallets.push(Wallet {
            owner,
            addresses,
            utxos: Vec::new(),
        });
        self.spendable_pos.push(NOT_SPENDABLE);
        self.by_owner.entry(owner).or_default().push(w);
        w
    }

    fn credit(&mut self, w: usize, address: AddressKey, value: u64) {
        self.wallets[w].utxos.push((address, value));
        if self.spendable_pos[w] == NOT_SPENDABLE {
            self.spendable_pos[w] = self.spendable.len();
            self.spendable.push(w);
        }
    }

    fn drained(&mut self, w: usize) {
        if !self.wallets[w].utxos.is_empty() {
            return;
        }
        let pos = self.spendable_pos[w];
        self.spendable.swap_remove(pos);
        if let Some(&moved) = self.spendable.get(pos) {
            self.spendable_pos[moved] = pos;
        }
        self.spendable_pos[w] = NOT_SPENDABLE;
    }

    /// Pays `value` to `owner`: an existing address with probability `reuse`,
    /// otherwise a fresh single-address wallet. `prefer` restricts reuse to
    /// one wallet.
    fn pay_to(&mut self, owner: u32, value: u64, prefer: Option<usize>) -> AddressKey {
        if self.rng.gen_bool(self.reuse) {
            let w = match prefer {
                Some(w) => Some(w),
                None => self.by_owner.get(&owner).and_then(|ws| ws.choose(self.rng).copied()),
            };
            if let Some(w) = w {
                let a = self.wallets[w]
                    .addresses
                    .choose(self.rng)
                    .expect("wallets are non-empty")
                    .clone();
                self.credit(w, a.clone(), value);
                return a;
            }
        }
        let a = self.labels.address();
        let w = self.add_wallet(owner, vec![a.clone()]);
        self.credit(w, a.clone(), value);
        a
    }

    fn fund(&mut self, core: &[usize]) {
        let mut targets: Vec<(usize, AddressKey)> = core
            .iter()
            .flat_map(|&w| self.wallets[w].addresses.iter().map(move |a| (w, a.clone())))
            .collect();
        targets.shuffle(self.rng);
        let mut rest = &targets[..];
        while !rest.is_empty() {
            let k = self.rng.gen_range(1..=4).min(rest.len());
            let (chunk, tail) = rest.split_at(k);
            rest = tail;
            let mut outputs = Vec::with_capacity(k);
            for (w, a) in chunk {
                let v = self.rng.gen_range(100_000..=100_000_000u64);
                self.credit(*w, a.clone(), v);
                outputs.push(OutputRecord::to(a.clone(), v));
            }
            self.txs.push((Vec::new(), outputs));
        }
    }

    fn consolidate(&mut self, w: usize) {
        let utxos = core::mem::take(&mut self.wallets[w].utxos);
        let inputs: Vec<AddressKey> = utxos.iter().map(|(a, _)| a.clone()).collect();
        let total: u64 = utxos.iter().map(|(_, v)| v).sum();
        self.drained(w);
        let owner = self.wallets[w].owner;
        let to = self.pay_to(owner, total, Some(w));
        self.txs.push((inputs, vec![OutputRecord::to(to, total)]));
    }

    fn payment(&mut self, recipients: &[u32]) {
        if self.spendable.is_empty() {
            return;
        }
        let w = *self.spendable.choose(self.rng).expect("non-empty");
        let owner = self.wallets[w].owner;
        let max_inputs = if self.wallets[w].addresses.len() > 1 { 3 } else { 2 };
        let k = self.rng.gen_range(1..=max_inputs).min(self.wallets[w].utxos.len());
        let mut inputs = Vec::with_capacity(k);
        let mut total = 0u64;
        for _ in 0..k {
            let i = self.rng.gen_range(0..self.wallets[w].utxos.len());
            let (a, v) = self.wallets[w].utxos.swap_remove(i);
            inputs.push(a);
            total += v;
        }
        self.drained(w);

        // `recipients` is sorted and contains `owner`; skip over it
        let payee = if recipients.len() < 2 {
            owner
        } else {
            let i = self.rng.gen_range(0..recipients.len() - 1);
            let own = recipients.binary_search(&owner).unwrap_or(recipients.len());
            recipients[if i >= own { i + 1 } else { i }]
        };
        let amount = if total >= 2 {
            self.rng.gen_range(1..total)
        } else {
            total
        };
        let mut outputs = Vec::with_capacity(2);
        let to = self.pay_to(payee, amount, None);
        outputs.push(OutputRecord::to(to, amount));
        let change = total - amount;
        if change > 0 {
            let to = self.pay_to(owner, change, Some(w));
            outputs.push(OutputRecord::to(to, change));
        }
        self.txs.push((inputs, outputs));
    }

    /// Addresses with a non-dust balance, with their owners.
    fn holders(&self, dust: u64) -> BTreeMap<AddressKey, u32> {
        let mut balance: BTreeMap<&AddressKey, (u64, u32)> = BTreeMap::new();
        for w in &self.wallets {
            for (a, v) in &w.utxos {
                let e = balance.entry(a).or_insert((0, w.owner));
                e.0 += v;
            }
        }
        balance
            .into_iter()
            .filter(|(_, (v, _))| *v >= dust.max(1))
            .map(|(a, (_, o))| (a.clone(), o))
            .collect()
    }
}

type TxDraft = (Vec<AddressKey>, Vec<OutputRecord>);

/// Spreads drafts evenly over `[start, end)` and appends them to `builder`.
fn place(
    builder: &mut SnapshotBuilder,
    labels: &mut Labels,
    drafts: Vec<TxDraft>,
    start: i64,
    end: i64,
    chain_genesis: i64,
    interval: u64,
) -> Result<(), SynthError> {
    let n = drafts.len() as i64;
    for (i, (inputs, outputs)) in drafts.into_iter().enumerate() {
        let t = start + (end - start) * i as i64 / n.max(1);
        builder.push(RawTx {
            tx_id: labels.next(),
            height: ((t - chain_genesis) as u64) / interval,
            timestamp: t,
            inputs,
            outputs,
        })?;
    }
    Ok(())
}

/// Generates the existing chains, the airdrop chain (last) and the ground
/// truth for `scenario`.
pub fn generate(scenario: &Scenario) -> Result<(Vec<ChainSnapshot>, GroundTruth), SynthError> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut labels = Labels {
        salt: rng.gen(),
        next: 0,
    };
    let n = scenario.n_entities as u32;
    let n_total = n + scenario.key_buyers as u32;
    let behaviors: Vec<Behavior> = (0..n)
        .map(|_| scenario.claims.draw(&mut rng))
        .chain((0..scenario.key_buyers).map(|_| Behavior::KeyBuyer))
        .collect();
    let mut owned: Vec<BTreeMap<ChainId, Vec<AddressKey>>> = vec![BTreeMap::new(); n_total as usize];

    // Core wallets for every chain, decided up front so keys can be reused
    // across chains.
    let mut core_wallets: Vec<Vec<(u32, Vec<AddressKey>)>> = Vec::new();
    let mut earlier_keys: Vec<Vec<AddressKey>> = vec![Vec::new(); n as usize];
    for params in &scenario.chains {
        let mut wallets = Vec::new();
        let mut added: Vec<Vec<AddressKey>> = vec![Vec::new(); n as usize];
        for e in 0..n {
            if !rng.gen_bool(params.presence) {
                continue;
            }
            let mut pool = earlier_keys[e as usize].clone();
            for _ in 0..rng.gen_range(1..=scenario.max_wallets) {
                let size = rng.gen_range(1..=scenario.max_wallet_size);
                let mut addresses = Vec::with_capacity(size);
                for _ in 0..size {
                    let a = if !pool.is_empty() && rng.gen_bool(scenario.key_reuse) {
                        pool.swap_remove(rng.gen_range(0..pool.len()))
                    } else {
                        labels.address()
                    };
                    added[e as usize].push(a.clone());
                    addresses.push(a);
                }
                wallets.push((e, addresses));
            }
        }
        for (e, keys) in added.into_iter().enumerate() {
            for k in keys {
                if !earlier_keys[e].contains(&k) {
                    earlier_keys[e].push(k);
                }
            }
        }
        core_wallets.push(wallets);
    }

    let mut snapshots = Vec::new();
    let mut holders: BTreeMap<AddressKey, u32> = BTreeMap::new();
    let mut clusters: BTreeMap<ChainId, Vec<Vec<AddressKey>>> = BTreeMap::new();
    let mut snapshot_heights = BTreeMap::new();
    let genesis = scenario.genesis_time;
    let airdrop = &scenario.airdrop;
    let snap_time = |p: &ChainParams| genesis + ((p.snapshot_height + 1) * p.block_interval) as i64;
    let airdrop_genesis = scenario.chains.iter().map(snap_time).max().unwrap_or(genesis)
        + airdrop.delay_secs as i64;
    let grant_end = airdrop_genesis + airdrop.grant_era_secs as i64;
    let end = grant_end + airdrop.claim_era_secs as i64;

    for (params, wallets) in scenario.chains.iter().zip(core_wallets) {
        let mut sim = ChainSim {
            rng: &mut rng,
            labels: &mut labels,
            reuse: scenario.address_reuse,
            wallets: Vec::new(),
            by_owner: BTreeMap::new(),
            spendable: Vec::new(),
            spendable_pos: Vec::new(),
            txs: Vec::new(),
        };
        let mut multi = Vec::new();
        let core: Vec<usize> = wallets
            .into_iter()
            .map(|(owner, addresses)| {
                if addresses.len() > 1 {
                    let mut sorted = addresses.clone();
                    sorted.sort();
                    multi.push(sorted);
                }
                sim.add_wallet(owner, addresses)
            })
            .collect();
        let present: Vec<u32> = sim.by_owner.keys().copied().collect();

        sim.fund(&core);
        let mut to_consolidate: Vec<usize> = core
            .iter()
            .copied()
            .filter(|&w| sim.wallets[w].addresses.len() > 1)
            .collect();
        to_consolidate.shuffle(sim.rng);
        for w in to_consolidate {
            sim.consolidate(w);
        }
        let n_before = (params.payments_before * core.len() as f64) as usize;
        for _ in 0..n_before {
            sim.payment(&present);
        }
        let before = core::mem::take(&mut sim.txs);
        for (a, owner) in sim.holders(airdrop.dust_threshold) {
            holders.insert(a, owner);
        }
        let n_after = (params.payments_after * core.len() as f64) as usize;
        for _ in 0..n_after {
            sim.payment(&present);
        }
        let after = core::mem::take(&mut sim.txs);
        for w in &sim.wallets {
            owned[w.owner as usize]
                .entry(params.id.clone())
                .or_default()
                .extend(w.addresses.iter().cloned());
        }
        drop(sim);

        let mut builder = SnapshotBuilder::new(params.id.clone());
        let cut = snap_time(params);
        place(&mut builder, &mut labels, before, genesis, cut, genesis, params.block_interval)?;
        place(&mut builder, &mut labels, after, cut, end, genesis, params.block_interval)?;
        snapshots.push(builder.finish().0);
        clusters.insert(params.id.clone(), multi);
        snapshot_heights.insert(params.id.clone(), params.snapshot_height);
    }

    // Grants: one output per holder address.
    let mut grants: Vec<(AddressKey, u32)> = holders.into_iter().collect();
    grants.shuffle(&mut rng);
    let grant_txs: Vec<TxDraft> = grants
        .chunks(airdrop.grants_per_tx)
        .map(|chunk| {
            let outputs = chunk
                .iter()
                .map(|(a, _)| OutputRecord::to(a.clone(), airdrop.grant_value))
                .collect();
            (Vec::new(), outputs)
        })
        .collect();
    let mut by_owner: BTreeMap<u32, Vec<AddressKey>> = BTreeMap::new();
    for (a, owner) in &grants {
        by_owner.entry(*owner).or_default().push(a.clone());
        owned[*owner as usize]
            .entry(airdrop.chain.clone())
            .or_default()
            .push(a.clone());
    }

    // Claims.
    let mut claim_sets: Vec<(u32, Vec<AddressKey>, bool)> = Vec::new();
    let mut bought: BTreeMap<u32, Vec<AddressKey>> = BTreeMap::new();
    for (owner, mut keys) in by_owner {
        keys.shuffle(&mut rng);
        match behaviors[owner as usize] {
            Behavior::SweepAll => claim_sets.push((owner, keys, true)),
            Behavior::PerAddressClaim => claim_sets.push((owner, keys, false)),
            Behavior::NoClaim | Behavior::KeyBuyer => {}
            Behavior::KeySale => {
                let sold = if keys.len() == 1 {
                    1
                } else {
                    rng.gen_range(1..keys.len())
                };
                let buyer = n + rng.gen_range(0..scenario.key_buyers as u32);
                let kept = keys.split_off(sold);
                bought.entry(buyer).or_default().extend(keys);
                if !kept.is_empty() {
                    claim_sets.push((owner, kept, true));
                }
            }
        }
    }
    for (buyer, mut keys) in bought {
        keys.shuffle(&mut rng);
        claim_sets.push((buyer, keys, true));
    }
    let mut claim_txs: Vec<TxDraft> = Vec::new();
    let mut sweeps: Vec<Vec<AddressKey>> = Vec::new();
    let grant = airdrop.grant_value;
    for (claimant, keys, sweep) in claim_sets {
        let groups: Vec<Vec<AddressKey>> = if sweep {
            vec![keys]
        } else {
            keys.into_iter().map(|k| vec![k]).collect()
        };
        for inputs in groups {
            let dest = labels.address();
            owned[claimant as usize]
                .entry(airdrop.chain.clone())
                .or_default()
                .push(dest.clone());
            let value = grant * inputs.len() as u64;
            if inputs.len() > 1 {
                let mut sorted = inputs.clone();
                sorted.sort();
                sweeps.push(sorted);
            }
            claim_txs.push((inputs, vec![OutputRecord::to(dest, value)]));
        }
    }
    claim_txs.shuffle(&mut rng);
    sweeps.sort();

    let mut builder = SnapshotBuilder::new(airdrop.chain.clone());
    place(
        &mut builder,
        &mut labels,
        grant_txs,
        airdrop_genesis,
        grant_end,
        airdrop_genesis,
        airdrop.block_interval,
    )?;
    place(
        &mut builder,
        &mut labels,
        claim_txs,
        grant_end,
        end,
        airdrop_genesis,
        airdrop.block_interval,
    )?;
    snapshots.push(builder.finish().0);
    clusters.insert(airdrop.chain.clone(), sweeps);

    let entities = owned
        .into_iter()
        .enumerate()
        .map(|(id, mut addresses)| {
            for list in addresses.values_mut() {
                list.sort();
                list.dedup();
            }
            EntityTruth {
                id: id as u32,
                behavior: behaviors[id],
                addresses,
            }
        })
        .collect();

    let mut gt = GroundTruth {
        airdrop_chain: airdrop.chain.clone(),
        source_chains: scenario.chains.iter().map(|c| c.id.clone()).collect(),
        snapshot_heights,
        grant_era: (airdrop_genesis, grant_end),
        entities,
        clusters,
        expected: Vec::new(),
    };
    gt.expected = gt
        .source_chains
        .iter()
        .map(|t| expected_impact(&gt, &gt.airdrop_chain, t))
        .collect();
    Ok((snapshots, gt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::chain_id;

    fn tiny() -> Scenario {
        Scenario {
            n_entities: 20,
            ..Scenario::default()
        }
    }

    #[test]
    fn same_seed_same_output() {
        let (a, ga) = generate(&tiny()).unwrap();
        let (b, gb) = generate(&tiny()).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
        let mut other = tiny();
        other.seed = 2;
        assert_ne!(generate(&other).unwrap().0, a);
    }

    #[test]
    fn validation_errors() {
        let mut s = tiny();
        s.claims.sweep_all = 0.9;
        assert!(matches!(s.validate(), Err(SynthError::ClaimProbabilities(_))));
        let mut s = tiny();
        s.address_reuse = 1.5;
        assert!(matches!(s.validate(), Err(SynthError::Probability { .. })));
        let mut s = tiny();
        s.key_buyers = 0;
        assert!(matches!(s.validate(), Err(SynthError::Invalid(_))));
        let mut s = tiny();
        s.airdrop.chain = chain_id("btc");
        assert!(matches!(s.validate(), Err(SynthError::DuplicateChain(_))));
    }

    #[test]
    fn airdrop_chain_is_last_and_heights_respect_snapshot() {
        let s = tiny();
        let (snaps, gt) = generate(&s).unwrap();
        assert_eq!(snaps.len(), 4);
        assert_eq!(snaps[3].chain(), &gt.airdrop_chain);
        for (snap, params) in snaps.iter().zip(&s.chains) {
            let cut = s.genesis_time + ((params.snapshot_height + 1) * params.block_interval) as i64;
            for tx in snap.txs() {
                assert_eq!(tx.timestamp < cut, tx.height <= params.snapshot_height);
            }
        }
    }

    #[test]
    fn expected_impact_single_entity() {
        // one entity, two unlinked target wallets, swept together on the source
        let gt = GroundTruth {
            airdrop_chain: chain_id("s"),
            source_chains: vec![chain_id("t")],
            snapshot_heights: BTreeMap::new(),
            grant_era: (0, 0),
            entities: vec![EntityTruth {
                id: 0,
                behavior: Behavior::SweepAll,
                addresses: [
                    (chain_id("t"), vec![crate::chain::addr("a"), crate::chain::addr("b")]),
                    (chain_id("s"), vec![crate::chain::addr("a"), crate::chain::addr("b")]),
                ]
                .into_iter()
                .collect(),
            }],
            clusters: [(chain_id("s"), vec![vec![crate::chain::addr("a"), crate::chain::addr("b")]])]
                .into_iter()
                .collect(),
            expected: Vec::new(),
        };
        let e = expected_impact(&gt, &chain_id("s"), &chain_id("t"));
        assert_eq!((e.components, e.impacted_clusters, e.stars), (1, 2, 1));
        assert_eq!(e.impacted_entities, vec![0]);

        let mut per_address = gt.clone();
        per_address.clusters.clear();
        let e = expected_impact(&per_address, &chain_id("s"), &chain_id("t"));
        assert_eq!((e.components, e.impacted_clusters), (0, 0));
    }
}
