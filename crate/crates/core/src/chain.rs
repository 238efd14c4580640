//! Chains, transactions and per-chain summary statistics.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::borrow::Borrow;
use core::fmt;

use hashbrown::{HashMap, HashSet};
use thiserror::Error;

macro_rules! string_key {
    ($(#[$meta:meta])* $name:ident, $empty:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(Arc<str>);

        impl $name {
            pub fn new(key: &str) -> Result<Self, ChainError> {
                if key.is_empty() {
                    return Err(ChainError::$empty);
                }
                Ok(Self(Arc::from(key)))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({:?})", stringify!($name), &*self.0)
            }
        }

        #[cfg(feature = "serde")]
        impl serde::Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.0)
            }
        }

        #[cfg(feature = "serde")]
        impl<'de> serde::Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = <alloc::borrow::Cow<'de, str>>::deserialize(d)?;
                $name::new(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

string_key!(
    /// Short symbolic chain identifier such as `btc` or `clam`.
    ChainId,
    EmptyChainId
);

string_key!(
    /// Opaque address identity. Equal keys on different chains are the same
    /// key material.
    AddressKey,
    EmptyAddress
);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("chain id must not be empty")]
    EmptyChainId,
    #[error("address key must not be empty")]
    EmptyAddress,
    #[error("transaction {ordinal} ({tx_id}) has no outputs")]
    EmptyOutputs { ordinal: u64, tx_id: String },
    #[error("transaction {ordinal} reuses tx id {tx_id}")]
    DuplicateTxId { ordinal: u64, tx_id: String },
    #[error("transaction {ordinal} ({tx_id}) has height {height} below previous height {previous}")]
    HeightDecreased {
        ordinal: u64,
        tx_id: String,
        height: u64,
        previous: u64,
    },
    #[error("transaction id must not be empty (ordinal {ordinal})")]
    EmptyTxId { ordinal: u64 },
    #[error("chain {0} given more than once")]
    DuplicateChain(ChainId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OutputRecord {
    /// `None` for scripts that carry no address (data carriers and the like).
    pub address: Option<AddressKey>,
    pub value: u64,
}

impl OutputRecord {
    pub fn to(address: AddressKey, value: u64) -> Self {
        Self {
            address: Some(address),
            value,
        }
    }

    pub fn data(value: u64) -> Self {
        Self {
            address: None,
            value,
        }
    }
}

/// A transaction as read from a file, before it is placed in a chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTx {
    pub tx_id: String,
    pub height: u64,
    pub timestamp: i64,
    /// Addresses of the spent outputs; empty for coinbase and coinstake.
    pub inputs: Vec<AddressKey>,
    pub outputs: Vec<OutputRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TxRecord {
    pub chain: ChainId,
    pub height: u64,
    pub timestamp: i64,
    pub tx_id: String,
    /// Zero-based position within the chain's total order.
    pub ordinal: u64,
    pub inputs: Vec<AddressKey>,
    pub outputs: Vec<OutputRecord>,
}

impl TxRecord {
    pub fn output_addresses(&self) -> impl Iterator<Item = &AddressKey> {
        self.outputs.iter().filter_map(|o| o.address.as_ref())
    }

    pub fn to_raw(&self) -> RawTx {
        RawTx {
            tx_id: self.tx_id.clone(),
            height: self.height,
            timestamp: self.timestamp,
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
        }
    }
}

/// Non-fatal findings produced while validating a chain.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ValidationWarning {
    /// An input spends an address that no earlier output paid. Expected for
    /// truncated snapshots.
    InputNeverPaid { ordinal: u64, address: AddressKey },
}

impl fmt::Display for ValidationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationWarning::InputNeverPaid { ordinal, address } => write!(
                f,
                "transaction {ordinal} spends {address}, which no earlier output paid"
            ),
        }
    }
}

/// An immutable, validated chain: transactions in ordinal order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainSnapshot {
    chain: ChainId,
    txs: Vec<TxRecord>,
    pub tip_note: Option<String>,
}

impl ChainSnapshot {
    pub fn chain(&self) -> &ChainId {
        &self.chain
    }

    pub fn txs(&self) -> &[TxRecord] {
        &self.txs
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    /// Builds a snapshot from transactions in chain order, assigning ordinals
    /// by position.
    pub fn from_raw<I>(chain: ChainId, txs: I) -> Result<(Self, Vec<ValidationWarning>), ChainError>
    where
        I: IntoIterator<Item = RawTx>,
    {
        let mut builder = SnapshotBuilder::new(chain);
        for tx in txs {
            builder.push(tx)?;
        }
        Ok(builder.finish())
    }
}

/// Incremental validator used by parsers so that errors can be tied back to
/// the offending line.
#[derive(Debug)]
pub struct SnapshotBuilder {
    chain: ChainId,
    txs: Vec<TxRecord>,
    tx_ids: HashSet<String>,
    paid: HashSet<AddressKey>,
    warnings: Vec<ValidationWarning>,
    tip_note: Option<String>,
}

impl SnapshotBuilder {
    pub fn new(chain: ChainId) -> Self {
        Self {
            chain,
            txs: Vec::new(),
            tx_ids: HashSet::new(),
            paid: HashSet::new(),
            warnings: Vec::new(),
            tip_note: None,
        }
    }

    pub fn with_tip_note(mut self, note: impl Into<String>) -> Self {
        self.tip_note = Some(note.into());
        self
    }

    /// Ordinal the next pushed transaction will receive.
    pub fn next_ordinal(&self) -> u64 {
        self.txs.len() as u64
    }

    pub fn push(&mut self, tx: RawTx) -> Result<(), ChainError> {
        let ordinal = self.next_ordinal();
        if tx.tx_id.is_empty() {
            return Err(ChainError::EmptyTxId { ordinal });
        }
        if tx.outputs.is_empty() {
            return Err(ChainError::EmptyOutputs {
                ordinal,
                tx_id: tx.tx_id,
            });
        }
        if let Some(prev) = self.txs.last() {
            if tx.height < prev.height {
                return Err(ChainError::HeightDecreased {
                    ordinal,
                    tx_id: tx.tx_id,
                    height: tx.height,
                    previous: prev.height,
                });
            }
        }
        if self.tx_ids.contains(tx.tx_id.as_str()) {
            return Err(ChainError::DuplicateTxId {
                ordinal,
                tx_id: tx.tx_id,
            });
        }
        self.tx_ids.insert(tx.tx_id.clone());

        for input in &tx.inputs {
            if !self.paid.contains(input) {
                self.warnings.push(ValidationWarning::InputNeverPaid {
                    ordinal,
                    address: input.clone(),
                });
                // warn once per address
                self.paid.insert(input.clone());
            }
        }
        for out in &tx.outputs {
            if let Some(a) = &out.address {
                if !self.paid.contains(a) {
                    self.paid.insert(a.clone());
                }
            }
        }

        self.txs.push(TxRecord {
            chain: self.chain.clone(),
            height: tx.height,
            timestamp: tx.timestamp,
            tx_id: tx.tx_id,
            ordinal,
            inputs: tx.inputs,
            outputs: tx.outputs,
        });
        Ok(())
    }

    pub fn finish(self) -> (ChainSnapshot, Vec<ValidationWarning>) {
        let tip_note = self
            .tip_note
            .or_else(|| self.txs.last().map(|tx| tx.tx_id.clone()));
        (
            ChainSnapshot {
                chain: self.chain,
                txs: self.txs,
                tip_note,
            },
            self.warnings,
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChainStats {
    pub n_txs: u64,
    pub n_outputs: u64,
    /// Distinct addresses that appear in at least one output.
    pub n_addresses: u64,
}

pub fn chain_stats(snapshot: &ChainSnapshot) -> ChainStats {
    let mut addresses: HashSet<&str> = HashSet::new();
    let mut n_outputs = 0u64;
    for tx in snapshot.txs() {
        n_outputs += tx.outputs.len() as u64;
        for a in tx.output_addresses() {
            addresses.insert(a.as_str());
        }
    }
    ChainStats {
        n_txs: snapshot.len() as u64,
        n_outputs,
        n_addresses: addresses.len() as u64,
    }
}

/// Venn decomposition of output addresses over a set of chains.
///
/// Regions are keyed by a bit mask over `chains`; bit `i` set means the
/// addresses in the region appear on `chains[i]`. Each address is counted in
/// exactly one region: the set of chains it appears on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VennCounts {
    chains: Vec<ChainId>,
    regions: BTreeMap<u64, u64>,
}

impl VennCounts {
    pub fn chains(&self) -> &[ChainId] {
        &self.chains
    }

    fn mask_of<'a, I>(&self, members: I) -> Option<u64>
    where
        I: IntoIterator<Item = &'a ChainId>,
    {
        let mut mask = 0u64;
        for m in members {
            let idx = self.chains.iter().position(|c| c == m)?;
            mask |= 1 << idx;
        }
        Some(mask)
    }

    /// Number of addresses appearing on exactly the given chains.
    pub fn region<'a, I>(&self, members: I) -> u64
    where
        I: IntoIterator<Item = &'a ChainId>,
    {
        self.mask_of(members)
            .and_then(|m| self.regions.get(&m).copied())
            .unwrap_or(0)
    }

    /// All non-empty subsets in mask order, including zero-count regions when
    /// there are at most 16 chains; otherwise only the populated regions.
    pub fn regions(&self) -> Vec<(Vec<ChainId>, u64)> {
        let k = self.chains.len();
        if k <= 16 {
            (1u64..(1 << k))
                .map(|mask| (self.members(mask), self.regions.get(&mask).copied().unwrap_or(0)))
                .collect()
        } else {
            self.regions
                .iter()
                .map(|(&mask, &n)| (self.members(mask), n))
                .collect()
        }
    }

    /// Regions restricted to addresses on `universe`: these partition that
    /// chain's addresses by which other chains share them.
    pub fn within(&self, universe: &ChainId) -> Option<Vec<(Vec<ChainId>, u64)>> {
        let bit = 1u64 << self.chains.iter().position(|c| c == universe)?;
        Some(
            self.regions()
                .into_iter()
                .filter(|(members, _)| {
                    self.mask_of(members.iter())
                        .is_some_and(|mask| mask & bit != 0)
                })
                .collect(),
        )
    }

    /// Sum over all regions that contain `chain`.
    pub fn total_for(&self, chain: &ChainId) -> u64 {
        let Some(idx) = self.chains.iter().position(|c| c == chain) else {
            return 0;
        };
        self.regions
            .iter()
            .filter(|(mask, _)| *mask & (1 << idx) != 0)
            .map(|(_, n)| n)
            .sum()
    }

    fn members(&self, mask: u64) -> Vec<ChainId> {
        self.chains
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, c)| c.clone())
            .collect()
    }
}

/// Counts output addresses by the exact set of chains they appear on.
///
/// Supports up to 64 chains.
pub fn shared_address_counts(snapshots: &[&ChainSnapshot]) -> Result<VennCounts, ChainError> {
    let mut chains: Vec<ChainId> = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        if chains.contains(s.chain()) {
            return Err(ChainError::DuplicateChain(s.chain().clone()));
        }
        chains.push(s.chain().clone());
    }
    assert!(chains.len() <= 64, "at most 64 chains");

    let mut masks: HashMap<&str, u64> = HashMap::new();
    for (i, s) in snapshots.iter().enumerate() {
        for tx in s.txs() {
            for a in tx.output_addresses() {
                *masks.entry(a.as_str()).or_insert(0) |= 1 << i;
            }
        }
    }
    let mut regions = BTreeMap::new();
    for mask in masks.into_values() {
        *regions.entry(mask).or_insert(0) += 1;
    }
    Ok(VennCounts { chains, regions })
}

/// Convenience for tests and fixtures: `ChainId::new` that panics.
pub fn chain_id(id: &str) -> ChainId {
    ChainId::new(id).expect("non-empty chain id")
}

/// Convenience for tests and fixtures: `AddressKey::new` that panics.
pub fn addr(key: &str) -> AddressKey {
    AddressKey::new(key).expect("non-empty address")
}
