#![no_std]

//! Cross-chain address clustering.
//!
//! The crate clusters the addresses of UTXO-style chains with the multi-input
//! heuristic, measures how much each transaction leaks (address and cluster
//! novelty), and links clusterings of different chains through the addresses
//! they share. The analyses are aimed at holder airdrops, where recipients on
//! a new chain reuse keys from existing chains to claim their grant.
//!
//! Everything here is pure computation over in-memory data and only needs
//! `alloc`. Parsing, file formats and the command line live in the `xclust`
//! crate.
//!
//! # Features
//! - `serde`: `Serialize`/`Deserialize` for the domain and report types.

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod chain;
pub mod clustering;
pub mod combination;
pub mod crosschain;
pub mod novelty;
pub mod synthgen;
mod union_find;

pub use crate::chain::{
    chain_stats, shared_address_counts, AddressKey, ChainError, ChainId, ChainSnapshot,
    ChainStats, OutputRecord, RawTx, SnapshotBuilder, TxRecord, ValidationWarning, VennCounts,
};
pub use crate::clustering::{
    cluster_stream, partition_stats, size_histogram, ClusterBuilder, ClusterError, Partition,
    PartitionStats, SizeHistogram, DEFAULT_BIN_EDGES,
};
pub use crate::combination::{
    cluster_diff, combine, improvement_hasse, is_improvement, ClusterDiff, CombinationError,
    CombinationOrdering, HasseDiagram, ImprovementEdge,
};
pub use crate::crosschain::{
    build_cocluster_graph, classify_star, connected_components, impact_report, impacted_subgraph,
    CoClusterGraph, Component, CrossChainError, ImpactReport, StarClass,
};
pub use crate::novelty::{address_novelty, cluster_novelty, sma, NoveltyKind, NoveltySeries};
pub use crate::synthgen::{expected_impact, generate, GroundTruth, Scenario, SynthError};
