//! Multi-input heuristic clustering.
//!
//! Every address spent together as an input of one transaction is assumed to
//! belong to one entity. A [`ClusterBuilder`] folds transactions into a
//! union-find structure; [`ClusterBuilder::finish`] freezes it into a
//! [`Partition`] whose cluster identities do not depend on the order in which
//! transactions were seen.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use thiserror::Error;

use crate::chain::{AddressKey, TxRecord};
use crate::union_find::UnionFind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error("address {0} is not in the partition")]
    UnknownAddress(String),
    #[error("histogram edges must start at 1 and be strictly increasing")]
    InvalidBinEdges,
    #[error("address {0} appears in more than one cluster")]
    DuplicateAddress(String),
    #[error("clusters must not be empty")]
    EmptyCluster,
    #[error("address keys must not be empty")]
    EmptyAddress,
}

/// Decade size bins: [1,1], [2,10], [11,100], [101,1000], [1001,10^4], [10^4+1,inf).
pub const DEFAULT_BIN_EDGES: [u64; 6] = [1, 2, 11, 101, 1_001, 10_001];

/// A union caused by a transaction: it joined the clusters holding `left`
/// and `right` for the first time.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Merge {
    #[cfg_attr(feature = "serde", serde(with = "arc_str"))]
    pub tx_id: Arc<str>,
    pub left: AddressKey,
    pub right: AddressKey,
}

#[cfg(feature = "serde")]
mod arc_str {
    use alloc::borrow::Cow;
    use alloc::sync::Arc;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Arc<str>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Arc<str>, D::Error> {
        Ok(Arc::from(&*Cow::<str>::deserialize(d)?))
    }
}

/// What absorbing one transaction did to the clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxEffect {
    /// Distinct addresses among the inputs.
    pub distinct_inputs: usize,
    /// Distinct clusters those inputs belonged to just before the transaction.
    pub spanned_clusters: usize,
    /// Whether every spanned cluster had exactly one address.
    pub all_spanned_trivial: bool,
}

impl TxEffect {
    pub fn merged(&self) -> bool {
        self.spanned_clusters >= 2
    }
}

/// Mutable clustering state. Confined to one thread while transactions are
/// being absorbed.
#[derive(Debug, Default)]
pub struct ClusterBuilder {
    index: HashMap<AddressKey, u32>,
    keys: Vec<AddressKey>,
    uf: UnionFind,
    merges: Vec<(Arc<str>, u32, u32)>,
    scratch: Vec<u32>,
    roots: Vec<u32>,
}

impl ClusterBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Adds `address` as a singleton if it is new.
    pub fn insert(&mut self, address: &AddressKey) -> u32 {
        if let Some(&id) = self.index.get(address) {
            return id;
        }
        let id = self.uf.push();
        self.index.insert(address.clone(), id);
        self.keys.push(address.clone());
        id
    }

    /// Current size of the cluster holding `address`.
    pub fn cluster_size(&mut self, address: &str) -> Option<usize> {
        let id = *self.index.get(address)?;
        Some(self.uf.set_size(id) as usize)
    }

    /// Unites all input addresses of `tx` and registers its output addresses.
    pub fn absorb(&mut self, tx: &TxRecord) -> TxEffect {
        let mut ids = core::mem::take(&mut self.scratch);
        ids.clear();
        for a in &tx.inputs {
            let id = self.insert(a);
            ids.push(id);
        }
        ids.sort_unstable();
        ids.dedup();

        let mut roots = core::mem::take(&mut self.roots);
        roots.clear();
        roots.extend(ids.iter().map(|&id| self.uf.find(id)));
        roots.sort_unstable();
        roots.dedup();
        let all_trivial = roots.iter().all(|&r| self.uf.set_size(r) == 1);
        let effect = TxEffect {
            distinct_inputs: ids.len(),
            spanned_clusters: roots.len(),
            all_spanned_trivial: all_trivial,
        };

        if roots.len() >= 2 {
            let tx_id: Arc<str> = Arc::from(tx.tx_id.as_str());
            // The first input in transaction order anchors the union.
            let anchor = self.index[&tx.inputs[0]];
            for a in &tx.inputs[1..] {
                let id = self.index[a];
                if self.uf.union(anchor, id).is_some() {
                    self.merges.push((tx_id.clone(), anchor, id));
                }
            }
        }

        for a in tx.output_addresses() {
            self.insert(a);
        }
        self.scratch = ids;
        self.roots = roots;
        effect
    }

    fn union_keys(&mut self, a: u32, b: u32) {
        self.uf.union(a, b);
    }

    /// Freezes the clustering.
    ///
    /// Addresses are sorted, clusters are numbered by their smallest member,
    /// and that member is the cluster's representative.
    pub fn finish(mut self) -> Partition {
        let n = self.keys.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_unstable_by(|&a, &b| self.keys[a as usize].cmp(&self.keys[b as usize]));
        let mut position = vec![0u32; n];
        for (pos, &id) in order.iter().enumerate() {
            position[id as usize] = pos as u32;
        }

        const UNSET: u32 = u32::MAX;
        let mut cluster_of_root = vec![UNSET; n];
        let mut cluster_of = Vec::with_capacity(n);
        let mut sizes: Vec<u32> = Vec::new();
        for &id in &order {
            let root = self.uf.find(id) as usize;
            if cluster_of_root[root] == UNSET {
                cluster_of_root[root] = sizes.len() as u32;
                sizes.push(0);
            }
            let c = cluster_of_root[root];
            sizes[c as usize] += 1;
            cluster_of.push(c);
        }

        let offsets = prefix_offsets(&sizes);
        let mut fill = offsets.clone();
        let mut members = vec![0u32; n];
        for (pos, &c) in cluster_of.iter().enumerate() {
            members[fill[c as usize] as usize] = pos as u32;
            fill[c as usize] += 1;
        }

        let keys: Vec<AddressKey> = order.iter().map(|&id| self.keys[id as usize].clone()).collect();
        let mut lookup = self.index;
        for v in lookup.values_mut() {
            *v = position[*v as usize];
        }

        let mut merges: Vec<(u32, Merge)> = self
            .merges
            .into_iter()
            .map(|(tx_id, a, b)| {
                let c = cluster_of[position[a as usize] as usize];
                let m = Merge {
                    tx_id,
                    left: keys[position[a as usize] as usize].clone(),
                    right: keys[position[b as usize] as usize].clone(),
                };
                (c, m)
            })
            .collect();
        // stable: keeps chronological order inside a cluster
        merges.sort_by_key(|(c, _)| *c);
        let mut merge_counts = vec![0u32; sizes.len()];
        for (c, _) in &merges {
            merge_counts[*c as usize] += 1;
        }
        let merge_offsets = prefix_offsets(&merge_counts);

        Partition {
            keys,
            lookup,
            cluster_of,
            offsets,
            members,
            merges: merges.into_iter().map(|(_, m)| m).collect(),
            merge_offsets,
        }
    }
}

fn prefix_offsets(counts: &[u32]) -> Vec<u32> {
    let mut offsets = Vec::with_capacity(counts.len() + 1);
    let mut acc = 0u32;
    offsets.push(0);
    for &c in counts {
        acc += c;
        offsets.push(acc);
    }
    offsets
}

/// A frozen clustering of a set of addresses into disjoint clusters.
///
/// Immutable and safe to share between threads.
#[derive(Debug, Clone)]
pub struct Partition {
    keys: Vec<AddressKey>,
    lookup: HashMap<AddressKey, u32>,
    cluster_of: Vec<u32>,
    offsets: Vec<u32>,
    members: Vec<u32>,
    merges: Vec<Merge>,
    merge_offsets: Vec<u32>,
}

impl PartialEq for Partition {
    /// Same universe and same equivalence classes. Provenance is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.keys == other.keys && self.cluster_of == other.cluster_of
    }
}

impl Eq for Partition {}

impl Default for Partition {
    fn default() -> Self {
        ClusterBuilder::new().finish()
    }
}

impl Partition {
    /// Builds a partition from explicit clusters.
    pub fn from_clusters<I, C, S>(clusters: I) -> Result<Self, ClusterError>
    where
        I: IntoIterator<Item = C>,
        C: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut b = ClusterBuilder::new();
        for cluster in clusters {
            let mut first = None;
            for s in cluster {
                let key = AddressKey::new(s.as_ref())
                    .map_err(|_| ClusterError::EmptyAddress)?;
                if b.index.contains_key(&key) {
                    return Err(ClusterError::DuplicateAddress(key.as_str().into()));
                }
                let id = b.insert(&key);
                match first {
                    None => first = Some(id),
                    Some(f) => b.union_keys(f, id),
                }
            }
            if first.is_none() {
                return Err(ClusterError::EmptyCluster);
            }
        }
        Ok(b.finish())
    }

    /// Size of the universe.
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.offsets.len() - 1
    }

    /// All addresses, sorted.
    pub fn addresses(&self) -> &[AddressKey] {
        &self.keys
    }

    pub fn contains(&self, address: &str) -> bool {
        self.lookup.contains_key(address)
    }

    /// Position of `address` in [`Partition::addresses`].
    pub fn position(&self, address: &str) -> Option<usize> {
        self.lookup.get(address).map(|&p| p as usize)
    }

    /// Index of the cluster holding `address`.
    pub fn cluster_index(&self, address: &str) -> Option<usize> {
        self.position(address).map(|p| self.cluster_of[p] as usize)
    }

    pub fn cluster_index_at(&self, position: usize) -> usize {
        self.cluster_of[position] as usize
    }

    /// Canonical representative (smallest member) of the cluster holding
    /// `address`.
    pub fn find(&self, address: &str) -> Result<&AddressKey, ClusterError> {
        let c = self
            .cluster_index(address)
            .ok_or_else(|| ClusterError::UnknownAddress(address.into()))?;
        Ok(self.cluster(c).rep())
    }

    pub fn cluster(&self, index: usize) -> Cluster<'_> {
        assert!(index < self.n_clusters(), "cluster index out of range");
        Cluster {
            partition: self,
            index,
        }
    }

    /// Every cluster once, ordered by representative.
    pub fn clusters(&self) -> impl ExactSizeIterator<Item = Cluster<'_>> + '_ {
        (0..self.n_clusters()).map(move |index| Cluster {
            partition: self,
            index,
        })
    }

    /// All recorded unions, grouped by cluster.
    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Unions that built cluster `index`, in the order they happened.
    pub fn merges_in(&self, index: usize) -> &[Merge] {
        let lo = self.merge_offsets[index] as usize;
        let hi = self.merge_offsets[index + 1] as usize;
        &self.merges[lo..hi]
    }
}

#[derive(Clone, Copy)]
pub struct Cluster<'a> {
    partition: &'a Partition,
    index: usize,
}

impl<'a> Cluster<'a> {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn rep(&self) -> &'a AddressKey {
        &self.partition.keys[self.positions()[0] as usize]
    }

    pub fn len(&self) -> usize {
        self.positions().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_trivial(&self) -> bool {
        self.len() == 1
    }

    /// Positions of the members in [`Partition::addresses`], ascending.
    pub fn positions(&self) -> &'a [u32] {
        let p = self.partition;
        &p.members[p.offsets[self.index] as usize..p.offsets[self.index + 1] as usize]
    }

    /// Members in lexicographic order.
    pub fn members(&self) -> impl ExactSizeIterator<Item = &'a AddressKey> + 'a {
        let keys = &self.partition.keys;
        self.positions().iter().map(move |&p| &keys[p as usize])
    }
}

impl core::fmt::Debug for Cluster<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_list().entries(self.members()).finish()
    }
}

/// Clusters the addresses of an ordered transaction sequence.
pub fn cluster_stream<'a, I>(txs: I) -> Partition
where
    I: IntoIterator<Item = &'a TxRecord>,
{
    let mut b = ClusterBuilder::new();
    for tx in txs {
        b.absorb(tx);
    }
    b.finish()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartitionStats {
    pub n_clusters: u64,
    /// Clusters with at least two addresses.
    pub n_nontrivial: u64,
}

pub fn partition_stats(p: &Partition) -> PartitionStats {
    PartitionStats {
        n_clusters: p.n_clusters() as u64,
        n_nontrivial: p.clusters().filter(|c| !c.is_trivial()).count() as u64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HistogramBin {
    pub lo: u64,
    /// Inclusive upper bound; `None` for the open last bin.
    pub hi: Option<u64>,
    pub clusters: u64,
    /// Total addresses in the clusters of this bin.
    pub coverage: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SizeHistogram {
    pub bins: Vec<HistogramBin>,
}

impl SizeHistogram {
    pub fn from_sizes<I>(sizes: I, edges: &[u64]) -> Result<Self, ClusterError>
    where
        I: IntoIterator<Item = u64>,
    {
        if edges.first() != Some(&1) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ClusterError::InvalidBinEdges);
        }
        let mut bins: Vec<HistogramBin> = edges
            .iter()
            .enumerate()
            .map(|(i, &lo)| HistogramBin {
                lo,
                hi: edges.get(i + 1).map(|next| next - 1),
                clusters: 0,
                coverage: 0,
            })
            .collect();
        for size in sizes {
            if size == 0 {
                continue;
            }
            let i = edges.partition_point(|&e| e <= size) - 1;
            bins[i].clusters += 1;
            bins[i].coverage += size;
        }
        Ok(Self { bins })
    }

    pub fn total_clusters(&self) -> u64 {
        self.bins.iter().map(|b| b.clusters).sum()
    }

    pub fn total_coverage(&self) -> u64 {
        self.bins.iter().map(|b| b.coverage).sum()
    }

    /// Fraction of covered addresses in clusters larger than `size`.
    pub fn coverage_above(&self, size: u64) -> f64 {
        let total = self.total_coverage();
        if total == 0 {
            return 0.0;
        }
        let above: u64 = self
            .bins
            .iter()
            .filter(|b| b.lo > size)
            .map(|b| b.coverage)
            .sum();
        above as f64 / total as f64
    }
}

pub fn size_histogram(p: &Partition, bin_edges: &[u64]) -> Result<SizeHistogram, ClusterError> {
    SizeHistogram::from_sizes(p.clusters().map(|c| c.len() as u64), bin_edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{addr, chain_id, OutputRecord};
    use alloc::string::ToString;

    pub(crate) fn tx(id: &str, inputs: &[&str], outputs: &[&str]) -> TxRecord {
        TxRecord {
            chain: chain_id("t"),
            height: 0,
            timestamp: 0,
            tx_id: id.to_string(),
            ordinal: 0,
            inputs: inputs.iter().map(|a| addr(a)).collect(),
            outputs: outputs.iter().map(|a| OutputRecord::to(addr(a), 1)).collect(),
        }
    }

    fn member_lists(p: &Partition) -> Vec<Vec<&str>> {
        p.clusters()
            .map(|c| c.members().map(|a| a.as_str()).collect())
            .collect()
    }

    #[test]
    fn one_union() {
        let p = cluster_stream(&[tx("t1", &["b", "a"], &["c"])]);
        assert_eq!(member_lists(&p), vec![vec!["a", "b"], vec!["c"]]);
        assert_eq!(
            partition_stats(&p),
            PartitionStats {
                n_clusters: 2,
                n_nontrivial: 1
            }
        );
        assert_eq!(p.find("b").unwrap().as_str(), "a");
        assert_eq!(p.find("a"), p.find("b"));
        assert_ne!(p.find("c"), p.find("a"));
        assert_eq!(p.find("zz"), Err(ClusterError::UnknownAddress("zz".into())));
        let merges = p.merges_in(p.cluster_index("a").unwrap());
        assert_eq!(merges.len(), 1);
        assert_eq!(&*merges[0].tx_id, "t1");
    }

    #[test]
    fn single_input_never_merges() {
        let txs = [
            tx("t1", &["a"], &["b", "c"]),
            tx("t2", &["b", "b"], &["d"]),
            tx("t3", &["c"], &["a"]),
        ];
        let p = cluster_stream(&txs);
        assert_eq!(partition_stats(&p).n_nontrivial, 0);
        assert_eq!(p.n_clusters(), 4);
    }

    #[test]
    fn empty_partition() {
        let p = cluster_stream(&[]);
        assert_eq!(partition_stats(&p), PartitionStats::default());
        assert_eq!(p.clusters().count(), 0);
        let h = size_histogram(&p, &DEFAULT_BIN_EDGES).unwrap();
        assert_eq!(h.total_clusters(), 0);
    }

    #[test]
    fn provenance_records_first_uniting_tx() {
        let p = cluster_stream(&[
            tx("t1", &["a", "b"], &["x"]),
            tx("t2", &["b", "a", "c"], &["y"]),
        ]);
        let c = p.cluster_index("a").unwrap();
        let ids: Vec<&str> = p.merges_in(c).iter().map(|m| &*m.tx_id).collect();
        assert_eq!(ids, vec!["t1", "t2"]);
        assert_eq!(p.merges_in(c)[1].right.as_str(), "c");
    }

    #[test]
    fn tx_effect_reports_spanned_clusters() {
        let mut b = ClusterBuilder::new();
        let e = b.absorb(&tx("t1", &["a", "b"], &[]));
        assert_eq!(
            e,
            TxEffect {
                distinct_inputs: 2,
                spanned_clusters: 2,
                all_spanned_trivial: true
            }
        );
        let e = b.absorb(&tx("t2", &["a", "c", "c"], &[]));
        assert_eq!(e.distinct_inputs, 2);
        assert!(e.merged());
        assert!(!e.all_spanned_trivial);
        let e = b.absorb(&tx("t3", &["a", "b"], &[]));
        assert!(!e.merged());
        assert_eq!(b.cluster_size("c"), Some(3));
    }

    #[test]
    fn histogram_examples() {
        let p = Partition::from_clusters([vec!["a"], vec!["b"], vec!["c", "d", "e"]]).unwrap();
        let h = size_histogram(&p, &DEFAULT_BIN_EDGES).unwrap();
        assert_eq!(h.bins.len(), 6);
        assert_eq!((h.bins[0].lo, h.bins[0].hi), (1, Some(1)));
        assert_eq!((h.bins[0].clusters, h.bins[0].coverage), (2, 2));
        assert_eq!((h.bins[1].lo, h.bins[1].hi), (2, Some(10)));
        assert_eq!((h.bins[1].clusters, h.bins[1].coverage), (1, 3));
        assert_eq!((h.bins[5].lo, h.bins[5].hi), (10_001, None));

        let big: Vec<String> = (0..150).map(|i| alloc::format!("k{i:03}")).collect();
        let p = Partition::from_clusters([big]).unwrap();
        let h = size_histogram(&p, &DEFAULT_BIN_EDGES).unwrap();
        assert_eq!((h.bins[3].clusters, h.bins[3].coverage), (1, 150));
        assert_eq!(h.total_coverage(), 150);
        assert_eq!(h.coverage_above(100), 1.0);
    }

    #[test]
    fn histogram_rejects_bad_edges() {
        let p = Partition::default();
        assert_eq!(size_histogram(&p, &[]), Err(ClusterError::InvalidBinEdges));
        assert_eq!(size_histogram(&p, &[2, 5]), Err(ClusterError::InvalidBinEdges));
        assert_eq!(size_histogram(&p, &[1, 5, 5]), Err(ClusterError::InvalidBinEdges));
    }

    #[test]
    fn from_clusters_rejects_overlap() {
        assert_eq!(
            Partition::from_clusters([vec!["a", "b"], vec!["b"]]),
            Err(ClusterError::DuplicateAddress("b".into()))
        );
        assert_eq!(
            Partition::from_clusters([Vec::<&str>::new()]),
            Err(ClusterError::EmptyCluster)
        );
    }

    #[test]
    fn input_only_addresses_join_universe() {
        let p = cluster_stream(&[tx("t1", &["x", "y"], &["z"])]);
        assert!(p.contains("x") && p.contains("y"));
        assert_eq!(p.len(), 3);
    }
}
