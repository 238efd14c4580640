//! Combining chains into one ordering and comparing the resulting
//! clusterings.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::chain::{AddressKey, ChainId, ChainSnapshot, TxRecord};
use crate::clustering::{ClusterError, Partition, SizeHistogram, DEFAULT_BIN_EDGES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CombinationError {
    #[error("{finer} and {coarser} improve each other but are different partitions")]
    Cycle { finer: String, coarser: String },
    #[error("the finer clustering is not an improvement of the coarser one")]
    NotAnImprovement,
    #[error("at least two clusterings are needed")]
    TooFewClusterings,
    #[error(transparent)]
    Histogram(#[from] ClusterError),
}

/// Transactions of several chains in one approximately temporal order.
#[derive(Debug, Clone)]
pub struct CombinationOrdering<'a> {
    pub name: String,
    pub members: Vec<ChainId>,
    pub sequence: Vec<&'a TxRecord>,
}

impl<'a> CombinationOrdering<'a> {
    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a TxRecord> + '_ {
        self.sequence.iter().copied()
    }
}

/// Orders all transactions of `snapshots` by timestamp, then chain id, then
/// ordinal.
pub fn combine<'a>(snapshots: &[&'a ChainSnapshot], name: &str) -> CombinationOrdering<'a> {
    let mut members: Vec<ChainId> = snapshots.iter().map(|s| s.chain().clone()).collect();
    members.sort();
    let mut sequence: Vec<&'a TxRecord> = snapshots.iter().flat_map(|s| s.txs()).collect();
    sequence.sort_by(|x, y| {
        (x.timestamp, &x.chain, x.ordinal).cmp(&(y.timestamp, &y.chain, y.ordinal))
    });
    CombinationOrdering {
        name: name.into(),
        members,
        sequence,
    }
}

/// True when every cluster of `p2` is a subset of some cluster of `p1` or
/// shares no address with `p1` at all.
pub fn is_improvement(p1: &Partition, p2: &Partition) -> bool {
    p2.clusters().all(|c| {
        let mut hit = None;
        let mut missing = false;
        for a in c.members() {
            match p1.cluster_index(a.as_str()) {
                None => missing = true,
                Some(idx) => match hit {
                    None => hit = Some(idx),
                    Some(h) if h != idx => return false,
                    Some(_) => {}
                },
            }
            if missing && hit.is_some() {
                return false;
            }
        }
        true
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImprovementEdge {
    /// The improving clustering (it merges more).
    pub finer: String,
    pub coarser: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HasseDiagram {
    pub edges: Vec<ImprovementEdge>,
    /// Labels whose partitions are identical. Only the first of each group
    /// appears in `edges`.
    pub equal: Vec<(String, String)>,
}

/// Transitive reduction of the improvement relation over labelled
/// clusterings.
pub fn improvement_hasse(clusterings: &[(&str, &Partition)]) -> Result<HasseDiagram, CombinationError> {
    let n = clusterings.len();
    if n < 2 {
        return Ok(HasseDiagram::default());
    }
    let mut canonical: Vec<usize> = (0..n).collect();
    let mut equal = Vec::new();
    for j in 0..n {
        if let Some(i) = (0..j).find(|&i| canonical[i] == i && clusterings[i].1 == clusterings[j].1) {
            canonical[j] = i;
            equal.push((clusterings[i].0.into(), clusterings[j].0.into()));
        }
    }
    let reps: Vec<usize> = (0..n).filter(|&i| canonical[i] == i).collect();
    let m = reps.len();
    let mut rel = vec![vec![false; m]; m];
    for (x, &i) in reps.iter().enumerate() {
        for (y, &j) in reps.iter().enumerate() {
            if x != y {
                rel[x][y] = is_improvement(clusterings[i].1, clusterings[j].1);
            }
        }
    }
    for x in 0..m {
        for y in x + 1..m {
            if rel[x][y] && rel[y][x] {
                return Err(CombinationError::Cycle {
                    finer: clusterings[reps[x]].0.into(),
                    coarser: clusterings[reps[y]].0.into(),
                });
            }
        }
    }
    let mut edges = Vec::new();
    for x in 0..m {
        for y in 0..m {
            if !rel[x][y] {
                continue;
            }
            let implied = (0..m).any(|z| z != x && z != y && rel[x][z] && rel[z][y]);
            if !implied {
                edges.push(ImprovementEdge {
                    finer: clusterings[reps[x]].0.into(),
                    coarser: clusterings[reps[y]].0.into(),
                });
            }
        }
    }
    Ok(HasseDiagram { edges, equal })
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MergedCluster {
    pub finer_rep: AddressKey,
    /// Representatives of the coarser clusters it unites, sorted.
    pub coarser_reps: Vec<AddressKey>,
    /// Size of the finer cluster.
    pub total_addresses: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterDiff {
    pub merged: Vec<MergedCluster>,
    /// Sizes of the merged finer clusters.
    pub histogram: SizeHistogram,
}

impl ClusterDiff {
    /// Coarser clusters that disappear into merges: `sum(n_i - 1)`.
    pub fn clusters_lost(&self) -> usize {
        self.merged.iter().map(|m| m.coarser_reps.len() - 1).sum()
    }
}

/// Clusters of `finer` that unite two or more clusters of `coarser`, counted
/// on the coarser universe only.
pub fn cluster_diff(finer: &Partition, coarser: &Partition) -> Result<ClusterDiff, CombinationError> {
    if !is_improvement(finer, coarser) {
        return Err(CombinationError::NotAnImprovement);
    }
    let mut merged = Vec::new();
    for c in finer.clusters() {
        let mut united: Vec<usize> = c
            .members()
            .filter_map(|a| coarser.cluster_index(a.as_str()))
            .collect();
        united.sort_unstable();
        united.dedup();
        if united.len() >= 2 {
            merged.push(MergedCluster {
                finer_rep: c.rep().clone(),
                coarser_reps: united.iter().map(|&i| coarser.cluster(i).rep().clone()).collect(),
                total_addresses: c.len(),
            });
        }
    }
    let histogram = SizeHistogram::from_sizes(
        merged.iter().map(|m| m.total_addresses as u64),
        &DEFAULT_BIN_EDGES,
    )?;
    Ok(ClusterDiff { merged, histogram })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{addr, chain_id, OutputRecord, RawTx};

    fn p(clusters: &[&[&str]]) -> Partition {
        Partition::from_clusters(clusters.iter().map(|c| c.iter().copied())).unwrap()
    }

    #[test]
    fn improvement_examples() {
        assert!(is_improvement(&p(&[&["a", "b"], &["c"]]), &p(&[&["a"], &["b"], &["c"]])));
        assert!(!is_improvement(&p(&[&["a", "b"], &["c"]]), &p(&[&["a", "c"]])));
        assert!(is_improvement(&p(&[&["a", "b"]]), &p(&[&["d", "e"]])));
        // partly outside p1's universe: neither subset nor disjoint
        assert!(!is_improvement(&p(&[&["a", "b"]]), &p(&[&["a", "z"]])));
        let x = p(&[&["a", "b"], &["c"]]);
        assert!(is_improvement(&x, &x));
    }

    #[test]
    fn hasse_chain_and_single() {
        let fine = p(&[&["a"], &["b"], &["c"]]);
        let mid = p(&[&["a", "b"], &["c"]]);
        let top = p(&[&["a", "b", "c"]]);
        let h = improvement_hasse(&[("fine", &fine), ("mid", &mid), ("top", &top)]).unwrap();
        assert_eq!(
            h.edges,
            vec![
                ImprovementEdge {
                    finer: "mid".into(),
                    coarser: "fine".into()
                },
                ImprovementEdge {
                    finer: "top".into(),
                    coarser: "mid".into()
                },
            ]
        );
        assert!(improvement_hasse(&[("only", &fine)]).unwrap().edges.is_empty());
    }

    #[test]
    fn hasse_flags_equal_and_cycles() {
        let a = p(&[&["a", "b"]]);
        let b = p(&[&["a", "b"]]);
        let h = improvement_hasse(&[("a", &a), ("b", &b)]).unwrap();
        assert!(h.edges.is_empty());
        assert_eq!(h.equal, vec![("a".into(), "b".into())]);

        let x = p(&[&["a", "b"]]);
        let y = p(&[&["c"]]);
        assert!(matches!(
            improvement_hasse(&[("x", &x), ("y", &y)]),
            Err(CombinationError::Cycle { .. })
        ));
    }

    #[test]
    fn diff_examples() {
        let finer = p(&[&["a", "b", "c"]]);
        let coarser = p(&[&["a", "b"], &["c"]]);
        let d = cluster_diff(&finer, &coarser).unwrap();
        assert_eq!(d.merged.len(), 1);
        assert_eq!(d.merged[0].coarser_reps.len(), 2);
        assert_eq!(d.merged[0].total_addresses, 3);
        assert_eq!(d.clusters_lost(), 1);
        assert_eq!(d.histogram.bins[1].clusters, 1);

        assert!(cluster_diff(&coarser, &coarser).unwrap().merged.is_empty());
        assert_eq!(
            cluster_diff(&coarser, &finer),
            Err(CombinationError::NotAnImprovement)
        );
    }

    #[test]
    fn diff_ignores_new_addresses() {
        // z and w only exist in the finer clustering
        let finer = p(&[&["a", "z", "w"], &["b"]]);
        let coarser = p(&[&["a"], &["b"]]);
        assert!(cluster_diff(&finer, &coarser).unwrap().merged.is_empty());
    }

    fn snap(chain: &str, times: &[i64]) -> ChainSnapshot {
        let raws = times.iter().enumerate().map(|(i, &t)| RawTx {
            tx_id: alloc::format!("{chain}{i}"),
            height: i as u64,
            timestamp: t,
            inputs: Vec::new(),
            outputs: vec![OutputRecord::to(addr(&alloc::format!("{chain}{i}")), 1)],
        });
        ChainSnapshot::from_raw(chain_id(chain), raws).unwrap().0
    }

    #[test]
    fn combine_orders_by_time_chain_ordinal() {
        let a = snap("a", &[1, 5, 5]);
        let b = snap("b", &[2, 5, 9]);
        let c = combine(&[&b, &a], "I");
        let order: Vec<&str> = c.iter().map(|t| t.tx_id.as_str()).collect();
        assert_eq!(order, vec!["a0", "b0", "a1", "a2", "b1", "b2"]);
        assert_eq!(c.members, vec![chain_id("a"), chain_id("b")]);
        assert_eq!(c.len(), 6);
    }
}
