//! Co-cluster graphs: linking the clusterings of several chains through the
//! addresses they share.
//!
//! A vertex is a cluster on one chain. Two vertices on different chains are
//! joined when their clusters share at least one address; the edge carries
//! the full shared set. A cluster on a source chain adjacent to two or more
//! clusters of a target chain proves those target clusters have one owner,
//! so the target clustering can be improved.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use thiserror::Error;

use crate::chain::{AddressKey, ChainId};
use crate::clustering::Partition;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CrossChainError {
    #[error("chain {0} is not part of the analysis")]
    UnknownChain(ChainId),
    #[error("chain {0} cannot be both source and target")]
    SourceIsTarget(ChainId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoClusterVertex {
    pub chain: ChainId,
    /// Representative of the cluster.
    pub cluster: AddressKey,
    /// Index of the cluster in its chain's partition.
    pub cluster_index: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoClusterEdge {
    /// Endpoints, `a < b`.
    pub a: usize,
    pub b: usize,
    /// Addresses in both clusters, sorted.
    pub shared: Vec<AddressKey>,
}

impl CoClusterEdge {
    pub fn other(&self, v: usize) -> usize {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChainSummary {
    /// Clusters in the chain's partition.
    pub clusters: usize,
    /// Clusters sharing no address with any other chain; not materialised.
    pub isolated: usize,
}

/// Undirected simple graph over clusters of several chains.
///
/// Only clusters that share an address with another chain become vertices;
/// the rest are counted per chain in [`ChainSummary::isolated`].
#[derive(Debug, Clone, Default)]
pub struct CoClusterGraph {
    vertices: Vec<CoClusterVertex>,
    edges: Vec<CoClusterEdge>,
    adjacency: Vec<Vec<(usize, usize)>>,
    chains: BTreeMap<ChainId, ChainSummary>,
}

impl CoClusterGraph {
    fn from_parts(
        vertices: Vec<CoClusterVertex>,
        edges: Vec<CoClusterEdge>,
        chains: BTreeMap<ChainId, ChainSummary>,
    ) -> Self {
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for (i, e) in edges.iter().enumerate() {
            adjacency[e.a].push((e.b, i));
            adjacency[e.b].push((e.a, i));
        }
        Self {
            vertices,
            edges,
            adjacency,
            chains,
        }
    }

    pub fn vertices(&self) -> &[CoClusterVertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[CoClusterEdge] {
        &self.edges
    }

    pub fn vertex(&self, v: usize) -> &CoClusterVertex {
        &self.vertices[v]
    }

    pub fn edge(&self, e: usize) -> &CoClusterEdge {
        &self.edges[e]
    }

    /// Every cluster of every chain, materialised or isolated.
    pub fn vertex_count(&self) -> usize {
        self.vertices.len() + self.chains.values().map(|s| s.isolated).sum::<usize>()
    }

    pub fn materialized_vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn chains(&self) -> &BTreeMap<ChainId, ChainSummary> {
        &self.chains
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// `(neighbour, edge index)` pairs.
    pub fn neighbours(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    /// Vertex of `chain`'s cluster with representative `rep`.
    pub fn find_vertex(&self, chain: &ChainId, rep: &str) -> Option<usize> {
        self.vertices
            .iter()
            .position(|v| &v.chain == chain && v.cluster.as_str() == rep)
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<&CoClusterEdge> {
        self.adjacency[u]
            .iter()
            .find(|(n, _)| *n == v)
            .map(|&(_, e)| &self.edges[e])
    }

    /// Subgraph on the kept vertices with the edges accepted by `keep_edge`
    /// whose endpoints are both kept. Vertex order is preserved.
    fn subgraph(&self, keep: &[bool], mut keep_edge: impl FnMut(&CoClusterEdge) -> bool) -> Self {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if keep[i] {
                remap[i] = vertices.len();
                vertices.push(v.clone());
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| keep[e.a] && keep[e.b] && keep_edge(e))
            .map(|e| CoClusterEdge {
                a: remap[e.a],
                b: remap[e.b],
                shared: e.shared.clone(),
            })
            .collect();
        let chains = self
            .chains
            .iter()
            .map(|(c, s)| {
                (
                    c.clone(),
                    ChainSummary {
                        clusters: s.clusters,
                        isolated: 0,
                    },
                )
            })
            .collect();
        Self::from_parts(vertices, edges, chains)
    }

    fn require(&self, chain: &ChainId) -> Result<(), CrossChainError> {
        if self.chains.contains_key(chain) {
            Ok(())
        } else {
            Err(CrossChainError::UnknownChain(chain.clone()))
        }
    }

    /// Neighbours of `v` that lie on `chain`.
    pub fn degree_towards(&self, v: usize, chain: &ChainId) -> usize {
        self.adjacency[v]
            .iter()
            .filter(|(n, _)| &self.vertices[*n].chain == chain)
            .count()
    }
}

/// Builds the co-cluster graph of the given partitions.
pub fn build_cocluster_graph<'a, I>(partitions: I) -> CoClusterGraph
where
    I: IntoIterator<Item = (&'a ChainId, &'a Partition)>,
{
    let parts: BTreeMap<&ChainId, &Partition> = partitions.into_iter().collect();
    let parts: Vec<(&ChainId, &Partition)> = parts.into_iter().collect();

    // (chain i, cluster in i, chain j, cluster in j) -> shared addresses, i < j
    let mut shared: HashMap<(u32, u32, u32, u32), Vec<AddressKey>> = HashMap::new();
    for i in 0..parts.len() {
        for j in i + 1..parts.len() {
            let (pi, pj) = (parts[i].1, parts[j].1);
            let (small, large, flipped) = if pi.len() <= pj.len() {
                (pi, pj, false)
            } else {
                (pj, pi, true)
            };
            for (pos, a) in small.addresses().iter().enumerate() {
                let Some(other) = large.cluster_index(a.as_str()) else {
                    continue;
                };
                let mine = small.cluster_index_at(pos);
                let (ci, cj) = if flipped { (other, mine) } else { (mine, other) };
                shared
                    .entry((i as u32, ci as u32, j as u32, cj as u32))
                    .or_default()
                    .push(a.clone());
            }
        }
    }

    let mut keys: Vec<(u32, u32)> = shared
        .keys()
        .flat_map(|&(i, ci, j, cj)| [(i, ci), (j, cj)])
        .collect();
    keys.sort_unstable();
    keys.dedup();
    let index: HashMap<(u32, u32), usize> = keys.iter().enumerate().map(|(v, &k)| (k, v)).collect();

    let vertices: Vec<CoClusterVertex> = keys
        .iter()
        .map(|&(i, c)| {
            let (chain, p) = parts[i as usize];
            let cluster = p.cluster(c as usize);
            CoClusterVertex {
                chain: chain.clone(),
                cluster: cluster.rep().clone(),
                cluster_index: c as usize,
                size: cluster.len(),
            }
        })
        .collect();

    let mut edges: Vec<CoClusterEdge> = shared
        .into_iter()
        .map(|((i, ci, j, cj), shared)| CoClusterEdge {
            a: index[&(i, ci)],
            b: index[&(j, cj)],
            shared,
        })
        .collect();
    edges.sort_unstable_by_key(|e| (e.a, e.b));

    let mut chains = BTreeMap::new();
    for (i, (chain, p)) in parts.iter().enumerate() {
        let materialized = keys.iter().filter(|(ci, _)| *ci == i as u32).count();
        chains.insert(
            (*chain).clone(),
            ChainSummary {
                clusters: p.n_clusters(),
                isolated: p.n_clusters() - materialized,
            },
        );
    }
    CoClusterGraph::from_parts(vertices, edges, chains)
}

/// Source clusters adjacent to at least two target clusters, together with
/// those target neighbours. Only source–target edges are considered.
pub fn impacted_subgraph(
    g: &CoClusterGraph,
    source: &ChainId,
    target: &ChainId,
) -> Result<CoClusterGraph, CrossChainError> {
    g.require(source)?;
    g.require(target)?;
    if source == target {
        return Err(CrossChainError::SourceIsTarget(source.clone()));
    }
    let mut keep = vec![false; g.vertices.len()];
    for (v, vert) in g.vertices.iter().enumerate() {
        if &vert.chain != source || g.degree_towards(v, target) < 2 {
            continue;
        }
        keep[v] = true;
        for &(n, _) in g.neighbours(v) {
            if &g.vertices[n].chain == target {
                keep[n] = true;
            }
        }
    }
    // Kept target vertices may also touch source clusters below the
    // threshold; those are not kept, so their edges drop out here.
    Ok(g.subgraph(&keep, |e| {
        let (ca, cb) = (&g.vertices[e.a].chain, &g.vertices[e.b].chain);
        (ca == source && cb == target) || (ca == target && cb == source)
    }))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Vertex indices, ascending.
    pub vertices: Vec<usize>,
    /// Edge indices, ascending.
    pub edges: Vec<usize>,
}

/// Connected components ordered by their smallest vertex.
pub fn connected_components(g: &CoClusterGraph) -> Vec<Component> {
    let n = g.vertices.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut vertices = Vec::new();
        let mut edges = Vec::new();
        while let Some(v) = stack.pop() {
            vertices.push(v);
            for &(w, e) in g.neighbours(v) {
                if v < w {
                    edges.push(e);
                }
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        vertices.sort_unstable();
        edges.sort_unstable();
        out.push(Component { vertices, edges });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StarClass {
    Star,
    NonStar,
}

/// A component is a star when it has exactly one `source` vertex and every
/// edge touches it. Single-edge components are stars.
pub fn classify_star(g: &CoClusterGraph, component: &Component, source: &ChainId) -> StarClass {
    if component.edges.len() == 1 {
        return StarClass::Star;
    }
    let mut hubs = component
        .vertices
        .iter()
        .filter(|&&v| &g.vertices[v].chain == source);
    let (Some(&hub), None) = (hubs.next(), hubs.next()) else {
        return StarClass::NonStar;
    };
    let all_incident = component.edges.iter().all(|&e| {
        let edge = &g.edges[e];
        edge.a == hub || edge.b == hub
    });
    if all_incident {
        StarClass::Star
    } else {
        StarClass::NonStar
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VertexReport {
    pub chain: ChainId,
    pub cluster: AddressKey,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EdgeReport {
    /// Indices into the component's `vertices`.
    pub a: usize,
    pub b: usize,
    pub shared: Vec<AddressKey>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComponentReport {
    pub vertices: Vec<VertexReport>,
    pub edges: Vec<EdgeReport>,
    pub star: bool,
    /// Transactions that built the source-side clusters, first union first.
    pub witnesses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImpactSummary {
    pub target_clusters: usize,
    pub components: usize,
    /// Target clusters that end up merged with another target cluster.
    pub impacted_clusters: usize,
    /// `impacted_clusters / target_clusters`.
    pub impacted_fraction: f64,
    /// `components / target_clusters`: the share of new, merged clusters.
    pub component_fraction: f64,
    pub stars: usize,
    pub non_stars: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TargetImpact {
    pub target: ChainId,
    pub summary: ImpactSummary,
    pub components: Vec<ComponentReport>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImpactReport {
    pub source: ChainId,
    pub targets: Vec<TargetImpact>,
    /// Components of the co-cluster graph over the source and all targets
    /// that contain a directly impacting source cluster. These include the
    /// indirect merges reached through other targets.
    pub multi_hop: Vec<ComponentReport>,
}

fn component_report(
    g: &CoClusterGraph,
    c: &Component,
    source: &ChainId,
    source_partition: &Partition,
) -> ComponentReport {
    let local: BTreeMap<usize, usize> = c.vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let vertices = c
        .vertices
        .iter()
        .map(|&v| {
            let vert = g.vertex(v);
            VertexReport {
                chain: vert.chain.clone(),
                cluster: vert.cluster.clone(),
                size: vert.size,
            }
        })
        .collect();
    let edges = c
        .edges
        .iter()
        .map(|&e| {
            let edge = g.edge(e);
            EdgeReport {
                a: local[&edge.a],
                b: local[&edge.b],
                shared: edge.shared.clone(),
            }
        })
        .collect();
    let mut witnesses: Vec<String> = Vec::new();
    for &v in &c.vertices {
        let vert = g.vertex(v);
        if &vert.chain != source {
            continue;
        }
        for m in source_partition.merges_in(vert.cluster_index) {
            if !witnesses.iter().any(|w| w.as_str() == &*m.tx_id) {
                witnesses.push(String::from(&*m.tx_id));
            }
        }
    }
    ComponentReport {
        vertices,
        edges,
        star: classify_star(g, c, source) == StarClass::Star,
        witnesses,
    }
}

/// Clusters of each target chain merged through the source chain's
/// clustering.
pub fn impact_report<'a, I>(
    partitions: I,
    source: &ChainId,
    targets: &[ChainId],
) -> Result<ImpactReport, CrossChainError>
where
    I: IntoIterator<Item = (&'a ChainId, &'a Partition)>,
{
    let all: BTreeMap<&ChainId, &Partition> = partitions.into_iter().collect();
    let source_partition = *all
        .get(source)
        .ok_or_else(|| CrossChainError::UnknownChain(source.clone()))?;
    let mut selected = BTreeMap::new();
    selected.insert(source, source_partition);
    for t in targets {
        if t == source {
            return Err(CrossChainError::SourceIsTarget(t.clone()));
        }
        let p = all
            .get(t)
            .ok_or_else(|| CrossChainError::UnknownChain(t.clone()))?;
        selected.insert(t, *p);
    }
    let g = build_cocluster_graph(selected);

    let mut sections = Vec::new();
    for t in targets {
        let sub = impacted_subgraph(&g, source, t)?;
        let comps = connected_components(&sub);
        let reports: Vec<ComponentReport> = comps
            .iter()
            .map(|c| component_report(&sub, c, source, source_partition))
            .collect();
        let target_clusters = g.chains()[t].clusters;
        let impacted = sub.vertices().iter().filter(|v| &v.chain == t).count();
        let stars = reports.iter().filter(|r| r.star).count();
        let ratio = |n: usize| {
            if target_clusters == 0 {
                0.0
            } else {
                n as f64 / target_clusters as f64
            }
        };
        sections.push(TargetImpact {
            target: t.clone(),
            summary: ImpactSummary {
                target_clusters,
                components: reports.len(),
                impacted_clusters: impacted,
                impacted_fraction: ratio(impacted),
                component_fraction: ratio(reports.len()),
                stars,
                non_stars: reports.len() - stars,
            },
            components: reports,
        });
    }

    let seeds: Vec<bool> = (0..g.materialized_vertex_count())
        .map(|v| &g.vertex(v).chain == source && targets.iter().any(|t| g.degree_towards(v, t) >= 2))
        .collect();
    let multi_hop = connected_components(&g)
        .iter()
        .filter(|c| c.vertices.iter().any(|&v| seeds[v]))
        .map(|c| component_report(&g, c, source, source_partition))
        .collect();

    Ok(ImpactReport {
        source: source.clone(),
        targets: sections,
        multi_hop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::chain_id;

    /// Three chains: A {blue,green} {pink}; B {blue,red} {green,orange};
    /// C {red,white} {orange}.
    fn hub_fixture() -> BTreeMap<ChainId, Partition> {
        let mut m = BTreeMap::new();
        m.insert(
            chain_id("A"),
            Partition::from_clusters([vec!["blue", "green"], vec!["pink"]]).unwrap(),
        );
        m.insert(
            chain_id("B"),
            Partition::from_clusters([vec!["blue", "red"], vec!["green", "orange"]]).unwrap(),
        );
        m.insert(
            chain_id("C"),
            Partition::from_clusters([vec!["red", "white"], vec!["orange"]]).unwrap(),
        );
        m
    }

    #[test]
    fn hub_graph_shape() {
        let parts = hub_fixture();
        let g = build_cocluster_graph(&parts);
        assert_eq!(g.vertex_count(), 6);
        assert_eq!(g.materialized_vertex_count(), 5);
        assert_eq!(g.edge_count(), 4);
        assert_eq!(g.chains()[&chain_id("A")].isolated, 1);
        let hub = g.find_vertex(&chain_id("A"), "blue").unwrap();
        assert_eq!(g.degree(hub), 2);
        let b1 = g.find_vertex(&chain_id("B"), "blue").unwrap();
        let e = g.edge_between(hub, b1).unwrap();
        assert_eq!(e.shared.len(), 1);
        assert_eq!(e.shared[0].as_str(), "blue");
        assert!(g.find_vertex(&chain_id("A"), "pink").is_none());

        let comps = connected_components(&g);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].vertices.len(), 5);
        assert_eq!(classify_star(&g, &comps[0], &chain_id("A")), StarClass::NonStar);
    }

    #[test]
    fn hub_impacted_subgraph() {
        let parts = hub_fixture();
        let g = build_cocluster_graph(&parts);
        let sub = impacted_subgraph(&g, &chain_id("A"), &chain_id("B")).unwrap();
        assert_eq!(sub.materialized_vertex_count(), 3);
        assert_eq!(sub.edge_count(), 2);
        let comps = connected_components(&sub);
        assert_eq!(comps.len(), 1);
        assert_eq!(classify_star(&sub, &comps[0], &chain_id("A")), StarClass::Star);

        // B -> C: no B cluster touches two C clusters.
        let sub = impacted_subgraph(&g, &chain_id("B"), &chain_id("C")).unwrap();
        assert_eq!(sub.materialized_vertex_count(), 0);

        assert_eq!(
            impacted_subgraph(&g, &chain_id("A"), &chain_id("Z")).unwrap_err(),
            CrossChainError::UnknownChain(chain_id("Z"))
        );
    }

    #[test]
    fn hub_impact_report() {
        let parts = hub_fixture();
        let report = impact_report(&parts, &chain_id("A"), &[chain_id("B"), chain_id("C")]).unwrap();
        let b = &report.targets[0];
        assert_eq!(b.summary.components, 1);
        assert_eq!(b.summary.impacted_clusters, 2);
        assert_eq!(b.summary.impacted_fraction, 1.0);
        assert_eq!(b.summary.component_fraction, 0.5);
        assert!(b.components[0].star);
        let c = &report.targets[1];
        assert_eq!(c.summary.components, 0);
        assert_eq!(c.summary.impacted_fraction, 0.0);
        assert_eq!(report.multi_hop.len(), 1);
        assert!(!report.multi_hop[0].star);
        assert_eq!(report.multi_hop[0].vertices.len(), 5);
    }

    #[test]
    fn disjoint_chains_give_empty_graph() {
        let mut m = BTreeMap::new();
        m.insert(chain_id("A"), Partition::from_clusters([vec!["a", "b"]]).unwrap());
        m.insert(chain_id("B"), Partition::from_clusters([vec!["c"], vec!["d"]]).unwrap());
        let g = build_cocluster_graph(&m);
        assert_eq!(g.materialized_vertex_count(), 0);
        assert_eq!(g.vertex_count(), 3);
        assert!(connected_components(&g).is_empty());
        let r = impact_report(&m, &chain_id("A"), &[chain_id("B")]).unwrap();
        assert_eq!(r.targets[0].summary.components, 0);
        assert!(r.multi_hop.is_empty());
    }

    #[test]
    fn degree_one_source_is_excluded() {
        let mut m = BTreeMap::new();
        m.insert(chain_id("S"), Partition::from_clusters([vec!["a", "x"]]).unwrap());
        m.insert(chain_id("T"), Partition::from_clusters([vec!["a", "b"]]).unwrap());
        let g = build_cocluster_graph(&m);
        assert_eq!(g.edge_count(), 1);
        let sub = impacted_subgraph(&g, &chain_id("S"), &chain_id("T")).unwrap();
        assert_eq!(sub.materialized_vertex_count(), 0);
    }

    #[test]
    fn star_examples() {
        // one source hub with three target neighbours
        let mut m = BTreeMap::new();
        m.insert(
            chain_id("clam"),
            Partition::from_clusters([vec!["a", "b", "c"]]).unwrap(),
        );
        m.insert(
            chain_id("btc"),
            Partition::from_clusters([vec!["a"], vec!["b"], vec!["c"]]).unwrap(),
        );
        let g = build_cocluster_graph(&m);
        let comps = connected_components(&g);
        assert_eq!(comps.len(), 1);
        assert_eq!(classify_star(&g, &comps[0], &chain_id("clam")), StarClass::Star);

        // path S1 - T1 - S2 - T2
        let mut m = BTreeMap::new();
        m.insert(
            chain_id("S"),
            Partition::from_clusters([vec!["a", "b"], vec!["c", "d"]]).unwrap(),
        );
        m.insert(
            chain_id("T"),
            Partition::from_clusters([vec!["a"], vec!["b", "c"], vec!["d"]]).unwrap(),
        );
        let g = build_cocluster_graph(&m);
        let comps = connected_components(&g);
        assert_eq!(comps.len(), 1);
        assert_eq!(classify_star(&g, &comps[0], &chain_id("S")), StarClass::NonStar);
    }
}
