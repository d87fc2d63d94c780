//! Shortest-path search over subsampled layer graphs.
//!
//! Dijkstra with a binary-heap priority queue over composite labels
//! (cost, hop count), giving O((|E|+|V|) log |V|). Ties on cost (within
//! [`COST_TIE_EPS`]) break to fewer hops, then to the lexicographically
//! smallest node sequence, so identical inputs always yield identical routes.
//! Blocked traversability edges are treated as absent during relaxation.
//!
//! The lexicographic winner is recovered by labeling from the destination and
//! then walking forward from the source, always taking the smallest neighbor
//! that still lies on an optimal remainder.

use crate::lsg::{Edge, EdgeAttribute, Graph, LayerId, NodeId, TraversabilityStatus};
use crate::subsample::Subgraph;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

/// Absolute tolerance for detecting cost ties between candidate routes.
pub const COST_TIE_EPS: f64 = 1e-9;

/// A loopless route within one layer graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    pub nodes: Vec<NodeId>,
    pub total_cost: f64,
    pub layer: LayerId,
}

impl Route {
    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }
}

/// One consecutive Target pair of a global route.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GlobalSegment {
    pub from: NodeId,
    pub to: NodeId,
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("no traversable route from {src} to {dst}")]
    NoRoute { src: NodeId, dst: NodeId },
    #[error("node {0} not in graph")]
    NodeNotFound(NodeId),
    #[error("empty route set")]
    EmptySet,
}

#[derive(Clone, Copy, PartialEq)]
struct Label {
    cost: f64,
    hops: u32,
}

impl Label {
    fn better_than(&self, other: &Label) -> bool {
        if self.cost < other.cost - COST_TIE_EPS {
            true
        } else if self.cost <= other.cost + COST_TIE_EPS {
            self.hops < other.hops
        } else {
            false
        }
    }
}

struct HeapEntry {
    label: Label,
    node: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a min-heap on (cost, hops, node).
        other
            .label
            .cost
            .total_cmp(&self.label.cost)
            .then(other.label.hops.cmp(&self.label.hops))
            .then(other.node.cmp(&self.node))
    }
}

/// One adjacency entry. `open` is false for non-traversability relations and
/// blocked edges; the relaxation loop filters on it inline, so an uninformed
/// search over a multi-domain graph pays for every extraneous edge it visits.
#[derive(Clone, Copy)]
struct Neighbor {
    node: usize,
    cost: f64,
    open: bool,
}

/// Dense node indexing plus adjacency built from an edge source.
struct SearchGraph {
    ids: Vec<NodeId>,
    adjacency: Vec<Vec<Neighbor>>,
}

impl SearchGraph {
    /// Adjacency containing only the retained traversability edges (the
    /// subsampled arm): every entry is open.
    fn from_traversable<'a>(
        node_ids: impl Iterator<Item = NodeId>,
        edges: impl Iterator<Item = &'a Edge>,
        excluded: &[(NodeId, NodeId)],
    ) -> SearchGraph {
        Self::build(node_ids, edges, excluded, false)
    }

    /// Adjacency over the full multi-domain edge list (the original arm):
    /// extraneous and blocked edges are carried as closed entries and
    /// discarded during relaxation.
    fn from_multi_domain<'a>(
        node_ids: impl Iterator<Item = NodeId>,
        edges: impl Iterator<Item = &'a Edge>,
    ) -> SearchGraph {
        Self::build(node_ids, edges, &[], true)
    }

    fn build<'a>(
        node_ids: impl Iterator<Item = NodeId>,
        edges: impl Iterator<Item = &'a Edge>,
        excluded: &[(NodeId, NodeId)],
        keep_closed: bool,
    ) -> SearchGraph {
        let ids: Vec<NodeId> = node_ids.collect();
        let index_of = |id: NodeId| ids.binary_search(&id).ok();
        let mut adjacency = vec![Vec::new(); ids.len()];
        for edge in edges {
            let (cost, mut open) = match edge.attr {
                EdgeAttribute::Traversability { cost, status } => {
                    (cost, status == TraversabilityStatus::Traversable)
                }
                _ => (0.0, false),
            };
            if !open && !keep_closed {
                continue;
            }
            if open && excluded.iter().any(|&(a, b)| edge.connects(a, b)) {
                if !keep_closed {
                    continue;
                }
                open = false;
            }
            if let (Some(ui), Some(vi)) = (index_of(edge.u), index_of(edge.v)) {
                adjacency[ui].push(Neighbor { node: vi, cost, open });
                adjacency[vi].push(Neighbor { node: ui, cost, open });
            }
        }
        SearchGraph { ids, adjacency }
    }

    fn index_of(&self, id: NodeId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    /// Composite-label Dijkstra from `source`, over every reachable node.
    /// Tag/status filtering happens here, per visited entry.
    fn labels(&self, source: usize) -> Vec<Option<Label>> {
        let mut labels: Vec<Option<Label>> = vec![None; self.ids.len()];
        let mut heap = BinaryHeap::new();
        labels[source] = Some(Label { cost: 0.0, hops: 0 });
        heap.push(HeapEntry { label: Label { cost: 0.0, hops: 0 }, node: source });
        while let Some(HeapEntry { label, node }) = heap.pop() {
            match labels[node] {
                Some(current) if current.cost == label.cost && current.hops == label.hops => {}
                _ => continue, // stale entry
            }
            for n in &self.adjacency[node] {
                if !n.open {
                    continue;
                }
                let candidate = Label { cost: label.cost + n.cost, hops: label.hops + 1 };
                let improves = match labels[n.node] {
                    None => true,
                    Some(existing) => candidate.better_than(&existing),
                };
                if improves {
                    labels[n.node] = Some(candidate);
                    heap.push(HeapEntry { label: candidate, node: n.node });
                }
            }
        }
        labels
    }

    /// Walk from `src` to `dst` along optimal labels computed from `dst`,
    /// always choosing the smallest admissible neighbor. Yields the
    /// lexicographically smallest route among (cost, hops)-optimal ones.
    fn walk(&self, labels_from_dst: &[Option<Label>], src: usize, dst: usize) -> Option<Vec<usize>> {
        let mut budget = labels_from_dst[src]?;
        let mut route = vec![src];
        let mut current = src;
        while current != dst {
            let mut next: Option<(NodeId, usize, Label)> = None;
            for n in &self.adjacency[current] {
                if !n.open {
                    continue;
                }
                let Some(cl) = labels_from_dst[n.node] else { continue };
                if cl.hops + 1 != budget.hops {
                    continue;
                }
                if (cl.cost + n.cost - budget.cost).abs() > COST_TIE_EPS {
                    continue;
                }
                let cid = self.ids[n.node];
                if next.as_ref().map_or(true, |(bid, _, _)| cid < *bid) {
                    next = Some((cid, n.node, cl));
                }
            }
            let (_, chosen, label) = next?;
            route.push(chosen);
            budget = label;
            current = chosen;
        }
        Some(route)
    }

    fn route_from_indices(&self, indices: &[usize], layer: LayerId) -> Route {
        let nodes: Vec<NodeId> = indices.iter().map(|&i| self.ids[i]).collect();
        // Sum edge costs front to back so the accumulation order is the
        // route order.
        let mut total = 0.0;
        for pair in indices.windows(2) {
            let cost = self.adjacency[pair[0]]
                .iter()
                .find(|n| n.node == pair[1] && n.open)
                .map(|n| n.cost)
                .unwrap_or(0.0);
            total += cost;
        }
        Route { nodes, total_cost: total, layer }
    }

    fn shortest(&self, src: NodeId, dst: NodeId, layer: LayerId) -> Result<Route, SearchError> {
        let si = self.index_of(src).ok_or(SearchError::NodeNotFound(src))?;
        let di = self.index_of(dst).ok_or(SearchError::NodeNotFound(dst))?;
        if si == di {
            return Ok(Route { nodes: vec![src], total_cost: 0.0, layer });
        }
        let labels = self.labels(di);
        let indices = self.walk(&labels, si, di).ok_or(SearchError::NoRoute { src, dst })?;
        Ok(self.route_from_indices(&indices, layer))
    }
}

/// Min-cost route over the subsampled graph using only traversable edges.
pub fn shortest_path(sg: &Subgraph<'_>, src: NodeId, dst: NodeId) -> Result<Route, SearchError> {
    shortest_path_excluding(sg, src, dst, &[])
}

/// As [`shortest_path`], additionally treating the listed unordered node
/// pairs as absent. Used by the k-best alternate search.
pub fn shortest_path_excluding(
    sg: &Subgraph<'_>,
    src: NodeId,
    dst: NodeId,
    excluded: &[(NodeId, NodeId)],
) -> Result<Route, SearchError> {
    let graph = SearchGraph::from_traversable(sg.node_ids(), sg.edges(), excluded);
    graph.shortest(src, dst, sg.parent().layer)
}

/// Min-cost route over the full multi-domain graph, filtering tags and
/// statuses inline during relaxation instead of pre-subsampling. This is the
/// baseline arm of the subsampling comparison; it must return routes
/// identical to [`shortest_path`] over the extracted view.
pub fn shortest_path_multi_domain(
    graph: &Graph,
    src: NodeId,
    dst: NodeId,
) -> Result<Route, SearchError> {
    let sgraph = SearchGraph::from_multi_domain(graph.nodes.keys().copied(), graph.edges.iter());
    sgraph.shortest(src, dst, graph.layer)
}

/// Up to `k` loopless routes ordered by cost: the Dijkstra shortest plus
/// alternates found by excluding each incumbent edge in turn and keeping the
/// cheapest distinct results.
pub fn eval_global_layer_path(
    sg: &Subgraph<'_>,
    src: NodeId,
    dst: NodeId,
    k: usize,
) -> Result<Vec<Route>, SearchError> {
    let incumbent = shortest_path(sg, src, dst)?;
    let mut routes = vec![incumbent.clone()];
    if k <= 1 {
        return Ok(routes);
    }
    let mut alternates: Vec<Route> = Vec::new();
    for pair in incumbent.nodes.windows(2) {
        let excluded = [(pair[0], pair[1])];
        if let Ok(alt) = shortest_path_excluding(sg, src, dst, &excluded) {
            if alt.nodes != incumbent.nodes && !alternates.iter().any(|r| r.nodes == alt.nodes) {
                alternates.push(alt);
            }
        }
    }
    alternates.sort_by(route_order);
    routes.extend(alternates.into_iter().take(k - 1));
    Ok(routes)
}

/// Total order on routes: cost (with tie tolerance), then hops, then node
/// sequence.
pub fn route_order(a: &Route, b: &Route) -> Ordering {
    if (a.total_cost - b.total_cost).abs() <= COST_TIE_EPS {
        a.hops().cmp(&b.hops()).then_with(|| a.nodes.cmp(&b.nodes))
    } else {
        a.total_cost.total_cmp(&b.total_cost)
    }
}

/// The best route of a non-empty set under [`route_order`].
pub fn get_best_path(routes: &[Route]) -> Result<&Route, SearchError> {
    routes.iter().min_by(|a, b| route_order(a, b)).ok_or(SearchError::EmptySet)
}

/// Split a route into its consecutive-pair segments.
pub fn segment_path(route: &Route) -> Vec<GlobalSegment> {
    route
        .nodes
        .windows(2)
        .map(|pair| GlobalSegment { from: pair[0], to: pair[1] })
        .collect()
}
