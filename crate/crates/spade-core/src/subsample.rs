//! Domain-aware graph subsampling.
//!
//! Before any path search, the multi-domain layer graph is reduced to the
//! actionable subgraph for the task at hand: path finding keeps traversability
//! edges, anomaly detection keeps observational edges, scene understanding
//! keeps symbolic edges. Nodes are never dropped, so node ids stay stable
//! across the planner. The subgraph is a view into the parent graph (edge
//! indices), not a copy; re-subsampling after a status mutation is cheap.
//!
//! Blocked traversability edges are retained in the view; the search layer
//! skips them at relaxation time, which lets a later status restoration take
//! effect without rebuilding anything.

use crate::lsg::{Edge, EdgeTag, Graph, NodeId};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// The planning action selecting the subsampling filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskMode {
    PathFinding,
    AnomalyDetection,
    SceneUnderstanding,
}

impl TaskMode {
    /// The single edge tag this mode retains.
    pub fn selected_tag(self) -> EdgeTag {
        match self {
            TaskMode::PathFinding => EdgeTag::Traversability,
            TaskMode::AnomalyDetection => EdgeTag::Observational,
            TaskMode::SceneUnderstanding => EdgeTag::Symbolic,
        }
    }
}

impl fmt::Display for TaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TaskMode::PathFinding => "path-finding",
            TaskMode::AnomalyDetection => "anomaly-detection",
            TaskMode::SceneUnderstanding => "scene-understanding",
        };
        f.write_str(s)
    }
}

impl FromStr for TaskMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "path-finding" => Ok(TaskMode::PathFinding),
            "anomaly-detection" => Ok(TaskMode::AnomalyDetection),
            "scene-understanding" => Ok(TaskMode::SceneUnderstanding),
            other => Err(format!("unknown task mode '{other}'")),
        }
    }
}

/// A filtered view of a parent graph: full node set, edges restricted to the
/// mode's tag.
#[derive(Clone, Debug)]
pub struct Subgraph<'g> {
    parent: &'g Graph,
    mode: TaskMode,
    edge_indices: Vec<usize>,
}

impl<'g> Subgraph<'g> {
    pub fn parent(&self) -> &'g Graph {
        self.parent
    }

    pub fn mode(&self) -> TaskMode {
        self.mode
    }

    pub fn node_count(&self) -> usize {
        self.parent.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_indices.len()
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        self.parent.contains_node(id)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.parent.nodes.keys().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = &'g Edge> + '_ {
        self.edge_indices.iter().map(|&i| &self.parent.edges[i])
    }

    /// Materialize the view as a standalone graph (same nodes, retained edges).
    pub fn as_graph(&self) -> Graph {
        Graph {
            layer: self.parent.layer,
            nodes: self.parent.nodes.clone(),
            edges: self.edges().cloned().collect(),
        }
    }
}

/// Extract the task-specific actionable subgraph in one pass over the edges.
pub fn extract_domain_subgraph(graph: &Graph, mode: TaskMode) -> Subgraph<'_> {
    let tag = mode.selected_tag();
    let edge_indices = graph
        .edges
        .iter()
        .enumerate()
        .filter(|(_, e)| e.attr.tag() == tag)
        .map(|(i, _)| i)
        .collect();
    Subgraph { parent: graph, mode, edge_indices }
}
