//! Nested layered scene graph data model.
//!
//! A [`LayeredSceneGraph`] nests four layers: every Target node contains a
//! Level graph, every Level node contains a Pose graph, and Pose nodes may
//! contain a Feature graph. Edges are undirected; a node pair may carry up to
//! one edge of each attribute tag (symbolic / traversability / observational).
//!
//! Mutations are limited to flipping the traversability status of an edge;
//! every flip is appended to a mutation log with a monotone sequence number so
//! planners can detect staleness and tests can assert mutation minimality.

pub mod document;

use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Abstraction layer of a node or graph. Ordered by abstraction height:
/// `Target > Level > Pose > Feature`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerId {
    Target,
    Level,
    Pose,
    Feature,
}

impl LayerId {
    pub fn height(self) -> u8 {
        match self {
            LayerId::Target => 3,
            LayerId::Level => 2,
            LayerId::Pose => 1,
            LayerId::Feature => 0,
        }
    }

    /// The layer nested one step below, if any.
    pub fn child(self) -> Option<LayerId> {
        match self {
            LayerId::Target => Some(LayerId::Level),
            LayerId::Level => Some(LayerId::Pose),
            LayerId::Pose => Some(LayerId::Feature),
            LayerId::Feature => None,
        }
    }

    pub fn prefix(self) -> char {
        match self {
            LayerId::Target => 't',
            LayerId::Level => 'l',
            LayerId::Pose => 'p',
            LayerId::Feature => 'f',
        }
    }
}

impl PartialOrd for LayerId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LayerId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.height().cmp(&other.height())
    }
}

/// Identifies a node within its containing graph. Only the pair
/// (layer, index) is carried; full identity in the whole LSG additionally
/// needs the path of containing parents (see [`NodePath`]).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub layer: LayerId,
    pub index: u32,
}

impl NodeId {
    pub fn new(layer: LayerId, index: u32) -> Self {
        NodeId { layer, index }
    }

    pub fn target(index: u32) -> Self {
        NodeId::new(LayerId::Target, index)
    }

    pub fn level(index: u32) -> Self {
        NodeId::new(LayerId::Level, index)
    }

    pub fn pose(index: u32) -> Self {
        NodeId::new(LayerId::Pose, index)
    }
}

impl PartialOrd for NodeId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for NodeId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Higher layers sort first so mixed-layer collections group naturally;
        // within a graph all nodes share the layer and order by index.
        other
            .layer
            .cmp(&self.layer)
            .then(self.index.cmp(&other.index))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.layer.prefix(), self.index)
    }
}

/// Fully-qualified node address inside the LSG: the chain of containing
/// parent indices down to the node itself. Rendered as e.g. `t3/l0/p5`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodePath {
    Target { target: u32 },
    Level { target: u32, level: u32 },
    Pose { target: u32, level: u32, pose: u32 },
    Feature { target: u32, level: u32, pose: u32, feature: u32 },
}

impl NodePath {
    pub fn layer(self) -> LayerId {
        match self {
            NodePath::Target { .. } => LayerId::Target,
            NodePath::Level { .. } => LayerId::Level,
            NodePath::Pose { .. } => LayerId::Pose,
            NodePath::Feature { .. } => LayerId::Feature,
        }
    }

    /// The node id within its containing graph.
    pub fn node_id(self) -> NodeId {
        match self {
            NodePath::Target { target } => NodeId::new(LayerId::Target, target),
            NodePath::Level { level, .. } => NodeId::new(LayerId::Level, level),
            NodePath::Pose { pose, .. } => NodeId::new(LayerId::Pose, pose),
            NodePath::Feature { feature, .. } => NodeId::new(LayerId::Feature, feature),
        }
    }

    /// The scope of the graph containing this node.
    pub fn scope(self) -> GraphScope {
        match self {
            NodePath::Target { .. } => GraphScope::Target,
            NodePath::Level { target, .. } => GraphScope::Level { target },
            NodePath::Pose { target, level, .. } => GraphScope::Pose { target, level },
            NodePath::Feature { target, level, pose, .. } => {
                GraphScope::Feature { target, level, pose }
            }
        }
    }

    /// The scope of the graph nested under this node, if its layer nests one.
    pub fn nested_scope(self) -> Option<GraphScope> {
        match self {
            NodePath::Target { target } => Some(GraphScope::Level { target }),
            NodePath::Level { target, level } => Some(GraphScope::Pose { target, level }),
            NodePath::Pose { target, level, pose } => {
                Some(GraphScope::Feature { target, level, pose })
            }
            NodePath::Feature { .. } => None,
        }
    }

    pub fn parent(self) -> Option<NodePath> {
        match self {
            NodePath::Target { .. } => None,
            NodePath::Level { target, .. } => Some(NodePath::Target { target }),
            NodePath::Pose { target, level, .. } => Some(NodePath::Level { target, level }),
            NodePath::Feature { target, level, pose, .. } => {
                Some(NodePath::Pose { target, level, pose })
            }
        }
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NodePath::Target { target } => write!(f, "t{target}"),
            NodePath::Level { target, level } => write!(f, "t{target}/l{level}"),
            NodePath::Pose { target, level, pose } => write!(f, "t{target}/l{level}/p{pose}"),
            NodePath::Feature { target, level, pose, feature } => {
                write!(f, "t{target}/l{level}/p{pose}/f{feature}")
            }
        }
    }
}

impl FromStr for NodePath {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut ids = [0u32; 4];
        let mut n = 0;
        for (i, part) in s.split('/').enumerate() {
            if i >= 4 {
                return Err(format!("too many path segments in '{s}'"));
            }
            let expect = ['t', 'l', 'p', 'f'][i];
            let rest = part
                .strip_prefix(expect)
                .ok_or_else(|| format!("expected '{expect}<index>' at segment {i} of '{s}'"))?;
            ids[i] = rest
                .parse()
                .map_err(|_| format!("bad index '{rest}' in '{s}'"))?;
            n = i + 1;
        }
        match n {
            1 => Ok(NodePath::Target { target: ids[0] }),
            2 => Ok(NodePath::Level { target: ids[0], level: ids[1] }),
            3 => Ok(NodePath::Pose { target: ids[0], level: ids[1], pose: ids[2] }),
            4 => Ok(NodePath::Feature {
                target: ids[0],
                level: ids[1],
                pose: ids[2],
                feature: ids[3],
            }),
            _ => Err(format!("empty node path '{s}'")),
        }
    }
}

/// Addresses one graph inside the LSG: the top-level Target graph, or the
/// nested graph under a Target / Level / Pose node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GraphScope {
    Target,
    Level { target: u32 },
    Pose { target: u32, level: u32 },
    Feature { target: u32, level: u32, pose: u32 },
}

impl GraphScope {
    pub fn layer(self) -> LayerId {
        match self {
            GraphScope::Target => LayerId::Target,
            GraphScope::Level { .. } => LayerId::Level,
            GraphScope::Pose { .. } => LayerId::Pose,
            GraphScope::Feature { .. } => LayerId::Feature,
        }
    }

    /// Path of a node with the given index inside this graph.
    pub fn node_path(self, index: u32) -> NodePath {
        match self {
            GraphScope::Target => NodePath::Target { target: index },
            GraphScope::Level { target } => NodePath::Level { target, level: index },
            GraphScope::Pose { target, level } => NodePath::Pose { target, level, pose: index },
            GraphScope::Feature { target, level, pose } => {
                NodePath::Feature { target, level, pose, feature: index }
            }
        }
    }
}

impl fmt::Display for GraphScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GraphScope::Target => write!(f, "targets"),
            GraphScope::Level { target } => write!(f, "t{target}"),
            GraphScope::Pose { target, level } => write!(f, "t{target}/l{level}"),
            GraphScope::Feature { target, level, pose } => {
                write!(f, "t{target}/l{level}/p{pose}")
            }
        }
    }
}

impl FromStr for GraphScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() || s == "targets" {
            return Ok(GraphScope::Target);
        }
        let path: NodePath = s.parse()?;
        path.nested_scope()
            .ok_or_else(|| format!("'{s}' names a feature node, which nests no graph"))
    }
}

/// Semantic traversability status of a traversability edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraversabilityStatus {
    Traversable,
    Blocked,
}

/// Discriminant of the three edge relation kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeTag {
    Symbolic,
    Traversability,
    Observational,
}

/// Payload of one edge relation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EdgeAttribute {
    /// Parent-child or sibling symbolic relation; no payload.
    Symbolic,
    /// Weighted traversable cost plus semantic status.
    Traversability { cost: f64, status: TraversabilityStatus },
    /// Detection confidence and distance to the observed object.
    Observational { confidence: f64, distance: f64 },
}

impl EdgeAttribute {
    pub fn tag(&self) -> EdgeTag {
        match self {
            EdgeAttribute::Symbolic => EdgeTag::Symbolic,
            EdgeAttribute::Traversability { .. } => EdgeTag::Traversability,
            EdgeAttribute::Observational { .. } => EdgeTag::Observational,
        }
    }
}

/// An undirected edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub attr: EdgeAttribute,
}

impl Edge {
    /// True if this edge connects the (unordered) pair `a`, `b`.
    pub fn connects(&self, a: NodeId, b: NodeId) -> bool {
        (self.u == a && self.v == b) || (self.u == b && self.v == a)
    }
}

/// Attributes attached to one node, including the nested lower-layer graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeAttributes {
    pub pose: Vec3,
    pub layer: LayerId,
    pub nested: Option<Box<Graph>>,
    pub inspection_status: Option<f64>,
    pub designated_transition_level: Option<NodeId>,
}

impl NodeAttributes {
    pub fn new(layer: LayerId, pose: Vec3) -> Self {
        NodeAttributes {
            pose,
            layer,
            nested: None,
            inspection_status: None,
            designated_transition_level: None,
        }
    }
}

/// One single-layer graph: nodes keyed by id, undirected attributed edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub layer: LayerId,
    pub nodes: BTreeMap<NodeId, NodeAttributes>,
    pub edges: Vec<Edge>,
}

impl Graph {
    pub fn new(layer: LayerId) -> Self {
        Graph { layer, nodes: BTreeMap::new(), edges: Vec::new() }
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeAttributes> {
        self.nodes.get(&id)
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn insert_node(&mut self, index: u32, attrs: NodeAttributes) -> NodeId {
        let id = NodeId::new(self.layer, index);
        self.nodes.insert(id, attrs);
        id
    }

    pub fn add_edge(&mut self, u: NodeId, v: NodeId, attr: EdgeAttribute) {
        self.edges.push(Edge { u, v, attr });
    }

    /// The traversability edge between the unordered pair, if any.
    pub fn traversability_between(&self, a: NodeId, b: NodeId) -> Option<&Edge> {
        self.edges
            .iter()
            .find(|e| e.connects(a, b) && e.attr.tag() == EdgeTag::Traversability)
    }

    /// True if some edge (of any tag) connects the pair.
    pub fn any_edge_between(&self, a: NodeId, b: NodeId) -> bool {
        self.edges.iter().any(|e| e.connects(a, b))
    }
}

/// Robot odometry: position plus heading. The heading is stored normalized
/// to (-pi, pi] and is never consumed by planning.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub position: Vec3,
    pub yaw: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        RobotState { position: Vec3::new(x, y, z), yaw: normalize_yaw(yaw) }
    }

    pub fn from_odom(odom: [f64; 4]) -> Self {
        RobotState::new(odom[0], odom[1], odom[2], odom[3])
    }

    pub fn odom(&self) -> [f64; 4] {
        [self.position.x, self.position.y, self.position.z, self.yaw]
    }
}

/// Normalize an angle to (-pi, pi].
pub fn normalize_yaw(yaw: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = yaw.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}

/// The (Target, Level, Pose) triple the robot is currently localized at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalizedState {
    pub target: u32,
    pub level: u32,
    pub pose: u32,
}

impl LocalizedState {
    pub fn target_path(&self) -> NodePath {
        NodePath::Target { target: self.target }
    }

    pub fn level_path(&self) -> NodePath {
        NodePath::Level { target: self.target, level: self.level }
    }

    pub fn pose_path(&self) -> NodePath {
        NodePath::Pose { target: self.target, level: self.level, pose: self.pose }
    }

    pub fn target_id(&self) -> NodeId {
        NodeId::target(self.target)
    }

    pub fn level_id(&self) -> NodeId {
        NodeId::level(self.level)
    }

    pub fn pose_id(&self) -> NodeId {
        NodeId::pose(self.pose)
    }
}

/// One recorded traversability-status mutation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MutationRecord {
    pub seq: u64,
    pub scope: GraphScope,
    pub u: NodeId,
    pub v: NodeId,
    pub status: TraversabilityStatus,
}

#[derive(Debug, Error)]
pub enum LsgError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invariant violation at {path}: {message}")]
    Invariant { path: String, message: String },
    #[error("graph contains no pose nodes")]
    EmptyGraph,
    #[error("no edge between {u} and {v} in {scope}")]
    NoSuchEdge { scope: GraphScope, u: NodeId, v: NodeId },
    #[error("edge {u}-{v} in {scope} carries no traversability attribute")]
    NotTraversabilityEdge { scope: GraphScope, u: NodeId, v: NodeId },
    #[error("{0} has no nested graph")]
    NoNestedGraph(NodePath),
    #[error("no such node {0}")]
    NodeNotFound(NodePath),
    #[error("no such graph {0}")]
    NoSuchScope(GraphScope),
}

/// The whole nested scene graph plus its mutation log.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredSceneGraph {
    pub target_graph: Graph,
    mutation_log: Vec<MutationRecord>,
}

impl LayeredSceneGraph {
    pub fn new(target_graph: Graph) -> Self {
        LayeredSceneGraph { target_graph, mutation_log: Vec::new() }
    }

    pub fn mutation_log(&self) -> &[MutationRecord] {
        &self.mutation_log
    }

    /// Version counter: bumps once per traversability mutation.
    pub fn version(&self) -> u64 {
        self.mutation_log.len() as u64
    }

    /// Resolve a graph scope to the graph it addresses.
    pub fn graph(&self, scope: GraphScope) -> Result<&Graph, LsgError> {
        match scope {
            GraphScope::Target => Ok(&self.target_graph),
            GraphScope::Level { target } => self
                .nested_of(NodePath::Target { target })
                .map_err(|_| LsgError::NoSuchScope(scope)),
            GraphScope::Pose { target, level } => self
                .nested_of(NodePath::Level { target, level })
                .map_err(|_| LsgError::NoSuchScope(scope)),
            GraphScope::Feature { target, level, pose } => self
                .nested_of(NodePath::Pose { target, level, pose })
                .map_err(|_| LsgError::NoSuchScope(scope)),
        }
    }

    fn graph_mut(&mut self, scope: GraphScope) -> Result<&mut Graph, LsgError> {
        let missing = LsgError::NoSuchScope(scope);
        match scope {
            GraphScope::Target => Ok(&mut self.target_graph),
            GraphScope::Level { target } => self
                .target_graph
                .nodes
                .get_mut(&NodeId::target(target))
                .and_then(|n| n.nested.as_deref_mut())
                .ok_or(missing),
            GraphScope::Pose { target, level } => self
                .target_graph
                .nodes
                .get_mut(&NodeId::target(target))
                .and_then(|n| n.nested.as_deref_mut())
                .and_then(|g| g.nodes.get_mut(&NodeId::level(level)))
                .and_then(|n| n.nested.as_deref_mut())
                .ok_or(missing),
            GraphScope::Feature { target, level, pose } => self
                .target_graph
                .nodes
                .get_mut(&NodeId::target(target))
                .and_then(|n| n.nested.as_deref_mut())
                .and_then(|g| g.nodes.get_mut(&NodeId::level(level)))
                .and_then(|n| n.nested.as_deref_mut())
                .and_then(|g| g.nodes.get_mut(&NodeId::pose(pose)))
                .and_then(|n| n.nested.as_deref_mut())
                .ok_or(missing),
        }
    }

    /// Attributes of the node addressed by `path`.
    pub fn node_at(&self, path: NodePath) -> Result<&NodeAttributes, LsgError> {
        let graph = self.graph(path.scope())?;
        graph.node(path.node_id()).ok_or(LsgError::NodeNotFound(path))
    }

    /// The one-layer-lower graph nested under the node at `path`.
    pub fn nested_graph(&self, path: NodePath) -> Result<&Graph, LsgError> {
        self.nested_of(path)
    }

    fn nested_of(&self, path: NodePath) -> Result<&Graph, LsgError> {
        let attrs = self.node_at(path)?;
        attrs
            .nested
            .as_deref()
            .ok_or(LsgError::NoNestedGraph(path))
    }

    /// Iterate all Pose nodes in the LSG as (path, attributes), in
    /// lexicographic (target, level, pose) order.
    pub fn iter_poses(&self) -> impl Iterator<Item = (NodePath, &NodeAttributes)> {
        self.target_graph.nodes.iter().flat_map(move |(tid, tattrs)| {
            let target = tid.index;
            tattrs.nested.iter().flat_map(move |levels| {
                levels.nodes.iter().flat_map(move |(lid, lattrs)| {
                    let level = lid.index;
                    lattrs.nested.iter().flat_map(move |poses| {
                        poses.nodes.iter().map(move |(pid, pattrs)| {
                            (NodePath::Pose { target, level, pose: pid.index }, pattrs)
                        })
                    })
                })
            })
        })
    }

    /// Nearest-Pose localization over the whole LSG. Heading is ignored.
    /// Ties resolve to the lexicographically smallest (target, level, pose).
    pub fn localize(&self, odom: &RobotState) -> Result<LocalizedState, LsgError> {
        let mut best: Option<(f64, NodePath)> = None;
        for (path, attrs) in self.iter_poses() {
            let d2 = attrs.pose.distance_sq(odom.position);
            // Iteration order is lexicographic, so strict improvement keeps
            // the first of any tied set.
            if best.map_or(true, |(bd, _)| d2 < bd) {
                best = Some((d2, path));
            }
        }
        match best {
            Some((_, NodePath::Pose { target, level, pose })) => {
                Ok(LocalizedState { target, level, pose })
            }
            _ => Err(LsgError::EmptyGraph),
        }
    }

    /// Flip the traversability status of the edge between `u` and `v` inside
    /// the addressed graph, recording the mutation. Returns the new sequence
    /// number.
    pub fn set_edge_traversability(
        &mut self,
        scope: GraphScope,
        u: NodeId,
        v: NodeId,
        status: TraversabilityStatus,
    ) -> Result<u64, LsgError> {
        let seq = self.mutation_log.len() as u64 + 1;
        {
            let graph = self.graph_mut(scope)?;
            let mut any_between = false;
            let mut found = None;
            for edge in graph.edges.iter_mut() {
                if edge.connects(u, v) {
                    any_between = true;
                    if let EdgeAttribute::Traversability { status: s, .. } = &mut edge.attr {
                        found = Some(s);
                        break;
                    }
                }
            }
            match found {
                Some(s) => *s = status,
                None if any_between => {
                    return Err(LsgError::NotTraversabilityEdge { scope, u, v })
                }
                None => return Err(LsgError::NoSuchEdge { scope, u, v }),
            }
        }
        self.mutation_log.push(MutationRecord { seq, scope, u, v, status });
        Ok(seq)
    }

    /// Validate all structural invariants, returning the first violation.
    pub fn validate(&self) -> Result<(), LsgError> {
        validate_graph(&self.target_graph, LayerId::Target, "targets")?;
        for (tid, tattrs) in &self.target_graph.nodes {
            let tpath = format!("targets[t{}]", tid.index);
            if let Some(i) = tattrs.inspection_status {
                if !(i >= 0.0) {
                    return Err(LsgError::Invariant {
                        path: tpath.clone(),
                        message: format!("inspection_status {i} must be >= 0"),
                    });
                }
            }
            let levels = tattrs.nested.as_deref().ok_or_else(|| LsgError::Invariant {
                path: tpath.clone(),
                message: "target node lacks a nested level graph".into(),
            })?;
            if let Some(designated) = tattrs.designated_transition_level {
                if !levels.contains_node(designated) {
                    return Err(LsgError::Invariant {
                        path: tpath.clone(),
                        message: format!(
                            "designated transition level {designated} not in nested level graph"
                        ),
                    });
                }
            }
            // A target touching any traversability edge must carry a
            // designated transition level.
            let participates = self
                .target_graph
                .edges
                .iter()
                .any(|e| (e.u == *tid || e.v == *tid) && e.attr.tag() == EdgeTag::Traversability);
            if participates && tattrs.designated_transition_level.is_none() {
                return Err(LsgError::Invariant {
                    path: tpath.clone(),
                    message: "target participates in traversability edges but designates no \
                              transition level"
                        .into(),
                });
            }
            validate_graph(levels, LayerId::Level, &tpath)?;
            for (lid, lattrs) in &levels.nodes {
                let lpath = format!("{tpath}.levels[l{}]", lid.index);
                let poses = lattrs.nested.as_deref().ok_or_else(|| LsgError::Invariant {
                    path: lpath.clone(),
                    message: "level node lacks a nested pose graph".into(),
                })?;
                validate_graph(poses, LayerId::Pose, &lpath)?;
                for (pid, pattrs) in &poses.nodes {
                    let ppath = format!("{lpath}.poses[p{}]", pid.index);
                    if let Some(features) = pattrs.nested.as_deref() {
                        validate_graph(features, LayerId::Feature, &ppath)?;
                        for (fid, fattrs) in &features.nodes {
                            if fattrs.nested.is_some() {
                                return Err(LsgError::Invariant {
                                    path: format!("{ppath}.features[f{}]", fid.index),
                                    message: "feature nodes must not nest a graph".into(),
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn validate_graph(graph: &Graph, expect_layer: LayerId, path: &str) -> Result<(), LsgError> {
    if graph.layer != expect_layer {
        return Err(LsgError::Invariant {
            path: path.into(),
            message: format!("graph layer {:?} does not match nesting {:?}", graph.layer, expect_layer),
        });
    }
    for (id, attrs) in &graph.nodes {
        if id.layer != expect_layer || attrs.layer != expect_layer {
            return Err(LsgError::Invariant {
                path: format!("{path}[{id}]"),
                message: "node layer does not match its graph".into(),
            });
        }
        if !attrs.pose.is_finite() {
            return Err(LsgError::Invariant {
                path: format!("{path}[{id}]"),
                message: "node pose must be finite".into(),
            });
        }
        if let Some(nested) = attrs.nested.as_deref() {
            match expect_layer.child() {
                Some(child) if nested.layer == child => {}
                _ => {
                    return Err(LsgError::Invariant {
                        path: format!("{path}[{id}]"),
                        message: "nested graph not exactly one layer below its node".into(),
                    })
                }
            }
        }
    }
    for (i, edge) in graph.edges.iter().enumerate() {
        let epath = format!("{path}.edges[{i}]");
        for end in [edge.u, edge.v] {
            if !graph.contains_node(end) {
                return Err(LsgError::Invariant {
                    path: epath.clone(),
                    message: format!("edge endpoint {end} not in graph"),
                });
            }
        }
        match &edge.attr {
            EdgeAttribute::Traversability { cost, .. } => {
                if !(*cost >= 0.0) || !cost.is_finite() {
                    return Err(LsgError::Invariant {
                        path: epath.clone(),
                        message: format!("traversability cost {cost} must be finite and >= 0"),
                    });
                }
            }
            EdgeAttribute::Observational { confidence, distance } => {
                if !(0.0..=1.0).contains(confidence) {
                    return Err(LsgError::Invariant {
                        path: epath.clone(),
                        message: format!("confidence {confidence} outside [0, 1]"),
                    });
                }
                if !(*distance >= 0.0) || !distance.is_finite() {
                    return Err(LsgError::Invariant {
                        path: epath.clone(),
                        message: format!("observational distance {distance} must be >= 0"),
                    });
                }
            }
            EdgeAttribute::Symbolic => {}
        }
        // At most one edge per tag between a pair.
        for later in &graph.edges[i + 1..] {
            if later.connects(edge.u, edge.v) && later.attr.tag() == edge.attr.tag() {
                return Err(LsgError::Invariant {
                    path: epath.clone(),
                    message: format!(
                        "duplicate {:?} edge between {} and {}",
                        edge.attr.tag(),
                        edge.u,
                        edge.v
                    ),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose_graph(poses: &[(f64, f64, f64)]) -> Graph {
        let mut g = Graph::new(LayerId::Pose);
        for (i, &(x, y, z)) in poses.iter().enumerate() {
            g.insert_node(i as u32, NodeAttributes::new(LayerId::Pose, Vec3::new(x, y, z)));
        }
        g
    }

    fn single_target_lsg(poses: &[(f64, f64, f64)]) -> LayeredSceneGraph {
        let mut level = NodeAttributes::new(LayerId::Level, Vec3::ZERO);
        level.nested = Some(Box::new(pose_graph(poses)));
        let mut levels = Graph::new(LayerId::Level);
        levels.insert_node(0, level);
        let mut target = NodeAttributes::new(LayerId::Target, Vec3::ZERO);
        target.nested = Some(Box::new(levels));
        let mut targets = Graph::new(LayerId::Target);
        targets.insert_node(0, target);
        LayeredSceneGraph::new(targets)
    }

    #[test]
    fn yaw_normalization_range() {
        assert!((normalize_yaw(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(normalize_yaw(std::f64::consts::PI), std::f64::consts::PI);
        assert!(normalize_yaw(-std::f64::consts::PI) > 0.0);
        assert_eq!(normalize_yaw(0.0), 0.0);
    }

    #[test]
    fn localize_exact_pose_hit() {
        let lsg = single_target_lsg(&[(0.0, 0.0, 0.0), (5.0, 0.0, 0.0), (0.0, 5.0, 0.0)]);
        let loc = lsg.localize(&RobotState::new(5.0, 0.0, 0.0, 0.3)).unwrap();
        assert_eq!(loc, LocalizedState { target: 0, level: 0, pose: 1 });
    }

    #[test]
    fn localize_tie_prefers_lexicographic() {
        // Robot equidistant from pose 0 and pose 1.
        let lsg = single_target_lsg(&[(-1.0, 0.0, 0.0), (1.0, 0.0, 0.0)]);
        let loc = lsg.localize(&RobotState::new(0.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(loc.pose, 0);
    }

    #[test]
    fn localize_empty_graph_errors() {
        let lsg = single_target_lsg(&[]);
        assert!(matches!(
            lsg.localize(&RobotState::new(0.0, 0.0, 0.0, 0.0)),
            Err(LsgError::EmptyGraph)
        ));
    }

    #[test]
    fn set_traversability_round_trip_logs_twice() {
        let mut lsg = single_target_lsg(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0)]);
        let scope = GraphScope::Pose { target: 0, level: 0 };
        {
            let g = lsg.graph_mut(scope).unwrap();
            g.add_edge(
                NodeId::pose(0),
                NodeId::pose(1),
                EdgeAttribute::Traversability { cost: 1.0, status: TraversabilityStatus::Traversable },
            );
        }
        lsg.set_edge_traversability(scope, NodeId::pose(0), NodeId::pose(1), TraversabilityStatus::Blocked)
            .unwrap();
        lsg.set_edge_traversability(scope, NodeId::pose(1), NodeId::pose(0), TraversabilityStatus::Traversable)
            .unwrap();
        assert_eq!(lsg.mutation_log().len(), 2);
        assert_eq!(lsg.version(), 2);
        let edge = lsg.graph(scope).unwrap().traversability_between(NodeId::pose(0), NodeId::pose(1)).unwrap();
        assert_eq!(
            edge.attr,
            EdgeAttribute::Traversability { cost: 1.0, status: TraversabilityStatus::Traversable }
        );
    }

    #[test]
    fn set_traversability_rejects_symbolic_only_pair() {
        let mut lsg = single_target_lsg(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0)]);
        let scope = GraphScope::Pose { target: 0, level: 0 };
        lsg.graph_mut(scope).unwrap().add_edge(NodeId::pose(0), NodeId::pose(1), EdgeAttribute::Symbolic);
        let err = lsg
            .set_edge_traversability(scope, NodeId::pose(0), NodeId::pose(1), TraversabilityStatus::Blocked)
            .unwrap_err();
        assert!(matches!(err, LsgError::NotTraversabilityEdge { .. }));
        let err = lsg
            .set_edge_traversability(scope, NodeId::pose(0), NodeId::pose(7), TraversabilityStatus::Blocked)
            .unwrap_err();
        assert!(matches!(err, LsgError::NoSuchEdge { .. }));
        assert_eq!(lsg.mutation_log().len(), 0);
    }

    #[test]
    fn nested_graph_feature_node_errors() {
        let lsg = single_target_lsg(&[(0.0, 0.0, 0.0)]);
        let level = lsg.nested_graph(NodePath::Target { target: 0 }).unwrap();
        assert_eq!(level.layer, LayerId::Level);
        let err = lsg
            .nested_graph(NodePath::Pose { target: 0, level: 0, pose: 0 })
            .unwrap_err();
        assert!(matches!(err, LsgError::NoNestedGraph(_)));
    }

    #[test]
    fn node_path_round_trips_strings() {
        for s in ["t3", "t3/l0", "t3/l0/p5", "t0/l1/p2/f9"] {
            let p: NodePath = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("x3".parse::<NodePath>().is_err());
        assert!("t3/p0".parse::<NodePath>().is_err());
    }

    #[test]
    fn layer_order_is_by_abstraction_height() {
        assert!(LayerId::Target > LayerId::Level);
        assert!(LayerId::Level > LayerId::Pose);
        assert!(LayerId::Pose > LayerId::Feature);
    }
}
