//! Hierarchical semantic-geometric planning.
//!
//! Global planning runs once over the Target-layer subgraph; each global
//! segment is then realized by local planning across the nested Level/Pose
//! graphs of the targets involved. The planner never searches more than one
//! nested graph at a time, so the graph size it is exposed to is bounded by
//! the largest single Level/Pose graph.
//!
//! When a hop of the local plan is found blocked, recovery cascades in a
//! fixed order: geometric detour within the local map, then a local-layer
//! replan after flipping the hop's edge status, then a global-layer replan
//! after flipping the segment's Target edge. Only the last two mutate the
//! scene graph.

mod driver;

pub use driver::{plan_query, PlanDriver, QueryOutcome, StepStatus};

use crate::lsg::{
    GraphScope, LayeredSceneGraph, LocalizedState, LsgError, NodeId, NodePath,
    TraversabilityStatus,
};
use crate::search::{
    eval_global_layer_path, get_best_path, segment_path, shortest_path, GlobalSegment, Route,
    SearchError,
};
use crate::spatial::nearest_node;
use crate::subsample::{extract_domain_subgraph, TaskMode};
use crate::trace::{TraceEvent, TraceEventKind};
use crate::vec3::Vec3;
use crate::voxel::{alt_local_geometric_path, GeomError, GeometricPath, VoxelGrid};
use std::collections::BTreeMap;
use thiserror::Error;

/// Tunable planner parameters. All CLI-overridable.
#[derive(Clone, Copy, Debug)]
pub struct PlannerConfig {
    /// Number of global routes requested from the k-best search.
    pub k_routes: usize,
    /// Robot inflation radius for collision checks, meters.
    pub robot_radius: f64,
    /// Side length of the detour search box, meters.
    pub detour_bound: f64,
    /// Pose-graph size above which nearest-pose queries use a kd-tree.
    pub kd_threshold: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            k_routes: 1,
            robot_radius: 0.3,
            detour_bound: 20.0,
            kd_threshold: crate::spatial::DEFAULT_KD_THRESHOLD,
        }
    }
}

/// A navigational query: terminal target, optionally refined to a level and
/// a pose within it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Query {
    pub target: u32,
    pub level: Option<u32>,
    pub pose: Option<u32>,
}

/// Transition landmark nodes connecting adjacent local layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TransitionNodes {
    /// The current target's designated transition level (its "Level-0").
    pub level: NodePath,
    /// Pose inside `level`'s pose graph from which the target is left
    /// (nearest to the destination target), or the terminal pose for
    /// intra-target queries.
    pub pose: NodePath,
    /// Entry pose inside the destination target's designated level, nearest
    /// to `pose`. Absent for the terminal intra-target stage.
    pub target_entry_pose: Option<NodePath>,
}

/// One node visited by a local plan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hop {
    pub path: NodePath,
    pub position: Vec3,
}

/// How two consecutive hops are connected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HopLink {
    /// A traversability edge of the named graph.
    Edge { scope: GraphScope, u: NodeId, v: NodeId },
    /// Sanctioned layer shift at a transition node (no graph edge).
    Transition,
    /// The implicit connection between two targets' entry poses.
    InterTarget,
}

impl HopLink {
    pub fn label(&self) -> &'static str {
        match self {
            HopLink::Edge { .. } => "edge",
            HopLink::Transition => "transition",
            HopLink::InterTarget => "inter_target",
        }
    }
}

/// The local route realizing one global segment (or the terminal intra-target
/// stage), as an ordered hop list plus per-pair connectivity.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalPlan {
    pub hops: Vec<Hop>,
    /// links[i] connects hops[i] to hops[i+1].
    pub links: Vec<HopLink>,
    pub segment: Option<GlobalSegment>,
    /// Accepted geometric detours: pair index -> intermediate waypoints.
    pub detours: BTreeMap<usize, Vec<Vec3>>,
    /// Node count of every nested graph handed to the path search.
    pub searched_sizes: Vec<usize>,
}

impl LocalPlan {
    pub fn hop_pairs(&self) -> usize {
        self.links.len()
    }

    pub fn hop_strings(&self) -> Vec<String> {
        self.hops.iter().map(|h| h.path.to_string()).collect()
    }

    pub fn link_strings(&self) -> Vec<String> {
        self.links.iter().map(|l| l.label().to_string()).collect()
    }

    /// True if some consecutive pair matches the given unordered path pair.
    pub fn contains_pair(&self, a: NodePath, b: NodePath) -> bool {
        self.hops.windows(2).any(|w| {
            (w[0].path == a && w[1].path == b) || (w[0].path == b && w[1].path == a)
        })
    }
}

/// Result of the blocked-hop recovery cascade.
#[derive(Clone, Debug)]
pub enum ReplanOutcome {
    /// Detour found in the local map; no graph mutation.
    GeometricDetour(GeometricPath),
    /// Local-layer replan succeeded after blocking the hop's edge.
    LocalReplanned(LocalPlan),
    /// Global-layer replan succeeded after blocking the segment's edge.
    GlobalReplanned { route: Route, trans: TransitionNodes, plan: LocalPlan },
    /// No recovery remains.
    Infeasible,
}

/// The stage of local planning that failed to find a route.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockedStage {
    /// Pose-layer search inside the named level's pose graph.
    PoseGraph(NodePath),
    /// Level-layer search inside the named target's level graph.
    LevelGraph(NodePath),
}

impl std::fmt::Display for BlockedStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlockedStage::PoseGraph(level) => write!(f, "pose graph of {level}"),
            BlockedStage::LevelGraph(target) => write!(f, "level graph of {target}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("target {0} designates no transition level")]
    MissingTransitionLevel(NodePath),
    #[error("pose graph of {0} is empty")]
    EmptyPoseGraph(NodePath),
    #[error("no local route through {stage}")]
    NoLocalRoute { stage: BlockedStage },
    #[error("query node not found: {0}")]
    QueryNodeNotFound(String),
    #[error(transparent)]
    Graph(#[from] LsgError),
}

/// Select the transition nodes for a global segment: the current target's
/// designated transition level, the pose of that level nearest to the
/// destination target, and the destination's entry pose nearest to it.
pub fn eval_transition_nodes(
    lsg: &LayeredSceneGraph,
    seg: &GlobalSegment,
    loc: &LocalizedState,
    kd_threshold: usize,
) -> Result<TransitionNodes, PlanError> {
    let cur_target = NodePath::Target { target: loc.target };
    let cur_attrs = lsg.node_at(cur_target)?;
    let cur_designated = cur_attrs
        .designated_transition_level
        .ok_or(PlanError::MissingTransitionLevel(cur_target))?;
    let trans_level = NodePath::Level { target: loc.target, level: cur_designated.index };

    let dest_target = NodePath::Target { target: seg.to.index };
    let dest_attrs = lsg.node_at(dest_target)?;
    let dest_designated = dest_attrs
        .designated_transition_level
        .ok_or(PlanError::MissingTransitionLevel(dest_target))?;
    let dest_level = NodePath::Level { target: seg.to.index, level: dest_designated.index };

    let cur_poses = lsg.nested_graph(trans_level)?;
    let pose_id = nearest_node(cur_poses, dest_attrs.pose, kd_threshold)
        .ok_or(PlanError::EmptyPoseGraph(trans_level))?;
    let pose_path = NodePath::Pose {
        target: loc.target,
        level: cur_designated.index,
        pose: pose_id.index,
    };
    let pose_position = cur_poses.node(pose_id).expect("nearest node exists").pose;

    let dest_poses = lsg.nested_graph(dest_level)?;
    let entry_id = nearest_node(dest_poses, pose_position, kd_threshold)
        .ok_or(PlanError::EmptyPoseGraph(dest_level))?;
    let entry_path = NodePath::Pose {
        target: seg.to.index,
        level: dest_designated.index,
        pose: entry_id.index,
    };

    Ok(TransitionNodes { level: trans_level, pose: pose_path, target_entry_pose: Some(entry_path) })
}

/// Build the local plan realizing `segment` (or the terminal stage when
/// `segment` is `None`) by dynamic layer selection:
///
/// 1. If the robot's level differs from the transition level, route through
///    the current level's pose graph to its exit pose, then through the
///    target's level graph to the transition level.
/// 2. Route through the transition level's pose graph to the transition pose.
/// 3. For inter-target segments, append the implicit hop to the destination
///    target's entry pose.
pub fn eval_local_layer_path(
    lsg: &LayeredSceneGraph,
    segment: Option<&GlobalSegment>,
    loc: &LocalizedState,
    trans: &TransitionNodes,
    kd_threshold: usize,
) -> Result<LocalPlan, PlanError> {
    let mut plan = LocalPlan {
        hops: Vec::new(),
        links: Vec::new(),
        segment: segment.copied(),
        detours: BTreeMap::new(),
        searched_sizes: Vec::new(),
    };

    let trans_level_attrs = lsg.node_at(trans.level)?;
    let trans_poses = lsg.nested_graph(trans.level)?;

    let stage2_src: NodeId;
    if loc.level_path() != trans.level {
        // Stage 1a: pose route inside the current level to its exit pose,
        // the pose nearest to the transition level's position.
        let cur_level = loc.level_path();
        let cur_poses = lsg.nested_graph(cur_level)?;
        let exit = nearest_node(cur_poses, trans_level_attrs.pose, kd_threshold)
            .ok_or(PlanError::EmptyPoseGraph(cur_level))?;
        let route = plan_in_graph(lsg, cur_level, loc.pose_id(), exit, &mut plan)
            .map_err(|_| PlanError::NoLocalRoute { stage: BlockedStage::PoseGraph(cur_level) })?;
        append_route(lsg, &mut plan, cur_level.nested_scope().expect("level nests poses"), &route)?;

        // Stage 1b: level route to the transition level.
        let target_path = loc.target_path();
        let route = plan_in_graph(lsg, target_path, loc.level_id(), trans.level.node_id(), &mut plan)
            .map_err(|_| PlanError::NoLocalRoute { stage: BlockedStage::LevelGraph(target_path) })?;
        append_route(lsg, &mut plan, target_path.nested_scope().expect("target nests levels"), &route)?;

        // Stage 2 starts at the entry pose of the transition level: the pose
        // nearest to the preceding hop's position.
        let from = plan.hops.last().expect("stage 1 produced hops").position;
        stage2_src = nearest_node(trans_poses, from, kd_threshold)
            .ok_or(PlanError::EmptyPoseGraph(trans.level))?;
    } else {
        stage2_src = loc.pose_id();
    }

    // Stage 2: pose route inside the transition level to the transition pose.
    let route = plan_in_graph(lsg, trans.level, stage2_src, trans.pose.node_id(), &mut plan)
        .map_err(|_| PlanError::NoLocalRoute { stage: BlockedStage::PoseGraph(trans.level) })?;
    append_route(lsg, &mut plan, trans.level.nested_scope().expect("level nests poses"), &route)?;

    // Stage 3: the implicit inter-target hop.
    if let Some(entry) = trans.target_entry_pose {
        let pos = lsg.node_at(entry)?.pose;
        plan.links.push(HopLink::InterTarget);
        plan.hops.push(Hop { path: entry, position: pos });
    }

    Ok(plan)
}

/// Shortest path inside the graph nested under `container`, recording the
/// searched graph size.
fn plan_in_graph(
    lsg: &LayeredSceneGraph,
    container: NodePath,
    src: NodeId,
    dst: NodeId,
    plan: &mut LocalPlan,
) -> Result<Route, SearchError> {
    let graph = lsg.nested_graph(container).map_err(|_| SearchError::NodeNotFound(src))?;
    plan.searched_sizes.push(graph.nodes.len());
    let sg = extract_domain_subgraph(graph, TaskMode::PathFinding);
    shortest_path(&sg, src, dst)
}

fn append_route(
    lsg: &LayeredSceneGraph,
    plan: &mut LocalPlan,
    scope: GraphScope,
    route: &Route,
) -> Result<(), PlanError> {
    for (i, node) in route.nodes.iter().enumerate() {
        let path = scope.node_path(node.index);
        let position = lsg.node_at(path)?.pose;
        if i == 0 {
            if plan.hops.is_empty() {
                plan.hops.push(Hop { path, position });
            } else {
                // Junction between stages: a sanctioned layer transition.
                plan.links.push(HopLink::Transition);
                plan.hops.push(Hop { path, position });
            }
        } else {
            plan.links.push(HopLink::Edge { scope, u: route.nodes[i - 1], v: *node });
            plan.hops.push(Hop { path, position });
        }
    }
    Ok(())
}

/// Context the cascade needs beyond the blocked plan itself.
pub struct CascadeContext<'a> {
    pub loc: LocalizedState,
    pub terminal_target: NodeId,
    pub trans: &'a TransitionNodes,
    pub cfg: &'a PlannerConfig,
    pub t: f64,
}

/// Blocked-hop recovery cascade (library form; the scenario driver wraps this
/// with execution-state bookkeeping).
///
/// Order per blocked event: (a) geometric detour in the local map, no graph
/// mutation; (b) block the hop's edge and replan the local layer; (c) block
/// the current segment's Target edge and replan the global layer; (d)
/// infeasible. `detour_from` is where the detour should start (the robot
/// position when the blocked pair is the one being flown).
pub fn handle_blocked_segment(
    lsg: &mut LayeredSceneGraph,
    plan: &LocalPlan,
    blocked_pair: usize,
    detour_from: Vec3,
    grid: &VoxelGrid,
    ctx: &CascadeContext<'_>,
    events: &mut Vec<TraceEvent>,
) -> ReplanOutcome {
    let to = plan.hops[blocked_pair + 1].position;

    // (a) geometric detour within the bound box.
    match alt_local_geometric_path(grid, detour_from, to, ctx.cfg.robot_radius, ctx.cfg.detour_bound)
    {
        Ok(Some(path)) => {
            events.push(TraceEvent {
                t: ctx.t,
                kind: TraceEventKind::DetourFound {
                    hop: pair_strings(plan, blocked_pair),
                    waypoints: path.waypoints.len(),
                    length: path.length(),
                    mutations: lsg.version(),
                },
            });
            return ReplanOutcome::GeometricDetour(path);
        }
        Ok(None) | Err(GeomError::StartOccupied) | Err(GeomError::GoalOccupied) => {}
        Err(_) => {}
    }

    // (b) block the hop's edge (when it is a graph edge) and replan locally.
    let mut blocked_edge = None;
    if let HopLink::Edge { scope, u, v } = plan.links[blocked_pair] {
        lsg.set_edge_traversability(scope, u, v, TraversabilityStatus::Blocked)
            .expect("blocked hop edge exists");
        blocked_edge = Some([scope.node_path(u.index).to_string(), scope.node_path(v.index).to_string()]);
    }
    let replanned = eval_local_layer_path(lsg, plan.segment.as_ref(), &ctx.loc, ctx.trans, ctx.cfg.kd_threshold);
    let local_ok = match &replanned {
        Ok(new_plan) => {
            // Without an edge to block, replanning can only succeed if it no
            // longer routes through the blocked pair.
            blocked_edge.is_some()
                || !new_plan.contains_pair(
                    plan.hops[blocked_pair].path,
                    plan.hops[blocked_pair + 1].path,
                )
        }
        Err(_) => false,
    };
    if local_ok {
        let new_plan = replanned.expect("checked ok");
        events.push(TraceEvent {
            t: ctx.t,
            kind: TraceEventKind::LocalReplan {
                ok: true,
                blocked_edge,
                hops: new_plan.hop_strings(),
                links: new_plan.link_strings(),
                mutations: lsg.version(),
            },
        });
        return ReplanOutcome::LocalReplanned(new_plan);
    }
    events.push(TraceEvent {
        t: ctx.t,
        kind: TraceEventKind::LocalReplan {
            ok: false,
            blocked_edge,
            hops: Vec::new(),
            links: Vec::new(),
            mutations: lsg.version(),
        },
    });

    // (c) block the segment's Target edge and replan the global layer.
    let Some(first_segment) = plan.segment else {
        // Terminal intra-target stage: no global recourse.
        return ReplanOutcome::Infeasible;
    };
    escalate_global(lsg, grid, first_segment, ctx, events)
}

/// Global replanning loop: block the failing segment's Target-layer edge,
/// search an alternate global route from the current localization and
/// establish the first new segment's local plan. Local-planning failures on
/// the new route block its first edge and try again; route exhaustion yields
/// `Infeasible`.
pub(crate) fn escalate_global(
    lsg: &mut LayeredSceneGraph,
    _grid: &VoxelGrid,
    mut failing: GlobalSegment,
    ctx: &CascadeContext<'_>,
    events: &mut Vec<TraceEvent>,
) -> ReplanOutcome {
    loop {
        lsg.set_edge_traversability(
            GraphScope::Target,
            failing.from,
            failing.to,
            TraversabilityStatus::Blocked,
        )
        .expect("segment edge exists in target graph");
        let blocked_edge = [failing.from.to_string(), failing.to.to_string()];

        let sg = extract_domain_subgraph(&lsg.target_graph, TaskMode::PathFinding);
        let routes =
            eval_global_layer_path(&sg, ctx.loc.target_id(), ctx.terminal_target, ctx.cfg.k_routes);
        let best = match routes {
            Ok(set) => get_best_path(&set).expect("non-empty route set").clone(),
            Err(_) => {
                events.push(TraceEvent {
                    t: ctx.t,
                    kind: TraceEventKind::GlobalReplan {
                        ok: false,
                        blocked_edge,
                        route: Vec::new(),
                        mutations: lsg.version(),
                    },
                });
                return ReplanOutcome::Infeasible;
            }
        };
        events.push(TraceEvent {
            t: ctx.t,
            kind: TraceEventKind::GlobalReplan {
                ok: true,
                blocked_edge,
                route: best.nodes.iter().map(|n| n.to_string()).collect(),
                mutations: lsg.version(),
            },
        });

        let segments = segment_path(&best);
        let Some(seg) = segments.first().copied() else {
            // Replanned route is trivial; nothing local to establish here.
            return ReplanOutcome::Infeasible;
        };
        match plan_segment(lsg, &seg, &ctx.loc, ctx.cfg, ctx.t, events) {
            Ok((trans, plan)) => {
                return ReplanOutcome::GlobalReplanned { route: best, trans, plan };
            }
            Err(_) => {
                // This route's first segment is locally unreachable; block it
                // and search again. Traversable edges strictly decrease.
                failing = seg;
            }
        }
    }
}

/// Transition evaluation plus local planning for one segment, with events.
pub(crate) fn plan_segment(
    lsg: &LayeredSceneGraph,
    seg: &GlobalSegment,
    loc: &LocalizedState,
    cfg: &PlannerConfig,
    t: f64,
    events: &mut Vec<TraceEvent>,
) -> Result<(TransitionNodes, LocalPlan), PlanError> {
    let trans = eval_transition_nodes(lsg, seg, loc, cfg.kd_threshold)?;
    let plan = eval_local_layer_path(lsg, Some(seg), loc, &trans, cfg.kd_threshold)?;
    events.push(TraceEvent {
        t,
        kind: TraceEventKind::TransitionEval {
            level: trans.level.to_string(),
            pose: trans.pose.to_string(),
            entry_pose: trans.target_entry_pose.map(|p| p.to_string()),
        },
    });
    events.push(TraceEvent {
        t,
        kind: TraceEventKind::LocalPlan {
            segment: Some([seg.from.to_string(), seg.to.to_string()]),
            hops: plan.hop_strings(),
            links: plan.link_strings(),
            searched: plan.searched_sizes.clone(),
        },
    });
    Ok((trans, plan))
}

pub(crate) fn pair_strings(plan: &LocalPlan, pair: usize) -> [String; 2] {
    [plan.hops[pair].path.to_string(), plan.hops[pair + 1].path.to_string()]
}
