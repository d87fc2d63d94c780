//! Hierarchical path planning over nested multi-domain layered scene graphs.
//!
//! The scene is a four-layer nested graph (Target > Level > Pose > Feature);
//! planning bifurcates into a sparse global search over the Target layer and
//! per-segment local searches over the nested Level/Pose graphs, coupled with
//! a voxel-grid geometric layer for collision handling. Multi-domain edge
//! relations are subsampled down to the task-relevant tag before any search.
//! Dynamic obstructions drive a three-tier replanning cascade: geometric
//! detour, local-layer replan, global-layer replan.
//!
//! The crate also ships a deterministic scenario simulator ([`sim`]) and a
//! benchmark harness ([`bench`]) measuring the subsampling speedup and its
//! fit to the `(|E|+|V|) log2 |V|` complexity model.

pub mod bench;
#[doc(hidden)]
pub mod fixtures;
pub mod lsg;
pub mod planner;
pub mod search;
pub mod sim;
pub mod spatial;
pub mod subsample;
pub mod trace;
pub mod vec3;
pub mod voxel;

pub use lsg::{
    document::{load_lsg, lsg_from_document, save_lsg, save_lsg_json, LsgDocument},
    EdgeAttribute, EdgeTag, Graph, GraphScope, LayerId, LayeredSceneGraph, LocalizedState,
    LsgError, NodeAttributes, NodeId, NodePath, RobotState, TraversabilityStatus,
};
pub use planner::{
    eval_local_layer_path, eval_transition_nodes, handle_blocked_segment, plan_query, HopLink,
    LocalPlan, PlanDriver, PlanError, PlannerConfig, Query, QueryOutcome, ReplanOutcome,
    TransitionNodes,
};
pub use search::{
    eval_global_layer_path, get_best_path, segment_path, shortest_path,
    shortest_path_multi_domain, GlobalSegment, Route, SearchError,
};
pub use sim::{
    generator::{generate_synthetic_lsg, GeneratorParams},
    load_scenario, run_scenario, run_scenario_detailed, run_scenario_file, step_robot, Scenario,
    ScenarioTrace, SimConfig, SimError,
};
pub use subsample::{extract_domain_subgraph, Subgraph, TaskMode};
pub use trace::{TraceEvent, TraceEventKind};
pub use vec3::Vec3;
pub use voxel::{
    alt_local_geometric_path, eval_geometric_path, eval_segment_traversability,
    is_collision_free, GeomError, GeometricPath, Obstruction, VoxelGrid,
};
