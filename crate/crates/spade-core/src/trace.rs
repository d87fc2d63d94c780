//! Planner/scenario trace events.
//!
//! Emitted as JSON lines: `{"t": <seconds>, "event": <name>, "detail": {...}}`.
//! This format is the assertion surface for every scenario test: cascade
//! ordering, mutation minimality and blocked-edge persistence are all checked
//! against these records. Event payloads therefore carry the mutation-log
//! length and the routes involved. Wall-clock timings never appear in events;
//! they live only in the trace summary.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: f64,
    #[serde(flatten)]
    pub kind: TraceEventKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", content = "detail")]
pub enum TraceEventKind {
    /// Initial global route over the Target-layer subgraph.
    GlobalPlan {
        route: Vec<String>,
        cost: f64,
        /// Planner-visible graph size for this search.
        nodes: usize,
        edges: usize,
    },
    /// Transition nodes selected for the active global segment.
    TransitionEval {
        level: String,
        pose: String,
        entry_pose: Option<String>,
    },
    /// Local plan across the nested Level/Pose graphs.
    LocalPlan {
        segment: Option<[String; 2]>,
        hops: Vec<String>,
        links: Vec<String>,
        /// Node count of each nested graph handed to the path search.
        searched: Vec<usize>,
    },
    /// A hop of the active plan failed its collision check.
    Blocked {
        hop: [String; 2],
        hop_index: usize,
        link: String,
        mutations: u64,
    },
    /// Geometric detour found around the obstruction; no graph mutation.
    DetourFound {
        hop: [String; 2],
        waypoints: usize,
        length: f64,
        mutations: u64,
    },
    /// Local-layer replan attempt after a failed detour.
    LocalReplan {
        ok: bool,
        blocked_edge: Option<[String; 2]>,
        hops: Vec<String>,
        links: Vec<String>,
        mutations: u64,
    },
    /// Global-layer replan attempt after a failed local replan.
    GlobalReplan {
        ok: bool,
        blocked_edge: [String; 2],
        route: Vec<String>,
        mutations: u64,
    },
    /// The robot localized inside the segment's destination target.
    SegmentDone { index: usize, target: String },
    /// Terminal success: localized at the queried nodes.
    Arrived { target: String, level: String, pose: String },
    /// No route remains to the queried nodes.
    Infeasible { reason: String },
}

impl TraceEventKind {
    pub fn name(&self) -> &'static str {
        match self {
            TraceEventKind::GlobalPlan { .. } => "GlobalPlan",
            TraceEventKind::TransitionEval { .. } => "TransitionEval",
            TraceEventKind::LocalPlan { .. } => "LocalPlan",
            TraceEventKind::Blocked { .. } => "Blocked",
            TraceEventKind::DetourFound { .. } => "DetourFound",
            TraceEventKind::LocalReplan { .. } => "LocalReplan",
            TraceEventKind::GlobalReplan { .. } => "GlobalReplan",
            TraceEventKind::SegmentDone { .. } => "SegmentDone",
            TraceEventKind::Arrived { .. } => "Arrived",
            TraceEventKind::Infeasible { .. } => "Infeasible",
        }
    }
}

/// One hop the robot actually completed, for the trace summary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutedHop {
    pub from: String,
    pub to: String,
    pub link: String,
}

/// Serialize events to JSON lines.
pub fn events_to_jsonl(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for event in events {
        out.push_str(&serde_json::to_string(event).expect("trace events serialize"));
        out.push('\n');
    }
    out
}
