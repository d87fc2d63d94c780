//! Deterministic scenario execution.
//!
//! A scenario is a world description: an LSG document, a voxel grid, timed
//! obstruction events, timed queries and an ideal waypoint-following point
//! robot. The fixed-step loop activates obstructions, injects those within
//! sensing range into the grid, steps the active query driver and collects
//! every trace event. Traces are pure functions of the scenario; the only
//! nondeterministic fields are the wall-clock entries of the final metrics
//! summary.

pub mod generator;

use crate::lsg::{document, LayeredSceneGraph, RobotState};
use crate::planner::{plan_query, PlanDriver, PlannerConfig, Query, QueryOutcome, StepStatus};
use crate::trace::{events_to_jsonl, ExecutedHop, TraceEvent};
use crate::vec3::Vec3;
use crate::voxel::{Obstruction, VoxelGrid};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("robot collided with mapped occupancy at t={0}")]
    CollisionViolation(f64),
    #[error("simulation exceeded {0} s without terminating")]
    Timeout(f64),
}

/// Grid parameters of a scenario. When absent, a grid is derived from the
/// scene bounds.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub resolution: f64,
    pub origin: Vec3,
    pub extent: [u32; 3],
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotInit {
    /// [x, y, z, yaw].
    pub start: [f64; 4],
    /// Tracking speed, m/s.
    pub speed: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioQuery {
    /// Issue time, seconds.
    pub t: f64,
    pub target: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Path of the LSG document, resolved relative to the scenario file.
    pub lsg: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridParams>,
    #[serde(default)]
    pub obstructions: Vec<Obstruction>,
    pub queries: Vec<ScenarioQuery>,
    pub robot: RobotInit,
    pub sensing_radius: f64,
    /// Recorded in the trace; the run itself draws no randomness.
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.robot.speed > 0.0) {
            return Err(SimError::Scenario("robot speed must be > 0".into()));
        }
        if !(self.sensing_radius > 0.0) {
            return Err(SimError::Scenario("sensing radius must be > 0".into()));
        }
        let mut last = 0.0;
        for o in &self.obstructions {
            if o.activation_time < 0.0 {
                return Err(SimError::Scenario("obstruction times must be >= 0".into()));
            }
            if o.activation_time < last {
                return Err(SimError::Scenario("obstruction times must be sorted".into()));
            }
            last = o.activation_time;
        }
        let mut last = 0.0;
        for q in &self.queries {
            if q.t < 0.0 || q.t < last {
                return Err(SimError::Scenario("query times must be sorted and >= 0".into()));
            }
            last = q.t;
        }
        if self.queries.is_empty() {
            return Err(SimError::Scenario("scenario has no queries".into()));
        }
        Ok(())
    }
}

/// Runtime knobs that are not part of the scenario file; all have
/// CLI-overridable defaults.
#[derive(Clone, Copy, Debug)]
pub struct SimConfig {
    pub dt: f64,
    pub planner: PlannerConfig,
    /// Safety cap on simulated time per scenario.
    pub max_sim_time: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { dt: 0.1, planner: PlannerConfig::default(), max_sim_time: 3600.0 }
    }
}

/// Per-run metrics. Wall-clock fields are exempt from determinism checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceMetrics {
    pub wall_ms: f64,
    pub steps: u64,
    pub sim_time: f64,
    pub executed_route: Vec<ExecutedHop>,
}

/// Timestamped event log plus one terminal status per query.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioTrace {
    pub events: Vec<TraceEvent>,
    pub statuses: Vec<QueryOutcome>,
    pub metrics: TraceMetrics,
}

impl ScenarioTrace {
    /// JSON-lines form: one line per event, one statuses line, one metrics
    /// line (the only line carrying wall-clock values).
    pub fn to_jsonl(&self) -> String {
        let mut out = events_to_jsonl(&self.events);
        out.push_str(&format!(
            "{}\n",
            serde_json::json!({ "statuses": self.statuses })
        ));
        out.push_str(&format!(
            "{}\n",
            serde_json::json!({ "metrics": self.metrics })
        ));
        out
    }

    /// The deterministic portion of the JSONL form (drops the metrics line).
    pub fn deterministic_jsonl(&self) -> String {
        let mut out = events_to_jsonl(&self.events);
        out.push_str(&format!(
            "{}\n",
            serde_json::json!({ "statuses": self.statuses })
        ));
        out
    }

    pub fn arrived(&self) -> bool {
        !self.statuses.is_empty() && self.statuses.iter().all(|s| *s == QueryOutcome::Arrived)
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, SimError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SimError::Scenario(format!("cannot read {}: {e}", path.display())))?;
    let scenario: Scenario =
        serde_json::from_str(&text).map_err(|e| SimError::Scenario(e.to_string()))?;
    scenario.validate()?;
    Ok(scenario)
}

/// Load the scenario file plus its referenced LSG document and run it.
pub fn run_scenario_file(path: &Path, cfg: &SimConfig) -> Result<(Scenario, ScenarioTrace), SimError> {
    let scenario = load_scenario(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let lsg_path = base.join(&scenario.lsg);
    let text = std::fs::read_to_string(&lsg_path)
        .map_err(|e| SimError::Scenario(format!("cannot read {}: {e}", lsg_path.display())))?;
    let lsg = document::load_lsg(&text).map_err(|e| SimError::Scenario(e.to_string()))?;
    let trace = run_scenario(&scenario, lsg, cfg)?;
    Ok((scenario, trace))
}

/// Advance the robot exactly `speed * dt` meters along the polyline,
/// clamping at the end; the heading follows the current segment direction.
pub fn step_robot(state: &RobotState, path: &[Vec3], dt: f64, speed: f64) -> RobotState {
    let mut next = *state;
    let mut budget = speed * dt;
    let mut cursor = 0;
    if path.is_empty() {
        return next;
    }
    next.position = path[0];
    while cursor + 1 < path.len() {
        let a = path[cursor];
        let b = path[cursor + 1];
        let d = a.distance(b);
        if d <= 1e-12 {
            cursor += 1;
            continue;
        }
        let remaining = next.position.distance(b);
        if remaining <= budget {
            budget -= remaining;
            next.position = b;
            next.yaw = (b.y - a.y).atan2(b.x - a.x);
            cursor += 1;
        } else {
            let t = budget / remaining;
            next.position = next.position.lerp(b, t);
            next.yaw = (b.y - a.y).atan2(b.x - a.x);
            return next;
        }
    }
    next
}

struct WorldObstruction {
    obstruction: Obstruction,
    injected: bool,
}

/// Execute one scenario over a pre-loaded scene graph.
pub fn run_scenario(
    scenario: &Scenario,
    lsg: LayeredSceneGraph,
    cfg: &SimConfig,
) -> Result<ScenarioTrace, SimError> {
    run_scenario_detailed(scenario, lsg, cfg).map(|(trace, _)| trace)
}

/// As [`run_scenario`], additionally returning the final local map (for
/// `--dump-map` style debugging).
pub fn run_scenario_detailed(
    scenario: &Scenario,
    mut lsg: LayeredSceneGraph,
    cfg: &SimConfig,
) -> Result<(ScenarioTrace, VoxelGrid), SimError> {
    scenario.validate()?;
    let started = std::time::Instant::now();

    let mut grid = match scenario.grid {
        Some(p) => VoxelGrid::new(p.resolution, p.origin, p.extent)
            .map_err(|e| SimError::Scenario(e.to_string()))?,
        None => derive_grid(&lsg).map_err(|e| SimError::Scenario(e.to_string()))?,
    };
    let mut world: Vec<WorldObstruction> = scenario
        .obstructions
        .iter()
        .map(|&obstruction| WorldObstruction { obstruction, injected: false })
        .collect();
    let mut robot = RobotState::from_odom(scenario.robot.start);
    let speed = scenario.robot.speed;

    let mut events: Vec<TraceEvent> = Vec::new();
    let mut statuses: Vec<QueryOutcome> = Vec::new();
    let mut executed: Vec<ExecutedHop> = Vec::new();
    let mut pending: std::collections::VecDeque<ScenarioQuery> =
        scenario.queries.iter().copied().collect();
    let mut driver: Option<PlanDriver> = None;

    let mut step: u64 = 0;
    loop {
        let t = step as f64 * cfg.dt;
        if t > cfg.max_sim_time {
            return Err(SimError::Timeout(cfg.max_sim_time));
        }

        // Obstructions activate on schedule and enter the grid once their
        // center comes within sensing range of the robot.
        for w in world.iter_mut() {
            if w.injected || w.obstruction.activation_time > t {
                continue;
            }
            if w.obstruction.center.distance(robot.position) <= scenario.sensing_radius {
                grid.update_local_map(&w.obstruction)
                    .map_err(|e| SimError::Scenario(format!("obstruction injection: {e}")))?;
                w.injected = true;
            }
        }

        // Issue the next query when due and no query is active.
        if driver.is_none() {
            if let Some(q) = pending.front() {
                if q.t <= t {
                    let q = pending.pop_front().expect("front checked");
                    let query = Query { target: q.target, level: q.level, pose: q.pose };
                    let d = plan_query(&mut lsg, &grid, query, &robot, cfg.planner, t)
                        .map_err(|e| SimError::Scenario(format!("query rejected: {e}")))?;
                    driver = Some(d);
                }
            }
        }

        if let Some(d) = driver.as_mut() {
            let status = d.step(&mut lsg, &grid, &mut robot, t, cfg.dt, speed);
            events.extend(d.drain_events());
            if !grid.sphere_free(robot.position, cfg.planner.robot_radius) {
                return Err(SimError::CollisionViolation(t));
            }
            match status {
                StepStatus::Active => {}
                StepStatus::Arrived => {
                    statuses.push(QueryOutcome::Arrived);
                    executed.extend(d.executed_route().iter().cloned());
                    driver = None;
                }
                StepStatus::Infeasible => {
                    statuses.push(QueryOutcome::Infeasible);
                    executed.extend(d.executed_route().iter().cloned());
                    driver = None;
                }
            }
        }

        step += 1;
        if driver.is_none() && pending.is_empty() {
            break;
        }
    }

    let sim_time = step as f64 * cfg.dt;
    let trace = ScenarioTrace {
        events,
        statuses,
        metrics: TraceMetrics {
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            steps: step,
            sim_time,
            executed_route: executed,
        },
    };
    Ok((trace, grid))
}

/// Grid spanning the scene bounding box plus sensing margin, at the default
/// resolution.
fn derive_grid(lsg: &LayeredSceneGraph) -> Result<VoxelGrid, crate::voxel::GeomError> {
    let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut grow = |p: Vec3| {
        lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
        hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
    };
    for (_, attrs) in lsg.iter_poses() {
        grow(attrs.pose);
    }
    for (_, attrs) in &lsg.target_graph.nodes {
        grow(attrs.pose);
    }
    let margin = 10.0;
    let resolution = 0.2;
    let size = hi - lo;
    VoxelGrid::new(
        resolution,
        lo - Vec3::new(margin, margin, margin),
        [
            ((size.x + 2.0 * margin) / resolution).ceil() as u32,
            ((size.y + 2.0 * margin) / resolution).ceil() as u32,
            ((size.z + 2.0 * margin) / resolution).ceil() as u32,
        ],
    )
}
