//! Stepwise query execution: localizes, plans globally, realizes segments
//! through local plans and geometric tracking, and feeds blocked hops into
//! the recovery cascade. A segment completes when the robot is localized
//! within the destination target's layers; the final stage routes to the
//! queried level/pose, if any.

use super::*;
use crate::lsg::RobotState;
use crate::trace::ExecutedHop;
use crate::voxel::is_collision_free;
use serde::{Deserialize, Serialize};

/// Terminal status of one query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryOutcome {
    Arrived,
    Infeasible,
}

/// Result of stepping the driver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepStatus {
    Active,
    Arrived,
    Infeasible,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Segments,
    FinalLocal,
    Done,
}

struct ActivePlan {
    trans: TransitionNodes,
    plan: LocalPlan,
    /// Next hop index to reach. The pair being flown is `hop_cursor - 1`;
    /// `hop_cursor == 0` means the approach from the robot's physical
    /// position to the plan's first node.
    hop_cursor: usize,
    /// Remaining polyline to `hops[hop_cursor]`; first point tracks the
    /// robot's position.
    track: Vec<Vec3>,
}

impl ActivePlan {
    fn done(&self) -> bool {
        self.hop_cursor >= self.plan.hops.len() && self.track.len() <= 1
    }
}

/// Single-threaded execution state machine for one query.
pub struct PlanDriver {
    cfg: PlannerConfig,
    query: Query,
    terminal_target: NodeId,
    phase: Phase,
    segments: Vec<GlobalSegment>,
    seg_idx: usize,
    loc: LocalizedState,
    active: Option<ActivePlan>,
    grid_version_seen: u64,
    events: Vec<TraceEvent>,
    executed: Vec<ExecutedHop>,
    outcome: Option<QueryOutcome>,
}

/// Build the execution driver for a query: localize, subsample the Target
/// graph, compute the best global route and establish the first segment's
/// local plan. Returns `Ok` with an immediately-infeasible driver (not an
/// error) when no global route exists.
pub fn plan_query(
    lsg: &mut LayeredSceneGraph,
    grid: &VoxelGrid,
    query: Query,
    robot: &RobotState,
    cfg: PlannerConfig,
    t: f64,
) -> Result<PlanDriver, PlanError> {
    validate_query(lsg, &query)?;
    let loc = lsg.localize(robot)?;
    let mut driver = PlanDriver {
        cfg,
        query,
        terminal_target: NodeId::target(query.target),
        phase: Phase::Segments,
        segments: Vec::new(),
        seg_idx: 0,
        loc,
        active: None,
        grid_version_seen: grid.version(),
        events: Vec::new(),
        executed: Vec::new(),
        outcome: None,
    };

    let sg = extract_domain_subgraph(&lsg.target_graph, TaskMode::PathFinding);
    let routes = eval_global_layer_path(&sg, loc.target_id(), driver.terminal_target, cfg.k_routes);
    let best = match routes {
        Ok(set) => get_best_path(&set).expect("route set non-empty").clone(),
        Err(SearchError::NoRoute { .. }) => {
            driver.finish_infeasible(t, "no global route to the queried target");
            return Ok(driver);
        }
        Err(e) => return Err(PlanError::QueryNodeNotFound(e.to_string())),
    };
    driver.emit(
        t,
        TraceEventKind::GlobalPlan {
            route: best.nodes.iter().map(|n| n.to_string()).collect(),
            cost: best.total_cost,
            nodes: sg.node_count(),
            edges: sg.edge_count(),
        },
    );
    driver.segments = segment_path(&best);
    driver.seg_idx = 0;
    if driver.establish_current_stage(lsg, grid, robot, t) {
        driver.repair(lsg, grid, robot, t);
    }
    Ok(driver)
}

fn validate_query(lsg: &LayeredSceneGraph, query: &Query) -> Result<(), PlanError> {
    let target = NodePath::Target { target: query.target };
    lsg.node_at(target)
        .map_err(|_| PlanError::QueryNodeNotFound(target.to_string()))?;
    if query.pose.is_some() && query.level.is_none() {
        return Err(PlanError::QueryNodeNotFound(
            "a queried pose requires its containing level".into(),
        ));
    }
    if let Some(level) = query.level {
        let level_path = NodePath::Level { target: query.target, level };
        lsg.node_at(level_path)
            .map_err(|_| PlanError::QueryNodeNotFound(level_path.to_string()))?;
        if let Some(pose) = query.pose {
            let pose_path = NodePath::Pose { target: query.target, level, pose };
            lsg.node_at(pose_path)
                .map_err(|_| PlanError::QueryNodeNotFound(pose_path.to_string()))?;
        }
    }
    Ok(())
}

impl PlanDriver {
    pub fn outcome(&self) -> Option<QueryOutcome> {
        self.outcome
    }

    pub fn drain_events(&mut self) -> Vec<TraceEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn executed_route(&self) -> &[ExecutedHop] {
        &self.executed
    }

    /// Advance one tick: re-validate against the grid when it changed, move
    /// along the current geometric path, then progress segment / arrival
    /// state from the new localization.
    pub fn step(
        &mut self,
        lsg: &mut LayeredSceneGraph,
        grid: &VoxelGrid,
        robot: &mut RobotState,
        t: f64,
        dt: f64,
        speed: f64,
    ) -> StepStatus {
        if self.phase == Phase::Done {
            return self.status();
        }

        if grid.version() != self.grid_version_seen {
            self.grid_version_seen = grid.version();
            if !self.repair(lsg, grid, robot, t) {
                return self.status();
            }
        }

        self.advance(robot, dt * speed);

        match lsg.localize(robot) {
            Ok(loc) => self.loc = loc,
            Err(_) => {
                self.finish_infeasible(t, "localization failed: no pose nodes");
                return self.status();
            }
        }

        match self.phase {
            Phase::Segments => {
                let seg = self.segments[self.seg_idx];
                if self.loc.target == seg.to.index {
                    self.emit(
                        t,
                        TraceEventKind::SegmentDone {
                            index: self.seg_idx,
                            target: seg.to.to_string(),
                        },
                    );
                    self.seg_idx += 1;
                    if self.establish_current_stage(lsg, grid, robot, t) {
                        self.repair(lsg, grid, robot, t);
                    }
                } else if self.active.as_ref().map_or(true, |a| a.done()) {
                    // Plan exhausted without localizing at the destination:
                    // replan the segment from wherever we are.
                    if self.establish_current_stage(lsg, grid, robot, t) {
                        self.repair(lsg, grid, robot, t);
                    }
                }
            }
            Phase::FinalLocal => {
                if self.terminal_met() && self.active.as_ref().map_or(true, |a| a.done()) {
                    self.finish_arrived(t);
                } else if self.active.as_ref().map_or(true, |a| a.done()) {
                    if self.plan_final(lsg, robot, t) {
                        self.repair(lsg, grid, robot, t);
                    }
                }
            }
            Phase::Done => {}
        }
        self.status()
    }

    fn status(&self) -> StepStatus {
        match self.outcome {
            None => StepStatus::Active,
            Some(QueryOutcome::Arrived) => StepStatus::Arrived,
            Some(QueryOutcome::Infeasible) => StepStatus::Infeasible,
        }
    }

    fn emit(&mut self, t: f64, kind: TraceEventKind) {
        self.events.push(TraceEvent { t, kind });
    }

    fn finish_arrived(&mut self, t: f64) {
        self.emit(
            t,
            TraceEventKind::Arrived {
                target: self.loc.target_path().to_string(),
                level: self.loc.level_path().to_string(),
                pose: self.loc.pose_path().to_string(),
            },
        );
        self.outcome = Some(QueryOutcome::Arrived);
        self.phase = Phase::Done;
    }

    fn finish_infeasible(&mut self, t: f64, reason: &str) {
        self.emit(t, TraceEventKind::Infeasible { reason: reason.into() });
        self.outcome = Some(QueryOutcome::Infeasible);
        self.phase = Phase::Done;
    }

    fn terminal_met(&self) -> bool {
        self.loc.target == self.query.target
            && self.query.level.map_or(true, |l| self.loc.level == l)
            && self.query.pose.map_or(true, |p| self.loc.pose == p)
    }

    /// Plan the stage for the current segment index, switching to the final
    /// intra-target stage past the last segment. Returns false when the
    /// driver finished (arrived or infeasible).
    fn establish_current_stage(
        &mut self,
        lsg: &mut LayeredSceneGraph,
        grid: &VoxelGrid,
        robot: &RobotState,
        t: f64,
    ) -> bool {
        if self.seg_idx >= self.segments.len() {
            self.phase = Phase::FinalLocal;
            if self.terminal_met() && self.active.as_ref().map_or(true, |a| a.done()) {
                self.finish_arrived(t);
                return false;
            }
            if self.terminal_met() || self.final_stage_is_positional() {
                // Keep flying the in-progress plan to its entry pose; no new
                // stage needed.
                return true;
            }
            return self.plan_final(lsg, robot, t);
        }
        let seg = self.segments[self.seg_idx];
        match plan_segment(lsg, &seg, &self.loc, &self.cfg, t, &mut self.events) {
            Ok((trans, plan)) => {
                self.install(trans, plan, robot.position);
                true
            }
            Err(_) => {
                // Locally unreachable segment: block its Target edge and
                // replan globally.
                let ctx = CascadeContext {
                    loc: self.loc,
                    terminal_target: self.terminal_target,
                    trans: &TransitionNodes {
                        level: self.loc.level_path(),
                        pose: self.loc.pose_path(),
                        target_entry_pose: None,
                    },
                    cfg: &self.cfg,
                    t,
                };
                match escalate_global(lsg, grid, seg, &ctx, &mut self.events) {
                    ReplanOutcome::GlobalReplanned { route, trans, plan } => {
                        self.segments = segment_path(&route);
                        self.seg_idx = 0;
                        self.install(trans, plan, robot.position);
                        true
                    }
                    _ => {
                        self.finish_infeasible(t, "no feasible segment plan remains");
                        false
                    }
                }
            }
        }
    }

    /// True while the final stage is just "finish reaching the entry pose":
    /// the query names no level/pose, so arrival is the entry pose itself.
    fn final_stage_is_positional(&self) -> bool {
        self.query.level.is_none() && self.query.pose.is_none()
    }

    /// Plan the terminal intra-target stage toward the queried level/pose.
    fn plan_final(&mut self, lsg: &mut LayeredSceneGraph, robot: &RobotState, t: f64) -> bool {
        if self.terminal_met() {
            if self.active.as_ref().map_or(true, |a| a.done()) {
                self.finish_arrived(t);
                return false;
            }
            return true;
        }
        if self.final_stage_is_positional() {
            // Not localized at the target yet but past all segments; nothing
            // better to do than replan globally from here.
            self.finish_infeasible(t, "final stage unreachable");
            return false;
        }
        let level = self.query.level.expect("positional case handled above");
        let level_path = NodePath::Level { target: self.query.target, level };
        let trans = match self.terminal_transitions(lsg, level_path) {
            Ok(trans) => trans,
            Err(e) => {
                self.finish_infeasible(t, &format!("terminal stage unreachable: {e}"));
                return false;
            }
        };
        match eval_local_layer_path(lsg, None, &self.loc, &trans, self.cfg.kd_threshold) {
            Ok(plan) => {
                self.emit(
                    t,
                    TraceEventKind::TransitionEval {
                        level: trans.level.to_string(),
                        pose: trans.pose.to_string(),
                        entry_pose: None,
                    },
                );
                self.emit(
                    t,
                    TraceEventKind::LocalPlan {
                        segment: None,
                        hops: plan.hop_strings(),
                        links: plan.link_strings(),
                        searched: plan.searched_sizes.clone(),
                    },
                );
                self.install(trans, plan, robot.position);
                true
            }
            Err(e) => {
                self.finish_infeasible(t, &format!("terminal stage unreachable: {e}"));
                false
            }
        }
    }

    fn terminal_transitions(
        &self,
        lsg: &LayeredSceneGraph,
        level_path: NodePath,
    ) -> Result<TransitionNodes, PlanError> {
        let pose_path = match self.query.pose {
            Some(pose) => NodePath::Pose { target: self.query.target, level: self.query.level.unwrap(), pose },
            None => {
                // Stop at the level's entry pose: nearest to the level node.
                let level_pos = lsg.node_at(level_path)?.pose;
                let poses = lsg.nested_graph(level_path)?;
                let id = nearest_node(poses, level_pos, self.cfg.kd_threshold)
                    .ok_or(PlanError::EmptyPoseGraph(level_path))?;
                level_path.nested_scope().expect("level nests poses").node_path(id.index)
            }
        };
        Ok(TransitionNodes { level: level_path, pose: pose_path, target_entry_pose: None })
    }

    fn install(&mut self, trans: TransitionNodes, plan: LocalPlan, robot_pos: Vec3) {
        let mut active = ActivePlan { trans, plan, hop_cursor: 0, track: Vec::new() };
        active.track = initial_track(robot_pos, &active.plan);
        self.active = Some(active);
        self.settle_track(robot_pos);
    }

    /// Process hop arrivals: when the track is exhausted, record the executed
    /// pair, advance the cursor and lay out the next pair's polyline.
    fn settle_track(&mut self, pos: Vec3) {
        let Some(active) = self.active.as_mut() else { return };
        while active.track.len() <= 1 && active.hop_cursor < active.plan.hops.len() {
            if active.hop_cursor >= 1 {
                let pair = active.hop_cursor - 1;
                self.executed.push(ExecutedHop {
                    from: active.plan.hops[pair].path.to_string(),
                    to: active.plan.hops[pair + 1].path.to_string(),
                    link: active.plan.links[pair].label().to_string(),
                });
            }
            active.hop_cursor += 1;
            if active.hop_cursor < active.plan.hops.len() {
                let pair = active.hop_cursor - 1;
                let mut track = vec![pos];
                if let Some(detour) = active.plan.detours.get(&pair) {
                    track.extend(detour.iter().copied());
                }
                track.push(active.plan.hops[active.hop_cursor].position);
                dedup_track(&mut track);
                active.track = track;
            } else {
                active.track = vec![pos];
            }
        }
    }

    /// Move `budget` meters along the active track.
    fn advance(&mut self, robot: &mut RobotState, mut budget: f64) {
        loop {
            let Some(active) = self.active.as_mut() else { return };
            if active.track.len() < 2 {
                let pos = robot.position;
                let before = active.hop_cursor;
                self.settle_track(pos);
                let Some(active) = self.active.as_ref() else { return };
                if active.track.len() < 2 || active.hop_cursor == before && active.done() {
                    return;
                }
                continue;
            }
            if budget <= 0.0 {
                return;
            }
            let a = active.track[0];
            let b = active.track[1];
            let d = a.distance(b);
            if d <= budget {
                budget -= d;
                active.track.remove(0);
                active.track[0] = b;
                robot.position = b;
                if d > 1e-12 {
                    robot.yaw = (b.y - a.y).atan2(b.x - a.x);
                }
            } else {
                let p = a.lerp(b, budget / d);
                active.track[0] = p;
                robot.position = p;
                robot.yaw = (b.y - a.y).atan2(b.x - a.x);
                budget = 0.0;
            }
        }
    }

    /// Scan the remaining route against the grid and run the cascade for the
    /// first blocked pair, repeating until clean. Returns false when the
    /// driver finished infeasible.
    fn repair(
        &mut self,
        lsg: &mut LayeredSceneGraph,
        grid: &VoxelGrid,
        robot: &RobotState,
        t: f64,
    ) -> bool {
        loop {
            let Some(active) = self.active.as_ref() else { return true };
            let radius = self.cfg.robot_radius;
            // The track being flown, then every future pair (with detours).
            let mut blocked: Option<Option<usize>> = None;
            if active
                .track
                .windows(2)
                .any(|w| !is_collision_free(grid, w[0], w[1], radius))
            {
                blocked = Some(active.hop_cursor.checked_sub(1));
            }
            if blocked.is_none() {
                'pairs: for pair in active.hop_cursor..active.plan.hop_pairs() {
                    let mut poly = vec![active.plan.hops[pair].position];
                    if let Some(detour) = active.plan.detours.get(&pair) {
                        poly.extend(detour.iter().copied());
                    }
                    poly.push(active.plan.hops[pair + 1].position);
                    for w in poly.windows(2) {
                        if !is_collision_free(grid, w[0], w[1], radius) {
                            blocked = Some(Some(pair));
                            break 'pairs;
                        }
                    }
                }
            }
            let Some(pair_opt) = blocked else { return true };
            if !self.cascade(lsg, grid, robot, pair_opt, t) {
                return false;
            }
        }
    }

    /// Emit the Blocked event and run the recovery cascade for one blocked
    /// pair (`None` = the approach from the robot to the plan's first node).
    fn cascade(
        &mut self,
        lsg: &mut LayeredSceneGraph,
        grid: &VoxelGrid,
        robot: &RobotState,
        pair_opt: Option<usize>,
        t: f64,
    ) -> bool {
        let mutations = lsg.version();
        let (plan, trans, hop_cursor) = {
            let active = self.active.as_ref().expect("cascade requires an active plan");
            (active.plan.clone(), active.trans, active.hop_cursor)
        };
        match pair_opt {
            Some(pair) => {
                let flying = hop_cursor.checked_sub(1) == Some(pair);
                let detour_from = if flying { robot.position } else { plan.hops[pair].position };
                self.emit(
                    t,
                    TraceEventKind::Blocked {
                        hop: pair_strings(&plan, pair),
                        hop_index: pair,
                        link: plan.links[pair].label().to_string(),
                        mutations,
                    },
                );
                let ctx = CascadeContext {
                    loc: self.loc,
                    terminal_target: self.terminal_target,
                    trans: &trans,
                    cfg: &self.cfg,
                    t,
                };
                let outcome =
                    handle_blocked_segment(lsg, &plan, pair, detour_from, grid, &ctx, &mut self.events);
                self.apply_outcome(outcome, pair_opt, flying, robot, t)
            }
            None => {
                // Approach to the plan's first node is blocked. No graph edge
                // backs it; try a detour, then escalate.
                let first = plan.hops[0];
                self.emit(
                    t,
                    TraceEventKind::Blocked {
                        hop: ["approach".into(), first.path.to_string()],
                        hop_index: 0,
                        link: "approach".into(),
                        mutations,
                    },
                );
                match alt_local_geometric_path(
                    grid,
                    robot.position,
                    first.position,
                    self.cfg.robot_radius,
                    self.cfg.detour_bound,
                ) {
                    Ok(Some(path)) => {
                        self.emit(
                            t,
                            TraceEventKind::DetourFound {
                                hop: ["approach".into(), first.path.to_string()],
                                waypoints: path.waypoints.len(),
                                length: path.length(),
                                mutations,
                            },
                        );
                        let active = self.active.as_mut().expect("active plan");
                        active.track = path.waypoints;
                        true
                    }
                    _ => {
                        self.emit(
                            t,
                            TraceEventKind::LocalReplan {
                                ok: false,
                                blocked_edge: None,
                                hops: Vec::new(),
                                links: Vec::new(),
                                mutations,
                            },
                        );
                        match plan.segment {
                            Some(seg) => {
                                let ctx = CascadeContext {
                                    loc: self.loc,
                                    terminal_target: self.terminal_target,
                                    trans: &trans,
                                    cfg: &self.cfg,
                                    t,
                                };
                                let outcome =
                                    escalate_global(lsg, grid, seg, &ctx, &mut self.events);
                                self.apply_outcome(outcome, pair_opt, true, robot, t)
                            }
                            None => {
                                self.finish_infeasible(t, "approach blocked with no recourse");
                                false
                            }
                        }
                    }
                }
            }
        }
    }

    fn apply_outcome(
        &mut self,
        outcome: ReplanOutcome,
        pair_opt: Option<usize>,
        flying: bool,
        robot: &RobotState,
        t: f64,
    ) -> bool {
        match outcome {
            ReplanOutcome::GeometricDetour(path) => {
                let active = self.active.as_mut().expect("active plan");
                if flying {
                    active.track = path.waypoints;
                } else if let Some(pair) = pair_opt {
                    let n = path.waypoints.len();
                    let intermediates: Vec<Vec3> =
                        path.waypoints[1..n.saturating_sub(1)].to_vec();
                    active.plan.detours.insert(pair, intermediates);
                }
                true
            }
            ReplanOutcome::LocalReplanned(plan) => {
                let trans = self.active.as_ref().expect("active plan").trans;
                self.install(trans, plan, robot.position);
                true
            }
            ReplanOutcome::GlobalReplanned { route, trans, plan } => {
                self.segments = segment_path(&route);
                self.seg_idx = 0;
                self.phase = Phase::Segments;
                self.install(trans, plan, robot.position);
                true
            }
            ReplanOutcome::Infeasible => {
                self.finish_infeasible(t, "replanning cascade exhausted");
                false
            }
        }
    }
}

fn initial_track(robot_pos: Vec3, plan: &LocalPlan) -> Vec<Vec3> {
    let mut track = vec![robot_pos];
    if let Some(first) = plan.hops.first() {
        track.push(first.position);
    }
    dedup_track(&mut track);
    track
}

fn dedup_track(track: &mut Vec<Vec3>) {
    track.dedup_by(|a, b| a.distance_sq(*b) < 1e-18);
}
