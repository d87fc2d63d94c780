//! Shared oracles and helpers for the integration and acceptance suites.
//! Everything here is deliberately independent of the implementation paths it
//! checks: path enumeration instead of Dijkstra, fine-step sampling instead
//! of the production collision stepper.

#![allow(dead_code)]

use rand::Rng;
use spade_core::sim::{GridParams, RobotInit, Scenario, ScenarioQuery};
use spade_core::{
    EdgeAttribute, Graph, LayerId, NodeAttributes, NodeId, Obstruction, TraversabilityStatus,
    TraceEvent, TraceEventKind, Vec3, VoxelGrid,
};
use std::collections::BTreeMap;

pub const TIE_EPS: f64 = 1e-9;

/// Pose-ring scene with one mid-route obstruction appearing at t = 0.8 s.
pub fn fig6_scenario() -> Scenario {
    // Midpoint of the ring hop p1 -> p2 (radius 3, 8 poses).
    let p1 = 3.0 * std::f64::consts::FRAC_1_SQRT_2;
    let mid = Vec3::new(p1 / 2.0, (p1 + 3.0) / 2.0, 1.0);
    Scenario {
        lsg: "ring.lsg.json".into(),
        grid: Some(GridParams {
            resolution: 0.2,
            origin: Vec3::new(-8.0, -8.0, -2.0),
            extent: [80, 80, 40],
        }),
        obstructions: vec![Obstruction {
            center: mid,
            half_extents: Vec3::new(0.5, 0.5, 1.5),
            activation_time: 0.8,
        }],
        queries: vec![ScenarioQuery { t: 0.0, target: 0, level: Some(0), pose: Some(4) }],
        robot: RobotInit { start: [3.0, 0.0, 1.0, 0.0], speed: 1.0 },
        sensing_radius: 8.0,
        seed: 0,
    }
}

/// Direct corridor walled off; the alternate global route goes through t2.
pub fn corridor_wall_scenario() -> Scenario {
    Scenario {
        lsg: "corridor.lsg.json".into(),
        grid: Some(GridParams {
            resolution: 0.2,
            origin: Vec3::new(-10.0, -10.0, -2.0),
            extent: [200, 150, 40],
        }),
        obstructions: vec![Obstruction {
            center: Vec3::new(8.0, 0.0, 1.0),
            half_extents: Vec3::new(1.0, 4.5, 4.0),
            activation_time: 0.0,
        }],
        queries: vec![ScenarioQuery { t: 0.0, target: 1, level: None, pose: None }],
        robot: RobotInit { start: [-2.0, 0.0, 1.0, 0.0], speed: 1.0 },
        sensing_radius: 12.0,
        seed: 0,
    }
}

/// Urban-grid diamond with two staged corridor blockings, forcing two
/// successive global replans before arrival via the southern route.
pub fn fig8_scenario() -> Scenario {
    Scenario {
        lsg: "fig8.lsg.json".into(),
        grid: Some(GridParams {
            resolution: 0.2,
            origin: Vec3::new(-8.0, -12.0, -2.0),
            extent: [180, 125, 40],
        }),
        obstructions: vec![
            // Across the t0-t2 corridor, present from the start.
            Obstruction {
                center: Vec3::new(6.0, 0.0, 1.0),
                half_extents: Vec3::new(1.0, 2.5, 4.0),
                activation_time: 0.0,
            },
            // Across the t0-t1 corridor, appearing while the robot heads there.
            Obstruction {
                center: Vec3::new(6.0, 3.5, 1.0),
                half_extents: Vec3::new(1.0, 2.5, 4.0),
                activation_time: 2.0,
            },
        ],
        queries: vec![ScenarioQuery { t: 0.0, target: 3, level: None, pose: None }],
        robot: RobotInit { start: [-2.0, 0.0, 1.0, 0.0], speed: 1.0 },
        sensing_radius: 10.0,
        seed: 0,
    }
}

/// Enumerate every loopless path between two nodes over traversable edges,
/// costs accumulated in path order.
pub fn all_simple_paths(g: &Graph, src: NodeId, dst: NodeId) -> Vec<(Vec<NodeId>, f64)> {
    let mut adjacency: BTreeMap<NodeId, Vec<(NodeId, f64)>> = BTreeMap::new();
    for e in &g.edges {
        if let EdgeAttribute::Traversability { cost, status: TraversabilityStatus::Traversable } =
            e.attr
        {
            adjacency.entry(e.u).or_default().push((e.v, cost));
            adjacency.entry(e.v).or_default().push((e.u, cost));
        }
    }
    let mut out = Vec::new();
    let mut path = vec![src];
    let mut visiting = std::collections::BTreeSet::new();
    visiting.insert(src);
    dfs(&adjacency, dst, &mut path, &mut visiting, 0.0, &mut out);
    out
}

fn dfs(
    adjacency: &BTreeMap<NodeId, Vec<(NodeId, f64)>>,
    dst: NodeId,
    path: &mut Vec<NodeId>,
    visiting: &mut std::collections::BTreeSet<NodeId>,
    cost: f64,
    out: &mut Vec<(Vec<NodeId>, f64)>,
) {
    let current = *path.last().unwrap();
    if current == dst {
        out.push((path.clone(), cost));
        return;
    }
    if let Some(neighbors) = adjacency.get(&current) {
        for &(next, w) in neighbors {
            if visiting.contains(&next) {
                continue;
            }
            path.push(next);
            visiting.insert(next);
            dfs(adjacency, dst, path, visiting, cost + w, out);
            path.pop();
            visiting.remove(&next);
        }
    }
}

/// Composite route order used across the planner: cost within `TIE_EPS`,
/// then hop count, then lexicographic node sequence. Re-implemented here as
/// the oracle side.
pub fn brute_best(paths: &[(Vec<NodeId>, f64)]) -> Option<(Vec<NodeId>, f64)> {
    let mut best: Option<&(Vec<NodeId>, f64)> = None;
    for p in paths {
        match best {
            None => best = Some(p),
            Some(b) => {
                let better = if p.1 < b.1 - TIE_EPS {
                    true
                } else if (p.1 - b.1).abs() <= TIE_EPS {
                    (p.0.len(), &p.0) < (b.0.len(), &b.0)
                } else {
                    false
                };
                if better {
                    best = Some(p);
                }
            }
        }
    }
    best.cloned()
}

/// Random connected Target-layer graph: spanning tree plus extra edges,
/// weights uniform in `weights`.
pub fn random_connected_graph(
    rng: &mut impl Rng,
    nodes: usize,
    extra_edges: usize,
    weights: std::ops::Range<f64>,
) -> Graph {
    let mut g = Graph::new(LayerId::Target);
    for i in 0..nodes {
        g.insert_node(
            i as u32,
            NodeAttributes::new(
                LayerId::Target,
                Vec3::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0), 0.0),
            ),
        );
    }
    let add = |g: &mut Graph, u: u32, v: u32, w: f64| {
        if u != v && g.traversability_between(NodeId::target(u), NodeId::target(v)).is_none() {
            g.add_edge(
                NodeId::target(u),
                NodeId::target(v),
                EdgeAttribute::Traversability { cost: w, status: TraversabilityStatus::Traversable },
            );
            true
        } else {
            false
        }
    };
    for i in 1..nodes {
        let parent = rng.gen_range(0..i);
        let w = rng.gen_range(weights.clone());
        add(&mut g, i as u32, parent as u32, w);
    }
    let mut added = 0;
    let mut attempts = 0;
    while added < extra_edges && attempts < extra_edges * 10 {
        attempts += 1;
        let u = rng.gen_range(0..nodes) as u32;
        let v = rng.gen_range(0..nodes) as u32;
        let w = rng.gen_range(weights.clone());
        if add(&mut g, u, v, w) {
            added += 1;
        }
    }
    g
}

/// Random multi-domain graph: the connected traversability skeleton of
/// [`random_connected_graph`] plus observational and symbolic edges over
/// random pairs.
pub fn random_multi_domain_graph(rng: &mut impl Rng, nodes: usize) -> Graph {
    let mut g = random_connected_graph(rng, nodes, nodes / 2, 0.5..10.0);
    let others = nodes * 2;
    for _ in 0..others {
        let u = NodeId::target(rng.gen_range(0..nodes) as u32);
        let v = NodeId::target(rng.gen_range(0..nodes) as u32);
        if u == v {
            continue;
        }
        if rng.gen_bool(0.5) {
            if !g.edges.iter().any(|e| e.connects(u, v) && matches!(e.attr, EdgeAttribute::Observational { .. })) {
                g.add_edge(
                    u,
                    v,
                    EdgeAttribute::Observational {
                        confidence: rng.gen_range(0.5..1.0),
                        distance: rng.gen_range(0.1..30.0),
                    },
                );
            }
        } else if !g.edges.iter().any(|e| e.connects(u, v) && matches!(e.attr, EdgeAttribute::Symbolic)) {
            g.add_edge(u, v, EdgeAttribute::Symbolic);
        }
    }
    // Some blocked traversability edges so status filtering is exercised.
    let blocked = nodes / 4;
    for _ in 0..blocked {
        let u = NodeId::target(rng.gen_range(0..nodes) as u32);
        let v = NodeId::target(rng.gen_range(0..nodes) as u32);
        if u == v || g.edges.iter().any(|e| e.connects(u, v)) {
            continue;
        }
        g.add_edge(
            u,
            v,
            EdgeAttribute::Traversability {
                cost: rng.gen_range(0.5..10.0),
                status: TraversabilityStatus::Blocked,
            },
        );
    }
    g
}

/// Independent fine-step collision oracle: samples at resolution/10 with its
/// own point-to-box arithmetic.
pub fn fine_step_collision_free(grid: &VoxelGrid, a: Vec3, b: Vec3, radius: f64) -> bool {
    let step = grid.resolution() / 10.0;
    let length = a.distance(b);
    let samples = if length == 0.0 { 1 } else { (length / step).ceil() as usize };
    let res = grid.resolution();
    for i in 0..=samples {
        let t = i as f64 / samples as f64;
        let p = Vec3::new(
            a.x + (b.x - a.x) * t,
            a.y + (b.y - a.y) * t,
            a.z + (b.z - a.z) * t,
        );
        for idx in grid.occupied_iter() {
            let min = [
                grid.origin().x + idx[0] as f64 * res,
                grid.origin().y + idx[1] as f64 * res,
                grid.origin().z + idx[2] as f64 * res,
            ];
            let dx = (min[0] - p.x).max(0.0).max(p.x - (min[0] + res));
            let dy = (min[1] - p.y).max(0.0).max(p.y - (min[1] + res));
            let dz = (min[2] - p.z).max(0.0).max(p.z - (min[2] + res));
            if (dx * dx + dy * dy + dz * dz).sqrt() <= radius {
                return false;
            }
        }
    }
    true
}

pub fn event_names(events: &[TraceEvent]) -> Vec<&'static str> {
    events.iter().map(|e| e.kind.name()).collect()
}

/// Assert `needle` appears in `haystack` as an ordered (not necessarily
/// contiguous) subsequence.
pub fn assert_subsequence(haystack: &[&str], needle: &[&str]) {
    let mut it = haystack.iter();
    for want in needle {
        assert!(
            it.any(|got| got == want),
            "event subsequence {:?} not found in {:?}",
            needle,
            haystack
        );
    }
}

/// Unordered node-pair list of a route given as path strings.
pub fn route_pairs(route: &[String]) -> Vec<(String, String)> {
    route
        .windows(2)
        .map(|w| ordered_pair(&w[0], &w[1]))
        .collect()
}

pub fn ordered_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// All graph-edge hop pairs of a plan event (hops + links arrays).
pub fn plan_edge_pairs(hops: &[String], links: &[String]) -> Vec<(String, String)> {
    links
        .iter()
        .enumerate()
        .filter(|(_, l)| l.as_str() == "edge")
        .map(|(i, _)| ordered_pair(&hops[i], &hops[i + 1]))
        .collect()
}

/// Every blocked edge named by replan events, in order.
pub fn blocked_edges(events: &[TraceEvent]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for e in events {
        match &e.kind {
            TraceEventKind::LocalReplan { blocked_edge: Some(pair), .. } => {
                out.push(ordered_pair(&pair[0], &pair[1]));
            }
            TraceEventKind::GlobalReplan { blocked_edge, .. } => {
                out.push(ordered_pair(&blocked_edge[0], &blocked_edge[1]));
            }
            _ => {}
        }
    }
    out
}
