//! Canonical test scenes. Hidden from the public API surface; integration
//! tests, the acceptance suite and the CLI tests all build their worlds from
//! these so fixture files and in-memory scenarios stay in sync.

use crate::lsg::{
    EdgeAttribute, Graph, LayerId, LayeredSceneGraph, NodeAttributes, NodeId,
    TraversabilityStatus,
};
use crate::vec3::Vec3;

/// Height of targets, levels and pose rings in fixture scenes.
pub const FIXTURE_Z: f64 = 1.0;

/// One target's description: center position plus a pose ring.
#[derive(Clone, Copy, Debug)]
pub struct TargetSpec {
    pub center: (f64, f64),
    pub ring_poses: usize,
    pub ring_radius: f64,
}

impl TargetSpec {
    pub fn at(x: f64, y: f64) -> Self {
        TargetSpec { center: (x, y), ring_poses: 8, ring_radius: 2.0 }
    }
}

/// Build a scene of single-level targets with pose rings, connected by the
/// given traversability edges (cost = center distance). Ring edges connect
/// consecutive poses at chord cost.
pub fn multi_target_scene(targets: &[TargetSpec], edges: &[(u32, u32)]) -> LayeredSceneGraph {
    let mut target_graph = Graph::new(LayerId::Target);
    for (index, spec) in targets.iter().enumerate() {
        let center = Vec3::new(spec.center.0, spec.center.1, FIXTURE_Z);
        let mut poses = Graph::new(LayerId::Pose);
        for pose in 0..spec.ring_poses {
            let angle = 2.0 * std::f64::consts::PI * pose as f64 / spec.ring_poses as f64;
            let position = Vec3::new(
                center.x + spec.ring_radius * angle.cos(),
                center.y + spec.ring_radius * angle.sin(),
                center.z,
            );
            poses.insert_node(pose as u32, NodeAttributes::new(LayerId::Pose, position));
        }
        if spec.ring_poses >= 2 {
            let pairs = if spec.ring_poses == 2 { 1 } else { spec.ring_poses };
            for pose in 0..pairs {
                let u = NodeId::pose(pose as u32);
                let v = NodeId::pose(((pose + 1) % spec.ring_poses) as u32);
                let cost = poses.node(u).unwrap().pose.distance(poses.node(v).unwrap().pose);
                poses.add_edge(
                    u,
                    v,
                    EdgeAttribute::Traversability { cost, status: TraversabilityStatus::Traversable },
                );
            }
        }
        let mut level = NodeAttributes::new(LayerId::Level, center);
        level.nested = Some(Box::new(poses));
        let mut levels = Graph::new(LayerId::Level);
        levels.insert_node(0, level);
        let mut tattrs = NodeAttributes::new(LayerId::Target, center);
        tattrs.designated_transition_level = Some(NodeId::level(0));
        tattrs.nested = Some(Box::new(levels));
        target_graph.insert_node(index as u32, tattrs);
    }
    for &(u, v) in edges {
        let cu = target_graph.node(NodeId::target(u)).unwrap().pose;
        let cv = target_graph.node(NodeId::target(v)).unwrap().pose;
        target_graph.add_edge(
            NodeId::target(u),
            NodeId::target(v),
            EdgeAttribute::Traversability {
                cost: cu.distance(cv),
                status: TraversabilityStatus::Traversable,
            },
        );
    }
    let lsg = LayeredSceneGraph::new(target_graph);
    lsg.validate().expect("fixture scene is valid");
    lsg
}

/// Single target with one pose ring at the origin.
pub fn ring_scene(ring_poses: usize, ring_radius: f64) -> LayeredSceneGraph {
    multi_target_scene(&[TargetSpec { center: (0.0, 0.0), ring_poses, ring_radius }], &[])
}

/// Two targets where the first stacks three levels (rings at z = 1, 3, 5
/// chained vertically). Exercises the level-shift stages of local planning.
pub fn stacked_levels_scene() -> LayeredSceneGraph {
    let mut lsg = multi_target_scene(
        &[TargetSpec::at(0.0, 0.0), TargetSpec::at(14.0, 0.0)],
        &[(0, 1)],
    );
    // Rebuild target 0 with three stacked levels.
    let center = Vec3::new(0.0, 0.0, FIXTURE_Z);
    let mut levels = Graph::new(LayerId::Level);
    for level in 0..3u32 {
        let level_center = Vec3::new(center.x, center.y, center.z + level as f64 * 2.0);
        let mut poses = Graph::new(LayerId::Pose);
        for pose in 0..8u32 {
            let angle = 2.0 * std::f64::consts::PI * pose as f64 / 8.0;
            let position = Vec3::new(
                level_center.x + 2.0 * angle.cos(),
                level_center.y + 2.0 * angle.sin(),
                level_center.z,
            );
            poses.insert_node(pose, NodeAttributes::new(LayerId::Pose, position));
        }
        for pose in 0..8u32 {
            let u = NodeId::pose(pose);
            let v = NodeId::pose((pose + 1) % 8);
            let cost = poses.node(u).unwrap().pose.distance(poses.node(v).unwrap().pose);
            poses.add_edge(
                u,
                v,
                EdgeAttribute::Traversability { cost, status: TraversabilityStatus::Traversable },
            );
        }
        let mut lattrs = NodeAttributes::new(LayerId::Level, level_center);
        lattrs.nested = Some(Box::new(poses));
        levels.insert_node(level, lattrs);
    }
    for level in 1..3u32 {
        levels.add_edge(
            NodeId::level(level - 1),
            NodeId::level(level),
            EdgeAttribute::Traversability { cost: 2.0, status: TraversabilityStatus::Traversable },
        );
    }
    let tattrs = lsg
        .target_graph
        .nodes
        .get_mut(&NodeId::target(0))
        .expect("target 0 exists");
    tattrs.nested = Some(Box::new(levels));
    lsg.validate().expect("stacked scene is valid");
    lsg
}

/// Three-target triangle: a direct corridor T0-T1 plus the alternate route
/// through T2. Walling the direct corridor forces a global replan.
pub fn corridor_scene() -> LayeredSceneGraph {
    multi_target_scene(
        &[
            TargetSpec::at(0.0, 0.0),
            TargetSpec::at(16.0, 0.0),
            TargetSpec::at(8.0, 10.0),
        ],
        &[(0, 1), (0, 2), (1, 2)],
    )
}

/// Urban-grid diamond: three parallel routes from T0 to T3 through T2
/// (straight, cheapest), T1 (upper) and T4 (lower). Staged blockings of the
/// first two corridors force two successive global replans.
pub fn urban_grid_scene() -> LayeredSceneGraph {
    multi_target_scene(
        &[
            TargetSpec::at(0.0, 0.0),
            TargetSpec::at(12.0, 7.0),
            TargetSpec::at(12.0, 0.0),
            TargetSpec::at(24.0, 0.0),
            TargetSpec::at(12.0, -7.0),
        ],
        &[(0, 1), (0, 2), (0, 4), (1, 3), (2, 3), (3, 4)],
    )
}

/// Six-pose ring with a cheap chord between p2 and p5; blocking the chord
/// reroutes traffic the long way around.
pub fn chord_ring_scene() -> LayeredSceneGraph {
    // Four targets so the chord lives at t3/l0, matching multi-target
    // addressing in tests.
    let mut lsg = multi_target_scene(
        &[
            TargetSpec::at(0.0, 0.0),
            TargetSpec::at(10.0, 0.0),
            TargetSpec::at(20.0, 0.0),
            TargetSpec { center: (30.0, 0.0), ring_poses: 6, ring_radius: 2.0 },
        ],
        &[(0, 1), (1, 2), (2, 3)],
    );
    let tattrs = lsg.target_graph.nodes.get_mut(&NodeId::target(3)).unwrap();
    let levels = tattrs.nested.as_deref_mut().unwrap();
    let poses = levels
        .nodes
        .get_mut(&NodeId::level(0))
        .unwrap()
        .nested
        .as_deref_mut()
        .unwrap();
    poses.add_edge(
        NodeId::pose(2),
        NodeId::pose(5),
        EdgeAttribute::Traversability { cost: 0.5, status: TraversabilityStatus::Traversable },
    );
    lsg.validate().expect("chord scene is valid");
    lsg
}
