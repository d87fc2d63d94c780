//! Synthetic scene generation: jittered target grids with stacked levels and
//! pose rings, plus an empty voxel grid sized to the scene. Deterministic per
//! seed (ChaCha8), so identical parameters serialize byte-identically.

use crate::lsg::{
    EdgeAttribute, Graph, LayerId, LayeredSceneGraph, NodeAttributes, NodeId,
    TraversabilityStatus,
};
use crate::vec3::Vec3;
use crate::voxel::VoxelGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vertical spacing between stacked inspection levels, meters.
pub const LEVEL_STEP: f64 = 2.0;
/// Pose-ring radius as a fraction of the target grid spacing.
pub const RING_RADIUS_FRACTION: f64 = 0.2;
/// Base height of targets above the ground plane, meters.
pub const TARGET_HEIGHT: f64 = 1.0;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub targets: usize,
    /// Grid spacing between neighboring targets, meters.
    pub spacing: f64,
    pub levels_per_target: usize,
    /// Pose count per level, laid out as a ring.
    pub poses_per_level: usize,
    /// Probability a grid-neighbor pair gets a traversability edge.
    pub traversable_fraction: f64,
    /// Probability a grid-neighbor pair gets an observational edge.
    pub observational_fraction: f64,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            targets: 9,
            spacing: 10.0,
            levels_per_target: 1,
            poses_per_level: 8,
            traversable_fraction: 1.0,
            observational_fraction: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
#[error("invalid generator parameters: {0}")]
pub struct ParamError(pub String);

/// Build a synthetic scene: targets on a jittered square grid, each with
/// `levels_per_target` stacked levels (Level-0 designated as the transition
/// level) and a traversable pose ring per level. Grid-neighbor targets get
/// traversability and observational edges per the configured fractions.
pub fn generate_synthetic_lsg(p: &GeneratorParams) -> Result<(LayeredSceneGraph, VoxelGrid), ParamError> {
    validate(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let side = (p.targets as f64).sqrt().ceil() as usize;
    let ring_radius = (p.spacing * RING_RADIUS_FRACTION).clamp(0.5, 4.0);

    let mut targets = Graph::new(LayerId::Target);
    let mut centers = Vec::with_capacity(p.targets);
    for index in 0..p.targets {
        let gx = (index % side) as f64;
        let gy = (index / side) as f64;
        let jitter = p.spacing * 0.1;
        let center = Vec3::new(
            gx * p.spacing + rng.gen_range(-jitter..=jitter),
            gy * p.spacing + rng.gen_range(-jitter..=jitter),
            TARGET_HEIGHT,
        );
        centers.push(center);

        let mut levels = Graph::new(LayerId::Level);
        for level in 0..p.levels_per_target {
            let level_center = Vec3::new(center.x, center.y, center.z + level as f64 * LEVEL_STEP);
            let mut poses = Graph::new(LayerId::Pose);
            for pose in 0..p.poses_per_level {
                let angle = 2.0 * std::f64::consts::PI * pose as f64 / p.poses_per_level as f64;
                let position = Vec3::new(
                    level_center.x + ring_radius * angle.cos(),
                    level_center.y + ring_radius * angle.sin(),
                    level_center.z,
                );
                let mut attrs = NodeAttributes::new(LayerId::Pose, position);
                // Sparse feature graphs: every third pose records one feature.
                if pose % 3 == 0 {
                    let mut features = Graph::new(LayerId::Feature);
                    features.insert_node(
                        0,
                        NodeAttributes::new(LayerId::Feature, position + Vec3::new(0.0, 0.0, 0.5)),
                    );
                    attrs.nested = Some(Box::new(features));
                }
                poses.insert_node(pose as u32, attrs);
            }
            // Ring edges: consecutive poses, traversable (arc-length cost)
            // plus a symbolic sibling relation.
            if p.poses_per_level >= 2 {
                let arc = 2.0 * std::f64::consts::PI * ring_radius / p.poses_per_level as f64;
                let pairs = if p.poses_per_level == 2 { 1 } else { p.poses_per_level };
                for pose in 0..pairs {
                    let u = NodeId::pose(pose as u32);
                    let v = NodeId::pose(((pose + 1) % p.poses_per_level) as u32);
                    poses.add_edge(
                        u,
                        v,
                        EdgeAttribute::Traversability {
                            cost: arc,
                            status: TraversabilityStatus::Traversable,
                        },
                    );
                    poses.add_edge(u, v, EdgeAttribute::Symbolic);
                }
            }
            let mut lattrs = NodeAttributes::new(LayerId::Level, level_center);
            lattrs.nested = Some(Box::new(poses));
            levels.insert_node(level as u32, lattrs);
        }
        // Stacked levels chain vertically.
        for level in 1..p.levels_per_target {
            levels.add_edge(
                NodeId::level(level as u32 - 1),
                NodeId::level(level as u32),
                EdgeAttribute::Traversability {
                    cost: LEVEL_STEP,
                    status: TraversabilityStatus::Traversable,
                },
            );
        }
        let mut tattrs = NodeAttributes::new(LayerId::Target, center);
        tattrs.inspection_status = Some((rng.gen_range(0.0..1.0_f64) * 100.0).round() / 100.0);
        tattrs.designated_transition_level = Some(NodeId::level(0));
        tattrs.nested = Some(Box::new(levels));
        targets.insert_node(index as u32, tattrs);
    }

    // Grid-neighbor edges (right and up), gated by the fractions.
    for index in 0..p.targets {
        let (gx, gy) = (index % side, index / side);
        for (nx, ny) in [(gx + 1, gy), (gx, gy + 1)] {
            if nx >= side {
                continue;
            }
            let neighbor = ny * side + nx;
            if neighbor >= p.targets {
                continue;
            }
            let u = NodeId::target(index as u32);
            let v = NodeId::target(neighbor as u32);
            let distance = centers[index].distance(centers[neighbor]);
            if rng.gen_bool(p.traversable_fraction) {
                targets.add_edge(
                    u,
                    v,
                    EdgeAttribute::Traversability {
                        cost: distance,
                        status: TraversabilityStatus::Traversable,
                    },
                );
            }
            if rng.gen_bool(p.observational_fraction) {
                let confidence = rng.gen_range(0.5..1.0);
                targets.add_edge(
                    u,
                    v,
                    EdgeAttribute::Observational { confidence, distance },
                );
            }
        }
    }

    let lsg = LayeredSceneGraph::new(targets);
    lsg.validate().map_err(|e| ParamError(format!("generated graph invalid: {e}")))?;

    // Empty local map spanning the scene with margin.
    let margin = 8.0;
    let extent_xy = side as f64 * p.spacing + 2.0 * margin;
    let extent_z = p.levels_per_target as f64 * LEVEL_STEP + TARGET_HEIGHT + 2.0 * margin;
    let resolution = 0.2;
    let grid = VoxelGrid::new(
        resolution,
        Vec3::new(-margin, -margin, -margin),
        [
            (extent_xy / resolution).ceil() as u32,
            (extent_xy / resolution).ceil() as u32,
            (extent_z / resolution).ceil() as u32,
        ],
    )
    .map_err(|e| ParamError(e.to_string()))?;
    Ok((lsg, grid))
}

fn validate(p: &GeneratorParams) -> Result<(), ParamError> {
    if p.targets < 1 || p.levels_per_target < 1 || p.poses_per_level < 1 {
        return Err(ParamError("counts must be >= 1".into()));
    }
    if !(p.spacing > 0.0) {
        return Err(ParamError(format!("spacing {} must be > 0", p.spacing)));
    }
    for (name, f) in [
        ("traversable_fraction", p.traversable_fraction),
        ("observational_fraction", p.observational_fraction),
    ] {
        if !(0.0..=1.0).contains(&f) {
            return Err(ParamError(format!("{name} {f} outside [0, 1]")));
        }
    }
    Ok(())
}
