//! 3D kd-tree for nearest-pose queries.
//!
//! Used when a pose graph grows beyond the exhaustive-scan threshold. Ties on
//! distance resolve to the smallest payload so results always match a
//! lexicographic linear scan.

use crate::lsg::{Graph, NodeId};
use crate::vec3::Vec3;

pub struct KdTree3<T> {
    nodes: Vec<KdNode<T>>,
    root: Option<usize>,
}

struct KdNode<T> {
    point: Vec3,
    payload: T,
    left: Option<usize>,
    right: Option<usize>,
}

impl<T: Copy + Ord> KdTree3<T> {
    pub fn build(points: &[(Vec3, T)]) -> Self {
        let mut items: Vec<(Vec3, T)> = points.to_vec();
        let mut tree = KdTree3 { nodes: Vec::with_capacity(items.len()), root: None };
        if !items.is_empty() {
            let n = items.len();
            tree.root = Some(tree.build_rec(&mut items[..n], 0));
        }
        tree
    }

    fn build_rec(&mut self, items: &mut [(Vec3, T)], depth: usize) -> usize {
        let axis = depth % 3;
        items.sort_unstable_by(|a, b| {
            a.0.axis(axis)
                .total_cmp(&b.0.axis(axis))
                .then_with(|| a.1.cmp(&b.1))
        });
        let mid = items.len() / 2;
        let (point, payload) = items[mid];
        let idx = self.nodes.len();
        self.nodes.push(KdNode { point, payload, left: None, right: None });
        let (left_items, rest) = items.split_at_mut(mid);
        let right_items = &mut rest[1..];
        if !left_items.is_empty() {
            let left = self.build_rec(left_items, depth + 1);
            self.nodes[idx].left = Some(left);
        }
        if !right_items.is_empty() {
            let right = self.build_rec(right_items, depth + 1);
            self.nodes[idx].right = Some(right);
        }
        idx
    }

    /// Nearest point to `query`; ties by smallest payload.
    pub fn nearest(&self, query: Vec3) -> Option<(T, f64)> {
        let root = self.root?;
        let mut best: Option<(f64, T)> = None;
        self.search(root, 0, query, &mut best);
        best.map(|(d2, p)| (p, d2))
    }

    fn search(&self, idx: usize, depth: usize, query: Vec3, best: &mut Option<(f64, T)>) {
        let node = &self.nodes[idx];
        let d2 = node.point.distance_sq(query);
        let candidate = (d2, node.payload);
        if best.map_or(true, |b| candidate < b) {
            *best = Some(candidate);
        }
        let axis = depth % 3;
        let delta = query.axis(axis) - node.point.axis(axis);
        let (near, far) = if delta < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if let Some(n) = near {
            self.search(n, depth + 1, query, best);
        }
        // Descend the far side while an equal-distance, smaller-payload
        // candidate could still exist across the splitting plane.
        if let Some(f) = far {
            if delta * delta <= best.map_or(f64::INFINITY, |(bd, _)| bd) {
                self.search(f, depth + 1, query, best);
            }
        }
    }
}

/// Node-count threshold above which nearest-pose queries go through a
/// kd-tree instead of an exhaustive scan.
pub const DEFAULT_KD_THRESHOLD: usize = 64;

/// Nearest node of `graph` to `query` by node pose; ties by smallest node id.
pub fn nearest_node(graph: &Graph, query: Vec3, kd_threshold: usize) -> Option<NodeId> {
    if graph.nodes.len() > kd_threshold {
        let points: Vec<(Vec3, NodeId)> =
            graph.nodes.iter().map(|(id, attrs)| (attrs.pose, *id)).collect();
        KdTree3::build(&points).nearest(query).map(|(id, _)| id)
    } else {
        let mut best: Option<(f64, NodeId)> = None;
        for (id, attrs) in &graph.nodes {
            let d2 = attrs.pose.distance_sq(query);
            if best.map_or(true, |(bd, _)| d2 < bd) {
                best = Some((d2, *id));
            }
        }
        best.map(|(_, id)| id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scan(points: &[(Vec3, u32)], q: Vec3) -> (u32, f64) {
        let mut best = (f64::INFINITY, u32::MAX);
        for &(p, id) in points {
            let d2 = p.distance_sq(q);
            if (d2, id) < best {
                best = (d2, id);
            }
        }
        (best.1, best.0)
    }

    #[test]
    fn matches_exhaustive_scan_on_random_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..40 {
            let n = rng.gen_range(65..300);
            let points: Vec<(Vec3, u32)> = (0..n)
                .map(|i| {
                    (
                        Vec3::new(
                            rng.gen_range(-50.0..50.0),
                            rng.gen_range(-50.0..50.0),
                            rng.gen_range(-5.0..5.0),
                        ),
                        i,
                    )
                })
                .collect();
            let tree = KdTree3::build(&points);
            for _ in 0..20 {
                let q = Vec3::new(
                    rng.gen_range(-60.0..60.0),
                    rng.gen_range(-60.0..60.0),
                    rng.gen_range(-6.0..6.0),
                );
                let (id, d2) = tree.nearest(q).unwrap();
                let (sid, sd2) = scan(&points, q);
                assert_eq!(id, sid);
                assert!((d2 - sd2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_ties_prefer_smaller_payload() {
        // Two points symmetric about the query.
        let points = vec![
            (Vec3::new(1.0, 0.0, 0.0), 5u32),
            (Vec3::new(-1.0, 0.0, 0.0), 2u32),
        ];
        let tree = KdTree3::build(&points);
        let (id, _) = tree.nearest(Vec3::ZERO).unwrap();
        assert_eq!(id, 2);
    }

    #[test]
    fn empty_tree_returns_none() {
        let tree: KdTree3<u32> = KdTree3::build(&[]);
        assert!(tree.nearest(Vec3::ZERO).is_none());
    }
}
