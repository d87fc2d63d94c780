//! Benchmark harness comparing path computation over a domain-subsampled
//! graph against the original multi-domain graph.
//!
//! The subsampled arm extracts the traversability view once outside the timed
//! region, then times Dijkstra over the view. The original arm times Dijkstra
//! over the full edge list with inline tag+status filtering. Arms run
//! interleaved A/B per repetition on one thread; medians over the repetitions
//! are reported, with warm-up runs discarded. Both arms must return identical
//! node sequences.

use crate::lsg::{EdgeAttribute, Graph, LayerId, NodeAttributes, NodeId, TraversabilityStatus};
use crate::search::{shortest_path, shortest_path_multi_domain, Route};
use crate::subsample::{extract_domain_subgraph, TaskMode};
use crate::vec3::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no traversable route between the benchmark endpoints")]
    NoRoute,
    #[error("arms disagree: subsampled {subsampled:?} vs original {original:?}")]
    InvariantViolation { subsampled: Vec<NodeId>, original: Vec<NodeId> },
    #[error("complexity model undefined for |V| = {0} (requires >= 2)")]
    Domain(usize),
    #[error("invalid benchmark parameters: {0}")]
    BadParams(String),
}

/// One measured size point.
#[derive(Clone, Debug)]
pub struct BenchRecord {
    pub label: String,
    pub nodes: usize,
    pub edges_total: usize,
    pub edges_sub: usize,
    pub t_sub_us: f64,
    pub t_orig_us: f64,
    pub speedup: f64,
    pub model_sub: f64,
    pub model_orig: f64,
    pub reps: usize,
    pub seed: u64,
    pub query: (NodeId, NodeId),
}

/// Priority-queue Dijkstra time-complexity model: `(e + v) * log2(v)`.
pub fn complexity_model(v: usize, e: usize) -> Result<f64, BenchError> {
    if v < 2 {
        return Err(BenchError::Domain(v));
    }
    Ok((e + v) as f64 * (v as f64).log2())
}

/// Flat multi-domain benchmark graph: nodes on a square grid, one
/// traversability edge per neighbor pair, padded with observational and
/// symbolic parallel edges so traversability edges make up roughly
/// `traversable_frac` of the total. `traversable_frac = 1` yields a pure
/// traversability graph; `1/3` yields one edge of each tag per pair.
pub fn make_multi_domain_graph(nodes: usize, traversable_frac: f64, seed: u64) -> Result<Graph, BenchError> {
    if nodes < 2 {
        return Err(BenchError::BadParams(format!("need >= 2 nodes, got {nodes}")));
    }
    if !(traversable_frac > 0.0 && traversable_frac <= 1.0) {
        return Err(BenchError::BadParams(format!(
            "traversable fraction {traversable_frac} outside (0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (nodes as f64).sqrt().ceil() as usize;
    let spacing = 5.0;
    let mut g = Graph::new(LayerId::Target);
    for i in 0..nodes {
        let x = (i % side) as f64 * spacing + rng.gen_range(-0.5..0.5);
        let y = (i / side) as f64 * spacing + rng.gen_range(-0.5..0.5);
        g.insert_node(i as u32, NodeAttributes::new(LayerId::Target, Vec3::new(x, y, 0.0)));
    }
    // One extra non-traversable edge per pair for every whole 1/frac beyond
    // the traversability edge, alternating observational/symbolic.
    let per_pair = (1.0 / traversable_frac).round().max(1.0) as usize;
    for i in 0..nodes {
        let (gx, gy) = (i % side, i / side);
        for (nx, ny) in [(gx + 1, gy), (gx, gy + 1)] {
            if nx >= side {
                continue;
            }
            let j = ny * side + nx;
            if j >= nodes {
                continue;
            }
            let u = NodeId::target(i as u32);
            let v = NodeId::target(j as u32);
            let w = rng.gen_range(1.0..10.0);
            g.add_edge(
                u,
                v,
                EdgeAttribute::Traversability { cost: w, status: TraversabilityStatus::Traversable },
            );
            for extra in 0..per_pair - 1 {
                if extra % 2 == 0 {
                    let confidence = rng.gen_range(0.5..1.0);
                    g.add_edge(u, v, EdgeAttribute::Observational { confidence, distance: w });
                } else {
                    g.add_edge(u, v, EdgeAttribute::Symbolic);
                }
            }
        }
    }
    Ok(g)
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

/// Time both arms for one (src, dst) query, interleaved A/B per repetition
/// with `warmup` discarded pairs. Subsampling runs outside the timed region.
pub fn bench_pair(
    g: &Graph,
    src: NodeId,
    dst: NodeId,
    reps: usize,
    warmup: usize,
    label: &str,
    seed: u64,
) -> Result<BenchRecord, BenchError> {
    if reps < 1 {
        return Err(BenchError::BadParams("reps must be >= 1".into()));
    }
    let sub = extract_domain_subgraph(g, TaskMode::PathFinding);
    let mut sub_times = Vec::with_capacity(reps);
    let mut orig_times = Vec::with_capacity(reps);
    let mut route_sub: Option<Route> = None;
    let mut route_orig: Option<Route> = None;
    for rep in 0..reps + warmup {
        let t0 = Instant::now();
        let rs = shortest_path(&sub, src, dst).map_err(|_| BenchError::NoRoute)?;
        let t_sub = t0.elapsed().as_nanos() as f64 / 1e3;
        let t1 = Instant::now();
        let ro = shortest_path_multi_domain(g, src, dst).map_err(|_| BenchError::NoRoute)?;
        let t_orig = t1.elapsed().as_nanos() as f64 / 1e3;
        if rep >= warmup {
            sub_times.push(t_sub);
            orig_times.push(t_orig);
        }
        if rs.nodes != ro.nodes {
            return Err(BenchError::InvariantViolation {
                subsampled: rs.nodes,
                original: ro.nodes,
            });
        }
        route_sub = Some(rs);
        route_orig = Some(ro);
    }
    debug_assert_eq!(
        route_sub.as_ref().map(|r| &r.nodes),
        route_orig.as_ref().map(|r| &r.nodes)
    );
    let edges_total = g.edges.len();
    let edges_sub = sub.edge_count();
    let t_sub_us = median(&mut sub_times);
    let t_orig_us = median(&mut orig_times);
    Ok(BenchRecord {
        label: label.to_string(),
        nodes: g.nodes.len(),
        edges_total,
        edges_sub,
        t_sub_us,
        t_orig_us,
        speedup: if t_sub_us > 0.0 { t_orig_us / t_sub_us } else { f64::NAN },
        model_sub: complexity_model(g.nodes.len(), edges_sub)?,
        model_orig: complexity_model(g.nodes.len(), edges_total)?,
        reps,
        seed,
        query: (src, dst),
    })
}

/// Sweep the node counts, benchmarking opposite grid corners at each point.
pub fn bench_sweep(
    sizes: &[usize],
    traversable_frac: f64,
    reps: usize,
    warmup: usize,
    seed: u64,
) -> Result<Vec<BenchRecord>, BenchError> {
    let mut records = Vec::with_capacity(sizes.len());
    for &nodes in sizes {
        let g = make_multi_domain_graph(nodes, traversable_frac, seed)?;
        let src = NodeId::target(0);
        let dst = NodeId::target(nodes as u32 - 1);
        let label = format!("v{nodes}");
        records.push(bench_pair(&g, src, dst, reps, warmup, &label, seed)?);
    }
    Ok(records)
}

pub const CSV_HEADER: &str =
    "label,nodes,edges_total,edges_sub,t_sub_us,t_orig_us,speedup,model_sub,model_orig,reps,seed";

pub fn records_to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{:.3},{:.3},{:.4},{:.1},{:.1},{},{}\n",
            r.label,
            r.nodes,
            r.edges_total,
            r.edges_sub,
            r.t_sub_us,
            r.t_orig_us,
            r.speedup,
            r.model_sub,
            r.model_orig,
            r.reps,
            r.seed
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_values() {
        assert_eq!(complexity_model(2, 0).unwrap(), 2.0);
        assert_eq!(complexity_model(4, 4).unwrap(), 16.0);
        assert_eq!(complexity_model(1024, 4096).unwrap(), 51200.0);
        assert!(matches!(complexity_model(1, 5), Err(BenchError::Domain(1))));
    }

    #[test]
    fn model_is_monotone() {
        let base = complexity_model(100, 300).unwrap();
        assert!(complexity_model(101, 300).unwrap() > base);
        assert!(complexity_model(100, 301).unwrap() > base);
    }

    #[test]
    fn third_fraction_gives_three_tags_per_pair() {
        let g = make_multi_domain_graph(100, 1.0 / 3.0, 5).unwrap();
        let sub = extract_domain_subgraph(&g, TaskMode::PathFinding);
        assert_eq!(g.edges.len(), 3 * sub.edge_count());
    }

    #[test]
    fn pure_traversability_graph_has_identity_filter() {
        let g = make_multi_domain_graph(64, 1.0, 5).unwrap();
        let record = bench_pair(
            &g,
            NodeId::target(0),
            NodeId::target(63),
            5,
            1,
            "id",
            5,
        )
        .unwrap();
        assert_eq!(record.edges_sub, record.edges_total);
    }

    #[test]
    fn arms_agree_on_random_queries() {
        let g = make_multi_domain_graph(144, 1.0 / 3.0, 9).unwrap();
        for dst in [10u32, 77, 143] {
            let r = bench_pair(&g, NodeId::target(0), NodeId::target(dst), 3, 0, "q", 9).unwrap();
            assert!(r.t_sub_us >= 0.0 && r.t_orig_us >= 0.0);
        }
    }

    #[test]
    fn sweep_emits_one_row_per_size() {
        let records = bench_sweep(&[36, 64], 0.5, 3, 1, 2).unwrap();
        assert_eq!(records.len(), 2);
        assert!(records[0].nodes < records[1].nodes);
        let csv = records_to_csv(&records);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with(CSV_HEADER));
    }
}
