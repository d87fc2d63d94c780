//! Scene-graph document serialization.
//!
//! The on-disk form is JSON with a fixed schema: a top-level `targets` list
//! plus `target_edges` for the Target-layer graph; each container carries the
//! `edges` of the graph nested under it. Unknown keys are rejected.

use super::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsgDocument {
    pub targets: Vec<TargetDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub target_edges: Vec<EdgeDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetDoc {
    pub id: u32,
    pub pose: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inspection_status: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition_level: Option<u32>,
    pub levels: Vec<LevelDoc>,
    /// Edges of the Level graph nested under this target.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<EdgeDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelDoc {
    pub id: u32,
    pub pose: [f64; 3],
    pub poses: Vec<PoseDoc>,
    /// Edges of the Pose graph nested under this level.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<EdgeDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseDoc {
    pub id: u32,
    pub pose: [f64; 3],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features: Vec<FeatureDoc>,
    /// Edges of the Feature graph nested under this pose.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<EdgeDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureDoc {
    pub id: u32,
    pub pose: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub u: u32,
    pub v: u32,
    #[serde(rename = "type")]
    pub kind: EdgeTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<TraversabilityStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_o: Option<f64>,
}

impl EdgeDoc {
    pub fn symbolic(u: u32, v: u32) -> Self {
        EdgeDoc { u, v, kind: EdgeTag::Symbolic, w_t: None, status: None, gamma: None, w_o: None }
    }

    pub fn traversable(u: u32, v: u32, w_t: f64) -> Self {
        EdgeDoc {
            u,
            v,
            kind: EdgeTag::Traversability,
            w_t: Some(w_t),
            status: Some(TraversabilityStatus::Traversable),
            gamma: None,
            w_o: None,
        }
    }

    pub fn observational(u: u32, v: u32, gamma: f64, w_o: f64) -> Self {
        EdgeDoc {
            u,
            v,
            kind: EdgeTag::Observational,
            w_t: None,
            status: None,
            gamma: Some(gamma),
            w_o: Some(w_o),
        }
    }
}

/// Parse and validate a scene-graph document from JSON text.
pub fn load_lsg(json: &str) -> Result<LayeredSceneGraph, LsgError> {
    let doc: LsgDocument =
        serde_json::from_str(json).map_err(|e| LsgError::Schema(e.to_string()))?;
    lsg_from_document(&doc)
}

/// Serialize back to the document form. `load` of the result reproduces the
/// same in-memory structure.
pub fn save_lsg(lsg: &LayeredSceneGraph) -> LsgDocument {
    let mut targets = Vec::new();
    for (tid, tattrs) in &lsg.target_graph.nodes {
        let levels_graph = tattrs.nested.as_deref();
        let mut levels = Vec::new();
        if let Some(lg) = levels_graph {
            for (lid, lattrs) in &lg.nodes {
                let mut poses = Vec::new();
                if let Some(pg) = lattrs.nested.as_deref() {
                    for (pid, pattrs) in &pg.nodes {
                        let mut features = Vec::new();
                        let mut fedges = Vec::new();
                        if let Some(fg) = pattrs.nested.as_deref() {
                            for (fid, fattrs) in &fg.nodes {
                                features.push(FeatureDoc { id: fid.index, pose: fattrs.pose.into() });
                            }
                            fedges = edges_to_doc(&fg.edges);
                        }
                        poses.push(PoseDoc {
                            id: pid.index,
                            pose: pattrs.pose.into(),
                            features,
                            edges: fedges,
                        });
                    }
                    levels.push(LevelDoc {
                        id: lid.index,
                        pose: lattrs.pose.into(),
                        poses,
                        edges: edges_to_doc(&pg.edges),
                    });
                }
            }
        }
        targets.push(TargetDoc {
            id: tid.index,
            pose: tattrs.pose.into(),
            inspection_status: tattrs.inspection_status,
            transition_level: tattrs.designated_transition_level.map(|n| n.index),
            levels,
            edges: levels_graph.map(|g| edges_to_doc(&g.edges)).unwrap_or_default(),
        });
    }
    LsgDocument { targets, target_edges: edges_to_doc(&lsg.target_graph.edges) }
}

/// Serialize to pretty-printed JSON (deterministic for identical inputs).
pub fn save_lsg_json(lsg: &LayeredSceneGraph) -> String {
    let doc = save_lsg(lsg);
    serde_json::to_string_pretty(&doc).expect("document serialization cannot fail")
}

fn edges_to_doc(edges: &[Edge]) -> Vec<EdgeDoc> {
    edges
        .iter()
        .map(|e| match e.attr {
            EdgeAttribute::Symbolic => EdgeDoc::symbolic(e.u.index, e.v.index),
            EdgeAttribute::Traversability { cost, status } => EdgeDoc {
                u: e.u.index,
                v: e.v.index,
                kind: EdgeTag::Traversability,
                w_t: Some(cost),
                status: Some(status),
                gamma: None,
                w_o: None,
            },
            EdgeAttribute::Observational { confidence, distance } => {
                EdgeDoc::observational(e.u.index, e.v.index, confidence, distance)
            }
        })
        .collect()
}

/// Build the in-memory graph from a parsed document and check all invariants.
pub fn lsg_from_document(doc: &LsgDocument) -> Result<LayeredSceneGraph, LsgError> {
    let mut targets = Graph::new(LayerId::Target);
    for t in &doc.targets {
        let mut levels = Graph::new(LayerId::Level);
        for l in &t.levels {
            let mut poses = Graph::new(LayerId::Pose);
            for p in &l.poses {
                let mut pattrs = NodeAttributes::new(LayerId::Pose, p.pose.into());
                if !p.features.is_empty() || !p.edges.is_empty() {
                    let mut features = Graph::new(LayerId::Feature);
                    for f in &p.features {
                        features.insert_node(f.id, NodeAttributes::new(LayerId::Feature, f.pose.into()));
                    }
                    attach_edges(
                        &mut features,
                        &p.edges,
                        &format!("targets[t{}].levels[l{}].poses[p{}]", t.id, l.id, p.id),
                    )?;
                    pattrs.nested = Some(Box::new(features));
                }
                poses.insert_node(p.id, pattrs);
            }
            attach_edges(&mut poses, &l.edges, &format!("targets[t{}].levels[l{}]", t.id, l.id))?;
            let mut lattrs = NodeAttributes::new(LayerId::Level, l.pose.into());
            lattrs.nested = Some(Box::new(poses));
            levels.insert_node(l.id, lattrs);
        }
        attach_edges(&mut levels, &t.edges, &format!("targets[t{}]", t.id))?;
        let mut tattrs = NodeAttributes::new(LayerId::Target, t.pose.into());
        tattrs.inspection_status = t.inspection_status;
        tattrs.designated_transition_level = t.transition_level.map(NodeId::level);
        tattrs.nested = Some(Box::new(levels));
        targets.insert_node(t.id, tattrs);
    }
    attach_edges(&mut targets, &doc.target_edges, "targets")?;
    let lsg = LayeredSceneGraph::new(targets);
    lsg.validate()?;
    Ok(lsg)
}

fn attach_edges(graph: &mut Graph, edges: &[EdgeDoc], path: &str) -> Result<(), LsgError> {
    let layer = graph.layer;
    for (i, e) in edges.iter().enumerate() {
        let epath = format!("{path}.edges[{i}]");
        let attr = edge_attr_from_doc(e, graph, layer, &epath)?;
        graph.add_edge(NodeId::new(layer, e.u), NodeId::new(layer, e.v), attr);
    }
    Ok(())
}

fn edge_attr_from_doc(
    e: &EdgeDoc,
    graph: &Graph,
    layer: LayerId,
    epath: &str,
) -> Result<EdgeAttribute, LsgError> {
    let reject = |field: &str| {
        Err(LsgError::Schema(format!(
            "{epath}: field '{field}' not allowed on {:?} edges",
            e.kind
        )))
    };
    match e.kind {
        EdgeTag::Symbolic => {
            if e.w_t.is_some() || e.status.is_some() {
                return reject("w_t/status");
            }
            if e.gamma.is_some() || e.w_o.is_some() {
                return reject("gamma/w_o");
            }
            Ok(EdgeAttribute::Symbolic)
        }
        EdgeTag::Traversability => {
            if e.gamma.is_some() || e.w_o.is_some() {
                return reject("gamma/w_o");
            }
            let status = e.status.ok_or_else(|| {
                LsgError::Schema(format!("{epath}: traversability edge missing 'status'"))
            })?;
            // Missing cost falls back to the Euclidean distance between the
            // endpoint poses.
            let cost = match e.w_t {
                Some(w) => w,
                None => {
                    let pu = graph
                        .node(NodeId::new(layer, e.u))
                        .ok_or_else(|| LsgError::Invariant {
                            path: epath.into(),
                            message: format!("edge endpoint {} not in graph", e.u),
                        })?
                        .pose;
                    let pv = graph
                        .node(NodeId::new(layer, e.v))
                        .ok_or_else(|| LsgError::Invariant {
                            path: epath.into(),
                            message: format!("edge endpoint {} not in graph", e.v),
                        })?
                        .pose;
                    pu.distance(pv)
                }
            };
            Ok(EdgeAttribute::Traversability { cost, status })
        }
        EdgeTag::Observational => {
            if e.w_t.is_some() || e.status.is_some() {
                return reject("w_t/status");
            }
            let confidence = e.gamma.ok_or_else(|| {
                LsgError::Schema(format!("{epath}: observational edge missing 'gamma'"))
            })?;
            let distance = e.w_o.ok_or_else(|| {
                LsgError::Schema(format!("{epath}: observational edge missing 'w_o'"))
            })?;
            Ok(EdgeAttribute::Observational { confidence, distance })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "targets": [
            {
                "id": 0,
                "pose": [1.0, 2.0, 0.5],
                "levels": [
                    {
                        "id": 0,
                        "pose": [1.0, 2.0, 0.5],
                        "poses": [{"id": 0, "pose": [2.0, 2.0, 0.5]}]
                    }
                ]
            }
        ]
    }"#;

    #[test]
    fn minimal_nesting_loads() {
        let lsg = load_lsg(MINIMAL).unwrap();
        assert_eq!(lsg.target_graph.nodes.len(), 1);
        let levels = lsg.nested_graph(NodePath::Target { target: 0 }).unwrap();
        assert_eq!(levels.nodes.len(), 1);
        let poses = lsg.nested_graph(NodePath::Level { target: 0, level: 0 }).unwrap();
        assert_eq!(poses.nodes.len(), 1);
    }

    #[test]
    fn unknown_keys_rejected() {
        let json = MINIMAL.replace("\"pose\": [1.0, 2.0, 0.5],", "\"pose\": [1.0,2.0,0.5], \"extra\": 1,");
        assert!(matches!(load_lsg(&json), Err(LsgError::Schema(_))));
    }

    #[test]
    fn dangling_edge_endpoint_names_the_edge() {
        let json = r#"{
            "targets": [
                {"id": 0, "pose": [0,0,0], "transition_level": 0,
                 "levels": [{"id": 0, "pose": [0,0,0], "poses": [{"id": 0, "pose": [0,0,0]}]}]},
                {"id": 1, "pose": [5,0,0], "transition_level": 0,
                 "levels": [{"id": 0, "pose": [5,0,0], "poses": [{"id": 0, "pose": [5,0,0]}]}]}
            ],
            "target_edges": [{"u": 0, "v": 7, "type": "traversability", "w_t": 5.0, "status": "traversable"}]
        }"#;
        let err = load_lsg(json).unwrap_err();
        match err {
            LsgError::Invariant { path, message } => {
                assert!(path.contains("edges[0]"), "path was {path}");
                assert!(message.contains("t7"), "message was {message}");
            }
            other => panic!("expected invariant error, got {other:?}"),
        }
    }

    #[test]
    fn traversability_cost_falls_back_to_euclidean() {
        let json = r#"{
            "targets": [
                {"id": 0, "pose": [0,0,0], "transition_level": 0,
                 "levels": [{"id": 0, "pose": [0,0,0],
                   "poses": [{"id": 0, "pose": [0,0,0]}, {"id": 1, "pose": [3,4,0]}],
                   "edges": [{"u": 0, "v": 1, "type": "traversability", "status": "traversable"}]}]}
            ]
        }"#;
        let lsg = load_lsg(json).unwrap();
        let poses = lsg.nested_graph(NodePath::Level { target: 0, level: 0 }).unwrap();
        let edge = poses.traversability_between(NodeId::pose(0), NodeId::pose(1)).unwrap();
        match edge.attr {
            EdgeAttribute::Traversability { cost, .. } => assert!((cost - 5.0).abs() < 1e-12),
            _ => unreachable!(),
        }
    }

    #[test]
    fn wrong_field_for_type_rejected() {
        let json = r#"{
            "targets": [
                {"id": 0, "pose": [0,0,0],
                 "levels": [{"id": 0, "pose": [0,0,0],
                   "poses": [{"id": 0, "pose": [0,0,0]}, {"id": 1, "pose": [1,0,0]}],
                   "edges": [{"u": 0, "v": 1, "type": "symbolic", "w_t": 2.0}]}]}
            ]
        }"#;
        assert!(matches!(load_lsg(json), Err(LsgError::Schema(_))));
    }

    #[test]
    fn save_load_round_trip_structural_identity() {
        let lsg = load_lsg(MINIMAL).unwrap();
        let saved = save_lsg_json(&lsg);
        let reloaded = load_lsg(&saved).unwrap();
        assert_eq!(lsg, reloaded);
    }
}
