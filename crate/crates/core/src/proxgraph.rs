//! Proximity graphs over plane features.
//!
//! Nodes are planes; directed edges connect each plane to its k nearest
//! neighbours by centroid distance, with every reverse edge added so message
//! passing can flow both ways. Node features are `[n_x, n_y, w]`, edge
//! features `[δx, δy, cd]` where δ is the centroid offset (destination minus
//! source) and cd the closest distance between the two segments' endpoints.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::RelationType;
use crate::geometry::PlaneFeature;
use crate::synthgen::{EdgeLabel, Layout};

pub const NODE_FEAT_DIM: usize = 3;
pub const EDGE_FEAT_DIM: usize = 3;

/// Default neighbourhood size, used at both training and inference time so
/// the classifier sees the same edge density it was trained on.
pub const DEFAULT_K: usize = 15;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("need at least 2 planes to build a graph, got {0}")]
    TooFewPlanes(usize),
    #[error("plane {0} has a non-unit normal")]
    BadNormal(String),
}

/// A directed graph over planes with per-node and per-edge feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityGraph {
    /// Plane id per node, in input order.
    pub node_ids: Vec<crate::geometry::PlaneId>,
    /// N rows of `[n_x, n_y, w]`.
    pub node_feats: Vec<[f64; NODE_FEAT_DIM]>,
    /// Directed edges as (src, dst) node indices, sorted lexicographically.
    pub edges: Vec<(usize, usize)>,
    /// E rows of `[δx, δy, cd]`, aligned with `edges`.
    pub edge_feats: Vec<[f64; EDGE_FEAT_DIM]>,
    /// Optional 0/1 training labels per edge for one relation type.
    pub labels: Option<Vec<f64>>,
}

impl ProximityGraph {
    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

/// Minimum distance between the segments' endpoints, all four pairs.
///
/// This is deliberately the endpoint-to-endpoint minimum rather than the
/// true segment-to-segment distance; crossing segments therefore report a
/// positive value.
pub fn closest_segment_distance(a: &PlaneFeature, b: &PlaneFeature) -> f64 {
    let mut best = f64::INFINITY;
    for ea in &a.endpoints {
        for eb in &b.endpoints {
            best = best.min((ea - eb).norm());
        }
    }
    best
}

/// Builds the symmetrized k-nearest-neighbour graph.
///
/// Each node gets directed edges to its k nearest neighbours by centroid
/// distance (ties broken by plane id), and the reverse of every edge is
/// added, so `(i, j)` is present iff `(j, i)` is.
pub fn build_graph(planes: &[PlaneFeature], k: usize) -> Result<ProximityGraph, GraphError> {
    if planes.len() < 2 {
        return Err(GraphError::TooFewPlanes(planes.len()));
    }
    for p in planes {
        if (p.normal.norm() - 1.0).abs() > 1e-6 {
            return Err(GraphError::BadNormal(p.id.to_string()));
        }
    }
    let n = planes.len();
    let k = k.min(n - 1);
    let mut edge_set: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            let da = (planes[a].centroid - planes[i].centroid).norm();
            let db = (planes[b].centroid - planes[i].centroid).norm();
            da.total_cmp(&db)
                .then_with(|| planes[a].id.cmp(&planes[b].id))
        });
        for &j in order.iter().take(k) {
            edge_set.insert((i, j));
            edge_set.insert((j, i));
        }
    }
    let edges: Vec<(usize, usize)> = edge_set.into_iter().collect();
    let node_feats = planes
        .iter()
        .map(|p| [p.normal.x, p.normal.y, p.width])
        .collect();
    let edge_feats = edges
        .iter()
        .map(|&(i, j)| {
            let delta = planes[j].centroid - planes[i].centroid;
            [delta.x, delta.y, closest_segment_distance(&planes[i], &planes[j])]
        })
        .collect();
    Ok(ProximityGraph {
        node_ids: planes.iter().map(|p| p.id.clone()).collect(),
        node_feats,
        edges,
        edge_feats,
        labels: None,
    })
}

/// Attaches 0/1 labels for one relation type from a layout's ground truth.
///
/// Every graph edge whose plane pair carries the matching positive label
/// gets 1, all other edges 0.
pub fn label_from_layout(graph: &mut ProximityGraph, layout: &Layout, relation: RelationType) {
    let wanted = match relation {
        RelationType::SameRoom => EdgeLabel::SameRoom,
        RelationType::SameWall => EdgeLabel::SameWall,
    };
    let positives: BTreeSet<(&crate::geometry::PlaneId, &crate::geometry::PlaneId)> = layout
        .gt_edges
        .iter()
        .filter(|e| e.label == wanted)
        .map(|e| (&e.src, &e.dst))
        .collect();
    let labels = graph
        .edges
        .iter()
        .map(|&(i, j)| {
            let key = (&graph.node_ids[i], &graph.node_ids[j]);
            if positives.contains(&key) { 1.0 } else { 0.0 }
        })
        .collect();
    graph.labels = Some(labels);
}

/// Dataset-level feature statistics for z-score normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub node_mean: [f64; NODE_FEAT_DIM],
    pub node_std: [f64; NODE_FEAT_DIM],
    pub edge_mean: [f64; EDGE_FEAT_DIM],
    pub edge_std: [f64; EDGE_FEAT_DIM],
}

impl NormStats {
    /// Stats that leave features untouched (zero mean, unit spread).
    pub fn identity() -> Self {
        NormStats {
            node_mean: [0.0; NODE_FEAT_DIM],
            node_std: [1.0; NODE_FEAT_DIM],
            edge_mean: [0.0; EDGE_FEAT_DIM],
            edge_std: [1.0; EDGE_FEAT_DIM],
        }
    }
}

/// Fits per-feature mean and standard deviation over all nodes and edges of
/// the training graphs. Standard deviations are clamped at 1e-6 so constant
/// columns stay finite.
pub fn fit_normalize(graphs: &[ProximityGraph]) -> NormStats {
    let mut stats = NormStats {
        node_mean: [0.0; NODE_FEAT_DIM],
        node_std: [1.0; NODE_FEAT_DIM],
        edge_mean: [0.0; EDGE_FEAT_DIM],
        edge_std: [1.0; EDGE_FEAT_DIM],
    };
    let node_rows = || graphs.iter().flat_map(|g| g.node_feats.iter());
    let edge_rows = || graphs.iter().flat_map(|g| g.edge_feats.iter());
    column_stats(node_rows, &mut stats.node_mean, &mut stats.node_std);
    column_stats(edge_rows, &mut stats.edge_mean, &mut stats.edge_std);
    stats
}

fn column_stats<'a, const D: usize, I, F>(rows: F, mean: &mut [f64; D], std: &mut [f64; D])
where
    I: Iterator<Item = &'a [f64; D]>,
    F: Fn() -> I,
{
    let count = rows().count();
    if count == 0 {
        return;
    }
    for d in 0..D {
        let m = rows().map(|r| r[d]).sum::<f64>() / count as f64;
        let var = rows().map(|r| (r[d] - m).powi(2)).sum::<f64>() / count as f64;
        mean[d] = m;
        std[d] = var.sqrt().max(1e-6);
    }
}

/// Returns a copy of the graph with standardized features.
pub fn apply_normalize(graph: &ProximityGraph, stats: &NormStats) -> ProximityGraph {
    let mut out = graph.clone();
    for row in &mut out.node_feats {
        for d in 0..NODE_FEAT_DIM {
            row[d] = (row[d] - stats.node_mean[d]) / stats.node_std[d];
        }
    }
    for row in &mut out.edge_feats {
        for d in 0..EDGE_FEAT_DIM {
            row[d] = (row[d] - stats.edge_mean[d]) / stats.edge_std[d];
        }
    }
    out
}
