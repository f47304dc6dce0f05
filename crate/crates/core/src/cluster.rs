//! Grouping predicted edges into room candidates and wall pairs.
//!
//! Room grouping follows a cycle-analysis scheme: threshold the predicted
//! `same_room` edges, enumerate simple directed cycles of the configured
//! sizes (largest first), rank each cycle's node set by how many distinct
//! cycles support it, and greedily accept disjoint sets, removing accepted
//! nodes before the next size is processed. Wall pairing is a greedy
//! matching over `same_wall` predictions with an optional anti-parallelism
//! guard.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::RelationType;
use crate::geometry::{PlaneFeature, PlaneId};

/// One classified directed edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePrediction {
    pub src: PlaneId,
    pub dst: PlaneId,
    /// Finite, in [0, 1].
    pub probability: f64,
    pub relation: RelationType,
}

/// Thresholds and cycle sizes for grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    /// Room threshold favouring precision.
    pub tau_room_conservative: f64,
    /// Room threshold favouring recall.
    pub tau_room_greedy: f64,
    pub tau_wall: f64,
    /// Cycle sizes to search, descending; larger rooms take priority.
    pub cycle_sizes: Vec<usize>,
    /// Minimum `-n_i·n_j` for a wall pair when the guard is enabled.
    pub wall_antiparallel_min: f64,
    /// Whether wall candidates must pass the anti-parallelism guard.
    pub enforce_antiparallel: bool,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            tau_room_conservative: 0.7,
            tau_room_greedy: 0.5,
            tau_wall: 0.5,
            cycle_sizes: vec![4, 2],
            wall_antiparallel_min: 0.9,
            enforce_antiparallel: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("invalid cluster config: {0}")]
    InvalidConfig(String),
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), ClusterError> {
        let fail = |msg: &str| Err(ClusterError::InvalidConfig(msg.to_owned()));
        for tau in [
            self.tau_room_conservative,
            self.tau_room_greedy,
            self.tau_wall,
        ] {
            if !(tau > 0.0 && tau < 1.0) {
                return fail("thresholds must lie strictly between 0 and 1");
            }
        }
        if self.cycle_sizes.is_empty() {
            return fail("cycle_sizes must be non-empty");
        }
        if self.cycle_sizes.windows(2).any(|w| w[0] <= w[1]) {
            return fail("cycle_sizes must be strictly descending");
        }
        if self.cycle_sizes.iter().any(|&l| l < 2) {
            return fail("cycle sizes below 2 are not cycles");
        }
        Ok(())
    }
}

/// The directed graph over planes whose predictions survived a threshold.
///
/// Nodes are sorted by plane id, so node indices order the same way ids do;
/// every deterministic tie-break below leans on that.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelationGraph {
    pub nodes: Vec<PlaneId>,
    /// Deduplicated directed edges, sorted.
    pub edges: Vec<(usize, usize)>,
}

impl RelationGraph {
    /// Destination indices per source node, sorted.
    pub fn out_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(src, dst) in &self.edges {
            adj[src].push(dst);
        }
        adj
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.edges.binary_search(&(src, dst)).is_ok()
    }
}

/// Keeps edges with `probability >= tau` and builds the graph over them.
///
/// Self-loops and non-finite probabilities are dropped; duplicate surviving
/// pairs collapse to one edge.
pub fn threshold_edges(preds: &[EdgePrediction], tau: f64) -> RelationGraph {
    let survivors: Vec<&EdgePrediction> = preds
        .iter()
        .filter(|p| p.probability.is_finite() && p.probability >= tau && p.src != p.dst)
        .collect();
    let nodes: Vec<PlaneId> = survivors
        .iter()
        .flat_map(|p| [p.src.clone(), p.dst.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&PlaneId, usize> = nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let edges: Vec<(usize, usize)> = survivors
        .iter()
        .map(|p| (index[&p.src], index[&p.dst]))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    RelationGraph { nodes, edges }
}

/// All simple directed cycles of exactly `l` distinct nodes.
///
/// Each rotation/reversal class is reported once: the cycle starts at its
/// smallest node index and its second node is smaller than its last. A
/// 2-cycle is a reciprocal edge pair.
pub fn find_cycles_of_size(graph: &RelationGraph, l: usize) -> Vec<Vec<usize>> {
    cycles_with_mask(graph, l, &vec![true; graph.nodes.len()])
}

/// Cycle enumeration restricted to `alive` nodes.
fn cycles_with_mask(graph: &RelationGraph, l: usize, alive: &[bool]) -> Vec<Vec<usize>> {
    if l < 2 {
        return Vec::new();
    }
    let adj = graph.out_adjacency();
    let mut cycles = Vec::new();
    let mut path = Vec::with_capacity(l);
    let mut on_path = vec![false; graph.nodes.len()];
    for start in 0..graph.nodes.len() {
        if !alive[start] {
            continue;
        }
        path.push(start);
        on_path[start] = true;
        extend_cycles(graph, &adj, alive, l, start, &mut path, &mut on_path, &mut cycles);
        on_path[start] = false;
        path.pop();
    }
    cycles
}

#[allow(clippy::too_many_arguments)]
fn extend_cycles(
    graph: &RelationGraph,
    adj: &[Vec<usize>],
    alive: &[bool],
    l: usize,
    start: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    cycles: &mut Vec<Vec<usize>>,
) {
    let current = *path.last().expect("path holds at least the start");
    if path.len() == l {
        if graph.has_edge(current, start) {
            // Canonical orientation: second node below last (2-cycles have
            // only one class).
            if l == 2 || path[1] < path[l - 1] {
                cycles.push(path.clone());
            }
        }
        return;
    }
    for &next in &adj[current] {
        // Keeping every node above the start makes the start the minimum,
        // canonicalizing rotation.
        if next <= start || !alive[next] || on_path[next] {
            continue;
        }
        path.push(next);
        on_path[next] = true;
        extend_cycles(graph, adj, alive, l, start, path, on_path, cycles);
        on_path[next] = false;
        path.pop();
    }
}

/// An accepted room candidate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RoomCluster {
    /// Sorted member plane ids.
    pub plane_ids: Vec<PlaneId>,
}

/// Cycle-based room grouping.
///
/// For each size in `cycle_sizes` (descending): enumerate cycles among the
/// remaining nodes, group them by node set, rank sets by support count
/// (ties: lexicographic on the sorted id tuple), greedily accept sets
/// disjoint from everything accepted so far, and remove accepted nodes
/// before the next size.
pub fn cluster_rooms(graph: &RelationGraph, config: &ClusterConfig) -> Vec<RoomCluster> {
    let mut alive = vec![true; graph.nodes.len()];
    let mut accepted: Vec<Vec<usize>> = Vec::new();
    for &l in &config.cycle_sizes {
        let cycles = cycles_with_mask(graph, l, &alive);
        let mut support: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for cycle in cycles {
            let mut set = cycle;
            set.sort_unstable();
            *support.entry(set).or_default() += 1;
        }
        let mut ranked: Vec<(Vec<usize>, usize)> = support.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        for (set, _) in ranked {
            if set.iter().all(|&v| alive[v]) {
                for &v in &set {
                    alive[v] = false;
                }
                accepted.push(set);
            }
        }
    }
    accepted
        .into_iter()
        .map(|set| RoomCluster {
            plane_ids: set.into_iter().map(|v| graph.nodes[v].clone()).collect(),
        })
        .collect()
}

/// An accepted wall: two planes and the probability that matched them.
#[derive(Debug, Clone, PartialEq)]
pub struct WallPair {
    /// Sorted pair of member plane ids.
    pub plane_ids: [PlaneId; 2],
    pub probability: f64,
}

/// Greedy wall matching over `same_wall` predictions.
///
/// Candidates above `tau_wall` (directions collapsed, keeping the larger
/// probability) are optionally filtered by the anti-parallelism guard, then
/// matched greedily by descending probability; each plane joins at most one
/// wall.
pub fn pair_walls(
    preds: &[EdgePrediction],
    config: &ClusterConfig,
    planes: &[PlaneFeature],
) -> Vec<WallPair> {
    let mut candidates: BTreeMap<(PlaneId, PlaneId), f64> = BTreeMap::new();
    for p in preds {
        if p.relation != RelationType::SameWall
            || !p.probability.is_finite()
            || p.probability < config.tau_wall
            || p.src == p.dst
        {
            continue;
        }
        let key = if p.src < p.dst {
            (p.src.clone(), p.dst.clone())
        } else {
            (p.dst.clone(), p.src.clone())
        };
        let entry = candidates.entry(key).or_insert(p.probability);
        *entry = entry.max(p.probability);
    }
    if config.enforce_antiparallel {
        let by_id: BTreeMap<&PlaneId, &PlaneFeature> =
            planes.iter().map(|p| (&p.id, p)).collect();
        candidates.retain(|(a, b), _| match (by_id.get(a), by_id.get(b)) {
            (Some(pa), Some(pb)) => pa.normal.dot(&pb.normal) < -config.wall_antiparallel_min,
            _ => false,
        });
    }
    let mut ranked: Vec<((PlaneId, PlaneId), f64)> = candidates.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut used: BTreeSet<PlaneId> = BTreeSet::new();
    let mut walls = Vec::new();
    for ((a, b), probability) in ranked {
        if used.contains(&a) || used.contains(&b) {
            continue;
        }
        used.insert(a.clone());
        used.insert(b.clone());
        walls.push(WallPair {
            plane_ids: [a, b],
            probability,
        });
    }
    walls
}
