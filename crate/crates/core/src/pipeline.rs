//! End-to-end scene detection: proximity graph, normalization, edge
//! classification, grouping, and node generation in one call.
//!
//! [`ScenePipeline`] owns one trained classifier per relation together with
//! the feature statistics it was trained under. [`ScenePipeline::detect`]
//! takes measured planes and returns detected rooms and walls with centers
//! initialized from member centroids; [`build_factor_graph`] turns a
//! detection into a refinable factor graph.

use nalgebra::Matrix2;
use thiserror::Error;

use crate::RelationType;
use crate::cluster::{
    ClusterConfig, ClusterError, EdgePrediction, cluster_rooms, pair_walls, threshold_edges,
};
use crate::factors::{
    FactorError, PlaneVar, RoomNode2, RoomNode4, SceneFactorGraph, WallNode, room_center,
};
use crate::geometry::{PlaneFeature, PlaneId, Point};
use crate::neural::{EdgeClassifierModel, predict};
use crate::proxgraph::{DEFAULT_K, GraphError, NormStats, ProximityGraph, apply_normalize, build_graph};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("model predicts {got} but the pipeline slot expects {expected}")]
    RelationMismatch {
        expected: RelationType,
        got: RelationType,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Factor(#[from] FactorError),
}

/// A trained classifier plus the normalization it expects.
#[derive(Debug, Clone)]
pub struct RelationModel {
    pub model: EdgeClassifierModel,
    pub stats: NormStats,
}

impl RelationModel {
    /// Classifies every edge of a raw proximity graph.
    pub fn predict_edges(&self, graph: &ProximityGraph) -> Vec<EdgePrediction> {
        let normalized = apply_normalize(graph, &self.stats);
        let probs = predict(&self.model, &normalized);
        graph
            .edges
            .iter()
            .zip(probs)
            .map(|(&(src, dst), probability)| EdgePrediction {
                src: graph.node_ids[src].clone(),
                dst: graph.node_ids[dst].clone(),
                probability,
                relation: self.model.relation,
            })
            .collect()
    }
}

/// Which room threshold to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionMode {
    /// Higher threshold; favours precision.
    Conservative,
    /// Lower threshold; favours recall.
    Greedy,
}

/// A detected room with its generated center.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectedRoom {
    pub id: String,
    pub center: Point,
    pub plane_ids: Vec<PlaneId>,
}

/// A detected wall with its generated center.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectedWall {
    pub id: String,
    pub center: Point,
    pub plane_ids: [PlaneId; 2],
    pub probability: f64,
}

/// Everything one detection pass produces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneDetection {
    pub rooms: Vec<DetectedRoom>,
    pub walls: Vec<DetectedWall>,
    pub room_edges: Vec<EdgePrediction>,
    pub wall_edges: Vec<EdgePrediction>,
}

/// The full detector: one model per relation plus grouping settings.
#[derive(Debug, Clone)]
pub struct ScenePipeline {
    pub room: RelationModel,
    pub wall: RelationModel,
    pub cluster: ClusterConfig,
    pub k_neighbors: usize,
}

impl ScenePipeline {
    pub fn new(room: RelationModel, wall: RelationModel) -> Result<Self, PipelineError> {
        if room.model.relation != RelationType::SameRoom {
            return Err(PipelineError::RelationMismatch {
                expected: RelationType::SameRoom,
                got: room.model.relation,
            });
        }
        if wall.model.relation != RelationType::SameWall {
            return Err(PipelineError::RelationMismatch {
                expected: RelationType::SameWall,
                got: wall.model.relation,
            });
        }
        let cluster = ClusterConfig::default();
        cluster.validate()?;
        Ok(ScenePipeline {
            room,
            wall,
            cluster,
            k_neighbors: DEFAULT_K,
        })
    }

    /// Runs the whole chain on measured planes.
    ///
    /// Fewer than two planes yield an empty detection rather than an error.
    pub fn detect(
        &self,
        planes: &[PlaneFeature],
        mode: DetectionMode,
    ) -> Result<SceneDetection, PipelineError> {
        if planes.len() < 2 {
            return Ok(SceneDetection::default());
        }
        let graph = build_graph(planes, self.k_neighbors)?;
        let room_edges = self.room.predict_edges(&graph);
        let wall_edges = self.wall.predict_edges(&graph);
        let tau = match mode {
            DetectionMode::Conservative => self.cluster.tau_room_conservative,
            DetectionMode::Greedy => self.cluster.tau_room_greedy,
        };
        let relation_graph = threshold_edges(&room_edges, tau);
        let clusters = cluster_rooms(&relation_graph, &self.cluster);
        let mut rooms = Vec::with_capacity(clusters.len());
        for (i, cluster) in clusters.iter().enumerate() {
            rooms.push(DetectedRoom {
                id: format!("room_{i:02}"),
                center: room_center(&cluster.plane_ids, planes)?,
                plane_ids: cluster.plane_ids.clone(),
            });
        }
        let pairs = pair_walls(&wall_edges, &self.cluster, planes);
        let mut walls = Vec::with_capacity(pairs.len());
        for (i, pair) in pairs.iter().enumerate() {
            walls.push(DetectedWall {
                id: format!("wall_{i:02}"),
                center: room_center(&pair.plane_ids, planes)?,
                plane_ids: pair.plane_ids.clone(),
                probability: pair.probability,
            });
        }
        Ok(SceneDetection {
            rooms,
            walls,
            room_edges,
            wall_edges,
        })
    }
}

/// A factor graph assembled from a detection, plus what had to be dropped.
#[derive(Debug)]
pub struct FactorGraphBuild {
    pub graph: SceneFactorGraph,
    /// Detected rooms whose planes could not form a valid factor.
    pub skipped_rooms: usize,
    /// Detected walls whose planes could not form a valid factor.
    pub skipped_walls: usize,
}

/// Builds the refinable graph: every plane gets an identity-weight prior at
/// its measured parameters; each detected room and wall becomes a factor.
///
/// Detections whose geometry cannot support a factor (for example a room
/// whose members do not pair into anti-parallel sides) are skipped and
/// counted instead of failing the build.
pub fn build_factor_graph(
    planes: &[PlaneFeature],
    detection: &SceneDetection,
) -> Result<FactorGraphBuild, PipelineError> {
    let mut graph = SceneFactorGraph::new();
    for plane in planes {
        let var = PlaneVar::from_feature(plane);
        graph.add_plane(plane.id.clone(), var)?;
        graph.add_plane_prior(&plane.id, var, Matrix2::identity())?;
    }
    let normal_of = |id: &PlaneId| planes.iter().find(|p| &p.id == id).map(|p| p.normal);
    let mut skipped_rooms = 0;
    for room in &detection.rooms {
        let added = match room.plane_ids.as_slice() {
            [a, b, c, d] => RoomNode4::new(
                room.center,
                [a.clone(), b.clone(), c.clone(), d.clone()],
                Matrix2::identity(),
            )
            .and_then(|node| graph.add_room4(node)),
            [a, b] => {
                let normals = match (normal_of(a), normal_of(b)) {
                    (Some(na), Some(nb)) => [na, nb],
                    _ => {
                        skipped_rooms += 1;
                        continue;
                    }
                };
                RoomNode2::new(
                    room.center,
                    [a.clone(), b.clone()],
                    room.center,
                    normals,
                    Matrix2::identity(),
                )
                .and_then(|node| graph.add_room2(node))
            }
            _ => {
                skipped_rooms += 1;
                continue;
            }
        };
        if added.is_err() {
            skipped_rooms += 1;
        }
    }
    let mut skipped_walls = 0;
    for wall in &detection.walls {
        let [a, b] = &wall.plane_ids;
        let normals = match (normal_of(a), normal_of(b)) {
            (Some(na), Some(nb)) => [na, nb],
            _ => {
                skipped_walls += 1;
                continue;
            }
        };
        let added = WallNode::new(
            wall.center,
            [a.clone(), b.clone()],
            wall.center,
            normals,
            Matrix2::identity(),
        )
        .and_then(|node| graph.add_wall(node));
        if added.is_err() {
            skipped_walls += 1;
        }
    }
    Ok(FactorGraphBuild {
        graph,
        skipped_rooms,
        skipped_walls,
    })
}
