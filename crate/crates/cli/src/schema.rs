//! Versioned JSON artifacts: layouts, model checkpoints, predictions, and
//! refinement results.
//!
//! Every file format here is a plain serde struct plus a validating
//! conversion to the corresponding in-memory type. Validation failures
//! carry a JSON pointer to the offending field. Files are written through
//! [`to_canonical_json`] — pretty-printed, trailing newline — so identical
//! inputs always produce identical bytes, and every finite float
//! round-trips bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize, de::DeserializeOwned};
use thiserror::Error;

use scenegraph_core::RelationType;
use scenegraph_core::cluster::EdgePrediction;
use scenegraph_core::geometry::{PlaneFeature, PlaneId, Point, Vec2};
use scenegraph_core::neural::{EdgeClassifierModel, TrainConfig};
use scenegraph_core::pipeline::{DetectedRoom, DetectedWall, DetectionMode, SceneDetection};
use scenegraph_core::proxgraph::NormStats;
use scenegraph_core::synthgen::{EdgeLabel, GtEdge, Layout, Room, Wall};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}{pointer}: {message}")]
    Violation {
        path: String,
        pointer: String,
        message: String,
    },
}

impl SchemaError {
    /// Attaches the file path to a violation raised during conversion.
    fn with_path(mut self, file: &Path) -> Self {
        if let SchemaError::Violation { path, .. } = &mut self {
            *path = file.display().to_string();
        }
        self
    }
}

fn violation(pointer: impl Into<String>, message: impl Into<String>) -> SchemaError {
    SchemaError::Violation {
        path: String::new(),
        pointer: pointer.into(),
        message: message.into(),
    }
}

/// Pretty JSON with a trailing newline; the only writer used for artifacts.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("artifact types always serialize");
    text.push('\n');
    text
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), SchemaError> {
    fs::write(path, to_canonical_json(value)).map_err(|source| SchemaError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T, SchemaError> {
    let text = fs::read_to_string(path).map_err(|source| SchemaError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| SchemaError::Parse {
        path: path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Layout files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneRecord {
    pub id: String,
    pub normal: [f64; 2],
    /// Offset in the plane equation n·p + d = 0.
    pub d: f64,
    pub endpoints: [[f64; 2]; 2],
    pub centroid: [f64; 2],
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomRecord {
    pub id: String,
    pub center: [f64; 2],
    pub plane_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallRecord {
    pub id: String,
    pub center: [f64; 2],
    pub plane_ids: [String; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub src: String,
    pub dst: String,
    pub label: EdgeLabel,
}

/// A labeled synthetic floorplan on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutFileV1 {
    pub format_version: u32,
    pub planes: Vec<PlaneRecord>,
    pub rooms: Vec<RoomRecord>,
    pub walls: Vec<WallRecord>,
    pub gt_edges: Vec<EdgeRecord>,
}

fn xy(p: &Point) -> [f64; 2] {
    [p.x, p.y]
}

impl LayoutFileV1 {
    pub fn from_layout(layout: &Layout) -> Self {
        LayoutFileV1 {
            format_version: FORMAT_VERSION,
            planes: layout
                .planes
                .iter()
                .map(|p| PlaneRecord {
                    id: p.id.as_str().to_owned(),
                    normal: [p.normal.x, p.normal.y],
                    d: p.offset(),
                    endpoints: [xy(&p.endpoints[0]), xy(&p.endpoints[1])],
                    centroid: xy(&p.centroid),
                    width: p.width,
                })
                .collect(),
            rooms: layout
                .rooms
                .iter()
                .map(|r| RoomRecord {
                    id: r.id.clone(),
                    center: xy(&r.center),
                    plane_ids: r.plane_ids.iter().map(|id| id.as_str().to_owned()).collect(),
                })
                .collect(),
            walls: layout
                .walls
                .iter()
                .map(|w| WallRecord {
                    id: w.id.clone(),
                    center: xy(&w.center),
                    plane_ids: [
                        w.plane_ids[0].as_str().to_owned(),
                        w.plane_ids[1].as_str().to_owned(),
                    ],
                })
                .collect(),
            gt_edges: layout
                .gt_edges
                .iter()
                .map(|e| EdgeRecord {
                    src: e.src.as_str().to_owned(),
                    dst: e.dst.as_str().to_owned(),
                    label: e.label,
                })
                .collect(),
        }
    }

    pub fn to_layout(&self) -> Result<Layout, SchemaError> {
        if self.format_version != FORMAT_VERSION {
            return Err(violation(
                "/format_version",
                format!("expected {FORMAT_VERSION}, found {}", self.format_version),
            ));
        }
        let mut planes = Vec::with_capacity(self.planes.len());
        for (i, record) in self.planes.iter().enumerate() {
            let normal = Vec2::new(record.normal[0], record.normal[1]);
            let e0 = Point::new(record.endpoints[0][0], record.endpoints[0][1]);
            let e1 = Point::new(record.endpoints[1][0], record.endpoints[1][1]);
            let plane = PlaneFeature::from_endpoints(PlaneId::new(&record.id), normal, e0, e1)
                .map_err(|err| violation(format!("/planes/{i}"), err.to_string()))?;
            if (plane.centroid - Point::new(record.centroid[0], record.centroid[1])).norm() > 1e-9
            {
                return Err(violation(
                    format!("/planes/{i}/centroid"),
                    "inconsistent with endpoints",
                ));
            }
            if (plane.width - record.width).abs() > 1e-9 {
                return Err(violation(
                    format!("/planes/{i}/width"),
                    "inconsistent with endpoints",
                ));
            }
            if (plane.offset() - record.d).abs() > 1e-9 {
                return Err(violation(
                    format!("/planes/{i}/d"),
                    "inconsistent with normal and centroid",
                ));
            }
            if planes.iter().any(|p: &PlaneFeature| p.id == plane.id) {
                return Err(violation(format!("/planes/{i}/id"), "duplicate plane id"));
            }
            planes.push(plane);
        }
        let known = |id: &str| planes.iter().any(|p| p.id.as_str() == id);
        let mut rooms = Vec::with_capacity(self.rooms.len());
        for (i, record) in self.rooms.iter().enumerate() {
            if record.plane_ids.len() != 2 && record.plane_ids.len() != 4 {
                return Err(violation(
                    format!("/rooms/{i}/plane_ids"),
                    format!("rooms have 2 or 4 planes, found {}", record.plane_ids.len()),
                ));
            }
            for (j, id) in record.plane_ids.iter().enumerate() {
                if !known(id) {
                    return Err(violation(
                        format!("/rooms/{i}/plane_ids/{j}"),
                        format!("unknown plane id {id}"),
                    ));
                }
            }
            rooms.push(Room {
                id: record.id.clone(),
                center: Point::new(record.center[0], record.center[1]),
                plane_ids: record.plane_ids.iter().map(PlaneId::new).collect(),
            });
        }
        let mut walls = Vec::with_capacity(self.walls.len());
        for (i, record) in self.walls.iter().enumerate() {
            for (j, id) in record.plane_ids.iter().enumerate() {
                if !known(id) {
                    return Err(violation(
                        format!("/walls/{i}/plane_ids/{j}"),
                        format!("unknown plane id {id}"),
                    ));
                }
            }
            if record.plane_ids[0] == record.plane_ids[1] {
                return Err(violation(
                    format!("/walls/{i}/plane_ids"),
                    "wall members must be two distinct planes",
                ));
            }
            walls.push(Wall {
                id: record.id.clone(),
                center: Point::new(record.center[0], record.center[1]),
                plane_ids: [
                    PlaneId::new(&record.plane_ids[0]),
                    PlaneId::new(&record.plane_ids[1]),
                ],
            });
        }
        let mut gt_edges = Vec::with_capacity(self.gt_edges.len());
        for (i, record) in self.gt_edges.iter().enumerate() {
            if !known(&record.src) {
                return Err(violation(
                    format!("/gt_edges/{i}/src"),
                    format!("unknown plane id {}", record.src),
                ));
            }
            if !known(&record.dst) {
                return Err(violation(
                    format!("/gt_edges/{i}/dst"),
                    format!("unknown plane id {}", record.dst),
                ));
            }
            gt_edges.push(GtEdge {
                src: PlaneId::new(&record.src),
                dst: PlaneId::new(&record.dst),
                label: record.label,
            });
        }
        Ok(Layout {
            planes,
            rooms,
            walls,
            gt_edges,
        })
    }
}

/// Parses and validates a layout file.
pub fn read_layout_file(path: &Path) -> Result<Layout, SchemaError> {
    let file: LayoutFileV1 = read_json_file(path)?;
    file.to_layout().map_err(|err| err.with_path(path))
}

// ---------------------------------------------------------------------------
// Checkpoint files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// A trained edge classifier on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointFileV1 {
    pub format_version: u32,
    pub relation_type: RelationType,
    pub hidden_dim: usize,
    pub params: Vec<ParamRecord>,
    pub norm_stats: NormStats,
    pub train_config: TrainConfig,
    pub rng_seed: u64,
}

/// A checkpoint restored into usable parts.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: EdgeClassifierModel,
    pub stats: NormStats,
    pub train_config: TrainConfig,
    pub rng_seed: u64,
}

impl CheckpointFileV1 {
    pub fn from_model(
        model: &EdgeClassifierModel,
        stats: &NormStats,
        train_config: &TrainConfig,
        rng_seed: u64,
    ) -> Self {
        let params = model
            .parameter_names()
            .into_iter()
            .zip(model.parameters())
            .map(|(name, tensor)| ParamRecord {
                name,
                shape: tensor.shape().to_vec(),
                data: tensor.data().to_vec(),
            })
            .collect();
        CheckpointFileV1 {
            format_version: FORMAT_VERSION,
            relation_type: model.relation,
            hidden_dim: model.hidden_dim,
            params,
            norm_stats: stats.clone(),
            train_config: train_config.clone(),
            rng_seed,
        }
    }

    pub fn to_model(&self) -> Result<LoadedModel, SchemaError> {
        if self.format_version != FORMAT_VERSION {
            return Err(violation(
                "/format_version",
                format!("expected {FORMAT_VERSION}, found {}", self.format_version),
            ));
        }
        if self.hidden_dim == 0 {
            return Err(violation("/hidden_dim", "must be at least 1"));
        }
        for (axis, value) in self
            .norm_stats
            .node_std
            .iter()
            .chain(&self.norm_stats.edge_std)
            .enumerate()
        {
            if !(*value > 0.0) {
                return Err(violation(
                    "/norm_stats",
                    format!("standard deviation {axis} must be positive, found {value}"),
                ));
            }
        }
        let mut model = EdgeClassifierModel::new(self.relation_type, self.hidden_dim, 0);
        let names = model.parameter_names();
        if names.len() != self.params.len() {
            return Err(violation(
                "/params",
                format!(
                    "model of hidden_dim {} has {} parameter arrays, found {}",
                    self.hidden_dim,
                    names.len(),
                    self.params.len()
                ),
            ));
        }
        for (i, ((record, name), tensor)) in self
            .params
            .iter()
            .zip(names)
            .zip(model.parameters_mut())
            .enumerate()
        {
            if record.name != name {
                return Err(violation(
                    format!("/params/{i}/name"),
                    format!("expected {name}, found {}", record.name),
                ));
            }
            if record.shape != tensor.shape() {
                return Err(violation(
                    format!("/params/{i}/shape"),
                    format!("expected {:?}, found {:?}", tensor.shape(), record.shape),
                ));
            }
            if record.data.len() != tensor.len() {
                return Err(violation(
                    format!("/params/{i}/data"),
                    format!(
                        "shape {:?} needs {} values, found {}",
                        record.shape,
                        tensor.len(),
                        record.data.len()
                    ),
                ));
            }
            if record.data.iter().any(|v| !v.is_finite()) {
                return Err(violation(
                    format!("/params/{i}/data"),
                    "parameters must be finite",
                ));
            }
            tensor.data_mut().copy_from_slice(&record.data);
        }
        Ok(LoadedModel {
            model,
            stats: self.norm_stats.clone(),
            train_config: self.train_config.clone(),
            rng_seed: self.rng_seed,
        })
    }
}

pub fn read_checkpoint_file(path: &Path) -> Result<LoadedModel, SchemaError> {
    let file: CheckpointFileV1 = read_json_file(path)?;
    file.to_model().map_err(|err| err.with_path(path))
}

// ---------------------------------------------------------------------------
// Prediction files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedWallRecord {
    pub id: String,
    pub center: [f64; 2],
    pub plane_ids: [String; 2],
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredEdgeRecord {
    pub src: String,
    pub dst: String,
    pub probability: f64,
}

/// One inference pass on disk: detected nodes plus raw edge probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionFileV1 {
    pub format_version: u32,
    pub mode: String,
    pub rooms: Vec<RoomRecord>,
    pub walls: Vec<DetectedWallRecord>,
    pub room_edges: Vec<PredEdgeRecord>,
    pub wall_edges: Vec<PredEdgeRecord>,
}

pub fn mode_label(mode: DetectionMode) -> &'static str {
    match mode {
        DetectionMode::Conservative => "conservative",
        DetectionMode::Greedy => "greedy",
    }
}

pub fn parse_mode(label: &str) -> Option<DetectionMode> {
    match label {
        "conservative" => Some(DetectionMode::Conservative),
        "greedy" => Some(DetectionMode::Greedy),
        _ => None,
    }
}

fn edge_records(edges: &[EdgePrediction]) -> Vec<PredEdgeRecord> {
    edges
        .iter()
        .map(|e| PredEdgeRecord {
            src: e.src.as_str().to_owned(),
            dst: e.dst.as_str().to_owned(),
            probability: e.probability,
        })
        .collect()
}

fn edge_predictions(
    records: &[PredEdgeRecord],
    relation: RelationType,
    pointer: &str,
) -> Result<Vec<EdgePrediction>, SchemaError> {
    records
        .iter()
        .enumerate()
        .map(|(i, record)| {
            if !record.probability.is_finite() || !(0.0..=1.0).contains(&record.probability) {
                return Err(violation(
                    format!("{pointer}/{i}/probability"),
                    "probability must lie in [0, 1]",
                ));
            }
            Ok(EdgePrediction {
                src: PlaneId::new(&record.src),
                dst: PlaneId::new(&record.dst),
                probability: record.probability,
                relation,
            })
        })
        .collect()
}

impl PredictionFileV1 {
    pub fn from_detection(detection: &SceneDetection, mode: DetectionMode) -> Self {
        PredictionFileV1 {
            format_version: FORMAT_VERSION,
            mode: mode_label(mode).to_owned(),
            rooms: detection
                .rooms
                .iter()
                .map(|room| RoomRecord {
                    id: room.id.clone(),
                    center: xy(&room.center),
                    plane_ids: room.plane_ids.iter().map(|id| id.as_str().to_owned()).collect(),
                })
                .collect(),
            walls: detection
                .walls
                .iter()
                .map(|wall| DetectedWallRecord {
                    id: wall.id.clone(),
                    center: xy(&wall.center),
                    plane_ids: [
                        wall.plane_ids[0].as_str().to_owned(),
                        wall.plane_ids[1].as_str().to_owned(),
                    ],
                    probability: wall.probability,
                })
                .collect(),
            room_edges: edge_records(&detection.room_edges),
            wall_edges: edge_records(&detection.wall_edges),
        }
    }

    pub fn to_detection(&self) -> Result<SceneDetection, SchemaError> {
        if self.format_version != FORMAT_VERSION {
            return Err(violation(
                "/format_version",
                format!("expected {FORMAT_VERSION}, found {}", self.format_version),
            ));
        }
        if parse_mode(&self.mode).is_none() {
            return Err(violation(
                "/mode",
                format!("expected conservative or greedy, found {}", self.mode),
            ));
        }
        let mut rooms = Vec::with_capacity(self.rooms.len());
        for (i, record) in self.rooms.iter().enumerate() {
            if record.plane_ids.is_empty() {
                return Err(violation(
                    format!("/rooms/{i}/plane_ids"),
                    "detected room has no planes",
                ));
            }
            rooms.push(DetectedRoom {
                id: record.id.clone(),
                center: Point::new(record.center[0], record.center[1]),
                plane_ids: record.plane_ids.iter().map(PlaneId::new).collect(),
            });
        }
        let mut walls = Vec::with_capacity(self.walls.len());
        for (i, record) in self.walls.iter().enumerate() {
            if !record.probability.is_finite() || !(0.0..=1.0).contains(&record.probability) {
                return Err(violation(
                    format!("/walls/{i}/probability"),
                    "probability must lie in [0, 1]",
                ));
            }
            walls.push(DetectedWall {
                id: record.id.clone(),
                center: Point::new(record.center[0], record.center[1]),
                plane_ids: [
                    PlaneId::new(&record.plane_ids[0]),
                    PlaneId::new(&record.plane_ids[1]),
                ],
                probability: record.probability,
            });
        }
        Ok(SceneDetection {
            rooms,
            walls,
            room_edges: edge_predictions(&self.room_edges, RelationType::SameRoom, "/room_edges")?,
            wall_edges: edge_predictions(&self.wall_edges, RelationType::SameWall, "/wall_edges")?,
        })
    }
}

pub fn read_prediction_file(path: &Path) -> Result<(PredictionFileV1, SceneDetection), SchemaError>
{
    let file: PredictionFileV1 = read_json_file(path)?;
    let detection = file.to_detection().map_err(|err| err.with_path(path))?;
    Ok((file, detection))
}

// ---------------------------------------------------------------------------
// Refinement files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedPlaneRecord {
    pub id: String,
    pub normal: [f64; 2],
    pub d: f64,
}

/// Output of the factor-graph refinement: adjusted planes and node centers
/// plus solver statistics. Nodes are renumbered in graph order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedFileV1 {
    pub format_version: u32,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub skipped_rooms: usize,
    pub skipped_walls: usize,
    pub planes: Vec<RefinedPlaneRecord>,
    pub rooms: Vec<RoomRecord>,
    pub walls: Vec<WallRecord>,
}
