//! Extraction of room and wall entities from 2D plane segments.
//!
//! The crate covers the full path from raw geometry to a refined scene
//! graph:
//!
//! * [`geometry`] — plane-segment primitives, merging and splitting;
//! * [`synthgen`] — seeded synthetic floorplan layouts with ground-truth
//!   relations;
//! * [`proxgraph`] — k-nearest-neighbour proximity graphs with geometric
//!   node/edge features;
//! * [`neural`] — a from-scratch attention-based edge classifier with
//!   hand-written gradients;
//! * [`cluster`] — cycle-based grouping of predicted edges into room
//!   candidates and wall pairs;
//! * [`factors`] — room/wall residuals and damped Gauss-Newton refinement;
//! * [`evalkit`] — precision/recall scoring and timing helpers;
//! * [`pipeline`] — the end-to-end detector tying the above together.

pub mod cluster;
pub mod evalkit;
pub mod factors;
pub mod geometry;
pub mod neural;
pub mod pipeline;
pub mod proxgraph;
pub mod synthgen;

use serde::{Deserialize, Serialize};

/// Edge relation a classifier is trained to detect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationType {
    /// Both planes bound the same room.
    SameRoom,
    /// The planes are the two faces of one wall.
    SameWall,
}

impl std::fmt::Display for RelationType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RelationType::SameRoom => write!(f, "same_room"),
            RelationType::SameWall => write!(f, "same_wall"),
        }
    }
}
