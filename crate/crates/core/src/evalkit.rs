//! Precision/recall scoring of detections against ground truth, plus
//! pipeline latency measurement.
//!
//! Room scoring gives fractional credit: each detected room is matched to
//! the ground-truth room it overlaps most, and the match is worth the
//! Jaccard index of the two plane sets, so a room with three of four
//! correct planes counts 3/5. Wall scoring is exact pair matching. Edge
//! scoring compares thresholded predictions with labeled pairs and is the
//! basis of threshold-monotonicity checks.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::RelationType;
use crate::cluster::{EdgePrediction, RoomCluster, WallPair};
use crate::geometry::{PlaneFeature, PlaneId};
use crate::pipeline::{DetectionMode, PipelineError, ScenePipeline};
use crate::synthgen::{EdgeLabel, Layout};

/// Fractional detection counts for one layout.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LayoutScore {
    pub true_positives: f64,
    pub false_positives: f64,
    pub false_negatives: f64,
}

impl LayoutScore {
    pub fn precision(&self) -> Option<f64> {
        let kept = self.true_positives + self.false_positives;
        (kept > 0.0).then(|| self.true_positives / kept)
    }

    pub fn recall(&self) -> Option<f64> {
        let actual = self.true_positives + self.false_negatives;
        (actual > 0.0).then(|| self.true_positives / actual)
    }
}

/// Aggregated detection quality with its per-layout breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub relation: RelationType,
    pub true_positives: f64,
    pub false_positives: f64,
    pub false_negatives: f64,
    /// None when nothing was detected.
    pub precision: Option<f64>,
    /// None when the ground truth is empty.
    pub recall: Option<f64>,
    pub layouts: Vec<LayoutScore>,
}

impl DetectionReport {
    /// Micro-averages per-layout counts into one report.
    pub fn from_scores(relation: RelationType, layouts: Vec<LayoutScore>) -> Self {
        let totals = layouts.iter().fold(LayoutScore::default(), |acc, s| {
            LayoutScore {
                true_positives: acc.true_positives + s.true_positives,
                false_positives: acc.false_positives + s.false_positives,
                false_negatives: acc.false_negatives + s.false_negatives,
            }
        });
        DetectionReport {
            relation,
            true_positives: totals.true_positives,
            false_positives: totals.false_positives,
            false_negatives: totals.false_negatives,
            precision: totals.precision(),
            recall: totals.recall(),
            layouts,
        }
    }
}

/// Greedy overlap matching of detected rooms against ground truth with
/// Jaccard credit per match.
pub fn score_rooms(detected: &[RoomCluster], gt: &Layout) -> DetectionReport {
    let detected_sets: Vec<BTreeSet<&PlaneId>> = detected
        .iter()
        .map(|room| room.plane_ids.iter().collect())
        .collect();
    let gt_sets: Vec<BTreeSet<&PlaneId>> = gt
        .rooms
        .iter()
        .map(|room| room.plane_ids.iter().collect())
        .collect();
    // All overlapping pairs, best matches first: shared-plane count, then
    // Jaccard, then stable indices.
    let mut pairs: Vec<(usize, f64, usize, usize)> = Vec::new();
    for (d, dset) in detected_sets.iter().enumerate() {
        for (g, gset) in gt_sets.iter().enumerate() {
            let inter = dset.intersection(gset).count();
            if inter == 0 {
                continue;
            }
            let union = dset.union(gset).count();
            pairs.push((inter, inter as f64 / union as f64, d, g));
        }
    }
    pairs.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then(b.1.total_cmp(&a.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    let mut detected_used = vec![false; detected.len()];
    let mut gt_used = vec![false; gt.rooms.len()];
    let mut credit = 0.0;
    for (_, jaccard, d, g) in pairs {
        if !detected_used[d] && !gt_used[g] {
            detected_used[d] = true;
            gt_used[g] = true;
            credit += jaccard;
        }
    }
    let score = LayoutScore {
        true_positives: credit,
        false_positives: detected.len() as f64 - credit,
        false_negatives: gt.rooms.len() as f64 - credit,
    };
    DetectionReport::from_scores(RelationType::SameRoom, vec![score])
}

/// Exact-pair wall matching: a detection counts only if both plane ids
/// equal a ground-truth wall's pair.
pub fn score_walls(detected: &[WallPair], gt: &Layout) -> DetectionReport {
    let mut gt_pairs: BTreeSet<[&PlaneId; 2]> = gt
        .walls
        .iter()
        .map(|wall| [&wall.plane_ids[0], &wall.plane_ids[1]])
        .collect();
    let mut hits = 0usize;
    for wall in detected {
        let mut pair = [&wall.plane_ids[0], &wall.plane_ids[1]];
        pair.sort();
        if gt_pairs.remove(&pair) {
            hits += 1;
        }
    }
    let score = LayoutScore {
        true_positives: hits as f64,
        false_positives: (detected.len() - hits) as f64,
        false_negatives: (gt.walls.len() - hits) as f64,
    };
    DetectionReport::from_scores(RelationType::SameWall, vec![score])
}

/// Compares thresholded edge predictions against the labeled pairs of one
/// relation.
///
/// Keeping every edge with probability at or above `tau` means a lower
/// threshold keeps a superset, so recall never decreases as `tau` drops.
pub fn score_edge_predictions(
    preds: &[EdgePrediction],
    gt: &Layout,
    relation: RelationType,
    tau: f64,
) -> LayoutScore {
    let wanted = match relation {
        RelationType::SameRoom => EdgeLabel::SameRoom,
        RelationType::SameWall => EdgeLabel::SameWall,
    };
    let positive: BTreeSet<(&PlaneId, &PlaneId)> = gt
        .gt_edges
        .iter()
        .filter(|e| e.label == wanted)
        .map(|e| (&e.src, &e.dst))
        .collect();
    let kept: BTreeSet<(&PlaneId, &PlaneId)> = preds
        .iter()
        .filter(|p| p.relation == relation && p.probability >= tau)
        .map(|p| (&p.src, &p.dst))
        .collect();
    let tp = kept.intersection(&positive).count() as f64;
    LayoutScore {
        true_positives: tp,
        false_positives: kept.len() as f64 - tp,
        false_negatives: positive.len() as f64 - tp,
    }
}

/// Median wall-clock milliseconds over five full detection runs.
pub fn time_pipeline(
    planes: &[PlaneFeature],
    pipeline: &ScenePipeline,
    mode: DetectionMode,
) -> Result<f64, PipelineError> {
    let mut samples = [0.0f64; 5];
    for sample in &mut samples {
        let start = Instant::now();
        let detection = pipeline.detect(planes, mode)?;
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        // The detection must not be optimized away before the clock stops.
        std::hint::black_box(&detection);
        *sample = elapsed;
    }
    samples.sort_by(f64::total_cmp);
    Ok(samples[2])
}
