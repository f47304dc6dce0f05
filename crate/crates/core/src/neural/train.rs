//! Training loop: one graph per step, Adam updates, per-epoch metrics.

use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NeuralError;
use super::forward::{loss_and_grads, predict};
use super::model::EdgeClassifierModel;
use super::optim::Adam;
use crate::RelationType;
use crate::proxgraph::ProximityGraph;

/// Training schedule and loss weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Upper bound on layouts visited per epoch; smaller datasets are
    /// reshuffled and consumed whole.
    pub layouts_per_epoch: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Loss weight on positive edges, countering the negative-heavy
    /// neighbourhood sampling.
    pub pos_weight: f64,
}

impl TrainConfig {
    /// Defaults for one relation: 35 epochs over up to 800 layouts,
    /// lr 1e-3, and a class weight reflecting how rare positives are
    /// (wall pairs are rarer than room pairs).
    pub fn for_relation(relation: RelationType) -> Self {
        TrainConfig {
            epochs: 35,
            layouts_per_epoch: 800,
            learning_rate: 1e-3,
            seed: 0,
            pos_weight: match relation {
                RelationType::SameRoom => 3.0,
                RelationType::SameWall => 5.0,
            },
        }
    }

    fn validate(&self) -> Result<(), NeuralError> {
        if self.epochs == 0 {
            return Err(NeuralError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.layouts_per_epoch == 0 {
            return Err(NeuralError::InvalidConfig(
                "layouts_per_epoch must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(NeuralError::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Loss and held-out detection quality after one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Precision over held-out edges at probability 0.5; `None` when the
    /// held-out set is empty or nothing was predicted positive.
    pub heldout_precision: Option<f64>,
    /// Recall over held-out edges at probability 0.5; `None` when the
    /// held-out set has no positive edges.
    pub heldout_recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
}

/// Trains the model in place; deterministic given the config seed.
///
/// Each step runs forward/backward on one labeled graph and applies an Adam
/// update. Graph order is reshuffled every epoch; at most
/// `layouts_per_epoch` graphs are visited per epoch.
pub fn train(
    model: &mut EdgeClassifierModel,
    train_set: &[ProximityGraph],
    heldout: &[ProximityGraph],
    config: &TrainConfig,
) -> Result<TrainReport, NeuralError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    for (idx, graph) in train_set.iter().chain(heldout).enumerate() {
        if graph.labels.is_none() {
            return Err(NeuralError::MissingLabels(idx));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(config.learning_rate, model);
    let mut report = TrainReport::default();
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng);
        order.truncate(config.layouts_per_epoch);
        let mut loss_sum = 0.0;
        for (step, &idx) in order.iter().enumerate() {
            let (loss, grads) = loss_and_grads(model, &train_set[idx], config.pos_weight);
            if !loss.is_finite() || !grads.all_finite() {
                return Err(NeuralError::NonFinite { epoch, step });
            }
            adam.step(model, &grads);
            loss_sum += loss;
        }
        let (heldout_precision, heldout_recall) = heldout_metrics(model, heldout);
        report.epochs.push(EpochMetrics {
            epoch,
            mean_loss: loss_sum / order.len() as f64,
            heldout_precision,
            heldout_recall,
        });
    }
    Ok(report)
}

/// Edge-level precision/recall at probability 0.5 over held-out graphs.
fn heldout_metrics(
    model: &EdgeClassifierModel,
    heldout: &[ProximityGraph],
) -> (Option<f64>, Option<f64>) {
    if heldout.is_empty() {
        return (None, None);
    }
    let (mut tp, mut fp, mut fn_count) = (0usize, 0usize, 0usize);
    for graph in heldout {
        let labels = graph.labels.as_ref().expect("validated before training");
        let probs = predict(model, graph);
        for (&p, &y) in probs.iter().zip(labels) {
            let positive = p >= 0.5;
            let truth = y >= 0.5;
            match (positive, truth) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_count += 1,
                (false, false) => {}
            }
        }
    }
    let precision = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
    let recall = (tp + fn_count > 0).then(|| tp as f64 / (tp + fn_count) as f64);
    (precision, recall)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proxgraph::{build_graph, fit_normalize, apply_normalize, label_from_layout};
    use crate::synthgen::{GenConfig, generate_layout, label_edges};

    fn labeled_graphs(relation: RelationType, seeds: std::ops::Range<u64>) -> Vec<ProximityGraph> {
        seeds
            .map(|seed| {
                let config = GenConfig {
                    seed,
                    n_rooms: 2..=4,
                    ..GenConfig::default()
                };
                let layout = label_edges(generate_layout(&config).unwrap(), 15);
                let mut graph = build_graph(&layout.planes, 15).unwrap();
                label_from_layout(&mut graph, &layout, relation);
                graph
            })
            .collect()
    }

    #[test]
    fn training_is_deterministic_given_the_seed() {
        let graphs = labeled_graphs(RelationType::SameRoom, 0..5);
        let stats = fit_normalize(&graphs);
        let graphs: Vec<ProximityGraph> =
            graphs.iter().map(|g| apply_normalize(g, &stats)).collect();
        let config = TrainConfig {
            epochs: 2,
            layouts_per_epoch: 5,
            ..TrainConfig::for_relation(RelationType::SameRoom)
        };
        let mut a = EdgeClassifierModel::new(RelationType::SameRoom, 8, 1);
        let mut b = EdgeClassifierModel::new(RelationType::SameRoom, 8, 1);
        let ra = train(&mut a, &graphs, &[], &config).unwrap();
        let rb = train(&mut b, &graphs, &[], &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn a_small_overfit_run_drives_the_loss_down() {
        let graphs = labeled_graphs(RelationType::SameRoom, 10..20);
        let stats = fit_normalize(&graphs);
        let graphs: Vec<ProximityGraph> =
            graphs.iter().map(|g| apply_normalize(g, &stats)).collect();
        let config = TrainConfig {
            epochs: 12,
            layouts_per_epoch: 10,
            ..TrainConfig::for_relation(RelationType::SameRoom)
        };
        let mut model = EdgeClassifierModel::new(RelationType::SameRoom, 16, 2);
        let report = train(&mut model, &graphs, &[], &config).unwrap();
        let losses: Vec<f64> = report.epochs.iter().map(|e| e.mean_loss).collect();
        assert!(losses.last().unwrap() < &losses[0]);
        // After warmup the curve is close to monotone: allow two upticks.
        let upticks = losses[3..]
            .windows(2)
            .filter(|w| w[1] > w[0] + 1e-9)
            .count();
        assert!(upticks <= 2, "loss curve {losses:?}");
    }

    #[test]
    fn training_one_relation_leaves_the_other_model_untouched() {
        let graphs = labeled_graphs(RelationType::SameRoom, 20..24);
        let stats = fit_normalize(&graphs);
        let graphs: Vec<ProximityGraph> =
            graphs.iter().map(|g| apply_normalize(g, &stats)).collect();
        let mut room = EdgeClassifierModel::new(RelationType::SameRoom, 8, 3);
        let wall = EdgeClassifierModel::new(RelationType::SameWall, 8, 4);
        let wall_before = wall.clone();
        let config = TrainConfig {
            epochs: 1,
            layouts_per_epoch: 4,
            ..TrainConfig::for_relation(RelationType::SameRoom)
        };
        train(&mut room, &graphs, &[], &config).unwrap();
        assert_eq!(wall, wall_before);
    }

    #[test]
    fn empty_and_unlabeled_datasets_are_rejected() {
        let mut model = EdgeClassifierModel::new(RelationType::SameRoom, 8, 5);
        let config = TrainConfig::for_relation(RelationType::SameRoom);
        assert!(matches!(
            train(&mut model, &[], &[], &config),
            Err(NeuralError::EmptyDataset)
        ));
        let mut graphs = labeled_graphs(RelationType::SameRoom, 30..31);
        graphs[0].labels = None;
        assert!(matches!(
            train(&mut model, &graphs, &[], &config),
            Err(NeuralError::MissingLabels(0))
        ));
    }

    #[test]
    fn heldout_metrics_report_precision_and_recall() {
        let train_graphs = labeled_graphs(RelationType::SameRoom, 40..46);
        let stats = fit_normalize(&train_graphs);
        let train_set: Vec<ProximityGraph> = train_graphs
            .iter()
            .map(|g| apply_normalize(g, &stats))
            .collect();
        let heldout: Vec<ProximityGraph> = labeled_graphs(RelationType::SameRoom, 46..48)
            .iter()
            .map(|g| apply_normalize(g, &stats))
            .collect();
        let config = TrainConfig {
            epochs: 3,
            layouts_per_epoch: 6,
            ..TrainConfig::for_relation(RelationType::SameRoom)
        };
        let mut model = EdgeClassifierModel::new(RelationType::SameRoom, 12, 6);
        let report = train(&mut model, &train_set, &heldout, &config).unwrap();
        for epoch in &report.epochs {
            // Positives exist in every layout, so recall is always defined.
            assert!(epoch.heldout_recall.is_some());
            if let Some(p) = epoch.heldout_precision {
                assert!((0.0..=1.0).contains(&p));
            }
        }
    }
}
