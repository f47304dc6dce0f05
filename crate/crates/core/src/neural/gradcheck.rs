//! Finite-difference verification of the hand-written gradients.

use super::forward::loss_and_grads;
use super::loss::bce_with_logits;
use super::model::EdgeClassifierModel;
use crate::proxgraph::ProximityGraph;

/// Compares analytic gradients against central finite differences for every
/// parameter element and returns the maximum relative error,
/// `|a − n| / max(1, |a|, |n|)`.
///
/// The graph must carry labels; the loss is the same weighted BCE used in
/// training.
pub fn grad_check(
    model: &EdgeClassifierModel,
    graph: &ProximityGraph,
    pos_weight: f64,
    eps: f64,
) -> f64 {
    let labels = graph
        .labels
        .as_ref()
        .expect("gradient check needs a labeled graph")
        .clone();
    let (_, grads) = loss_and_grads(model, graph, pos_weight);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let n_params = model.parameters().len();
    for p in 0..n_params {
        for k in 0..model.parameters()[p].len() {
            let original = model.parameters()[p].data()[k];
            probe.parameters_mut()[p].data_mut()[k] = original + eps;
            let hi = eval_loss(&probe, graph, &labels, pos_weight);
            probe.parameters_mut()[p].data_mut()[k] = original - eps;
            let lo = eval_loss(&probe, graph, &labels, pos_weight);
            probe.parameters_mut()[p].data_mut()[k] = original;
            let numeric = (hi - lo) / (2.0 * eps);
            let analytic = grads.tensors()[p].data()[k];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0);
            worst = worst.max(rel);
        }
    }
    worst
}

fn eval_loss(
    model: &EdgeClassifierModel,
    graph: &ProximityGraph,
    labels: &[f64],
    pos_weight: f64,
) -> f64 {
    let pass = super::forward::forward(model, graph);
    bce_with_logits(&pass.logits, labels, pos_weight)
}
