//! Model definition, Xavier initialization, and the gradient container.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Tensor;
use crate::RelationType;
use crate::proxgraph::{EDGE_FEAT_DIM, NODE_FEAT_DIM};

/// A dense layer `y = Wx + b` with `W: [out, in]`, `b: [out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LinearLayer {
    fn xavier(out_dim: usize, in_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        LinearLayer {
            weight: xavier_uniform(in_dim, out_dim, rng),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    fn zeros_like(other: &LinearLayer) -> Self {
        LinearLayer {
            weight: Tensor::zeros(other.weight.shape()),
            bias: Tensor::zeros(other.bias.shape()),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    /// Computes `y = Wx + b` into `out` (length `out_dim`).
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim());
        debug_assert_eq!(out.len(), self.out_dim());
        for (r, o) in out.iter_mut().enumerate() {
            let row = self.weight.row(r);
            let mut acc = self.bias.data()[r];
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            *o = acc;
        }
    }
}

/// One encoder layer: shared message/attention transform plus the node and
/// edge update networks.
#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer {
    /// Maps `[v_j ‖ e_ij]` to the message space (also used on the query side
    /// with a zero edge placeholder).
    pub message: LinearLayer,
    /// Attention vector over `[query ‖ key]`, length `2 * hidden`.
    pub attention: Tensor,
    /// Maps `[v_i ‖ aggregated]` to the next node embedding.
    pub node_update: LinearLayer,
    /// Maps `[v_i ‖ e_ij ‖ v_j]` to the next edge embedding.
    pub edge_update: LinearLayer,
}

impl GatLayer {
    fn new(node_in: usize, edge_in: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let message = LinearLayer::xavier(hidden, node_in + edge_in, rng);
        let attention_seed = xavier_uniform(2 * hidden, 1, rng);
        let attention = Tensor::new(vec![2 * hidden], attention_seed.data().to_vec())
            .expect("attention vector length is fixed by construction");
        GatLayer {
            message,
            attention,
            node_update: LinearLayer::xavier(hidden, node_in + hidden, rng),
            edge_update: LinearLayer::xavier(hidden, 2 * node_in + edge_in, rng),
        }
    }

    pub fn node_in(&self) -> usize {
        self.node_update.in_dim() - self.hidden()
    }

    pub fn edge_in(&self) -> usize {
        self.message.in_dim() - self.node_in()
    }

    pub fn hidden(&self) -> usize {
        self.message.out_dim()
    }
}

/// The number of encoder layers; node and edge embeddings update twice.
pub const ENCODER_LAYERS: usize = 2;
/// The number of decoder layers; the last emits one logit per edge.
pub const DECODER_LAYERS: usize = 3;
/// Embedding width used when nothing else is requested.
pub const DEFAULT_HIDDEN_DIM: usize = 32;

/// An edge classifier for one relation type.
///
/// Two models with this architecture run side by side in the pipeline — one
/// per relation — and never share parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeClassifierModel {
    pub relation: RelationType,
    pub hidden_dim: usize,
    /// Exactly [`ENCODER_LAYERS`] entries.
    pub layers: Vec<GatLayer>,
    /// Exactly [`DECODER_LAYERS`] entries; the final layer has a single
    /// output and no activation.
    pub decoder: Vec<LinearLayer>,
}

impl EdgeClassifierModel {
    /// Creates a model with Xavier-uniform weights and zero biases, drawn
    /// deterministically from the seed.
    pub fn new(relation: RelationType, hidden_dim: usize, seed: u64) -> Self {
        assert!(hidden_dim >= 1, "hidden_dim must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = hidden_dim;
        let layers = vec![
            GatLayer::new(NODE_FEAT_DIM, EDGE_FEAT_DIM, h, &mut rng),
            GatLayer::new(h, h, h, &mut rng),
        ];
        let decoder = vec![
            LinearLayer::xavier(h, 3 * h, &mut rng),
            LinearLayer::xavier(h, h, &mut rng),
            LinearLayer::xavier(1, h, &mut rng),
        ];
        EdgeClassifierModel {
            relation,
            hidden_dim,
            layers,
            decoder,
        }
    }

    /// All parameter tensors in a fixed order (matching
    /// [`Self::parameter_names`] and [`ModelGrads::tensors`]).
    pub fn parameters(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(&layer.message.weight);
            out.push(&layer.message.bias);
            out.push(&layer.attention);
            out.push(&layer.node_update.weight);
            out.push(&layer.node_update.bias);
            out.push(&layer.edge_update.weight);
            out.push(&layer.edge_update.bias);
        }
        for lin in &self.decoder {
            out.push(&lin.weight);
            out.push(&lin.bias);
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(&mut layer.message.weight);
            out.push(&mut layer.message.bias);
            out.push(&mut layer.attention);
            out.push(&mut layer.node_update.weight);
            out.push(&mut layer.node_update.bias);
            out.push(&mut layer.edge_update.weight);
            out.push(&mut layer.edge_update.bias);
        }
        for lin in &mut self.decoder {
            out.push(&mut lin.weight);
            out.push(&mut lin.bias);
        }
        out
    }

    /// Stable parameter names, aligned with [`Self::parameters`]; used by
    /// the checkpoint format.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (l, _) in self.layers.iter().enumerate() {
            for part in [
                "message.weight",
                "message.bias",
                "attention",
                "node_update.weight",
                "node_update.bias",
                "edge_update.weight",
                "edge_update.bias",
            ] {
                out.push(format!("encoder.{l}.{part}"));
            }
        }
        for (l, _) in self.decoder.iter().enumerate() {
            out.push(format!("decoder.{l}.weight"));
            out.push(format!("decoder.{l}.bias"));
        }
        out
    }
}

/// Per-parameter gradients, shaped exactly like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub layers: Vec<GatLayer>,
    pub decoder: Vec<LinearLayer>,
}

impl ModelGrads {
    pub fn zeros_like(model: &EdgeClassifierModel) -> Self {
        ModelGrads {
            layers: model
                .layers
                .iter()
                .map(|l| GatLayer {
                    message: LinearLayer::zeros_like(&l.message),
                    attention: Tensor::zeros(l.attention.shape()),
                    node_update: LinearLayer::zeros_like(&l.node_update),
                    edge_update: LinearLayer::zeros_like(&l.edge_update),
                })
                .collect(),
            decoder: model.decoder.iter().map(LinearLayer::zeros_like).collect(),
        }
    }

    /// Gradient tensors in the same order as
    /// [`EdgeClassifierModel::parameters`].
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(&layer.message.weight);
            out.push(&layer.message.bias);
            out.push(&layer.attention);
            out.push(&layer.node_update.weight);
            out.push(&layer.node_update.bias);
            out.push(&layer.edge_update.weight);
            out.push(&layer.edge_update.bias);
        }
        for lin in &self.decoder {
            out.push(&lin.weight);
            out.push(&lin.bias);
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            for t in [
                &mut layer.message.weight,
                &mut layer.message.bias,
                &mut layer.attention,
                &mut layer.node_update.weight,
                &mut layer.node_update.bias,
                &mut layer.edge_update.weight,
                &mut layer.edge_update.bias,
            ] {
                for v in t.data_mut() {
                    *v *= factor;
                }
            }
        }
        for lin in &mut self.decoder {
            for v in lin.weight.data_mut() {
                *v *= factor;
            }
            for v in lin.bias.data_mut() {
                *v *= factor;
            }
        }
    }
}

/// Samples a `[fan_out, fan_in]` weight tensor i.i.d. uniform on `[-b, b]`
/// with `b = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Tensor {
    assert!(fan_in >= 1 && fan_out >= 1, "fans must be positive");
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Tensor::new(vec![fan_out, fan_in], data).expect("shape matches generated data")
}
