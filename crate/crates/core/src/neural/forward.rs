//! Forward pass and hand-written reverse-mode gradients.
//!
//! Shapes follow one convention throughout: node embeddings are `[N, d]`
//! tensors, edge embeddings `[M, d]`, and every per-edge quantity is aligned
//! with `graph.edges`. Aggregation at node `i` runs over the edges leaving
//! `i`; since the graph is symmetrized this is the full neighbourhood, and
//! each message is keyed by that edge's own feature row.

use super::loss::{bce_with_logits, bce_with_logits_backward};
use super::model::{EdgeClassifierModel, GatLayer, LinearLayer, ModelGrads};
use super::tensor::Tensor;
use crate::proxgraph::ProximityGraph;

/// Negative-side slope of the attention nonlinearity.
const LEAKY_SLOPE: f64 = 0.2;
/// Sentinel marking "no neighbour contributed" in the argmax table.
const NO_EDGE: usize = usize::MAX;

/// Everything the backward pass needs from one encoder layer's forward run.
struct LayerTrace {
    v_in: Tensor,
    e_in: Tensor,
    /// Per-node query vectors, `[N, h]`.
    queries: Tensor,
    /// Per-edge key/message vectors, `[M, h]`.
    keys: Tensor,
    /// Attention scores before the leaky ReLU, `[M]`.
    score_pre: Vec<f64>,
    /// Softmax weights per edge, normalized within each source node.
    alpha: Vec<f64>,
    /// Aggregated neighbourhood vector per node, `[N, h]`.
    agg: Tensor,
    /// Which edge won the elementwise max, per `(node, dim)`.
    argmax: Vec<usize>,
    /// Pre-activation node and edge updates.
    u_pre: Tensor,
    t_pre: Tensor,
    v_out: Tensor,
    e_out: Tensor,
}

struct DecoderTrace {
    /// Pre-activation outputs of the two hidden decoder layers, `[M, h]`.
    z_pre: [Tensor; 2],
}

/// Output of [`forward`]: logits plus the cached intermediates that
/// [`backward`] consumes.
pub struct ForwardPass {
    pub logits: Vec<f64>,
    layers: Vec<LayerTrace>,
    decoder: DecoderTrace,
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Edge indices leaving each node.
fn out_edges(graph: &ProximityGraph) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); graph.node_count()];
    for (idx, &(src, _)) in graph.edges.iter().enumerate() {
        adj[src].push(idx);
    }
    adj
}

fn run_layer(layer: &GatLayer, v: &Tensor, e: &Tensor, graph: &ProximityGraph) -> LayerTrace {
    let n = graph.node_count();
    let m = graph.edge_count();
    let h = layer.hidden();
    let dv = layer.node_in();
    let de = layer.edge_in();
    assert_eq!(v.cols(), dv, "node feature width mismatch");
    assert_eq!(e.cols(), de, "edge feature width mismatch");
    let adj = out_edges(graph);

    // Queries: the message transform applied to [v_i ‖ 0].
    let mut queries = Tensor::zeros(&[n, h]);
    let mut padded = vec![0.0; dv + de];
    for i in 0..n {
        padded[..dv].copy_from_slice(v.row(i));
        padded[dv..].fill(0.0);
        layer.message.apply(&padded, queries.row_mut(i));
    }
    // Keys: the same transform on [v_j ‖ e_ij] per edge.
    let mut keys = Tensor::zeros(&[m, h]);
    for (idx, &(_, dst)) in graph.edges.iter().enumerate() {
        padded[..dv].copy_from_slice(v.row(dst));
        padded[dv..].copy_from_slice(e.row(idx));
        layer.message.apply(&padded, keys.row_mut(idx));
    }

    // Attention scores s = leaky_relu(a · [q_i ‖ k_ij]).
    let (a_q, a_k) = layer.attention.data().split_at(h);
    let mut score_pre = vec![0.0; m];
    for (idx, &(src, _)) in graph.edges.iter().enumerate() {
        let q = queries.row(src);
        let k = keys.row(idx);
        let mut s = 0.0;
        for d in 0..h {
            s += a_q[d] * q[d] + a_k[d] * k[d];
        }
        score_pre[idx] = s;
    }
    // Softmax within each node's neighbourhood.
    let mut alpha = vec![0.0; m];
    for edges in &adj {
        if edges.is_empty() {
            continue;
        }
        let max = edges
            .iter()
            .map(|&idx| leaky(score_pre[idx]))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for &idx in edges {
            let w = (leaky(score_pre[idx]) - max).exp();
            alpha[idx] = w;
            total += w;
        }
        for &idx in edges {
            alpha[idx] /= total;
        }
    }

    // Elementwise max over the attention-weighted messages; zero vector for
    // isolated nodes.
    let mut agg = Tensor::zeros(&[n, h]);
    let mut argmax = vec![NO_EDGE; n * h];
    for (i, edges) in adj.iter().enumerate() {
        if edges.is_empty() {
            continue;
        }
        let row = agg.row_mut(i);
        for d in 0..h {
            let mut best = f64::NEG_INFINITY;
            let mut best_edge = NO_EDGE;
            for &idx in edges {
                let msg = alpha[idx] * keys.row(idx)[d];
                if msg > best {
                    best = msg;
                    best_edge = idx;
                }
            }
            row[d] = best;
            argmax[i * h + d] = best_edge;
        }
    }

    // Node update v' = relu(g_v([v_i ‖ agg_i])).
    let mut u_pre = Tensor::zeros(&[n, h]);
    let mut v_out = Tensor::zeros(&[n, h]);
    let mut cat_v = vec![0.0; dv + h];
    for i in 0..n {
        cat_v[..dv].copy_from_slice(v.row(i));
        cat_v[dv..].copy_from_slice(agg.row(i));
        layer.node_update.apply(&cat_v, u_pre.row_mut(i));
        for (o, &p) in v_out.row_mut(i).iter_mut().zip(u_pre.row(i)) {
            *o = relu(p);
        }
    }
    // Edge update e' = relu(g_e([v_i ‖ e_ij ‖ v_j])).
    let mut t_pre = Tensor::zeros(&[m, h]);
    let mut e_out = Tensor::zeros(&[m, h]);
    let mut cat_e = vec![0.0; 2 * dv + de];
    for (idx, &(src, dst)) in graph.edges.iter().enumerate() {
        cat_e[..dv].copy_from_slice(v.row(src));
        cat_e[dv..dv + de].copy_from_slice(e.row(idx));
        cat_e[dv + de..].copy_from_slice(v.row(dst));
        layer.edge_update.apply(&cat_e, t_pre.row_mut(idx));
        for (o, &p) in e_out.row_mut(idx).iter_mut().zip(t_pre.row(idx)) {
            *o = relu(p);
        }
    }

    LayerTrace {
        v_in: v.clone(),
        e_in: e.clone(),
        queries,
        keys,
        score_pre,
        alpha,
        agg,
        argmax,
        u_pre,
        t_pre,
        v_out,
        e_out,
    }
}

fn leaky(x: f64) -> f64 {
    if x > 0.0 { x } else { LEAKY_SLOPE * x }
}

/// One encoder layer: attention-weighted max aggregation into the node
/// update, plus the edge update, both reading the layer's inputs.
pub fn encoder_step(
    layer: &GatLayer,
    v: &Tensor,
    e: &Tensor,
    graph: &ProximityGraph,
) -> (Tensor, Tensor) {
    let trace = run_layer(layer, v, e, graph);
    (trace.v_out, trace.e_out)
}

/// Decoder only: per-edge logits from final node/edge embeddings.
pub fn decode(model: &EdgeClassifierModel, v: &Tensor, e: &Tensor, graph: &ProximityGraph) -> Vec<f64> {
    let (logits, _) = run_decoder(model, v, e, graph);
    logits
}

fn run_decoder(
    model: &EdgeClassifierModel,
    v: &Tensor,
    e: &Tensor,
    graph: &ProximityGraph,
) -> (Vec<f64>, DecoderTrace) {
    let m = graph.edge_count();
    let dv = v.cols();
    let de = e.cols();
    let [lin1, lin2, lin3] = &model.decoder[..] else {
        unreachable!("decoder always has three layers");
    };
    let mut z1_pre = Tensor::zeros(&[m, lin1.out_dim()]);
    let mut z2_pre = Tensor::zeros(&[m, lin2.out_dim()]);
    let mut logits = vec![0.0; m];
    let mut cat = vec![0.0; 2 * dv + de];
    let mut hidden1 = vec![0.0; lin1.out_dim()];
    let mut hidden2 = vec![0.0; lin2.out_dim()];
    for (idx, &(src, dst)) in graph.edges.iter().enumerate() {
        cat[..dv].copy_from_slice(v.row(src));
        cat[dv..dv + de].copy_from_slice(e.row(idx));
        cat[dv + de..].copy_from_slice(v.row(dst));
        lin1.apply(&cat, z1_pre.row_mut(idx));
        for (o, &p) in hidden1.iter_mut().zip(z1_pre.row(idx)) {
            *o = relu(p);
        }
        lin2.apply(&hidden1, z2_pre.row_mut(idx));
        for (o, &p) in hidden2.iter_mut().zip(z2_pre.row(idx)) {
            *o = relu(p);
        }
        let mut logit = [0.0];
        lin3.apply(&hidden2, &mut logit);
        logits[idx] = logit[0];
    }
    (
        logits,
        DecoderTrace {
            z_pre: [z1_pre, z2_pre],
        },
    )
}

/// Full forward pass: two encoder layers, then the decoder.
pub fn forward(model: &EdgeClassifierModel, graph: &ProximityGraph) -> ForwardPass {
    let v0 = Tensor::new(
        vec![graph.node_count(), crate::proxgraph::NODE_FEAT_DIM],
        graph.node_feats.iter().flatten().copied().collect(),
    )
    .expect("node feature rows have a fixed width");
    let e0 = Tensor::new(
        vec![graph.edge_count(), crate::proxgraph::EDGE_FEAT_DIM],
        graph.edge_feats.iter().flatten().copied().collect(),
    )
    .expect("edge feature rows have a fixed width");
    let mut layers = Vec::with_capacity(model.layers.len());
    let (mut v, mut e) = (v0, e0);
    for layer in &model.layers {
        let trace = run_layer(layer, &v, &e, graph);
        v = trace.v_out.clone();
        e = trace.e_out.clone();
        layers.push(trace);
    }
    let (logits, decoder) = run_decoder(model, &v, &e, graph);
    ForwardPass {
        logits,
        layers,
        decoder,
    }
}

/// Probability per edge: `sigmoid(logit)`.
pub fn predict(model: &EdgeClassifierModel, graph: &ProximityGraph) -> Vec<f64> {
    forward(model, graph)
        .logits
        .iter()
        .map(|&x| 1.0 / (1.0 + (-x).exp()))
        .collect()
}

/// Accumulates `grad_out ⊗ x` into the layer gradient and `Wᵀ grad_out`
/// into `grad_in` (when provided).
fn linear_backward(
    lin: &LinearLayer,
    grads: &mut LinearLayer,
    x: &[f64],
    grad_out: &[f64],
    grad_in: Option<&mut [f64]>,
) {
    let (out_dim, in_dim) = (lin.out_dim(), lin.in_dim());
    for r in 0..out_dim {
        let g = grad_out[r];
        if g == 0.0 {
            continue;
        }
        let wrow = grads.weight.row_mut(r);
        for (w, &v) in wrow.iter_mut().zip(x) {
            *w += g * v;
        }
        grads.bias.data_mut()[r] += g;
    }
    if let Some(grad_in) = grad_in {
        debug_assert_eq!(grad_in.len(), in_dim);
        for r in 0..out_dim {
            let g = grad_out[r];
            if g == 0.0 {
                continue;
            }
            let wrow = lin.weight.row(r);
            for (gi, &w) in grad_in.iter_mut().zip(wrow) {
                *gi += g * w;
            }
        }
    }
}

/// Reverse-mode gradients of a scalar loss through the whole model, given
/// `d loss / d logit` per edge. Returns gradients for every parameter.
pub fn backward(
    model: &EdgeClassifierModel,
    graph: &ProximityGraph,
    pass: &ForwardPass,
    dlogits: &[f64],
) -> ModelGrads {
    assert_eq!(dlogits.len(), graph.edge_count());
    let mut grads = ModelGrads::zeros_like(model);
    let adj = out_edges(graph);
    let m = graph.edge_count();
    let last = pass.layers.last().expect("model has encoder layers");
    let (v_fin, e_fin) = (&last.v_out, &last.e_out);
    let dv = v_fin.cols();
    let de = e_fin.cols();

    // ---- decoder ----
    let [lin1, lin2, lin3] = &model.decoder[..] else {
        unreachable!("decoder always has three layers");
    };
    let [g1, g2, g3] = &mut grads.decoder[..] else {
        unreachable!("gradient mirror matches the model");
    };
    let mut d_v = Tensor::zeros(&[v_fin.rows(), dv]);
    let mut d_e = Tensor::zeros(&[m, de]);
    let mut cat = vec![0.0; 2 * dv + de];
    let mut hidden1 = vec![0.0; lin1.out_dim()];
    let mut hidden2 = vec![0.0; lin2.out_dim()];
    for (idx, &(src, dst)) in graph.edges.iter().enumerate() {
        let z1 = pass.decoder.z_pre[0].row(idx);
        let z2 = pass.decoder.z_pre[1].row(idx);
        cat[..dv].copy_from_slice(v_fin.row(src));
        cat[dv..dv + de].copy_from_slice(e_fin.row(idx));
        cat[dv + de..].copy_from_slice(v_fin.row(dst));
        for (o, &p) in hidden1.iter_mut().zip(z1) {
            *o = relu(p);
        }
        for (o, &p) in hidden2.iter_mut().zip(z2) {
            *o = relu(p);
        }
        // Logit layer.
        let dlogit = [dlogits[idx]];
        let mut d_hidden2 = vec![0.0; hidden2.len()];
        linear_backward(lin3, g3, &hidden2, &dlogit, Some(&mut d_hidden2));
        // Second hidden layer (through its ReLU).
        for (g, &p) in d_hidden2.iter_mut().zip(z2) {
            if p <= 0.0 {
                *g = 0.0;
            }
        }
        let mut d_hidden1 = vec![0.0; hidden1.len()];
        linear_backward(lin2, g2, &hidden1, &d_hidden2, Some(&mut d_hidden1));
        // First hidden layer.
        for (g, &p) in d_hidden1.iter_mut().zip(z1) {
            if p <= 0.0 {
                *g = 0.0;
            }
        }
        let mut d_cat = vec![0.0; cat.len()];
        linear_backward(lin1, g1, &cat, &d_hidden1, Some(&mut d_cat));
        for (a, b) in d_v.row_mut(src).iter_mut().zip(&d_cat[..dv]) {
            *a += b;
        }
        for (a, b) in d_e.row_mut(idx).iter_mut().zip(&d_cat[dv..dv + de]) {
            *a += b;
        }
        for (a, b) in d_v.row_mut(dst).iter_mut().zip(&d_cat[dv + de..]) {
            *a += b;
        }
    }

    // ---- encoder layers, last to first ----
    for ((layer, trace), lgrads) in model
        .layers
        .iter()
        .zip(&pass.layers)
        .zip(&mut grads.layers)
        .rev()
    {
        let (next_d_v, next_d_e) = layer_backward(layer, lgrads, trace, graph, &adj, &d_v, &d_e);
        d_v = next_d_v;
        d_e = next_d_e;
    }
    grads
}

/// Backward through one encoder layer. `d_v_out`/`d_e_out` are gradients at
/// this layer's outputs; returns gradients at its inputs.
fn layer_backward(
    layer: &GatLayer,
    grads: &mut GatLayer,
    trace: &LayerTrace,
    graph: &ProximityGraph,
    adj: &[Vec<usize>],
    d_v_out: &Tensor,
    d_e_out: &Tensor,
) -> (Tensor, Tensor) {
    let n = graph.node_count();
    let m = graph.edge_count();
    let h = layer.hidden();
    let dv = layer.node_in();
    let de = layer.edge_in();
    let mut d_v_in = Tensor::zeros(&[n, dv]);
    let mut d_e_in = Tensor::zeros(&[m, de]);

    // Edge update backward: e' = relu(W_e [v_i ‖ e ‖ v_j] + b_e).
    let mut cat_e = vec![0.0; 2 * dv + de];
    let mut dt = vec![0.0; h];
    for (idx, &(src, dst)) in graph.edges.iter().enumerate() {
        let t_pre = trace.t_pre.row(idx);
        let d_out = d_e_out.row(idx);
        let mut live = false;
        for d in 0..h {
            dt[d] = if t_pre[d] > 0.0 { d_out[d] } else { 0.0 };
            live |= dt[d] != 0.0;
        }
        if !live {
            continue;
        }
        cat_e[..dv].copy_from_slice(trace.v_in.row(src));
        cat_e[dv..dv + de].copy_from_slice(trace.e_in.row(idx));
        cat_e[dv + de..].copy_from_slice(trace.v_in.row(dst));
        let mut d_cat = vec![0.0; cat_e.len()];
        linear_backward(&layer.edge_update, &mut grads.edge_update, &cat_e, &dt, Some(&mut d_cat));
        for (a, b) in d_v_in.row_mut(src).iter_mut().zip(&d_cat[..dv]) {
            *a += b;
        }
        for (a, b) in d_e_in.row_mut(idx).iter_mut().zip(&d_cat[dv..dv + de]) {
            *a += b;
        }
        for (a, b) in d_v_in.row_mut(dst).iter_mut().zip(&d_cat[dv + de..]) {
            *a += b;
        }
    }

    // Node update backward: v' = relu(W_v [v_i ‖ agg_i] + b_v).
    let mut d_agg = Tensor::zeros(&[n, h]);
    let mut cat_v = vec![0.0; dv + h];
    let mut du = vec![0.0; h];
    for i in 0..n {
        let u_pre = trace.u_pre.row(i);
        let d_out = d_v_out.row(i);
        let mut live = false;
        for d in 0..h {
            du[d] = if u_pre[d] > 0.0 { d_out[d] } else { 0.0 };
            live |= du[d] != 0.0;
        }
        if !live {
            continue;
        }
        cat_v[..dv].copy_from_slice(trace.v_in.row(i));
        cat_v[dv..].copy_from_slice(trace.agg.row(i));
        let mut d_cat = vec![0.0; cat_v.len()];
        linear_backward(&layer.node_update, &mut grads.node_update, &cat_v, &du, Some(&mut d_cat));
        for (a, b) in d_v_in.row_mut(i).iter_mut().zip(&d_cat[..dv]) {
            *a += b;
        }
        for (a, b) in d_agg.row_mut(i).iter_mut().zip(&d_cat[dv..]) {
            *a += b;
        }
    }

    // Max aggregation routes each gradient to the edge that won that dim.
    let mut d_msg = Tensor::zeros(&[m, h]);
    for i in 0..n {
        let d_row = d_agg.row(i);
        for d in 0..h {
            let edge = trace.argmax[i * h + d];
            if edge != NO_EDGE && d_row[d] != 0.0 {
                d_msg.row_mut(edge)[d] += d_row[d];
            }
        }
    }

    // Message = alpha * key: split into attention-weight and key parts.
    let mut d_alpha = vec![0.0; m];
    let mut d_key = Tensor::zeros(&[m, h]);
    for idx in 0..m {
        let key = trace.keys.row(idx);
        let dm = d_msg.row(idx);
        let a = trace.alpha[idx];
        let mut acc = 0.0;
        for d in 0..h {
            acc += dm[d] * key[d];
            d_key.row_mut(idx)[d] += a * dm[d];
        }
        d_alpha[idx] = acc;
    }

    // Softmax backward within each neighbourhood, then the leaky ReLU.
    let (a_q, a_k) = layer.attention.data().split_at(h);
    let (da_q, da_k) = grads.attention.data_mut().split_at_mut(h);
    let mut d_query = Tensor::zeros(&[n, h]);
    for (i, edges) in adj.iter().enumerate() {
        if edges.is_empty() {
            continue;
        }
        let weighted: f64 = edges.iter().map(|&idx| trace.alpha[idx] * d_alpha[idx]).sum();
        for &idx in edges {
            let ds = trace.alpha[idx] * (d_alpha[idx] - weighted);
            if ds == 0.0 {
                continue;
            }
            let slope = if trace.score_pre[idx] > 0.0 { 1.0 } else { LEAKY_SLOPE };
            let dz = ds * slope;
            let q = trace.queries.row(i);
            let k = trace.keys.row(idx);
            let dq_row = d_query.row_mut(i);
            let dk_row = d_key.row_mut(idx);
            for d in 0..h {
                da_q[d] += dz * q[d];
                da_k[d] += dz * k[d];
                dq_row[d] += dz * a_q[d];
                dk_row[d] += dz * a_k[d];
            }
        }
    }

    // Key backward: k = W_m [v_j ‖ e] + b_m.
    let mut padded = vec![0.0; dv + de];
    for (idx, &(_, dst)) in graph.edges.iter().enumerate() {
        let dk = d_key.row(idx);
        if dk.iter().all(|&g| g == 0.0) {
            continue;
        }
        padded[..dv].copy_from_slice(trace.v_in.row(dst));
        padded[dv..].copy_from_slice(trace.e_in.row(idx));
        let mut d_cat = vec![0.0; padded.len()];
        linear_backward(&layer.message, &mut grads.message, &padded, dk, Some(&mut d_cat));
        for (a, b) in d_v_in.row_mut(dst).iter_mut().zip(&d_cat[..dv]) {
            *a += b;
        }
        for (a, b) in d_e_in.row_mut(idx).iter_mut().zip(&d_cat[dv..]) {
            *a += b;
        }
    }
    // Query backward: q = W_m [v_i ‖ 0] + b_m. The zero pad is a constant,
    // so only the node slice of the input gradient survives.
    for i in 0..n {
        let dq = d_query.row(i);
        if dq.iter().all(|&g| g == 0.0) {
            continue;
        }
        padded[..dv].copy_from_slice(trace.v_in.row(i));
        padded[dv..].fill(0.0);
        let mut d_cat = vec![0.0; padded.len()];
        linear_backward(&layer.message, &mut grads.message, &padded, dq, Some(&mut d_cat));
        for (a, b) in d_v_in.row_mut(i).iter_mut().zip(&d_cat[..dv]) {
            *a += b;
        }
    }

    (d_v_in, d_e_in)
}

/// Forward, loss, and gradients in one call, using the graph's labels.
///
/// Panics if the graph carries no labels; training validates that up front.
pub fn loss_and_grads(
    model: &EdgeClassifierModel,
    graph: &ProximityGraph,
    pos_weight: f64,
) -> (f64, ModelGrads) {
    let labels = graph
        .labels
        .as_ref()
        .expect("graph must be labeled before training");
    let pass = forward(model, graph);
    let loss = bce_with_logits(&pass.logits, labels, pos_weight);
    let dlogits = bce_with_logits_backward(&pass.logits, labels, pos_weight);
    let grads = backward(model, graph, &pass, &dlogits);
    (loss, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RelationType;
    use crate::geometry::PlaneId;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Builds a synthetic graph literal with the given edges and random
    /// standardized-looking features.
    fn toy_graph(n: usize, edges: Vec<(usize, usize)>, seed: u64) -> ProximityGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut feat = || {
            [
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ]
        };
        let node_feats = (0..n).map(|_| feat()).collect();
        let edge_feats = (0..edges.len()).map(|_| feat()).collect();
        ProximityGraph {
            node_ids: (0..n).map(|i| PlaneId::new(format!("p{i}"))).collect(),
            node_feats,
            edges,
            edge_feats,
            labels: None,
        }
    }

    fn apply_linear(lin: &LinearLayer, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; lin.out_dim()];
        lin.apply(x, &mut out);
        out
    }

    #[test]
    fn isolated_node_aggregates_the_zero_vector() {
        let graph = toy_graph(1, vec![], 0);
        let model = EdgeClassifierModel::new(RelationType::SameRoom, 5, 1);
        let v0 = Tensor::new(vec![1, 3], graph.node_feats[0].to_vec()).unwrap();
        let e0 = Tensor::zeros(&[0, 3]);
        let (v1, _) = encoder_step(&model.layers[0], &v0, &e0, &graph);
        let mut cat = graph.node_feats[0].to_vec();
        cat.extend_from_slice(&[0.0; 5]);
        let expect: Vec<f64> = apply_linear(&model.layers[0].node_update, &cat)
            .into_iter()
            .map(relu)
            .collect();
        assert_eq!(v1.row(0), &expect[..]);
    }

    #[test]
    fn single_neighbour_forces_attention_to_one() {
        // Two nodes, mutual edges: each node has exactly one out-edge, so
        // softmax over the neighbourhood is 1 and agg equals that message.
        let graph = toy_graph(2, vec![(0, 1), (1, 0)], 7);
        let model = EdgeClassifierModel::new(RelationType::SameRoom, 4, 2);
        let layer = &model.layers[0];
        let v0 = Tensor::new(vec![2, 3], graph.node_feats.iter().flatten().copied().collect())
            .unwrap();
        let e0 = Tensor::new(vec![2, 3], graph.edge_feats.iter().flatten().copied().collect())
            .unwrap();
        let (v1, e1) = encoder_step(layer, &v0, &e0, &graph);
        // Hand-computed path for node 0 and edge (0,1).
        let mut key_in = graph.node_feats[1].to_vec();
        key_in.extend_from_slice(&graph.edge_feats[0]);
        let key = apply_linear(&layer.message, &key_in);
        let mut node_in = graph.node_feats[0].to_vec();
        node_in.extend_from_slice(&key);
        let v_expect: Vec<f64> = apply_linear(&layer.node_update, &node_in)
            .into_iter()
            .map(relu)
            .collect();
        for (a, b) in v1.row(0).iter().zip(&v_expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut edge_in = graph.node_feats[0].to_vec();
        edge_in.extend_from_slice(&graph.edge_feats[0]);
        edge_in.extend_from_slice(&graph.node_feats[1]);
        let e_expect: Vec<f64> = apply_linear(&layer.edge_update, &edge_in)
            .into_iter()
            .map(relu)
            .collect();
        for (a, b) in e1.row(0).iter().zip(&e_expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zeroed_model_decodes_to_even_odds() {
        let graph = toy_graph(3, vec![(0, 1), (1, 0), (1, 2), (2, 1)], 3);
        let mut model = EdgeClassifierModel::new(RelationType::SameWall, 6, 4);
        for p in model.parameters_mut() {
            p.data_mut().fill(0.0);
        }
        let probs = predict(&model, &graph);
        assert_eq!(probs.len(), 4);
        for p in probs {
            assert_eq!(p, 0.5);
        }
    }

    #[test]
    fn one_dimensional_decoder_matches_the_closed_form() {
        let graph = toy_graph(2, vec![(0, 1), (1, 0)], 11);
        let mut model = EdgeClassifierModel::new(RelationType::SameRoom, 1, 5);
        // Hand-set weights so the logit is a scalar chain.
        let w1 = [0.5, -1.0, 2.0];
        for (i, w) in w1.iter().enumerate() {
            model.decoder[0].weight.data_mut()[i] = *w;
        }
        model.decoder[0].bias.data_mut()[0] = 0.25;
        model.decoder[1].weight.data_mut()[0] = -3.0;
        model.decoder[1].bias.data_mut()[0] = 1.0;
        model.decoder[2].weight.data_mut()[0] = 0.75;
        model.decoder[2].bias.data_mut()[0] = -0.1;
        let v = Tensor::new(vec![2, 1], vec![2.0, -1.5]).unwrap();
        let e = Tensor::new(vec![2, 1], vec![0.5, 0.5]).unwrap();
        let logits = decode(&model, &v, &e, &graph);
        let manual = |vi: f64, eij: f64, vj: f64| {
            let z1 = relu(0.5 * vi - 1.0 * eij + 2.0 * vj + 0.25);
            let z2 = relu(-3.0 * z1 + 1.0);
            0.75 * z2 - 0.1
        };
        assert!((logits[0] - manual(2.0, 0.5, -1.5)).abs() < 1e-12);
        assert!((logits[1] - manual(-1.5, 0.5, 2.0)).abs() < 1e-12);
    }

    #[test]
    fn forward_is_permutation_equivariant() {
        let edges = vec![(0, 1), (0, 2), (1, 0), (1, 3), (2, 0), (3, 1)];
        let graph = toy_graph(4, edges.clone(), 13);
        let model = EdgeClassifierModel::new(RelationType::SameRoom, 8, 6);
        let base = forward(&model, &graph).logits;
        // Relabel nodes with the cycle i -> (i+1) % 4 and rebuild.
        let perm = |i: usize| (i + 1) % 4;
        let mut permuted = graph.clone();
        permuted.node_ids = (0..4).map(|i| graph.node_ids[(i + 3) % 4].clone()).collect();
        permuted.node_feats = (0..4).map(|i| graph.node_feats[(i + 3) % 4]).collect();
        let mut order: Vec<usize> = (0..edges.len()).collect();
        order.sort_by_key(|&idx| (perm(edges[idx].0), perm(edges[idx].1)));
        permuted.edges = order.iter().map(|&idx| (perm(edges[idx].0), perm(edges[idx].1))).collect();
        permuted.edge_feats = order.iter().map(|&idx| graph.edge_feats[idx]).collect();
        let permuted_logits = forward(&model, &permuted).logits;
        for (new_pos, &old_idx) in order.iter().enumerate() {
            assert!(
                (permuted_logits[new_pos] - base[old_idx]).abs() < 1e-9,
                "edge {:?}",
                edges[old_idx]
            );
        }
    }

    #[test]
    fn standardized_inputs_stay_numerically_tame() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for seed in 0..10 {
            let n = 6;
            let mut edges = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.random_bool(0.4) {
                        edges.push((i, j));
                    }
                }
            }
            edges.sort_unstable();
            let mut graph = toy_graph(n, edges, seed);
            for row in &mut graph.node_feats {
                for v in row {
                    *v = rng.random_range(-5.0..5.0);
                }
            }
            for row in &mut graph.edge_feats {
                for v in row {
                    *v = rng.random_range(-5.0..5.0);
                }
            }
            let model = EdgeClassifierModel::new(RelationType::SameRoom, 32, seed);
            let pass = forward(&model, &graph);
            for logit in &pass.logits {
                assert!(logit.is_finite());
                assert!(logit.abs() < 1e3, "logit {logit} out of range");
            }
        }
    }

    #[test]
    fn gradients_scale_linearly_with_the_loss() {
        let graph = toy_graph(4, vec![(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)], 17);
        let model = EdgeClassifierModel::new(RelationType::SameRoom, 6, 8);
        let pass = forward(&model, &graph);
        let dlogits: Vec<f64> = (0..pass.logits.len()).map(|i| 0.1 * (i as f64 + 1.0)).collect();
        let doubled: Vec<f64> = dlogits.iter().map(|d| d * 2.0).collect();
        let g1 = backward(&model, &graph, &pass, &dlogits);
        let mut g1_scaled = g1.clone();
        g1_scaled.scale(2.0);
        let g2 = backward(&model, &graph, &pass, &doubled);
        for (a, b) in g1_scaled.tensors().iter().zip(g2.tensors()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn zero_inputs_still_produce_finite_gradients() {
        let mut graph = toy_graph(3, vec![(0, 1), (1, 0), (1, 2), (2, 1)], 19);
        for row in &mut graph.node_feats {
            *row = [0.0; 3];
        }
        for row in &mut graph.edge_feats {
            *row = [0.0; 3];
        }
        graph.labels = Some(vec![1.0, 0.0, 1.0, 0.0]);
        let model = EdgeClassifierModel::new(RelationType::SameRoom, 8, 9);
        let (loss, grads) = loss_and_grads(&model, &graph, 2.0);
        assert!(loss.is_finite());
        assert!(grads.all_finite());
        // The bias path is input-independent, so decoder bias gradients flow.
        assert!(grads.decoder[2].bias.data()[0] != 0.0);
    }
}
