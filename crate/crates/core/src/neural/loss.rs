//! Weighted binary cross-entropy on logits.

/// Numerically stable softplus, `ln(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean weighted binary cross-entropy over logits.
///
/// Positive-class terms are multiplied by `pos_weight` to counter the class
/// imbalance of neighbourhood-sampled negatives. Labels are 0 or 1.
pub fn bce_with_logits(logits: &[f64], labels: &[f64], pos_weight: f64) -> f64 {
    assert_eq!(logits.len(), labels.len());
    if logits.is_empty() {
        return 0.0;
    }
    let total: f64 = logits
        .iter()
        .zip(labels)
        .map(|(&x, &y)| y * pos_weight * softplus(-x) + (1.0 - y) * softplus(x))
        .sum();
    total / logits.len() as f64
}

/// Gradient of [`bce_with_logits`] with respect to each logit.
pub fn bce_with_logits_backward(logits: &[f64], labels: &[f64], pos_weight: f64) -> Vec<f64> {
    assert_eq!(logits.len(), labels.len());
    let m = logits.len().max(1) as f64;
    logits
        .iter()
        .zip(labels)
        .map(|(&x, &y)| {
            let s = sigmoid(x);
            (y * pos_weight * (s - 1.0) + (1.0 - y) * s) / m
        })
        .collect()
}
