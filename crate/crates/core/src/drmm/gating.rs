use crate::embeddings::dot;

/// Term-gating softmax: `g_i = exp(w·x_i) / Σ_j exp(w·x_j)`.
///
/// Logits are shifted by their maximum before exponentiation.
pub fn gating_weights(weight: &[f64], term_inputs: &[Vec<f64>]) -> Vec<f64> {
    let logits: Vec<f64> = term_inputs.iter().map(|x| dot(weight, x)).collect();
    softmax(&logits)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
