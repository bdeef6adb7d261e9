/// Softmax cross-entropy for one sample. Returns the loss and
/// `softmax(logits) - one_hot(label)`.
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    assert!(label < logits.len(), "label {label} out of {} classes", logits.len());
    let top = super::kernel::argmax(logits).unwrap();
    let max = logits[top];
    // Σ exp(z - max) = 1 + rest; ln_1p keeps precision for confident logits.
    let rest: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, &z)| (z - max).exp())
        .sum();
    let log_sum = rest.ln_1p();
    let log_norm = max + log_sum;
    let loss = (max - logits[label]) + log_sum;
    let mut grad: Vec<f64> = logits.iter().map(|&z| (z - log_norm).exp()).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

/// Index of the largest logit, ties to the smallest class index.
pub fn predict(logits: &[f64]) -> usize {
    super::kernel::argmax(logits).unwrap_or(0)
}
