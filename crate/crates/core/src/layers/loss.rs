use crate::error::{KwsError, Result};
use crate::numerics::{softmax, Real};

/// `(-log softmax(logits)[label], softmax(logits) - onehot(label))`.
pub fn softmax_xent<F: Real>(logits: &[F], label: usize) -> Result<(F, Vec<F>)> {
    if logits.len() < 2 {
        return Err(KwsError::Shape(format!(
            "need at least 2 classes, got {}",
            logits.len()
        )));
    }
    if label >= logits.len() {
        return Err(KwsError::Data(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let m = logits
        .iter()
        .copied()
        .fold(F::neg_infinity(), |a, b| if b > a { b } else { a });
    let lse = m + logits.iter().map(|&z| (z - m).exp()).fold(F::zero(), |a, b| a + b).ln();
    let loss = lse - logits[label];
    let mut d = softmax(logits);
    d[label] -= F::one();
    Ok((loss, d))
}
