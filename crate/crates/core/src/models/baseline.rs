use std::collections::VecDeque;

use crate::error::{KwsError, Result};
use crate::numerics::{Real, Tensor};

pub const SMOOTH_WINDOW: usize = 20;
pub const CONFIDENCE_WINDOW: usize = 100;

/// Trailing mean of each column over the last `w` frames (fewer at the start).
pub fn smooth_posteriors<F: Real>(p: &Tensor<F>, w: usize) -> Result<Tensor<f64>> {
    if w == 0 {
        return Err(KwsError::Config("smoothing window must be at least one frame".into()));
    }
    let (t_len, k) = (p.rows(), p.row_len());
    let mut out = Vec::with_capacity(t_len * k);
    for j in 0..t_len {
        let lo = (j + 1).saturating_sub(w);
        let n = (j + 1 - lo) as f64;
        for c in 0..k {
            let s: f64 = (lo..=j).map(|t| p.row(t)[c].as_f64()).sum();
            out.push(s / n);
        }
    }
    Tensor::from_vec(&[t_len, k], out)
}

/// Per-frame confidence: geometric mean over the non-filler classes of each
/// class's maximum smoothed posterior within the trailing `w_max` frames.
pub fn deep_kws_confidence(p: &Tensor<f64>, w_max: usize) -> Result<Vec<f64>> {
    let k = p.row_len();
    if w_max == 0 || k < 2 {
        return Err(KwsError::Config(
            "confidence needs a positive window and at least one keyword class".into(),
        ));
    }
    // One monotone deque of frame indices per keyword class.
    let mut deques: Vec<VecDeque<usize>> = vec![VecDeque::new(); k - 1];
    let root = 1.0 / (k - 1) as f64;
    let mut out = Vec::with_capacity(p.rows());
    for j in 0..p.rows() {
        let lo = (j + 1).saturating_sub(w_max);
        let mut prod = 1.0;
        for (c, dq) in deques.iter_mut().enumerate() {
            let col = c + 1;
            let v = p.row(j)[col];
            while dq.back().is_some_and(|&i| p.row(i)[col] <= v) {
                dq.pop_back();
            }
            dq.push_back(j);
            while dq.front().is_some_and(|&i| i < lo) {
                dq.pop_front();
            }
            prod *= p.row(dq[0])[col];
        }
        out.push(prod.max(0.0).powf(root));
    }
    Ok(out)
}

/// Utterance score for the baseline: the largest per-frame confidence.
pub fn baseline_score<F: Real>(posteriors: &Tensor<F>, w_smooth: usize, w_max: usize) -> Result<f64> {
    let conf = deep_kws_confidence(&smooth_posteriors(posteriors, w_smooth)?, w_max)?;
    Ok(conf.into_iter().fold(0.0, f64::max))
}

/// Frame labels for a keyword spanning `[start, end)` frames split evenly into
/// `syllables` segments; frames outside the span are filler (class 0).
pub fn uniform_alignment(frames: usize, start: usize, end: usize, syllables: usize) -> Vec<usize> {
    let mut labels = vec![0; frames];
    let end = end.min(frames);
    if start >= end || syllables == 0 {
        return labels;
    }
    let len = end - start;
    for (i, l) in labels[start..end].iter_mut().enumerate() {
        *l = 1 + (i * syllables / len).min(syllables - 1);
    }
    labels
}
