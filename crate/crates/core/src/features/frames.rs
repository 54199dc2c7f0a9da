use std::f64::consts::TAU;

use super::AudioClip;
use crate::error::{KwsError, Result};

/// Window and hop lengths in samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameSpec {
    pub win: usize,
    pub hop: usize,
}

impl FrameSpec {
    /// 25 ms windows every 10 ms.
    pub fn standard(sample_rate: u32) -> Self {
        Self::from_secs(sample_rate, 0.025, 0.010)
    }

    pub fn from_secs(sample_rate: u32, win_s: f64, hop_s: f64) -> Self {
        Self {
            win: (win_s * sample_rate as f64).round() as usize,
            hop: (hop_s * sample_rate as f64).round() as usize,
        }
    }

    /// `1 + floor((len - win) / hop)`, or 0 when shorter than one window.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.win || self.hop == 0 {
            0
        } else {
            1 + (len - self.win) / self.hop
        }
    }
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (TAU * i as f64 / n as f64).cos()).collect()
}

/// Splits the clip into Hann-windowed frames; a trailing remainder shorter
/// than one hop is dropped.
pub fn frame_signal(clip: &AudioClip, spec: FrameSpec) -> Result<Vec<Vec<f64>>> {
    if spec.win == 0 || spec.hop == 0 {
        return Err(KwsError::Config(format!("bad frame spec {spec:?}")));
    }
    let x = clip.samples();
    let n = spec.frame_count(x.len());
    if n == 0 {
        return Err(KwsError::Audio(format!(
            "clip of {} samples is shorter than one {}-sample window",
            x.len(),
            spec.win
        )));
    }
    let w = hann(spec.win);
    Ok((0..n)
        .map(|t| {
            let s = &x[t * spec.hop..t * spec.hop + spec.win];
            s.iter().zip(&w).map(|(&a, &b)| a as f64 * b).collect()
        })
        .collect())
}
