//! Frame-synchronous runtime decoder. Each pushed frame advances the encoder
//! by one step; encoder outputs and their attention scores are cached in
//! ring buffers so only the window softmax and pooling are recomputed.

use std::collections::VecDeque;
use std::path::Path;

use crate::error::{KwsError, Result};
use crate::features::{read_wav, AudioClip, FeatureExtractor, FeatureStream};
use crate::models::{EncoderState, Model, ModelConfig, ModelKind};
use crate::numerics::Real;

pub const DEFAULT_WINDOW: usize = 100;
pub const DEFAULT_REFRACTORY: usize = 100;

#[derive(Clone, Debug)]
pub struct DecoderState<F: Real = f32> {
    cfg: ModelConfig,
    window: usize,
    encoder: EncoderState<F>,
    hidden: VecDeque<Vec<F>>,
    scores: VecDeque<F>,
    frames_seen: u64,
}

impl<F: Real> DecoderState<F> {
    pub fn new(model: &Model<F>, window: usize) -> Result<Self> {
        let cfg = model.config();
        if cfg.kind != ModelKind::AttentionE2e || !cfg.is_recurrent() {
            return Err(KwsError::Config(format!(
                "streaming needs a recurrent attention model, got {}",
                cfg.label()
            )));
        }
        if window == 0 {
            return Err(KwsError::Config("window must be at least one frame".into()));
        }
        Ok(Self {
            cfg: cfg.clone(),
            window,
            encoder: model.encoder_state(),
            hidden: VecDeque::with_capacity(window),
            scores: VecDeque::with_capacity(window),
            frames_seen: 0,
        })
    }

    /// Consumes one feature frame. Returns `p(y=1)` over the last `window`
    /// frames once that many have been seen.
    pub fn push_frame(&mut self, model: &Model<F>, x: &[F]) -> Result<Option<F>> {
        if model.config() != &self.cfg {
            return Err(KwsError::Config(format!(
                "decoder was built for {} but got parameters for {}",
                self.cfg.label(),
                model.config().label()
            )));
        }
        let h = model.encode_step(&mut self.encoder, x)?;
        let e = model.frame_score(&h)?;
        if self.hidden.len() == self.window {
            self.hidden.pop_front();
            self.scores.pop_front();
        }
        self.hidden.push_back(h);
        self.scores.push_back(e);
        self.frames_seen += 1;
        if self.hidden.len() < self.window {
            return Ok(None);
        }
        let scores: Vec<F> = self.scores.iter().copied().collect();
        model
            .score_window(self.hidden.iter().map(Vec::as_slice), &scores)
            .map(Some)
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    /// Recurrent cell evaluations so far, summed over layers.
    pub fn cell_evals(&self) -> u64 {
        self.encoder.cell_evals()
    }

    pub fn buffered(&self) -> usize {
        self.hidden.len()
    }

    pub fn window(&self) -> usize {
        self.window
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionEvent {
    pub frame: usize,
    pub score: f64,
    /// `frame × hop` seconds.
    pub time_s: f64,
}

/// Threshold trigger with a refractory period.
#[derive(Clone, Debug)]
pub struct Detector {
    threshold: f64,
    refractory: usize,
    hop_s: f64,
    next_allowed: usize,
}

impl Detector {
    pub fn new(threshold: f64, refractory: usize, hop_s: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(KwsError::Config(format!("threshold {threshold} must lie in (0, 1)")));
        }
        Ok(Self {
            threshold,
            refractory,
            hop_s,
            next_allowed: 0,
        })
    }

    pub fn observe(&mut self, frame: usize, score: f64) -> Option<DetectionEvent> {
        if score >= self.threshold && frame >= self.next_allowed {
            self.next_allowed = frame + self.refractory.max(1);
            Some(DetectionEvent {
                frame,
                score,
                time_s: frame as f64 * self.hop_s,
            })
        } else {
            None
        }
    }
}

/// Events from `(frame, score)` pairs in frame order.
pub fn detect(
    scores: impl IntoIterator<Item = (usize, f64)>,
    threshold: f64,
    refractory: usize,
    hop_s: f64,
) -> Result<Vec<DetectionEvent>> {
    let mut d = Detector::new(threshold, refractory, hop_s)?;
    Ok(scores.into_iter().filter_map(|(t, s)| d.observe(t, s)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamConfig {
    pub window: usize,
    pub threshold: f64,
    pub refractory: usize,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            threshold: 0.5,
            refractory: DEFAULT_REFRACTORY,
        }
    }
}

/// Audio-in, events-out pipeline for one stream.
#[derive(Clone, Debug)]
pub struct StreamSession {
    features: FeatureStream,
    decoder: DecoderState<f32>,
    detector: Detector,
    frame: usize,
}

/// Per-frame score (None during warm-up) plus any events.
pub type StreamOutput = (Vec<(usize, Option<f32>)>, Vec<DetectionEvent>);

impl StreamSession {
    pub fn new(model: &Model<f32>, fx: &FeatureExtractor, cfg: &StreamConfig) -> Result<Self> {
        if model.config().input_dim != fx.config().n_mels {
            return Err(KwsError::Config(format!(
                "model expects {} features per frame, front end produces {}",
                model.config().input_dim,
                fx.config().n_mels
            )));
        }
        Ok(Self {
            features: fx.stream()?,
            decoder: DecoderState::new(model, cfg.window)?,
            detector: Detector::new(cfg.threshold, cfg.refractory, fx.config().frame_hop_s)?,
            frame: 0,
        })
    }

    pub fn push_samples(&mut self, model: &Model<f32>, samples: &[f32]) -> Result<StreamOutput> {
        let mut scores = Vec::new();
        let mut events = Vec::new();
        for x in self.features.push(samples)? {
            let s = self.decoder.push_frame(model, &x)?;
            if let Some(p) = s {
                events.extend(self.detector.observe(self.frame, p as f64));
            }
            scores.push((self.frame, s));
            self.frame += 1;
        }
        Ok((scores, events))
    }

    pub fn push_clip(&mut self, model: &Model<f32>, clip: &AudioClip) -> Result<StreamOutput> {
        let sr = self.features_rate();
        if clip.sample_rate() != sr {
            return Err(KwsError::Audio(format!(
                "sample rate {} Hz does not match the configured {sr} Hz",
                clip.sample_rate()
            )));
        }
        self.push_samples(model, clip.samples())
    }

    fn features_rate(&self) -> u32 {
        self.features.sample_rate()
    }

    pub fn decoder(&self) -> &DecoderState<f32> {
        &self.decoder
    }
}

/// Streams a WAV file through a fresh session and returns its events.
pub fn stream_file(
    path: impl AsRef<Path>,
    model: &Model<f32>,
    fx: &FeatureExtractor,
    cfg: &StreamConfig,
) -> Result<Vec<DetectionEvent>> {
    let clip = read_wav(path)?;
    let mut s = StreamSession::new(model, fx, cfg)?;
    Ok(s.push_clip(model, &clip)?.1)
}

/// Batch reference for [`DecoderState::push_frame`]: encodes the whole
/// stream at once and attends over each trailing window. Entry `t` is None
/// during warm-up.
pub fn batch_scores<F: Real>(
    model: &Model<F>,
    x: &crate::numerics::Tensor<F>,
    window: usize,
) -> Result<Vec<Option<F>>> {
    let h = model.encode(x)?;
    let e = (0..h.rows())
        .map(|t| model.frame_score(h.row(t)))
        .collect::<Result<Vec<_>>>()?;
    (0..h.rows())
        .map(|t| {
            if t + 1 < window {
                return Ok(None);
            }
            let lo = t + 1 - window;
            model.score_window((lo..=t).map(|i| h.row(i)), &e[lo..=t]).map(Some)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refractory_counting() {
        let ev = detect((0..300).map(|t| (t, 0.9)), 0.5, 100, 0.01).unwrap();
        assert_eq!(ev.iter().map(|e| e.frame).collect::<Vec<_>>(), vec![0, 100, 200]);
        assert!((ev[1].time_s - 1.0).abs() < 1e-12);

        assert!(detect((0..50).map(|t| (t, 0.4)), 0.5, 100, 0.01).unwrap().is_empty());

        let spike = detect((0..50).map(|t| (t, if t == 17 { 0.6 } else { 0.1 })), 0.5, 100, 0.01).unwrap();
        assert_eq!(spike.len(), 1);
        assert_eq!(spike[0].frame, 17);

        assert!(detect(std::iter::empty(), 1.0, 100, 0.01).is_err());
    }

    #[test]
    fn threshold_is_inclusive() {
        assert_eq!(detect([(0, 0.5)], 0.5, 10, 0.01).unwrap().len(), 1);
    }
}
