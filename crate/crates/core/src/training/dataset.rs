use rayon::prelude::*;

use super::manifest::{Label, Manifest, ManifestEntry, SYLLABLES};
use crate::error::{KwsError, Result};
use crate::features::{FeatureExtractor, FeatureMatrix};
use crate::models::uniform_alignment;
use crate::numerics::{Rng, Tensor};

/// A featurized manifest entry. Spans and alignments are frame ranges
/// `[start, end)`.
#[derive(Clone, Debug)]
pub struct Example {
    pub id: String,
    pub label: Label,
    pub features: FeatureMatrix,
    pub span: Option<(usize, usize)>,
    pub alignment: Option<[(usize, usize); SYLLABLES]>,
    /// Audio duration in seconds.
    pub duration_s: f64,
}

impl Example {
    pub fn num_frames(&self) -> usize {
        self.features.num_frames()
    }

    /// Keyword frames: the annotated span, or the whole clip for a positive
    /// without one.
    pub fn keyword_frames(&self) -> Option<(usize, usize)> {
        match self.label {
            Label::Negative => None,
            Label::Positive => Some(self.span.unwrap_or((0, self.num_frames()))),
        }
    }
}

/// Frame index containing time `s`: `floor(s / hop)`. Times are snapped to
/// the microsecond first so decimal inputs like 0.3 s land on frame 30.
pub fn secs_to_frame_floor(s: f64, hop: f64) -> usize {
    (snap(s / hop)).floor().max(0.0) as usize
}

/// Exclusive end frame for time `s`: `ceil(s / hop)`.
pub fn secs_to_frame_ceil(s: f64, hop: f64) -> usize {
    (snap(s / hop)).ceil().max(0.0) as usize
}

fn snap(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn frame_range(r: (f64, f64), hop: f64, frames: usize) -> (usize, usize) {
    let s = secs_to_frame_floor(r.0, hop).min(frames);
    let e = secs_to_frame_ceil(r.1, hop).min(frames).max(s);
    (s, e)
}

impl Example {
    pub fn from_entry(entry: &ManifestEntry, fx: &FeatureExtractor) -> Result<Self> {
        let clip = crate::features::read_wav(&entry.path)?;
        let duration_s = clip.duration_secs();
        let features = fx.extract(&clip)?;
        Self::from_features(entry, features, duration_s)
    }

    pub fn from_features(entry: &ManifestEntry, features: FeatureMatrix, duration_s: f64) -> Result<Self> {
        entry.validate().map_err(KwsError::Data)?;
        let (hop, t) = (features.frame_hop, features.num_frames());
        let span = entry.span.map(|r| frame_range(r, hop, t));
        if span.is_some_and(|(s, e)| s >= e) {
            return Err(KwsError::Data(format!(
                "{}: keyword span lies outside the {t}-frame clip",
                entry.path.display()
            )));
        }
        let alignment = entry.alignment.map(|al| {
            let mut out = [(0, 0); SYLLABLES];
            for (o, r) in out.iter_mut().zip(al) {
                *o = frame_range(r, hop, t);
            }
            out
        });
        Ok(Self {
            id: entry.path.display().to_string(),
            label: entry.label,
            features,
            span,
            alignment,
            duration_s,
        })
    }

    /// Per-frame 5-way labels: 0 filler, 1..=4 syllables. Uses the alignment
    /// when present and an even split of the span otherwise.
    pub fn frame_labels(&self) -> Vec<usize> {
        let t = self.num_frames();
        match (self.keyword_frames(), &self.alignment) {
            (None, _) => vec![0; t],
            (Some(_), Some(al)) => {
                let mut labels = vec![0; t];
                for (k, &(s, e)) in al.iter().enumerate() {
                    labels[s..e].iter_mut().for_each(|l| *l = k + 1);
                }
                labels
            }
            (Some((s, e)), None) => uniform_alignment(t, s, e, SYLLABLES),
        }
    }
}

/// A training crop.
#[derive(Clone, Debug)]
pub struct Sample {
    /// `window × channels`.
    pub x: Tensor<f32>,
    pub label: Label,
    pub frame_labels: Vec<usize>,
    /// First frame of the crop in clip coordinates; negative when padded.
    pub offset: isize,
    /// The clip was shorter than the window and got leading zero frames.
    pub padded: bool,
}

/// Inclusive range of valid crop offsets, or an error when the keyword
/// cannot fit.
pub fn crop_range(frames: usize, window: usize, keyword: Option<(usize, usize)>) -> Result<(isize, isize)> {
    if window == 0 {
        return Err(KwsError::Config("window must be at least one frame".into()));
    }
    if frames <= window {
        let off = frames as isize - window as isize;
        return Ok((off, off));
    }
    let last = (frames - window) as isize;
    match keyword {
        None => Ok((0, last)),
        Some((s, e)) => {
            if e - s > window {
                return Err(KwsError::Data(format!(
                    "keyword span of {} frames exceeds the {window}-frame window",
                    e - s
                )));
            }
            let lo = e.saturating_sub(window) as isize;
            let hi = (s as isize).min(last);
            Ok((lo, hi))
        }
    }
}

/// Draws a random `window`-frame crop. Positives keep their whole keyword
/// inside the window.
pub fn sample_example(ex: &Example, window: usize, rng: &mut Rng) -> Result<Sample> {
    let (lo, hi) = crop_range(ex.num_frames(), window, ex.keyword_frames())?;
    let offset = if lo == hi {
        lo
    } else {
        lo + rng.range_inclusive(0, (hi - lo) as usize) as isize
    };
    crop(ex, window, offset)
}

/// The crop at a given offset.
pub fn crop(ex: &Example, window: usize, offset: isize) -> Result<Sample> {
    let x = ex.features.window(offset, window)?.into_tensor();
    let all = ex.frame_labels();
    let frame_labels = (offset..offset + window as isize)
        .map(|t| if t < 0 { 0 } else { all[t as usize] })
        .collect();
    Ok(Sample {
        x,
        label: ex.label,
        frame_labels,
        offset,
        padded: ex.num_frames() < window,
    })
}

/// Featurized examples plus bookkeeping from the load.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn new(examples: Vec<Example>) -> Self {
        Self { examples }
    }

    /// Featurizes every entry in parallel; results keep manifest order.
    pub fn from_manifest(m: &Manifest, fx: &FeatureExtractor) -> Result<Self> {
        let examples = m
            .entries
            .par_iter()
            .map(|e| Example::from_entry(e, fx))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { examples })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn indices(&self, label: Label) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.examples[i].label == label).collect()
    }

    /// Total duration of negative audio in hours.
    pub fn negative_hours(&self) -> f64 {
        self.examples
            .iter()
            .filter(|e| e.label == Label::Negative)
            .map(|e| e.duration_s)
            .sum::<f64>()
            / 3600.0
    }
}

/// Examples usable for training at a given window, with the ones set aside.
#[derive(Clone, Debug, Default)]
pub struct TrainingPool {
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    /// Positives whose keyword is longer than the window.
    pub skipped_long: Vec<usize>,
    /// Clips shorter than the window (kept, zero-padded in front).
    pub padded: Vec<usize>,
}

impl TrainingPool {
    pub fn new(ds: &Dataset, window: usize) -> Result<Self> {
        let mut pool = TrainingPool::default();
        for (i, ex) in ds.examples.iter().enumerate() {
            if crop_range(ex.num_frames(), window, ex.keyword_frames()).is_err() {
                log::warn!("{}: keyword longer than {window} frames, skipped", ex.id);
                pool.skipped_long.push(i);
                continue;
            }
            if ex.num_frames() < window {
                pool.padded.push(i);
            }
            match ex.label {
                Label::Positive => pool.positives.push(i),
                Label::Negative => pool.negatives.push(i),
            }
        }
        if !pool.padded.is_empty() {
            log::warn!(
                "{} clips shorter than {window} frames are zero-padded",
                pool.padded.len()
            );
        }
        Ok(pool)
    }
}
