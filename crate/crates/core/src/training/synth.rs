//! Synthetic keyword corpus. The keyword is a fixed sequence of four voiced
//! syllables, each a harmonic tone shaped by two formants. Negatives contain
//! random syllables and near misses built from keyword syllables in the
//! wrong order or incomplete.

use std::f64::consts::TAU;
use std::path::Path;

use rayon::prelude::*;

use super::dataset::{Dataset, Example};
use super::manifest::{Label, Manifest, ManifestEntry, SYLLABLES};
use crate::error::{KwsError, Result};
use crate::features::{write_wav, AudioClip, FeatureExtractor};
use crate::numerics::Rng;

/// `(f0, F1, F2)` in Hz for each keyword syllable.
pub const KEYWORD: [(f64, f64, f64); SYLLABLES] = [
    (180.0, 700.0, 1200.0),
    (230.0, 300.0, 2300.0),
    (150.0, 500.0, 900.0),
    (250.0, 420.0, 1900.0),
];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub positives: usize,
    pub negatives: usize,
    pub positive_secs: f64,
    pub negative_secs: f64,
    pub sample_rate: u32,
    /// Share of negatives that are near misses.
    pub confusable_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            positives: 200,
            negatives: 200,
            positive_secs: 3.0,
            negative_secs: 15.0,
            sample_rate: 16000,
            confusable_fraction: 0.3,
        }
    }
}

impl SynthConfig {
    pub fn total_hours(&self) -> f64 {
        (self.positives as f64 * self.positive_secs + self.negatives as f64 * self.negative_secs) / 3600.0
    }
}

struct Syllable {
    f0: f64,
    f1: f64,
    f2: f64,
    dur: f64,
}

/// Adds one syllable at `start` seconds.
fn render(buf: &mut [f32], sr: f64, start: f64, s: &Syllable, gain: f64) {
    let n0 = (start * sr) as usize;
    let n = (s.dur * sr) as usize;
    let harmonics = ((4000.0 / s.f0) as usize).max(1);
    let amps: Vec<f64> = (1..=harmonics)
        .map(|k| {
            let f = k as f64 * s.f0;
            let g = |c: f64, bw: f64| (-((f - c) / bw).powi(2)).exp();
            g(s.f1, 120.0) + 0.7 * g(s.f2, 180.0) + 0.05
        })
        .collect();
    let norm: f64 = amps.iter().sum();
    for i in 0..n.min(buf.len().saturating_sub(n0)) {
        let t = i as f64 / sr;
        let env = (std::f64::consts::PI * i as f64 / n as f64).sin().powf(0.6);
        let mut v = 0.0;
        for (k, a) in amps.iter().enumerate() {
            v += a * (TAU * (k + 1) as f64 * s.f0 * t).sin();
        }
        buf[n0 + i] += (gain * env * v / norm) as f32;
    }
}

fn jitter(rng: &mut Rng, x: f64, rel: f64) -> f64 {
    x * rng.uniform(1.0 - rel, 1.0 + rel)
}

fn keyword_syllable(rng: &mut Rng, k: usize, speaker: f64) -> Syllable {
    let (f0, f1, f2) = KEYWORD[k];
    Syllable {
        f0: jitter(rng, f0 * speaker, 0.05),
        f1: jitter(rng, f1, 0.05),
        f2: jitter(rng, f2, 0.05),
        dur: rng.uniform(0.16, 0.24),
    }
}

fn random_syllable(rng: &mut Rng) -> Syllable {
    Syllable {
        f0: rng.uniform(110.0, 300.0),
        f1: rng.uniform(250.0, 900.0),
        f2: rng.uniform(800.0, 2600.0),
        dur: rng.uniform(0.12, 0.28),
    }
}

fn noise(rng: &mut Rng, n: usize) -> Vec<f32> {
    let level = rng.uniform(0.002, 0.015);
    (0..n).map(|_| (level * rng.normal()) as f32).collect()
}

/// Renders a sequence of syllables from `start`; returns each syllable's
/// `[on, off)` in seconds.
fn render_word(buf: &mut [f32], sr: f64, start: f64, word: &[Syllable], gain: f64, rng: &mut Rng) -> Vec<(f64, f64)> {
    let mut t = start;
    let mut out = Vec::with_capacity(word.len());
    for s in word {
        render(buf, sr, t, s, gain);
        out.push((t, t + s.dur));
        t += s.dur + rng.uniform(0.02, 0.06);
    }
    out
}

fn word_len(word: &[Syllable]) -> f64 {
    word.iter().map(|s| s.dur + 0.06).sum()
}

/// Distractor words in `[from, to)` seconds.
fn babble(buf: &mut [f32], sr: f64, from: f64, to: f64, rng: &mut Rng) {
    let mut t = from + rng.uniform(0.05, 0.5);
    loop {
        let word: Vec<Syllable> = (0..rng.range_inclusive(1, 3)).map(|_| random_syllable(rng)).collect();
        if t + word_len(&word) > to {
            break;
        }
        let gain = rng.uniform(0.1, 0.4);
        render_word(buf, sr, t, &word, gain, rng);
        t += word_len(&word) + rng.uniform(0.15, 0.8);
    }
}

/// One keyword clip with its span and per-syllable alignment in seconds.
pub fn positive_clip(cfg: &SynthConfig, rng: &mut Rng) -> Result<(AudioClip, (f64, f64), [(f64, f64); SYLLABLES])> {
    let sr = cfg.sample_rate as f64;
    let n = (cfg.positive_secs * sr) as usize;
    let mut buf = noise(rng, n);
    let speaker = rng.uniform(0.85, 1.15);
    let word: Vec<Syllable> = (0..SYLLABLES).map(|k| keyword_syllable(rng, k, speaker)).collect();
    let len = word_len(&word);
    let slack = cfg.positive_secs - len - 0.2;
    if slack < 0.0 {
        return Err(KwsError::Config(format!(
            "positive clips of {} s cannot hold a {len:.2} s keyword",
            cfg.positive_secs
        )));
    }
    let start = 0.1 + rng.uniform(0.0, slack);
    if start > 0.8 && rng.uniform(0.0, 1.0) < 0.5 {
        babble(&mut buf, sr, 0.0, start - 0.15, rng);
    }
    let gain = rng.uniform(0.15, 0.4);
    let parts = render_word(&mut buf, sr, start, &word, gain, rng);
    let mut al = [(0.0, 0.0); SYLLABLES];
    al.copy_from_slice(&parts);
    let span = (al[0].0, al[SYLLABLES - 1].1);
    Ok((AudioClip::new(buf, cfg.sample_rate)?, span, al))
}

/// Keyword syllables out of order, or the keyword with one syllable dropped.
fn near_miss_order(rng: &mut Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..SYLLABLES).collect();
    if rng.uniform(0.0, 1.0) < 0.5 {
        while order.iter().enumerate().all(|(i, &k)| i == k) {
            rng.shuffle(&mut order);
        }
    } else {
        order.remove(rng.below(SYLLABLES));
    }
    order
}

/// Whether the end of `prev` and the start of `next` spell the keyword in order.
fn completes_keyword(prev: &[usize], next: &[usize]) -> bool {
    let joined: Vec<usize> = prev.iter().chain(next).copied().collect();
    joined
        .windows(SYLLABLES)
        .enumerate()
        .any(|(i, w)| i < prev.len() && i + SYLLABLES > prev.len() && w.iter().enumerate().all(|(j, &k)| j == k))
}

/// One negative clip; near misses reuse keyword syllables out of order or
/// drop some of them.
pub fn negative_clip(cfg: &SynthConfig, rng: &mut Rng, confusable: bool) -> Result<AudioClip> {
    let sr = cfg.sample_rate as f64;
    let n = (cfg.negative_secs * sr) as usize;
    let mut buf = noise(rng, n);
    if confusable {
        let mut t = rng.uniform(0.1, 1.0);
        let speaker = rng.uniform(0.85, 1.15);
        let mut prev: Vec<usize> = Vec::new();
        while t + 1.2 < cfg.negative_secs {
            let order = loop {
                let o = near_miss_order(rng);
                if !completes_keyword(&prev, &o) {
                    break o;
                }
            };
            let word: Vec<Syllable> = order.iter().map(|&k| keyword_syllable(rng, k, speaker)).collect();
            let gain = rng.uniform(0.15, 0.4);
            render_word(&mut buf, sr, t, &word, gain, rng);
            prev = order;
            t += word_len(&word) + rng.uniform(0.3, 1.5);
        }
    } else {
        babble(&mut buf, sr, 0.0, cfg.negative_secs, rng);
    }
    AudioClip::new(buf, cfg.sample_rate)
}

/// Generates the corpus in memory. Entry paths are `pos_NNNN.wav` and
/// `neg_NNNN.wav`, relative to wherever [`write_corpus`] puts them.
pub fn synthesize(cfg: &SynthConfig) -> Result<Vec<(ManifestEntry, AudioClip)>> {
    let root = Rng::new(cfg.seed);
    let n_conf = (cfg.negatives as f64 * cfg.confusable_fraction).round() as usize;
    (0..cfg.positives + cfg.negatives)
        .into_par_iter()
        .map(|i| {
            let mut rng = root.derive(i as u64);
            if i < cfg.positives {
                let (clip, span, al) = positive_clip(cfg, &mut rng)?;
                let mut e = ManifestEntry::new(format!("pos_{i:04}.wav"), Label::Positive).with_span(span.0, span.1);
                e.alignment = Some(al);
                Ok((e, clip))
            } else {
                let j = i - cfg.positives;
                let clip = negative_clip(cfg, &mut rng, j < n_conf)?;
                Ok((ManifestEntry::new(format!("neg_{j:04}.wav"), Label::Negative), clip))
            }
        })
        .collect()
}

/// Featurizes a synthesized corpus without touching the file system.
pub fn featurize(items: &[(ManifestEntry, AudioClip)], fx: &FeatureExtractor) -> Result<Dataset> {
    let examples = items
        .par_iter()
        .map(|(e, clip)| Example::from_features(e, fx.extract(clip)?, clip.duration_secs()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(examples))
}

/// Writes WAV files plus `manifest.tsv` into `dir` and returns the manifest
/// with absolute paths.
pub fn write_corpus(items: &[(ManifestEntry, AudioClip)], dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| KwsError::io(dir, e))?;
    let mut rel = Manifest::default();
    for (e, clip) in items {
        write_wav(dir.join(&e.path), clip)?;
        rel.entries.push(e.clone());
    }
    rel.write(dir.join("manifest.tsv"))?;
    Manifest::load(dir.join("manifest.tsv"))
}
