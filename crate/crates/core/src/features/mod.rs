//! Audio front end: WAV input, 25 ms / 10 ms framing, Mel filterbank energies
//! and PCEN.

mod frames;
mod mel;
mod pcen;
mod wav;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use frames::{frame_signal, hann, FrameSpec};
pub use mel::{hz_to_mel, mel_energies, mel_to_hz, MelFilterbank};
pub use pcen::{pcen, PcenConfig, PcenState};
pub use wav::{decode_wav, encode_wav_pcm16, read_wav, write_wav, AudioClip};

use crate::error::{KwsError, Result};
use crate::numerics::Tensor;

pub const NUM_MELS: usize = 40;
pub const FRAME_HOP_S: f64 = 0.010;
pub const FRAME_LEN_S: f64 = 0.025;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontendConfig {
    pub sample_rate: u32,
    pub frame_len_s: f64,
    pub frame_hop_s: f64,
    pub n_fft: usize,
    pub n_mels: usize,
    pub fmin_hz: f64,
    /// Upper filter edge; `None` means Nyquist.
    pub fmax_hz: Option<f64>,
    pub pcen: PcenConfig,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16000,
            frame_len_s: FRAME_LEN_S,
            frame_hop_s: FRAME_HOP_S,
            n_fft: 512,
            n_mels: NUM_MELS,
            fmin_hz: 20.0,
            fmax_hz: None,
            pcen: PcenConfig::default(),
        }
    }
}

/// `T × channels` PCEN Mel features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    frames: Tensor<f32>,
    pub frame_hop: f64,
    pub frame_len: f64,
}

impl FeatureMatrix {
    pub fn new(frames: Tensor<f32>) -> Result<Self> {
        if frames.shape().len() != 2 {
            return Err(KwsError::Shape(format!(
                "feature matrix must be 2-D, got {:?}",
                frames.shape()
            )));
        }
        Ok(Self {
            frames,
            frame_hop: FRAME_HOP_S,
            frame_len: FRAME_LEN_S,
        })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != c) {
            return Err(KwsError::Shape("ragged feature rows".into()));
        }
        Self::new(Tensor::from_vec(&[rows.len(), c], rows.concat())?)
    }

    pub fn num_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn channels(&self) -> usize {
        self.frames.row_len()
    }

    pub fn row(&self, t: usize) -> &[f32] {
        self.frames.row(t)
    }

    pub fn tensor(&self) -> &Tensor<f32> {
        &self.frames
    }

    pub fn into_tensor(self) -> Tensor<f32> {
        self.frames
    }

    pub fn duration_secs(&self) -> f64 {
        self.num_frames() as f64 * self.frame_hop
    }

    /// Frames `[start, start + len)`, zero-padded in front when `start` is negative.
    pub fn window(&self, start: isize, len: usize) -> Result<FeatureMatrix> {
        let c = self.channels();
        let end = start + len as isize;
        if len == 0 || end > self.num_frames() as isize {
            return Err(KwsError::Shape(format!(
                "window [{start}, {end}) outside {} frames",
                self.num_frames()
            )));
        }
        let mut data = vec![0.0f32; len * c];
        for (i, t) in (start..end).enumerate() {
            if t >= 0 {
                data[i * c..(i + 1) * c].copy_from_slice(self.row(t as usize));
            }
        }
        FeatureMatrix::new(Tensor::from_vec(&[len, c], data)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.frames.len());
        out.extend_from_slice(FEATURE_MAGIC);
        out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.num_frames() as u32).to_le_bytes());
        out.extend_from_slice(&(self.channels() as u32).to_le_bytes());
        for v in self.frames.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses the `KWSF` binary layout: magic, version u32, T u32,
    /// channels u32, then `T × channels` little-endian f32 in row-major order.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| KwsError::format("feature file", m);
        if bytes.len() < 16 {
            return Err(bad("shorter than the 16-byte header"));
        }
        if &bytes[..4] != FEATURE_MAGIC {
            return Err(bad("bad magic"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != FEATURE_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let (t, c) = (word(8) as usize, word(12) as usize);
        if t == 0 || c == 0 {
            return Err(bad("empty matrix"));
        }
        let n = t.checked_mul(c).ok_or_else(|| bad("dimension overflow"))?;
        let payload = &bytes[16..];
        if n.checked_mul(4) != Some(payload.len()) {
            return Err(bad(&format!(
                "{t}x{c} matrix needs {} payload bytes, found {}",
                n.saturating_mul(4),
                payload.len()
            )));
        }
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(KwsError::NonFinite("feature file".into()));
        }
        Self::new(Tensor::from_vec(&[t, c], data)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| KwsError::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&std::fs::read(path).map_err(|e| KwsError::io(path, e))?)
    }
}

pub const FEATURE_MAGIC: &[u8; 4] = b"KWSF";
pub const FEATURE_VERSION: u32 = 1;

/// Full pipeline from samples to PCEN Mel features.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    cfg: FrontendConfig,
    frames: FrameSpec,
    bank: MelFilterbank,
}

impl FeatureExtractor {
    pub fn new(cfg: FrontendConfig) -> Result<Self> {
        cfg.pcen.validate()?;
        let frames = FrameSpec::from_secs(cfg.sample_rate, cfg.frame_len_s, cfg.frame_hop_s);
        if frames.win == 0 || frames.hop == 0 || frames.win > cfg.n_fft {
            return Err(KwsError::Config(format!(
                "frame spec {frames:?} incompatible with {}-point FFT",
                cfg.n_fft
            )));
        }
        let fmax = cfg.fmax_hz.unwrap_or(cfg.sample_rate as f64 / 2.0);
        let bank = MelFilterbank::new(cfg.sample_rate, cfg.n_fft, cfg.n_mels, cfg.fmin_hz, fmax)?;
        Ok(Self { cfg, frames, bank })
    }

    pub fn config(&self) -> &FrontendConfig {
        &self.cfg
    }

    pub fn frame_spec(&self) -> FrameSpec {
        self.frames
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<FeatureMatrix> {
        if clip.sample_rate() != self.cfg.sample_rate {
            return Err(KwsError::Audio(format!(
                "sample rate {} Hz does not match the configured {} Hz (resampling is not supported)",
                clip.sample_rate(),
                self.cfg.sample_rate
            )));
        }
        if self.frames.frame_count(clip.samples().len()) == 0 {
            return Err(KwsError::Audio(format!(
                "clip of {} samples is shorter than one {}-sample window",
                clip.samples().len(),
                self.frames.win
            )));
        }
        let mut stream = self.stream()?;
        let rows = stream.push(clip.samples())?;
        let mut fm = FeatureMatrix::from_rows(&rows)?;
        fm.frame_hop = self.cfg.frame_hop_s;
        fm.frame_len = self.cfg.frame_len_s;
        Ok(fm)
    }

    /// Fresh streaming front end with the same configuration.
    pub fn stream(&self) -> Result<FeatureStream> {
        Ok(FeatureStream {
            window: hann(self.frames.win),
            pcen: PcenState::new(self.cfg.pcen)?,
            fx: self.clone(),
            pending: Vec::new(),
            emitted: 0,
        })
    }

    pub fn extract_file(&self, path: impl AsRef<Path>) -> Result<FeatureMatrix> {
        self.extract(&read_wav(path)?)
    }
}

/// Incremental front end. Samples may arrive in arbitrary chunks; the
/// emitted frames are identical to a batch extraction of everything pushed
/// so far, including across file boundaries.
#[derive(Clone, Debug)]
pub struct FeatureStream {
    fx: FeatureExtractor,
    window: Vec<f64>,
    pcen: PcenState,
    pending: Vec<f32>,
    emitted: usize,
}

impl FeatureStream {
    /// Appends samples and returns every frame that became complete.
    pub fn push(&mut self, samples: &[f32]) -> Result<Vec<Vec<f32>>> {
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(KwsError::NonFinite("audio samples".into()));
        }
        self.pending.extend_from_slice(samples);
        let FrameSpec { win, hop } = self.fx.frames;
        let mut out = Vec::new();
        let mut start = 0;
        let mut frame = vec![0.0f64; win];
        while start + win <= self.pending.len() {
            for ((f, &x), &w) in frame
                .iter_mut()
                .zip(&self.pending[start..start + win])
                .zip(&self.window)
            {
                *f = x as f64 * w;
            }
            let e = self.fx.bank.energies(&frame)?;
            let p = self.pcen.step(&e)?;
            out.push(p.into_iter().map(|v| v as f32).collect());
            start += hop;
        }
        self.pending.drain(..start.min(self.pending.len()));
        self.emitted += out.len();
        Ok(out)
    }

    /// Appends a clip after checking its sample rate.
    pub fn push_clip(&mut self, clip: &AudioClip) -> Result<Vec<Vec<f32>>> {
        if clip.sample_rate() != self.fx.cfg.sample_rate {
            return Err(KwsError::Audio(format!(
                "sample rate {} Hz does not match the configured {} Hz",
                clip.sample_rate(),
                self.fx.cfg.sample_rate
            )));
        }
        self.push(clip.samples())
    }

    pub fn sample_rate(&self) -> u32 {
        self.fx.cfg.sample_rate
    }

    pub fn frames_emitted(&self) -> usize {
        self.emitted
    }

    /// Samples buffered towards the next frame.
    pub fn pending_samples(&self) -> usize {
        self.pending.len()
    }
}
