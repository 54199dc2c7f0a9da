//! Flat, versioned run configuration shared by every command.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{KwsError, Result};
use crate::features::{FrontendConfig, PcenConfig};
use crate::layers::ConvSpec;
use crate::models::{AttentionKind, EncoderKind, ModelConfig, ModelKind};
use crate::streaming::StreamConfig;
use crate::training::TrainConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub version: u32,

    pub model_kind: ModelKind,
    pub encoder: EncoderKind,
    pub layers: usize,
    pub nodes: usize,
    pub attention: AttentionKind,
    pub conv_channels: usize,
    pub context_left: usize,
    pub context_right: usize,

    pub sample_rate: u32,
    pub frame_len_s: f64,
    pub frame_hop_s: f64,
    pub n_fft: usize,
    pub n_mels: usize,
    pub fmin_hz: f64,
    pub fmax_hz: Option<f64>,
    pub pcen_s: f64,
    pub pcen_alpha: f64,
    pub pcen_delta: f64,
    pub pcen_r: f64,
    pub pcen_eps: f64,

    pub window_frames: usize,
    pub batch_size: usize,
    pub positive_fraction: f64,
    pub lr: f64,
    pub lr_final: f64,
    pub patience: usize,
    pub clip_norm: f64,
    pub l2: f64,
    pub seed: u64,
    pub max_steps: usize,
    pub eval_every: usize,
    pub target_train_accuracy: Option<f64>,

    pub stream_window: usize,
    pub threshold: f64,
    pub refractory: usize,
    pub target_fa: f64,
}

/// One line of documentation per key, in dump order.
pub const KEY_DOCS: &[(&str, &str)] = &[
    ("version", "schema version"),
    ("model_kind", "attention_e2e | deep_kws"),
    ("encoder", "dnn | lstm | gru | crnn"),
    ("layers", "recurrent (or DNN) layers"),
    ("nodes", "units per layer"),
    ("attention", "soft | average (attention_e2e); ignored by deep_kws"),
    ("conv_channels", "CRNN convolution channels"),
    ("context_left", "DNN baseline left context frames"),
    ("context_right", "DNN baseline right context frames"),
    ("sample_rate", "Hz; input audio must match"),
    ("frame_len_s", "analysis window length"),
    ("frame_hop_s", "frame shift"),
    ("n_fft", "FFT size"),
    ("n_mels", "Mel channels (model input width)"),
    ("fmin_hz", "lowest filter edge"),
    ("fmax_hz", "highest filter edge; unset means Nyquist"),
    ("pcen_s", "PCEN smoother coefficient"),
    ("pcen_alpha", "PCEN gain exponent"),
    ("pcen_delta", "PCEN bias"),
    ("pcen_r", "PCEN root"),
    ("pcen_eps", "PCEN floor"),
    ("window_frames", "training crop length"),
    ("batch_size", "examples per step"),
    ("positive_fraction", "share of positives in every batch"),
    ("lr", "initial Adam learning rate"),
    ("lr_final", "learning rate after the plateau drop"),
    ("patience", "evaluations without validation improvement before the drop"),
    ("clip_norm", "global gradient norm limit"),
    ("l2", "L2 weight decay added to gradients"),
    ("seed", "controls all randomness"),
    ("max_steps", "optimizer steps"),
    ("eval_every", "validation cadence in steps"),
    (
        "target_train_accuracy",
        "stop early at this training accuracy; unset disables",
    ),
    ("stream_window", "runtime attention window in frames"),
    ("threshold", "detection threshold in (0, 1)"),
    (
        "refractory",
        "frames after a detection during which triggers are suppressed",
    ),
    ("target_fa", "false alarms per hour for the reported FRR"),
];

impl Default for RunConfig {
    fn default() -> Self {
        let fe = FrontendConfig::default();
        let tc = TrainConfig::default();
        let sc = StreamConfig::default();
        Self {
            version: CONFIG_VERSION,
            model_kind: ModelKind::AttentionE2e,
            encoder: EncoderKind::Gru,
            layers: 2,
            nodes: 64,
            attention: AttentionKind::Soft,
            conv_channels: 16,
            context_left: 15,
            context_right: 5,
            sample_rate: fe.sample_rate,
            frame_len_s: fe.frame_len_s,
            frame_hop_s: fe.frame_hop_s,
            n_fft: fe.n_fft,
            n_mels: fe.n_mels,
            fmin_hz: fe.fmin_hz,
            fmax_hz: fe.fmax_hz,
            pcen_s: fe.pcen.s,
            pcen_alpha: fe.pcen.alpha,
            pcen_delta: fe.pcen.delta,
            pcen_r: fe.pcen.r,
            pcen_eps: fe.pcen.eps,
            window_frames: tc.window_frames,
            batch_size: tc.batch_size,
            positive_fraction: tc.positive_fraction,
            lr: tc.lr,
            lr_final: tc.lr_final,
            patience: tc.patience,
            clip_norm: tc.clip_norm,
            l2: tc.l2,
            seed: tc.seed,
            max_steps: tc.max_steps,
            eval_every: tc.eval_every,
            target_train_accuracy: tc.target_train_accuracy,
            stream_window: sc.window,
            threshold: sc.threshold,
            refractory: sc.refractory,
            target_fa: 1.0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| KwsError::Config(format!("config: {e}")))?;
        if cfg.version != CONFIG_VERSION {
            return Err(KwsError::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| KwsError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| KwsError::Config(format!("{}: {e}", path.display())))
    }

    /// Overrides one key from its TOML literal, or a bare word for strings.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut table = toml::Table::try_from(&*self).map_err(|e| KwsError::Config(e.to_string()))?;
        if !KEY_DOCS.iter().any(|(k, _)| *k == key) {
            return Err(KwsError::Config(format!("unknown config key {key:?}")));
        }
        let parsed: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {value}")) {
            Ok(mut t) => t.remove("v").expect("key present"),
            Err(_) => toml::Value::String(value.to_string()),
        };
        table.insert(key.to_string(), parsed);
        *self = table
            .try_into()
            .map_err(|e: toml::de::Error| KwsError::Config(format!("{key} = {value}: {}", e.message())))?;
        Ok(())
    }

    /// Every key with its current value and a comment, as loadable TOML.
    pub fn dump(&self) -> String {
        let table = toml::Table::try_from(self).expect("config serializes");
        let mut out = String::from("# attkws run configuration\n");
        for (key, doc) in KEY_DOCS {
            out.push_str(&format!("\n# {doc}\n"));
            match table.get(*key) {
                Some(v) => out.push_str(&format!("{key} = {v}\n")),
                None => out.push_str(&format!("# {key} =\n")),
            }
        }
        out
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let mut m = match self.model_kind {
            ModelKind::DeepKws => ModelConfig::deep_kws(self.encoder),
            ModelKind::AttentionE2e if self.encoder == EncoderKind::Crnn => ModelConfig {
                attention: self.attention,
                ..ModelConfig::crnn(self.conv_channels, self.layers, self.nodes)
            },
            ModelKind::AttentionE2e => ModelConfig::attention(self.encoder, self.layers, self.nodes, self.attention),
        };
        m.layers = self.layers;
        m.nodes = self.nodes;
        m.input_dim = self.n_mels;
        if self.encoder == EncoderKind::Dnn {
            m.context_left = self.context_left;
            m.context_right = self.context_right;
        }
        if let Some(c) = &mut m.conv {
            *c = ConvSpec::paper(self.conv_channels);
        }
        m.validate()?;
        Ok(m)
    }

    pub fn frontend_config(&self) -> FrontendConfig {
        FrontendConfig {
            sample_rate: self.sample_rate,
            frame_len_s: self.frame_len_s,
            frame_hop_s: self.frame_hop_s,
            n_fft: self.n_fft,
            n_mels: self.n_mels,
            fmin_hz: self.fmin_hz,
            fmax_hz: self.fmax_hz,
            pcen: PcenConfig {
                s: self.pcen_s,
                alpha: self.pcen_alpha,
                delta: self.pcen_delta,
                r: self.pcen_r,
                eps: self.pcen_eps,
            },
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            window_frames: self.window_frames,
            batch_size: self.batch_size,
            positive_fraction: self.positive_fraction,
            lr: self.lr,
            lr_final: self.lr_final,
            patience: self.patience,
            clip_norm: self.clip_norm,
            l2: self.l2,
            seed: self.seed,
            max_steps: self.max_steps,
            eval_every: self.eval_every,
            target_train_accuracy: self.target_train_accuracy,
        }
    }

    pub fn stream_config(&self) -> StreamConfig {
        StreamConfig {
            window: self.stream_window,
            threshold: self.threshold,
            refractory: self.refractory,
        }
    }
}
