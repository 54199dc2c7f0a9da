use serde::{Deserialize, Serialize};

use crate::error::{KwsError, Result};
use crate::layers::{ConvSpec, Dense, GruCell, LstmCell};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Encoder + attention pooling + 2-way softmax.
    AttentionE2e,
    /// Frame-level syllable/filler posteriors with smoothing and confidence.
    DeepKws,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Dnn,
    Lstm,
    Gru,
    /// Convolution front end followed by a GRU stack.
    Crnn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionKind {
    None,
    Average,
    Soft,
}

/// Declarative architecture description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub encoder: EncoderKind,
    pub layers: usize,
    pub nodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conv: Option<ConvSpec>,
    pub attention: AttentionKind,
    pub input_dim: usize,
    pub num_classes: usize,
    /// Stacked context frames for the DNN baseline.
    pub context_left: usize,
    pub context_right: usize,
    /// Fully-connected ReLU layer appended to GRU stacks.
    pub gru_projection: bool,
    pub projection_dim: usize,
}

pub const PROJECTION_DIM: usize = 64;
pub const DEEP_KWS_CLASSES: usize = 5;

impl ModelConfig {
    /// LSTM or GRU encoder with attention pooling; GRU stacks get the
    /// 64-wide ReLU projection.
    pub fn attention(encoder: EncoderKind, layers: usize, nodes: usize, attention: AttentionKind) -> Self {
        Self {
            kind: ModelKind::AttentionE2e,
            encoder,
            layers,
            nodes,
            conv: (encoder == EncoderKind::Crnn).then(|| ConvSpec::paper(16)),
            attention,
            input_dim: 40,
            num_classes: 2,
            context_left: 0,
            context_right: 0,
            gru_projection: matches!(encoder, EncoderKind::Gru | EncoderKind::Crnn),
            projection_dim: PROJECTION_DIM,
        }
    }

    /// One 20×5 / 1×2 convolution, a GRU stack and soft attention.
    pub fn crnn(channels: usize, layers: usize, nodes: usize) -> Self {
        Self {
            conv: Some(ConvSpec::paper(channels)),
            ..Self::attention(EncoderKind::Crnn, layers, nodes, AttentionKind::Soft)
        }
    }

    /// Deep KWS baseline: DNN 3×64 over a 15+5 context window; LSTM/GRU 2×64.
    pub fn deep_kws(encoder: EncoderKind) -> Self {
        let dnn = encoder == EncoderKind::Dnn;
        Self {
            kind: ModelKind::DeepKws,
            encoder,
            layers: if dnn { 3 } else { 2 },
            nodes: 64,
            conv: None,
            attention: AttentionKind::None,
            input_dim: 40,
            num_classes: DEEP_KWS_CLASSES,
            context_left: if dnn { 15 } else { 0 },
            context_right: if dnn { 5 } else { 0 },
            gru_projection: encoder == EncoderKind::Gru,
            projection_dim: PROJECTION_DIM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(KwsError::Config(m));
        if self.layers == 0 || self.nodes == 0 || self.input_dim == 0 {
            return err(format!(
                "layers, nodes and input_dim must be positive ({}, {}, {})",
                self.layers, self.nodes, self.input_dim
            ));
        }
        match self.kind {
            ModelKind::AttentionE2e => {
                if self.num_classes != 2 {
                    return err(format!("attention model needs 2 classes, got {}", self.num_classes));
                }
                if self.attention == AttentionKind::None {
                    return err("attention model needs average or soft attention".into());
                }
                if self.encoder == EncoderKind::Dnn {
                    return err("attention models use a recurrent encoder (lstm, gru or crnn)".into());
                }
            }
            ModelKind::DeepKws => {
                if self.attention != AttentionKind::None {
                    return err(format!(
                        "{:?} attention is not part of the deep_kws baseline",
                        self.attention
                    ));
                }
                if self.num_classes < 2 {
                    return err("deep_kws needs at least one syllable plus filler".into());
                }
                if self.encoder == EncoderKind::Crnn {
                    return err("the deep_kws baseline has no crnn variant".into());
                }
            }
        }
        match (self.encoder, &self.conv) {
            (EncoderKind::Crnn, None) => return err("crnn encoder needs a conv spec".into()),
            (EncoderKind::Crnn, Some(c)) => c.validate(self.input_dim)?,
            (enc, Some(_)) => {
                return err(format!(
                    "a convolution front end requires the crnn encoder (GRU recurrence), not {enc:?}"
                ))
            }
            _ => {}
        }
        if self.gru_projection {
            if !matches!(self.encoder, EncoderKind::Gru | EncoderKind::Crnn) {
                return err(format!(
                    "the projection layer belongs to GRU stacks, not {:?}",
                    self.encoder
                ));
            }
            if self.projection_dim == 0 {
                return err("projection_dim must be positive".into());
            }
        }
        if self.encoder != EncoderKind::Dnn && (self.context_left > 0 || self.context_right > 0) {
            return err("context stacking applies to the DNN baseline only".into());
        }
        Ok(())
    }

    pub fn is_recurrent(&self) -> bool {
        self.encoder != EncoderKind::Dnn
    }

    pub fn dnn_input_dim(&self) -> usize {
        self.input_dim * (self.context_left + 1 + self.context_right)
    }

    /// Input width of the first recurrent layer.
    pub fn recurrent_input_dim(&self) -> usize {
        match &self.conv {
            Some(c) => c.out_width(self.input_dim),
            None => self.input_dim,
        }
    }

    /// Width of the per-frame encoder output `h_t`.
    pub fn encoder_dim(&self) -> usize {
        if self.gru_projection {
            self.projection_dim
        } else {
            self.nodes
        }
    }

    /// Closed-form parameter count.
    pub fn count_params(&self) -> usize {
        let d = self.encoder_dim();
        let mut n = 0;
        match self.encoder {
            EncoderKind::Dnn => {
                n += Dense::<f32>::param_count(self.dnn_input_dim(), self.nodes);
                n += (self.layers - 1) * Dense::<f32>::param_count(self.nodes, self.nodes);
            }
            enc => {
                if let Some(c) = &self.conv {
                    n += c.param_count();
                }
                let cell = |i, h| match enc {
                    EncoderKind::Lstm => LstmCell::<f32>::param_count(i, h),
                    _ => GruCell::<f32>::param_count(i, h),
                };
                n += cell(self.recurrent_input_dim(), self.nodes);
                n += (self.layers - 1) * cell(self.nodes, self.nodes);
                if self.gru_projection {
                    n += Dense::<f32>::param_count(self.nodes, self.projection_dim);
                }
            }
        }
        if self.attention == AttentionKind::Soft {
            n += d * d + 2 * d;
        }
        n + Dense::<f32>::param_count(d, self.num_classes)
    }

    /// Short label such as `gru/2/64/soft` or `crnn16/1/64/soft`.
    pub fn label(&self) -> String {
        let enc = match (self.encoder, &self.conv) {
            (EncoderKind::Crnn, Some(c)) => format!("crnn{}", c.out_channels),
            (e, _) => format!("{e:?}").to_lowercase(),
        };
        let tail = match self.kind {
            ModelKind::AttentionE2e => format!("{:?}", self.attention).to_lowercase(),
            ModelKind::DeepKws => "deep_kws".into(),
        };
        format!("{enc}/{}/{}/{tail}", self.layers, self.nodes)
    }

    pub fn to_record(&self) -> String {
        toml::to_string(self).expect("model config serializes")
    }

    pub fn from_record(s: &str) -> Result<Self> {
        let cfg: ModelConfig = toml::from_str(s).map_err(|e| KwsError::format("model config record", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `count_params` as a free function.
pub fn count_params(cfg: &ModelConfig) -> usize {
    cfg.count_params()
}
