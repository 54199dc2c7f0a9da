use std::collections::VecDeque;

use super::attention::{pool, uniform_weights, SoftAttention, SoftAttentionTrace};
use super::config::{AttentionKind, EncoderKind, ModelConfig, ModelKind};
use crate::error::{KwsError, Result};
use crate::layers::{
    relu_backward_in_place, relu_in_place, softmax_xent, Conv2d, Dense, GruCell, GruTrace, LstmCell, LstmTrace,
};
use crate::numerics::{softmax, Real, Rng, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub enum Recurrent<F = f32> {
    Lstm(LstmCell<F>),
    Gru(GruCell<F>),
}

impl<F: Real> Recurrent<F> {
    fn hidden_dim(&self) -> usize {
        match self {
            Recurrent::Lstm(c) => c.hidden_dim(),
            Recurrent::Gru(c) => c.hidden_dim(),
        }
    }
}

/// Parameter set for any configuration. Tensors are visited in a fixed
/// order (see [`Model::named_params`]) which is also the checkpoint order.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<F = f32> {
    cfg: ModelConfig,
    pub conv: Option<Conv2d<F>>,
    pub dnn: Vec<Dense<F>>,
    pub rnn: Vec<Recurrent<F>>,
    pub proj: Option<Dense<F>>,
    pub att: Option<SoftAttention<F>>,
    pub out: Dense<F>,
}

enum CellTrace<F> {
    Lstm(LstmTrace<F>),
    Gru(GruTrace<F>),
}

/// Activations from [`Model::encode_traced`].
pub struct EncoderTrace<F> {
    input: Tensor<F>,
    conv_out: Option<Tensor<F>>,
    /// Per DNN layer: input and post-ReLU output.
    dnn_io: Vec<(Tensor<F>, Tensor<F>)>,
    cells: Vec<Vec<CellTrace<F>>>,
    /// Projection input and post-ReLU output.
    proj_io: Option<(Tensor<F>, Tensor<F>)>,
}

/// Recurrent state for frame-by-frame encoding.
#[derive(Clone, Debug)]
pub struct EncoderState<F = f32> {
    conv_hist: VecDeque<Vec<F>>,
    h: Vec<Vec<F>>,
    c: Vec<Vec<F>>,
    cell_evals: u64,
}

impl<F: Real> EncoderState<F> {
    /// Number of recurrent cell evaluations so far (one per layer per frame).
    pub fn cell_evals(&self) -> u64 {
        self.cell_evals
    }
}

/// Stacks `left + 1 + right` frames around each frame, replicating the
/// first and last frames at the edges.
pub fn context_stack<F: Real>(x: &Tensor<F>, left: usize, right: usize) -> Result<Tensor<F>> {
    let t_len = x.rows();
    let w = x.row_len();
    let mut data = Vec::with_capacity(t_len * w * (left + right + 1));
    for t in 0..t_len {
        for k in -(left as isize)..=(right as isize) {
            let src = (t as isize + k).clamp(0, t_len as isize - 1) as usize;
            data.extend_from_slice(x.row(src));
        }
    }
    Tensor::from_vec(&[t_len, w * (left + right + 1)], data)
}

fn rows_to_tensor<F: Real>(rows: Vec<Vec<F>>) -> Result<Tensor<F>> {
    let w = rows.first().map_or(0, Vec::len);
    let t = rows.len();
    Tensor::from_vec(&[t, w], rows.into_iter().flatten().collect())
}

fn dense_rows<F: Real>(layer: &Dense<F>, x: &Tensor<F>, relu: bool) -> Result<Tensor<F>> {
    let rows = (0..x.rows())
        .map(|t| {
            let mut y = layer.forward(x.row(t))?;
            if relu {
                relu_in_place(&mut y);
            }
            Ok(y)
        })
        .collect::<Result<Vec<_>>>()?;
    rows_to_tensor(rows)
}

/// Backward through a per-frame ReLU dense layer given its input and output.
fn dense_relu_backward<F: Real>(
    layer: &Dense<F>,
    io: &(Tensor<F>, Tensor<F>),
    mut dy: Tensor<F>,
    grad: &mut Dense<F>,
) -> Tensor<F> {
    let (x, y) = io;
    let mut dx = Tensor::zeros(x.shape());
    for t in 0..x.rows() {
        relu_backward_in_place(y.row(t), dy.row_mut(t));
        let d = layer.backward(x.row(t), dy.row(t), grad);
        dx.row_mut(t).copy_from_slice(&d);
    }
    dx
}

impl<F: Real> Model<F> {
    /// Normalized-initialized weights and zero biases.
    pub fn new(cfg: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        Self::assemble(cfg, Some(rng))
    }

    /// All-zero parameters with the layout of `cfg`.
    pub fn zeros(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        Self::assemble(cfg, None)
    }

    fn assemble(cfg: &ModelConfig, mut rng: Option<&mut Rng>) -> Result<Self> {
        macro_rules! init {
            ($rand:expr, $zero:expr) => {
                match rng.as_deref_mut() {
                    Some(rng) => {
                        let f = $rand;
                        f(rng)?
                    }
                    None => $zero,
                }
            };
        }
        let conv = match &cfg.conv {
            Some(spec) => Some(init!(
                |r: &mut Rng| Conv2d::new(*spec, cfg.input_dim, r),
                Conv2d::zeros(*spec, cfg.input_dim)
            )),
            None => None,
        };
        let mut dnn = Vec::new();
        let mut rnn = Vec::new();
        let (n, layers) = (cfg.nodes, cfg.layers);
        if cfg.encoder == EncoderKind::Dnn {
            for l in 0..layers {
                let i = if l == 0 { cfg.dnn_input_dim() } else { n };
                dnn.push(init!(|r: &mut Rng| Dense::new(i, n, r), Dense::zeros(i, n)));
            }
        } else {
            for l in 0..layers {
                let i = if l == 0 { cfg.recurrent_input_dim() } else { n };
                rnn.push(if cfg.encoder == EncoderKind::Lstm {
                    Recurrent::Lstm(init!(|r: &mut Rng| LstmCell::new(i, n, r), LstmCell::zeros(i, n)))
                } else {
                    Recurrent::Gru(init!(|r: &mut Rng| GruCell::new(i, n, r), GruCell::zeros(i, n)))
                });
            }
        }
        let p = cfg.projection_dim;
        let proj = if cfg.gru_projection {
            Some(init!(|r: &mut Rng| Dense::new(n, p, r), Dense::zeros(n, p)))
        } else {
            None
        };
        let d = cfg.encoder_dim();
        let att = if cfg.attention == AttentionKind::Soft {
            Some(init!(|r: &mut Rng| SoftAttention::new(d, r), SoftAttention::zeros(d)))
        } else {
            None
        };
        let k = cfg.num_classes;
        let out = init!(|r: &mut Rng| Dense::new(d, k, r), Dense::zeros(d, k));
        Ok(Self {
            cfg: cfg.clone(),
            conv,
            dnn,
            rnn,
            proj,
            att,
            out,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Tensors with their checkpoint names, in canonical order.
    pub fn named_params(&self) -> Vec<(String, &Tensor<F>)> {
        let m = self;
        Layout {
            conv: m.conv.as_ref().map(|c| ConvRef {
                kernel: &c.kernel,
                bias: &c.bias,
            }),
            dnn: m.dnn.iter().map(|d| DenseRef { w: &d.w, b: &d.b }).collect::<Vec<_>>(),
            rnn: m.rnn.iter().map(RecRef::from).collect::<Vec<_>>(),
            proj: m.proj.as_ref().map(|d| DenseRef { w: &d.w, b: &d.b }),
            att: m.att.as_ref().map(|a| AttRef {
                w: &a.w,
                b: &a.b,
                v: &a.v,
            }),
            out: DenseRef {
                w: &m.out.w,
                b: &m.out.b,
            },
        }
        .flatten()
    }

    pub fn named_params_mut(&mut self) -> Vec<(String, &mut Tensor<F>)> {
        let m = self;
        Layout {
            conv: m.conv.as_mut().map(|c| ConvRef {
                kernel: &mut c.kernel,
                bias: &mut c.bias,
            }),
            dnn: m
                .dnn
                .iter_mut()
                .map(|d| DenseRef {
                    w: &mut d.w,
                    b: &mut d.b,
                })
                .collect::<Vec<_>>(),
            rnn: m.rnn.iter_mut().map(RecRef::from_mut).collect::<Vec<_>>(),
            proj: m.proj.as_mut().map(|d| DenseRef {
                w: &mut d.w,
                b: &mut d.b,
            }),
            att: m.att.as_mut().map(|a| AttRef {
                w: &mut a.w,
                b: &mut a.b,
                v: &mut a.v,
            }),
            out: DenseRef {
                w: &mut m.out.w,
                b: &mut m.out.b,
            },
        }
        .flatten()
    }

    pub fn params(&self) -> Vec<&Tensor<F>> {
        self.named_params().into_iter().map(|(_, t)| t).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<F>> {
        self.named_params_mut().into_iter().map(|(_, t)| t).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Rebuilds a model from named tensors. Every tensor of the layout must
    /// be supplied exactly once with the expected shape.
    pub fn from_named(cfg: &ModelConfig, tensors: Vec<(String, Tensor<F>)>) -> Result<Self> {
        let mut m = Self::zeros(cfg)?;
        let mut seen = vec![false; m.params().len()];
        {
            let mut slots = m.named_params_mut();
            for (name, t) in tensors {
                let idx = slots
                    .iter()
                    .position(|(n, _)| *n == name)
                    .ok_or_else(|| KwsError::format("checkpoint", format!("unexpected tensor '{name}'")))?;
                if seen[idx] {
                    return Err(KwsError::format("checkpoint", format!("duplicate tensor '{name}'")));
                }
                if slots[idx].1.shape() != t.shape() {
                    return Err(KwsError::format(
                        "checkpoint",
                        format!(
                            "tensor '{name}' has shape {:?}, expected {:?}",
                            t.shape(),
                            slots[idx].1.shape()
                        ),
                    ));
                }
                *slots[idx].1 = t;
                seen[idx] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            let name = m.named_params()[i].0.clone();
            return Err(KwsError::format("checkpoint", format!("missing tensor '{name}'")));
        }
        Ok(m)
    }

    /// Same parameters converted to another precision.
    pub fn cast<G: Real>(&self) -> Model<G> {
        let named = self
            .named_params()
            .into_iter()
            .map(|(n, t)| (n, t.cast::<G>()))
            .collect();
        Model::from_named(&self.cfg, named).expect("layout is preserved by cast")
    }

    /// Zero-filled gradient accumulator with this layout.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.cfg).expect("config was validated at construction")
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|t| t.is_finite())
    }

    fn check_input(&self, x: &Tensor<F>) -> Result<()> {
        if x.rows() == 0 || x.row_len() != self.cfg.input_dim || x.shape().len() != 2 {
            return Err(KwsError::Shape(format!(
                "model expects T × {} features, got {:?}",
                self.cfg.input_dim,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Per-frame encoder output `h`, `T × d`.
    pub fn encode(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        Ok(self.encode_traced(x)?.0)
    }

    /// Encoder output plus the activations needed by [`Model::encoder_backward`].
    pub fn encode_traced(&self, x: &Tensor<F>) -> Result<(Tensor<F>, EncoderTrace<F>)> {
        self.check_input(x)?;
        let mut tr = EncoderTrace {
            input: x.clone(),
            conv_out: None,
            dnn_io: Vec::new(),
            cells: Vec::new(),
            proj_io: None,
        };
        if self.cfg.encoder == EncoderKind::Dnn {
            let mut cur = context_stack(x, self.cfg.context_left, self.cfg.context_right)?;
            for layer in &self.dnn {
                let y = dense_rows(layer, &cur, true)?;
                tr.dnn_io.push((cur, y.clone()));
                cur = y;
            }
            return Ok((cur, tr));
        }
        let mut cur = match &self.conv {
            Some(conv) => {
                let mut y = conv.forward(x)?;
                relu_in_place(y.data_mut());
                tr.conv_out = Some(y.clone());
                y
            }
            None => x.clone(),
        };
        for cell in &self.rnn {
            let n = cell.hidden_dim();
            let mut h = vec![F::zero(); n];
            let mut c = vec![F::zero(); n];
            let mut out = Vec::with_capacity(cur.rows() * n);
            let mut traces = Vec::with_capacity(cur.rows());
            for t in 0..cur.rows() {
                match cell {
                    Recurrent::Lstm(l) => {
                        let (h2, c2, ct) = l.step(cur.row(t), &h, &c)?;
                        h = h2;
                        c = c2;
                        traces.push(CellTrace::Lstm(ct));
                    }
                    Recurrent::Gru(g) => {
                        let (h2, ct) = g.step(cur.row(t), &h)?;
                        h = h2;
                        traces.push(CellTrace::Gru(ct));
                    }
                }
                out.extend_from_slice(&h);
            }
            tr.cells.push(traces);
            cur = Tensor::from_vec(&[x.rows(), n], out)?;
        }
        if let Some(p) = &self.proj {
            let y = dense_rows(p, &cur, true)?;
            tr.proj_io = Some((cur, y.clone()));
            cur = y;
        }
        Ok((cur, tr))
    }

    /// Backpropagates `dL/dh` through the encoder, accumulating into `grad`.
    pub fn encoder_backward(&self, tr: &EncoderTrace<F>, dh: Tensor<F>, grad: &mut Model<F>) -> Result<()> {
        if self.cfg.encoder == EncoderKind::Dnn {
            let mut d = dh;
            for (l, layer) in self.dnn.iter().enumerate().rev() {
                d = dense_relu_backward(layer, &tr.dnn_io[l], d, &mut grad.dnn[l]);
            }
            return Ok(());
        }
        let mut d = dh;
        if let (Some(p), Some(io)) = (&self.proj, &tr.proj_io) {
            let gp = grad
                .proj
                .as_mut()
                .ok_or_else(|| KwsError::Shape("gradient layout mismatch".into()))?;
            d = dense_relu_backward(p, io, d, gp);
        }
        for (l, cell) in self.rnn.iter().enumerate().rev() {
            let traces = &tr.cells[l];
            let t_len = traces.len();
            let n = cell.hidden_dim();
            let mut dx_rows: Vec<Vec<F>> = vec![Vec::new(); t_len];
            let mut dh_next = vec![F::zero(); n];
            let mut dc_next = vec![F::zero(); n];
            for t in (0..t_len).rev() {
                let mut dh_t = d.row(t).to_vec();
                for (a, &b) in dh_t.iter_mut().zip(&dh_next) {
                    *a += b;
                }
                match (cell, &traces[t], &mut grad.rnn[l]) {
                    (Recurrent::Lstm(c), CellTrace::Lstm(ct), Recurrent::Lstm(g)) => {
                        let (dx, dhp, dcp) = c.backward(ct, &dh_t, &dc_next, g);
                        dx_rows[t] = dx;
                        dh_next = dhp;
                        dc_next = dcp;
                    }
                    (Recurrent::Gru(c), CellTrace::Gru(ct), Recurrent::Gru(g)) => {
                        let (dx, dhp) = c.backward(ct, &dh_t, g);
                        dx_rows[t] = dx;
                        dh_next = dhp;
                    }
                    _ => return Err(KwsError::Shape("gradient layout mismatch".into())),
                }
            }
            d = rows_to_tensor(dx_rows)?;
        }
        if let (Some(conv), Some(y)) = (&self.conv, &tr.conv_out) {
            relu_backward_in_place(y.data(), d.data_mut());
            let gc = grad
                .conv
                .as_mut()
                .ok_or_else(|| KwsError::Shape("gradient layout mismatch".into()))?;
            conv.backward(&tr.input, &d, gc);
        }
        Ok(())
    }

    /// Fresh zero state for [`Model::encode_step`].
    pub fn encoder_state(&self) -> EncoderState<F> {
        let n = self.cfg.nodes;
        EncoderState {
            conv_hist: VecDeque::new(),
            h: vec![vec![F::zero(); n]; self.rnn.len()],
            c: vec![vec![F::zero(); n]; self.rnn.len()],
            cell_evals: 0,
        }
    }

    /// Encodes one frame, carrying recurrent and convolution state. Gives
    /// bit-identical rows to [`Model::encode`] over the same prefix.
    pub fn encode_step(&self, st: &mut EncoderState<F>, frame: &[F]) -> Result<Vec<F>> {
        if !self.cfg.is_recurrent() {
            return Err(KwsError::Config(
                "the DNN encoder needs right context and cannot stream".into(),
            ));
        }
        if frame.len() != self.cfg.input_dim {
            return Err(KwsError::Shape(format!(
                "model expects {}-wide frames, got {}",
                self.cfg.input_dim,
                frame.len()
            )));
        }
        let mut cur = match &self.conv {
            Some(conv) => {
                let kt = conv.spec().time_kernel;
                if st.conv_hist.len() == kt {
                    st.conv_hist.pop_front();
                }
                st.conv_hist.push_back(frame.to_vec());
                let missing = kt - st.conv_hist.len();
                let hist: Vec<Option<&[F]>> = (0..kt)
                    .map(|k| (k >= missing).then(|| st.conv_hist[k - missing].as_slice()))
                    .collect();
                let mut y = conv.forward_frame(&hist)?;
                relu_in_place(&mut y);
                y
            }
            None => frame.to_vec(),
        };
        for (l, cell) in self.rnn.iter().enumerate() {
            match cell {
                Recurrent::Lstm(c) => {
                    let (h, cs, _) = c.step(&cur, &st.h[l], &st.c[l])?;
                    st.h[l] = h;
                    st.c[l] = cs;
                }
                Recurrent::Gru(g) => {
                    let (h, _) = g.step(&cur, &st.h[l])?;
                    st.h[l] = h;
                }
            }
            st.cell_evals += 1;
            cur = st.h[l].clone();
        }
        if let Some(p) = &self.proj {
            cur = p.forward(&cur)?;
            relu_in_place(&mut cur);
        }
        Ok(cur)
    }

    /// Soft attention score of one encoder frame; zero for average attention.
    pub fn frame_score(&self, h: &[F]) -> Result<F> {
        match &self.att {
            Some(a) => a.score(h),
            None => Ok(F::zero()),
        }
    }

    /// `p(y=1)` from encoder rows and their precomputed attention scores.
    pub fn score_window<'a>(&self, rows: impl IntoIterator<Item = &'a [F]>, scores: &[F]) -> Result<F> {
        if self.cfg.kind != ModelKind::AttentionE2e {
            return Err(KwsError::Config("window scoring needs an attention model".into()));
        }
        if scores.is_empty() {
            return Err(KwsError::Shape("attention over an empty window".into()));
        }
        let alpha = match self.cfg.attention {
            AttentionKind::Soft => softmax(scores),
            _ => uniform_weights(scores.len()),
        };
        let c = pool(rows, &alpha);
        if c.len() != self.cfg.encoder_dim() {
            return Err(KwsError::Shape("window rows do not match the encoder width".into()));
        }
        Ok(softmax(&self.out.forward(&c)?)[1])
    }

    /// Keyword probability for a window of features.
    pub fn detect_score(&self, x: &Tensor<F>) -> Result<F> {
        let h = self.encode(x)?;
        let scores = (0..h.rows())
            .map(|t| self.frame_score(h.row(t)))
            .collect::<Result<Vec<_>>>()?;
        self.score_window((0..h.rows()).map(|t| h.row(t)), &scores)
    }

    /// Context vector and (for soft attention) its trace.
    fn attend(&self, h: &Tensor<F>) -> Result<(Vec<F>, Option<SoftAttentionTrace<F>>)> {
        match &self.att {
            Some(a) => {
                let (c, tr) = a.forward(h)?;
                Ok((c, Some(tr)))
            }
            None => Ok((super::attention::attend_average(h)?, None)),
        }
    }

    /// Two-class output logits for a window.
    pub fn utterance_logits(&self, x: &Tensor<F>) -> Result<Vec<F>> {
        if self.cfg.kind != ModelKind::AttentionE2e {
            return Err(KwsError::Config("utterance logits need an attention model".into()));
        }
        let h = self.encode(x)?;
        let (c, _) = self.attend(&h)?;
        self.out.forward(&c)
    }

    /// Cross-entropy of the utterance label (0 = non-keyword, 1 = keyword).
    pub fn loss(&self, x: &Tensor<F>, label: usize) -> Result<F> {
        Ok(softmax_xent(&self.utterance_logits(x)?, label)?.0)
    }

    /// Loss and `p(y=1)`; gradients are accumulated into `grad`.
    pub fn loss_and_grad(&self, x: &Tensor<F>, label: usize, grad: &mut Model<F>) -> Result<(F, F)> {
        if self.cfg.kind != ModelKind::AttentionE2e {
            return Err(KwsError::Config("utterance loss needs an attention model".into()));
        }
        let (h, etr) = self.encode_traced(x)?;
        let (c, atr) = self.attend(&h)?;
        let logits = self.out.forward(&c)?;
        let (loss, dlogits) = softmax_xent(&logits, label)?;
        let p1 = softmax(&logits)[1];
        let dc = self.out.backward(&c, &dlogits, &mut grad.out);
        let mut dh = Tensor::zeros(h.shape());
        match (&self.att, atr) {
            (Some(a), Some(tr)) => {
                let ga = grad
                    .att
                    .as_mut()
                    .ok_or_else(|| KwsError::Shape("gradient layout mismatch".into()))?;
                a.backward(&h, &tr, &dc, ga, &mut dh);
            }
            _ => {
                let w = uniform_weights::<F>(h.rows());
                for t in 0..h.rows() {
                    for (g, &x) in dh.row_mut(t).iter_mut().zip(&dc) {
                        *g = w[t] * x;
                    }
                }
            }
        }
        self.encoder_backward(&etr, dh, grad)?;
        Ok((loss, p1))
    }

    /// Per-frame class logits for the baseline.
    fn frame_logits(&self, x: &Tensor<F>) -> Result<(Tensor<F>, Tensor<F>, EncoderTrace<F>)> {
        if self.cfg.kind != ModelKind::DeepKws {
            return Err(KwsError::Config("frame posteriors need a deep_kws model".into()));
        }
        let (h, tr) = self.encode_traced(x)?;
        let z = dense_rows(&self.out, &h, false)?;
        Ok((h, z, tr))
    }

    /// `T × classes` frame posteriors (class 0 is the filler).
    pub fn frame_posteriors(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let (_, z, _) = self.frame_logits(x)?;
        let rows = (0..z.rows()).map(|t| softmax(z.row(t))).collect();
        rows_to_tensor(rows)
    }

    /// Mean frame cross-entropy against per-frame class labels.
    pub fn frame_loss_and_grad(&self, x: &Tensor<F>, labels: &[usize], grad: &mut Model<F>) -> Result<F> {
        let (h, z, tr) = self.frame_logits(x)?;
        if labels.len() != z.rows() {
            return Err(KwsError::Shape(format!(
                "{} frame labels for {} frames",
                labels.len(),
                z.rows()
            )));
        }
        let inv = F::one() / F::of(labels.len() as f64);
        let mut total = F::zero();
        let mut dh = Tensor::zeros(h.shape());
        for (t, &lab) in labels.iter().enumerate() {
            let (l, mut dz) = softmax_xent(z.row(t), lab)?;
            total += l;
            dz.iter_mut().for_each(|g| *g *= inv);
            let d = self.out.backward(h.row(t), &dz, &mut grad.out);
            dh.row_mut(t).copy_from_slice(&d);
        }
        self.encoder_backward(&tr, dh, grad)?;
        Ok(total * inv)
    }

    pub fn frame_loss(&self, x: &Tensor<F>, labels: &[usize]) -> Result<F> {
        let (_, z, _) = self.frame_logits(x)?;
        if labels.len() != z.rows() {
            return Err(KwsError::Shape(format!(
                "{} frame labels for {} frames",
                labels.len(),
                z.rows()
            )));
        }
        let mut total = F::zero();
        for (t, &lab) in labels.iter().enumerate() {
            total += softmax_xent(z.row(t), lab)?.0;
        }
        Ok(total / F::of(labels.len() as f64))
    }
}

/// Parameter tensors of a model grouped by layer, generic over `&` and `&mut`.
struct Layout<T> {
    conv: Option<ConvRef<T>>,
    dnn: Vec<DenseRef<T>>,
    rnn: Vec<RecRef<T>>,
    proj: Option<DenseRef<T>>,
    att: Option<AttRef<T>>,
    out: DenseRef<T>,
}

impl<T> Layout<T> {
    fn flatten(self) -> Vec<(String, T)> {
        let mut v = Vec::new();
        if let Some(c) = self.conv {
            v.push(("conv.kernel".to_string(), c.kernel));
            v.push(("conv.bias".to_string(), c.bias));
        }
        for (i, d) in self.dnn.into_iter().enumerate() {
            v.push((format!("dnn.{i}.w"), d.w));
            v.push((format!("dnn.{i}.b"), d.b));
        }
        for (i, r) in self.rnn.into_iter().enumerate() {
            match r {
                RecRef::Lstm(c) => {
                    v.push((format!("rnn.{i}.w"), c.w));
                    v.push((format!("rnn.{i}.b"), c.b));
                }
                RecRef::Gru(c) => {
                    v.push((format!("rnn.{i}.w_gates"), c.w_gates));
                    v.push((format!("rnn.{i}.b_gates"), c.b_gates));
                    v.push((format!("rnn.{i}.w_cand"), c.w_cand));
                    v.push((format!("rnn.{i}.b_cand"), c.b_cand));
                }
            }
        }
        if let Some(p) = self.proj {
            v.push(("proj.w".to_string(), p.w));
            v.push(("proj.b".to_string(), p.b));
        }
        if let Some(a) = self.att {
            v.push(("att.w".to_string(), a.w));
            v.push(("att.b".to_string(), a.b));
            v.push(("att.v".to_string(), a.v));
        }
        v.push(("out.w".to_string(), self.out.w));
        v.push(("out.b".to_string(), self.out.b));
        v
    }
}

struct DenseRef<T> {
    w: T,
    b: T,
}

struct ConvRef<T> {
    kernel: T,
    bias: T,
}

struct AttRef<T> {
    w: T,
    b: T,
    v: T,
}

enum RecRef<T> {
    Lstm(LstmRef<T>),
    Gru(GruRef<T>),
}

struct LstmRef<T> {
    w: T,
    b: T,
}

struct GruRef<T> {
    w_gates: T,
    b_gates: T,
    w_cand: T,
    b_cand: T,
}

impl<'a, F> RecRef<&'a Tensor<F>> {
    fn from(r: &'a Recurrent<F>) -> Self {
        match r {
            Recurrent::Lstm(c) => RecRef::Lstm(LstmRef { w: &c.w, b: &c.b }),
            Recurrent::Gru(c) => RecRef::Gru(GruRef {
                w_gates: &c.w_gates,
                b_gates: &c.b_gates,
                w_cand: &c.w_cand,
                b_cand: &c.b_cand,
            }),
        }
    }
}

impl<'a, F> RecRef<&'a mut Tensor<F>> {
    fn from_mut(r: &'a mut Recurrent<F>) -> Self {
        match r {
            Recurrent::Lstm(c) => RecRef::Lstm(LstmRef {
                w: &mut c.w,
                b: &mut c.b,
            }),
            Recurrent::Gru(c) => RecRef::Gru(GruRef {
                w_gates: &mut c.w_gates,
                b_gates: &mut c.b_gates,
                w_cand: &mut c.w_cand,
                b_cand: &mut c.b_cand,
            }),
        }
    }
}
