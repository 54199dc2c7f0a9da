//! Gradient-check probes for attention pooling and whole models.

use super::attention::SoftAttention;
use super::config::{ModelConfig, ModelKind};
use super::model::Model;
use crate::error::Result;
use crate::layers::probes::{random_tensor, random_vec, Probe};
use crate::numerics::{Dd, Differentiable, Real, Rng, Tensor};

/// Soft attention reduced by a fixed projection of the context vector.
/// Inputs: `[W, b, v, h]`.
pub struct SoftAttentionProbe {
    dim: usize,
    frames: usize,
    proj: Vec<f64>,
}

impl SoftAttentionProbe {
    pub fn new(dim: usize, frames: usize, rng: &mut Rng) -> Self {
        Self {
            dim,
            frames,
            proj: random_vec(dim, rng),
        }
    }

    fn params(xs: &[Tensor<f64>]) -> SoftAttention<f64> {
        SoftAttention {
            w: xs[0].clone(),
            b: xs[1].clone(),
            v: xs[2].clone(),
        }
    }
}

impl Differentiable for SoftAttentionProbe {
    fn value(&self, xs: &[Tensor<f64>]) -> Result<f64> {
        let (c, _) = Self::params(xs).forward(&xs[3])?;
        Ok(c.iter().zip(&self.proj).map(|(a, b)| a * b).sum())
    }

    fn gradient(&self, xs: &[Tensor<f64>]) -> Result<Vec<Tensor<f64>>> {
        let att = Self::params(xs);
        let (_, tr) = att.forward(&xs[3])?;
        let mut g = SoftAttention::zeros(self.dim);
        let mut dh = Tensor::zeros(xs[3].shape());
        att.backward(&xs[3], &tr, &self.proj, &mut g, &mut dh);
        Ok(vec![g.w, g.b, g.v, dh])
    }
}

impl Probe for SoftAttentionProbe {
    fn name(&self) -> String {
        format!("soft_attention(d={}, T={})", self.dim, self.frames)
    }

    fn sample_inputs(&self, rng: &mut Rng) -> Vec<Tensor<f64>> {
        let d = self.dim;
        vec![
            random_tensor(&[d, d], 0.8, rng),
            random_tensor(&[d], 0.5, rng),
            random_tensor(&[d], 1.0, rng),
            random_tensor(&[self.frames, d], 1.0, rng),
        ]
    }
}

/// Training loss of a whole model on one fixed example, as a function of
/// every parameter tensor (in [`Model::named_params`] order).
pub struct ModelLossProbe {
    cfg: ModelConfig,
    x: Tensor<f64>,
    target: Target,
}

enum Target {
    Utterance(usize),
    Frames(Vec<usize>),
}

impl ModelLossProbe {
    /// Random input of `frames` frames; the label is drawn from `rng`.
    pub fn new(cfg: &ModelConfig, frames: usize, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let x = random_tensor(&[frames, cfg.input_dim], 1.0, rng);
        let target = match cfg.kind {
            ModelKind::AttentionE2e => Target::Utterance(rng.below(2)),
            ModelKind::DeepKws => Target::Frames((0..frames).map(|_| rng.below(cfg.num_classes)).collect()),
        };
        Ok(Self {
            cfg: cfg.clone(),
            x,
            target,
        })
    }

    fn model<F: Real>(&self, xs: &[Tensor<f64>]) -> Result<Model<F>> {
        let zeros = Model::<F>::zeros(&self.cfg)?;
        let named = zeros
            .named_params()
            .into_iter()
            .zip(xs)
            .map(|((n, _), t)| (n, t.cast::<F>()))
            .collect();
        Model::from_named(&self.cfg, named)
    }

    fn loss<F: Real>(&self, xs: &[Tensor<f64>]) -> Result<F> {
        let m = self.model::<F>(xs)?;
        let x = self.x.cast::<F>();
        match &self.target {
            Target::Utterance(l) => m.loss(&x, *l),
            Target::Frames(l) => m.frame_loss(&x, l),
        }
    }
}

impl Differentiable for ModelLossProbe {
    fn value(&self, xs: &[Tensor<f64>]) -> Result<f64> {
        self.loss(xs)
    }

    fn value_extended(&self, xs: &[Tensor<f64>]) -> Option<Result<Dd>> {
        Some(self.loss(xs))
    }

    fn gradient(&self, xs: &[Tensor<f64>]) -> Result<Vec<Tensor<f64>>> {
        let m = self.model::<f64>(xs)?;
        let mut g = m.zeros_like();
        match &self.target {
            Target::Utterance(l) => {
                m.loss_and_grad(&self.x, *l, &mut g)?;
            }
            Target::Frames(l) => {
                m.frame_loss_and_grad(&self.x, l, &mut g)?;
            }
        }
        Ok(g.params().into_iter().cloned().collect())
    }
}

impl Probe for ModelLossProbe {
    fn name(&self) -> String {
        format!("model_loss({}, T={})", self.cfg.label(), self.x.rows())
    }

    /// Freshly initialized parameters with small random biases so that no
    /// ReLU sits exactly at its kink.
    fn sample_inputs(&self, rng: &mut Rng) -> Vec<Tensor<f64>> {
        let m: Model<f64> = Model::new(&self.cfg, rng).expect("config validated in constructor");
        m.named_params()
            .into_iter()
            .map(|(_, t)| {
                let mut t = t.clone();
                if t.shape().len() == 1 {
                    for v in t.data_mut() {
                        *v += rng.uniform(-0.1, 0.1);
                    }
                }
                t
            })
            .collect()
    }
}
