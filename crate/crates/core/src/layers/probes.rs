//! Scalarized wrappers that expose each layer to [`grad_check`].
//!
//! Vector-valued outputs are reduced with a fixed random projection so the
//! check covers every output coordinate.
//!
//! [`grad_check`]: crate::numerics::grad_check

use super::{softmax_xent, Conv2d, ConvSpec, Dense, GruCell, LstmCell};
use crate::error::Result;
use crate::numerics::{Differentiable, Rng, Tensor};

/// A differentiable operation together with a sampler of probe points.
pub trait Probe: Differentiable + Send + Sync {
    fn name(&self) -> String;
    fn sample_inputs(&self, rng: &mut Rng) -> Vec<Tensor<f64>>;
}

pub(crate) fn random_tensor(shape: &[usize], scale: f64, rng: &mut Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.uniform(-scale, scale)).collect()).expect("non-empty shape")
}

pub(crate) fn random_vec(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inputs: `[W, b, x]`.
pub struct DenseProbe {
    input: usize,
    output: usize,
    proj: Vec<f64>,
}

impl DenseProbe {
    pub fn new(input: usize, output: usize, rng: &mut Rng) -> Self {
        Self {
            input,
            output,
            proj: random_vec(output, rng),
        }
    }
}

impl Differentiable for DenseProbe {
    fn value(&self, xs: &[Tensor<f64>]) -> Result<f64> {
        let layer = Dense {
            w: xs[0].clone(),
            b: xs[1].clone(),
        };
        Ok(dot(&self.proj, &layer.forward(xs[2].data())?))
    }

    fn gradient(&self, xs: &[Tensor<f64>]) -> Result<Vec<Tensor<f64>>> {
        let layer = Dense {
            w: xs[0].clone(),
            b: xs[1].clone(),
        };
        let mut g = Dense::zeros(self.input, self.output);
        let dx = layer.backward(xs[2].data(), &self.proj, &mut g);
        Ok(vec![g.w, g.b, Tensor::from_vec(&[self.input], dx)?])
    }
}

impl Probe for DenseProbe {
    fn name(&self) -> String {
        format!("dense({}x{})", self.input, self.output)
    }
    fn sample_inputs(&self, rng: &mut Rng) -> Vec<Tensor<f64>> {
        vec![
            random_tensor(&[self.input, self.output], 1.0, rng),
            random_tensor(&[self.output], 1.0, rng),
            random_tensor(&[self.input], 1.0, rng),
        ]
    }
}

/// Inputs: `[W, b, x, h, c]`; value `p·h' + q·c'`.
pub struct LstmProbe {
    input: usize,
    hidden: usize,
    ph: Vec<f64>,
    pc: Vec<f64>,
}

impl LstmProbe {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        Self {
            input,
            hidden,
            ph: random_vec(hidden, rng),
            pc: random_vec(hidden, rng),
        }
    }

    fn cell(&self, xs: &[Tensor<f64>]) -> Result<LstmCell<f64>> {
        LstmCell::from_tensors(xs[0].clone(), xs[1].clone(), self.input, self.hidden)
    }
}

impl Differentiable for LstmProbe {
    fn value(&self, xs: &[Tensor<f64>]) -> Result<f64> {
        let (h, c, _) = self.cell(xs)?.step(xs[2].data(), xs[3].data(), xs[4].data())?;
        Ok(dot(&self.ph, &h) + dot(&self.pc, &c))
    }

    fn gradient(&self, xs: &[Tensor<f64>]) -> Result<Vec<Tensor<f64>>> {
        let cell = self.cell(xs)?;
        let (_, _, tr) = cell.step(xs[2].data(), xs[3].data(), xs[4].data())?;
        let mut g = LstmCell::zeros(self.input, self.hidden);
        let (dx, dh, dc) = cell.backward(&tr, &self.ph, &self.pc, &mut g);
        Ok(vec![
            g.w,
            g.b,
            Tensor::from_vec(&[self.input], dx)?,
            Tensor::from_vec(&[self.hidden], dh)?,
            Tensor::from_vec(&[self.hidden], dc)?,
        ])
    }
}

impl Probe for LstmProbe {
    fn name(&self) -> String {
        format!("lstm_cell({}, {})", self.input, self.hidden)
    }
    fn sample_inputs(&self, rng: &mut Rng) -> Vec<Tensor<f64>> {
        let (i, n) = (self.input, self.hidden);
        vec![
            random_tensor(&[i + n, 4 * n], 0.5, rng),
            random_tensor(&[4 * n], 0.5, rng),
            random_tensor(&[i], 1.0, rng),
            random_tensor(&[n], 1.0, rng),
            random_tensor(&[n], 1.0, rng),
        ]
    }
}

/// Inputs: `[w_gates, b_gates, w_cand, b_cand, x, h]`; value `p·h'`.
pub struct GruProbe {
    input: usize,
    hidden: usize,
    ph: Vec<f64>,
}

impl GruProbe {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        Self {
            input,
            hidden,
            ph: random_vec(hidden, rng),
        }
    }

    fn cell(&self, xs: &[Tensor<f64>]) -> Result<GruCell<f64>> {
        GruCell::from_tensors(
            xs[0].clone(),
            xs[1].clone(),
            xs[2].clone(),
            xs[3].clone(),
            self.input,
            self.hidden,
        )
    }
}

impl Differentiable for GruProbe {
    fn value(&self, xs: &[Tensor<f64>]) -> Result<f64> {
        let (h, _) = self.cell(xs)?.step(xs[4].data(), xs[5].data())?;
        Ok(dot(&self.ph, &h))
    }

    fn gradient(&self, xs: &[Tensor<f64>]) -> Result<Vec<Tensor<f64>>> {
        let cell = self.cell(xs)?;
        let (_, tr) = cell.step(xs[4].data(), xs[5].data())?;
        let mut g = GruCell::zeros(self.input, self.hidden);
        let (dx, dh) = cell.backward(&tr, &self.ph, &mut g);
        Ok(vec![
            g.w_gates,
            g.b_gates,
            g.w_cand,
            g.b_cand,
            Tensor::from_vec(&[self.input], dx)?,
            Tensor::from_vec(&[self.hidden], dh)?,
        ])
    }
}

impl Probe for GruProbe {
    fn name(&self) -> String {
        format!("gru_cell({}, {})", self.input, self.hidden)
    }
    fn sample_inputs(&self, rng: &mut Rng) -> Vec<Tensor<f64>> {
        let (i, n) = (self.input, self.hidden);
        vec![
            random_tensor(&[i + n, 2 * n], 0.5, rng),
            random_tensor(&[2 * n], 0.5, rng),
            random_tensor(&[i + n, n], 0.5, rng),
            random_tensor(&[n], 0.5, rng),
            random_tensor(&[i], 1.0, rng),
            random_tensor(&[n], 1.0, rng),
        ]
    }
}

/// Inputs: `[kernel, bias, x (T × in_width)]`; value `Σ P∘Y`.
pub struct ConvProbe {
    spec: ConvSpec,
    in_bins: usize,
    frames: usize,
    proj: Tensor<f64>,
}

impl ConvProbe {
    pub fn new(spec: ConvSpec, in_bins: usize, frames: usize, rng: &mut Rng) -> Self {
        let proj = random_tensor(&[frames, spec.out_width(in_bins)], 1.0, rng);
        Self {
            spec,
            in_bins,
            frames,
            proj,
        }
    }

    fn layer(&self, xs: &[Tensor<f64>]) -> Result<Conv2d<f64>> {
        Conv2d::from_tensors(xs[0].clone(), xs[1].clone(), self.spec, self.in_bins)
    }
}

impl Differentiable for ConvProbe {
    fn value(&self, xs: &[Tensor<f64>]) -> Result<f64> {
        let y = self.layer(xs)?.forward(&xs[2])?;
        Ok(dot(y.data(), self.proj.data()))
    }

    fn gradient(&self, xs: &[Tensor<f64>]) -> Result<Vec<Tensor<f64>>> {
        let layer = self.layer(xs)?;
        let mut g = Conv2d::zeros(self.spec, self.in_bins);
        let dx = layer.backward(&xs[2], &self.proj, &mut g);
        Ok(vec![g.kernel, g.bias, dx])
    }
}

impl Probe for ConvProbe {
    fn name(&self) -> String {
        format!(
            "conv2d({}x{}/1x{}, {}->{} ch, {} frames)",
            self.spec.time_kernel,
            self.spec.freq_kernel,
            self.spec.freq_stride,
            self.spec.in_channels,
            self.spec.out_channels,
            self.frames
        )
    }
    fn sample_inputs(&self, rng: &mut Rng) -> Vec<Tensor<f64>> {
        let s = &self.spec;
        vec![
            random_tensor(&[s.time_kernel, s.freq_kernel, s.in_channels, s.out_channels], 0.5, rng),
            random_tensor(&[s.out_channels], 0.5, rng),
            random_tensor(&[self.frames, self.in_bins * s.in_channels], 1.0, rng),
        ]
    }
}

/// Inputs: `[logits]`.
pub struct XentProbe {
    classes: usize,
    label: usize,
}

impl XentProbe {
    pub fn new(classes: usize, label: usize) -> Self {
        Self { classes, label }
    }
}

impl Differentiable for XentProbe {
    fn value(&self, xs: &[Tensor<f64>]) -> Result<f64> {
        Ok(softmax_xent(xs[0].data(), self.label)?.0)
    }

    fn gradient(&self, xs: &[Tensor<f64>]) -> Result<Vec<Tensor<f64>>> {
        let (_, d) = softmax_xent(xs[0].data(), self.label)?;
        Ok(vec![Tensor::from_vec(&[self.classes], d)?])
    }
}

impl Probe for XentProbe {
    fn name(&self) -> String {
        format!("softmax_xent({} classes)", self.classes)
    }
    fn sample_inputs(&self, rng: &mut Rng) -> Vec<Tensor<f64>> {
        vec![random_tensor(&[self.classes], 3.0, rng)]
    }
}
