use serde::{Deserialize, Serialize};

use crate::error::{KwsError, Result};
use crate::numerics::{normalized_limit, zero_bias, Real, Rng, Tensor};

/// Single convolution layer over a `time × frequency × channel` input.
///
/// Time is causal (output frame `t` sees input frames `t - time_kernel + 1 ..= t`,
/// zero before the stream start) with stride 1; frequency uses same-padding
/// with `freq_stride`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    pub time_kernel: usize,
    pub freq_kernel: usize,
    pub freq_stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl ConvSpec {
    /// 20×5 kernel, stride 1×2.
    pub fn paper(out_channels: usize) -> Self {
        Self {
            time_kernel: 20,
            freq_kernel: 5,
            freq_stride: 2,
            in_channels: 1,
            out_channels,
        }
    }

    pub fn validate(&self, in_bins: usize) -> Result<()> {
        if self.time_kernel == 0
            || self.freq_kernel == 0
            || self.freq_stride == 0
            || self.in_channels == 0
            || self.out_channels == 0
        {
            return Err(KwsError::Config(format!("degenerate conv spec {self:?}")));
        }
        if self.freq_kernel > in_bins {
            return Err(KwsError::Config(format!(
                "frequency kernel {} larger than the {in_bins}-bin input",
                self.freq_kernel
            )));
        }
        Ok(())
    }

    pub fn out_bins(&self, in_bins: usize) -> usize {
        in_bins.div_ceil(self.freq_stride)
    }

    /// Leading zero bins of the same-padding.
    pub fn pad_low(&self, in_bins: usize) -> usize {
        let out = self.out_bins(in_bins);
        let total = ((out - 1) * self.freq_stride + self.freq_kernel).saturating_sub(in_bins);
        total / 2
    }

    /// Flattened per-frame output width.
    pub fn out_width(&self, in_bins: usize) -> usize {
        self.out_bins(in_bins) * self.out_channels
    }

    pub fn param_count(&self) -> usize {
        self.out_channels * (self.time_kernel * self.freq_kernel * self.in_channels) + self.out_channels
    }
}

/// Kernel stored `time × freq × in_ch × out_ch`; kernel time index
/// `time_kernel - 1` multiplies the current frame. Frames are laid out
/// frequency-major (`bin * channels + channel`).
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<F = f32> {
    pub kernel: Tensor<F>,
    pub bias: Tensor<F>,
    spec: ConvSpec,
    in_bins: usize,
}

impl<F: Real> Conv2d<F> {
    pub fn new(spec: ConvSpec, in_bins: usize, rng: &mut Rng) -> Result<Self> {
        spec.validate(in_bins)?;
        let fan_in = spec.time_kernel * spec.freq_kernel * spec.in_channels;
        let fan_out = spec.time_kernel * spec.freq_kernel * spec.out_channels;
        // Glorot bound over the receptive field.
        let limit = normalized_limit(fan_in, fan_out);
        let n = fan_in * spec.out_channels;
        let data = (0..n).map(|_| F::of(rng.uniform(-limit, limit))).collect();
        Ok(Self {
            kernel: Tensor::from_vec(
                &[spec.time_kernel, spec.freq_kernel, spec.in_channels, spec.out_channels],
                data,
            )?,
            bias: zero_bias(spec.out_channels),
            spec,
            in_bins,
        })
    }

    pub fn zeros(spec: ConvSpec, in_bins: usize) -> Self {
        Self {
            kernel: Tensor::zeros(&[spec.time_kernel, spec.freq_kernel, spec.in_channels, spec.out_channels]),
            bias: Tensor::zeros(&[spec.out_channels]),
            spec,
            in_bins,
        }
    }

    pub fn from_tensors(kernel: Tensor<F>, bias: Tensor<F>, spec: ConvSpec, in_bins: usize) -> Result<Self> {
        spec.validate(in_bins)?;
        if kernel.shape() != [spec.time_kernel, spec.freq_kernel, spec.in_channels, spec.out_channels]
            || bias.shape() != [spec.out_channels]
        {
            return Err(KwsError::Shape(format!(
                "conv tensors {:?} / {:?} do not match {spec:?}",
                kernel.shape(),
                bias.shape()
            )));
        }
        Ok(Self {
            kernel,
            bias,
            spec,
            in_bins,
        })
    }

    pub fn spec(&self) -> &ConvSpec {
        &self.spec
    }

    pub fn in_width(&self) -> usize {
        self.in_bins * self.spec.in_channels
    }

    pub fn out_width(&self) -> usize {
        self.spec.out_width(self.in_bins)
    }

    /// One output frame from the last `time_kernel` input frames, oldest
    /// first; `None` stands for a zero frame before the stream start.
    pub fn forward_frame(&self, history: &[Option<&[F]>]) -> Result<Vec<F>> {
        let s = &self.spec;
        if history.len() != s.time_kernel {
            return Err(KwsError::Shape(format!(
                "conv needs {} frames of history, got {}",
                s.time_kernel,
                history.len()
            )));
        }
        let (ob, oc, ic) = (s.out_bins(self.in_bins), s.out_channels, s.in_channels);
        let pad = s.pad_low(self.in_bins) as isize;
        let mut out = Vec::with_capacity(ob * oc);
        for _ in 0..ob {
            out.extend_from_slice(self.bias.data());
        }
        let k = self.kernel.data();
        for (kt, row) in history.iter().enumerate() {
            let Some(row) = row else { continue };
            if row.len() != self.in_width() {
                return Err(KwsError::Shape(format!(
                    "conv input frame has {} values, expected {}",
                    row.len(),
                    self.in_width()
                )));
            }
            for fo in 0..ob {
                let dst = &mut out[fo * oc..(fo + 1) * oc];
                for kf in 0..s.freq_kernel {
                    let fi = (fo * s.freq_stride + kf) as isize - pad;
                    if fi < 0 || fi as usize >= self.in_bins {
                        continue;
                    }
                    for c in 0..ic {
                        let xv = row[fi as usize * ic + c];
                        let base = ((kt * s.freq_kernel + kf) * ic + c) * oc;
                        for (d, &w) in dst.iter_mut().zip(&k[base..base + oc]) {
                            *d += xv * w;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Runs over a `T × in_width` input with zero history before frame 0.
    pub fn forward(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let t_len = x.rows();
        let kt = self.spec.time_kernel;
        let mut data = Vec::with_capacity(t_len * self.out_width());
        for t in 0..t_len {
            let hist: Vec<Option<&[F]>> = (0..kt)
                .map(|k| {
                    let src = t as isize + k as isize - (kt as isize - 1);
                    (src >= 0).then(|| x.row(src as usize))
                })
                .collect();
            data.extend(self.forward_frame(&hist)?);
        }
        Tensor::from_vec(&[t_len, self.out_width()], data)
    }

    /// Accumulates kernel/bias gradients and returns `dL/dx` for the whole input.
    pub fn backward(&self, x: &Tensor<F>, dy: &Tensor<F>, grad: &mut Conv2d<F>) -> Tensor<F> {
        let s = &self.spec;
        let (ob, oc, ic, kt_n) = (s.out_bins(self.in_bins), s.out_channels, s.in_channels, s.time_kernel);
        let pad = s.pad_low(self.in_bins) as isize;
        let mut dx = Tensor::zeros(x.shape());
        let k = self.kernel.data();
        for t in 0..x.rows() {
            let g = dy.row(t);
            for fo in 0..ob {
                for (b, &d) in grad.bias.data_mut().iter_mut().zip(&g[fo * oc..(fo + 1) * oc]) {
                    *b += d;
                }
            }
            for kt in 0..kt_n {
                let src = t as isize + kt as isize - (kt_n as isize - 1);
                if src < 0 {
                    continue;
                }
                let src = src as usize;
                for fo in 0..ob {
                    let gy = &g[fo * oc..(fo + 1) * oc];
                    for kf in 0..s.freq_kernel {
                        let fi = (fo * s.freq_stride + kf) as isize - pad;
                        if fi < 0 || fi as usize >= self.in_bins {
                            continue;
                        }
                        for c in 0..ic {
                            let idx = fi as usize * ic + c;
                            let xv = x.row(src)[idx];
                            let base = ((kt * s.freq_kernel + kf) * ic + c) * oc;
                            let gk = &mut grad.kernel.data_mut()[base..base + oc];
                            let mut acc = F::zero();
                            for o in 0..oc {
                                gk[o] += xv * gy[o];
                                acc += k[base + o] * gy[o];
                            }
                            dx.row_mut(src)[idx] += acc;
                        }
                    }
                }
            }
        }
        dx
    }
}
