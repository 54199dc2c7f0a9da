use crate::error::{KwsError, Result};
use crate::numerics::{gemv_acc, gemv_t_acc, normalized_init, outer_acc, zero_bias, Real, Rng, Tensor};

/// Fully-connected layer `y = Wᵀx + b` with `W` stored `in × out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<F = f32> {
    pub w: Tensor<F>,
    pub b: Tensor<F>,
}

impl<F: Real> Dense<F> {
    pub fn new(input: usize, output: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Self {
            w: normalized_init(input, output, rng)?,
            b: zero_bias(output),
        })
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            w: Tensor::zeros(&[input, output]),
            b: Tensor::zeros(&[output]),
        }
    }

    pub fn param_count(input: usize, output: usize) -> usize {
        input * output + output
    }

    pub fn input_dim(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn output_dim(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn forward(&self, x: &[F]) -> Result<Vec<F>> {
        if x.len() != self.input_dim() {
            return Err(KwsError::Shape(format!(
                "dense layer expects {} inputs, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let mut y = self.b.data().to_vec();
        gemv_acc(x, self.w.data(), &mut y);
        Ok(y)
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &[F], dy: &[F], grad: &mut Dense<F>) -> Vec<F> {
        outer_acc(x, dy, grad.w.data_mut());
        for (g, &d) in grad.b.data_mut().iter_mut().zip(dy) {
            *g += d;
        }
        let mut dx = vec![F::zero(); x.len()];
        gemv_t_acc(dy, self.w.data(), &mut dx);
        dx
    }

    /// Parameter gradients only.
    pub fn backward_params(&self, x: &[F], dy: &[F], grad: &mut Dense<F>) {
        outer_acc(x, dy, grad.w.data_mut());
        for (g, &d) in grad.b.data_mut().iter_mut().zip(dy) {
            *g += d;
        }
    }
}

pub fn relu_in_place<F: Real>(x: &mut [F]) {
    for v in x {
        if *v < F::zero() {
            *v = F::zero();
        }
    }
}

/// Masks `dy` by the ReLU derivative evaluated at the layer output `y`.
pub fn relu_backward_in_place<F: Real>(y: &[F], dy: &mut [F]) {
    for (d, &v) in dy.iter_mut().zip(y) {
        if v <= F::zero() {
            *d = F::zero();
        }
    }
}
