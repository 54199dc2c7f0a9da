use super::init_gate_blocks;
use crate::error::{KwsError, Result};
use crate::numerics::{gemv_acc, gemv_t_acc, outer_acc, sigmoid, zero_bias, Real, Rng, Tensor};

/// LSTM cell without peepholes or projection. Gate blocks are stored
/// side by side in one `(in + n) × 4n` matrix in the order input, forget,
/// candidate, output, each acting on `[x, h]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCell<F = f32> {
    pub w: Tensor<F>,
    pub b: Tensor<F>,
    input: usize,
    hidden: usize,
}

/// Activations of one step, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct LstmTrace<F> {
    xh: Vec<F>,
    i: Vec<F>,
    f: Vec<F>,
    g: Vec<F>,
    o: Vec<F>,
    c_prev: Vec<F>,
    tanh_c: Vec<F>,
}

impl<F: Real> LstmCell<F> {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Self {
            w: init_gate_blocks(input + hidden, hidden, 4, rng)?,
            b: zero_bias(4 * hidden),
            input,
            hidden,
        })
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Tensor::zeros(&[input + hidden, 4 * hidden]),
            b: Tensor::zeros(&[4 * hidden]),
            input,
            hidden,
        }
    }

    pub fn from_tensors(w: Tensor<F>, b: Tensor<F>, input: usize, hidden: usize) -> Result<Self> {
        if w.shape() != [input + hidden, 4 * hidden] || b.shape() != [4 * hidden] {
            return Err(KwsError::Shape(format!(
                "LSTM({input}, {hidden}) tensors have shapes {:?} / {:?}",
                w.shape(),
                b.shape()
            )));
        }
        Ok(Self { w, b, input, hidden })
    }

    pub fn param_count(input: usize, hidden: usize) -> usize {
        4 * (hidden * (input + hidden) + hidden)
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    /// One step: returns `(h', c')` and the trace for [`LstmCell::backward`].
    pub fn step(&self, x: &[F], h: &[F], c: &[F]) -> Result<(Vec<F>, Vec<F>, LstmTrace<F>)> {
        let n = self.hidden;
        if x.len() != self.input || h.len() != n || c.len() != n {
            return Err(KwsError::Shape(format!(
                "LSTM({}, {n}) step with x={}, h={}, c={}",
                self.input,
                x.len(),
                h.len(),
                c.len()
            )));
        }
        let mut xh = Vec::with_capacity(self.input + n);
        xh.extend_from_slice(x);
        xh.extend_from_slice(h);
        let mut pre = self.b.data().to_vec();
        gemv_acc(&xh, self.w.data(), &mut pre);

        let i: Vec<F> = pre[..n].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<F> = pre[n..2 * n].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<F> = pre[2 * n..3 * n].iter().map(|&v| v.tanh()).collect();
        let o: Vec<F> = pre[3 * n..].iter().map(|&v| sigmoid(v)).collect();
        let c_new: Vec<F> = (0..n).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<F> = c_new.iter().map(|v| v.tanh()).collect();
        let h_new: Vec<F> = (0..n).map(|k| o[k] * tanh_c[k]).collect();
        let trace = LstmTrace {
            xh,
            i,
            f,
            g,
            o,
            c_prev: c.to_vec(),
            tanh_c,
        };
        Ok((h_new, c_new, trace))
    }

    /// Given `dL/dh'` and `dL/dc'`, accumulates parameter gradients and
    /// returns `(dL/dx, dL/dh, dL/dc)`.
    pub fn backward(&self, tr: &LstmTrace<F>, dh: &[F], dc: &[F], grad: &mut LstmCell<F>) -> (Vec<F>, Vec<F>, Vec<F>) {
        let n = self.hidden;
        let one = F::one();
        let mut dpre = vec![F::zero(); 4 * n];
        let mut dc_prev = vec![F::zero(); n];
        for k in 0..n {
            let dct = dc[k] + dh[k] * tr.o[k] * (one - tr.tanh_c[k] * tr.tanh_c[k]);
            dpre[k] = dct * tr.g[k] * tr.i[k] * (one - tr.i[k]);
            dpre[n + k] = dct * tr.c_prev[k] * tr.f[k] * (one - tr.f[k]);
            dpre[2 * n + k] = dct * tr.i[k] * (one - tr.g[k] * tr.g[k]);
            dpre[3 * n + k] = dh[k] * tr.tanh_c[k] * tr.o[k] * (one - tr.o[k]);
            dc_prev[k] = dct * tr.f[k];
        }
        outer_acc(&tr.xh, &dpre, grad.w.data_mut());
        for (g, &d) in grad.b.data_mut().iter_mut().zip(&dpre) {
            *g += d;
        }
        let mut dxh = vec![F::zero(); self.input + n];
        gemv_t_acc(&dpre, self.w.data(), &mut dxh);
        let dh_prev = dxh.split_off(self.input);
        (dxh, dh_prev, dc_prev)
    }
}
