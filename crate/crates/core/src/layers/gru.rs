use super::init_gate_blocks;
use crate::error::{KwsError, Result};
use crate::numerics::{gemv_acc, gemv_t_acc, outer_acc, sigmoid, zero_bias, Real, Rng, Tensor};

/// GRU cell with one bias per gate and the reset gate applied to the state
/// before the recurrent product:
///
/// ```text
/// z  = σ([x, h] Wz + bz)        r = σ([x, h] Wr + br)
/// h~ = tanh([x, r∘h] Wc + bc)   h' = (1 - z)∘h + z∘h~
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct GruCell<F = f32> {
    /// `(in + n) × 2n`: update gate columns then reset gate columns.
    pub w_gates: Tensor<F>,
    pub b_gates: Tensor<F>,
    /// `(in + n) × n`: rows for `x` then rows for `r∘h`.
    pub w_cand: Tensor<F>,
    pub b_cand: Tensor<F>,
    input: usize,
    hidden: usize,
}

#[derive(Clone, Debug)]
pub struct GruTrace<F> {
    xh: Vec<F>,
    xrh: Vec<F>,
    h_prev: Vec<F>,
    z: Vec<F>,
    r: Vec<F>,
    cand: Vec<F>,
}

impl<F: Real> GruTrace<F> {
    pub fn candidate(&self) -> &[F] {
        &self.cand
    }

    pub fn update_gate(&self) -> &[F] {
        &self.z
    }
}

impl<F: Real> GruCell<F> {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Self {
            w_gates: init_gate_blocks(input + hidden, hidden, 2, rng)?,
            b_gates: zero_bias(2 * hidden),
            w_cand: init_gate_blocks(input + hidden, hidden, 1, rng)?,
            b_cand: zero_bias(hidden),
            input,
            hidden,
        })
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_gates: Tensor::zeros(&[input + hidden, 2 * hidden]),
            b_gates: Tensor::zeros(&[2 * hidden]),
            w_cand: Tensor::zeros(&[input + hidden, hidden]),
            b_cand: Tensor::zeros(&[hidden]),
            input,
            hidden,
        }
    }

    pub fn from_tensors(
        w_gates: Tensor<F>,
        b_gates: Tensor<F>,
        w_cand: Tensor<F>,
        b_cand: Tensor<F>,
        input: usize,
        hidden: usize,
    ) -> Result<Self> {
        let m = input + hidden;
        if w_gates.shape() != [m, 2 * hidden]
            || b_gates.shape() != [2 * hidden]
            || w_cand.shape() != [m, hidden]
            || b_cand.shape() != [hidden]
        {
            return Err(KwsError::Shape(format!("GRU({input}, {hidden}) tensor shapes")));
        }
        Ok(Self {
            w_gates,
            b_gates,
            w_cand,
            b_cand,
            input,
            hidden,
        })
    }

    pub fn param_count(input: usize, hidden: usize) -> usize {
        3 * (hidden * (input + hidden) + hidden)
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn step(&self, x: &[F], h: &[F]) -> Result<(Vec<F>, GruTrace<F>)> {
        let n = self.hidden;
        if x.len() != self.input || h.len() != n {
            return Err(KwsError::Shape(format!(
                "GRU({}, {n}) step with x={}, h={}",
                self.input,
                x.len(),
                h.len()
            )));
        }
        let mut xh = Vec::with_capacity(self.input + n);
        xh.extend_from_slice(x);
        xh.extend_from_slice(h);
        let mut pre = self.b_gates.data().to_vec();
        gemv_acc(&xh, self.w_gates.data(), &mut pre);
        let z: Vec<F> = pre[..n].iter().map(|&v| sigmoid(v)).collect();
        let r: Vec<F> = pre[n..].iter().map(|&v| sigmoid(v)).collect();

        let mut xrh = Vec::with_capacity(self.input + n);
        xrh.extend_from_slice(x);
        xrh.extend((0..n).map(|k| r[k] * h[k]));
        let mut cpre = self.b_cand.data().to_vec();
        gemv_acc(&xrh, self.w_cand.data(), &mut cpre);
        let cand: Vec<F> = cpre.iter().map(|v| v.tanh()).collect();

        let h_new = (0..n).map(|k| (F::one() - z[k]) * h[k] + z[k] * cand[k]).collect();
        let trace = GruTrace {
            xh,
            xrh,
            h_prev: h.to_vec(),
            z,
            r,
            cand,
        };
        Ok((h_new, trace))
    }

    /// Given `dL/dh'`, accumulates parameter gradients and returns
    /// `(dL/dx, dL/dh)`.
    pub fn backward(&self, tr: &GruTrace<F>, dh: &[F], grad: &mut GruCell<F>) -> (Vec<F>, Vec<F>) {
        let n = self.hidden;
        let one = F::one();
        let mut dgates = vec![F::zero(); 2 * n];
        let mut dcpre = vec![F::zero(); n];
        let mut dh_prev = vec![F::zero(); n];
        for k in 0..n {
            let z = tr.z[k];
            dgates[k] = dh[k] * (tr.cand[k] - tr.h_prev[k]) * z * (one - z);
            dcpre[k] = dh[k] * z * (one - tr.cand[k] * tr.cand[k]);
            dh_prev[k] = dh[k] * (one - z);
        }

        outer_acc(&tr.xrh, &dcpre, grad.w_cand.data_mut());
        for (g, &d) in grad.b_cand.data_mut().iter_mut().zip(&dcpre) {
            *g += d;
        }
        let mut dxrh = vec![F::zero(); self.input + n];
        gemv_t_acc(&dcpre, self.w_cand.data(), &mut dxrh);
        for k in 0..n {
            let drh = dxrh[self.input + k];
            let r = tr.r[k];
            dgates[n + k] = drh * tr.h_prev[k] * r * (one - r);
            dh_prev[k] += drh * r;
        }

        outer_acc(&tr.xh, &dgates, grad.w_gates.data_mut());
        for (g, &d) in grad.b_gates.data_mut().iter_mut().zip(&dgates) {
            *g += d;
        }
        let mut dxh = vec![F::zero(); self.input + n];
        gemv_t_acc(&dgates, self.w_gates.data(), &mut dxh);

        let mut dx = dxrh;
        dx.truncate(self.input);
        for (d, &v) in dx.iter_mut().zip(&dxh[..self.input]) {
            *d += v;
        }
        for (d, &v) in dh_prev.iter_mut().zip(&dxh[self.input..]) {
            *d += v;
        }
        (dx, dh_prev)
    }
}
