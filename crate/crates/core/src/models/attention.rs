use crate::error::{KwsError, Result};
use crate::numerics::{gemv_acc, gemv_t_acc, normalized_init, outer_acc, softmax, zero_bias, Real, Rng, Tensor};

/// Learned scorer `e_t = vᵀ tanh(W h_t + b)`. `w` is stored input-major
/// (`d × d`, row `i` holds the weights from `h_t[i]`).
#[derive(Clone, Debug, PartialEq)]
pub struct SoftAttention<F = f32> {
    pub w: Tensor<F>,
    pub b: Tensor<F>,
    pub v: Tensor<F>,
}

/// Forward results of soft attention kept for the backward pass.
#[derive(Clone, Debug)]
pub struct SoftAttentionTrace<F> {
    pub scores: Vec<F>,
    pub alpha: Vec<F>,
    hidden: Vec<Vec<F>>,
}

impl<F: Real> SoftAttention<F> {
    pub fn new(d: usize, rng: &mut Rng) -> Result<Self> {
        let v: Tensor<F> = normalized_init(d, 1, rng)?;
        Ok(Self {
            w: normalized_init(d, d, rng)?,
            b: zero_bias(d),
            v: Tensor::from_vec(&[d], v.into_data())?,
        })
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            w: Tensor::zeros(&[d, d]),
            b: Tensor::zeros(&[d]),
            v: Tensor::zeros(&[d]),
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    fn hidden(&self, h: &[F]) -> Vec<F> {
        let mut u = self.b.data().to_vec();
        gemv_acc(h, self.w.data(), &mut u);
        u.iter_mut().for_each(|x| *x = x.tanh());
        u
    }

    /// Scalar score of one encoder frame.
    pub fn score(&self, h: &[F]) -> Result<F> {
        if h.len() != self.dim() {
            return Err(KwsError::Shape(format!(
                "attention expects {}-wide frames, got {}",
                self.dim(),
                h.len()
            )));
        }
        Ok(dot(self.v.data(), &self.hidden(h)))
    }

    /// `(c, trace)` over the rows of `h`.
    pub fn forward(&self, h: &Tensor<F>) -> Result<(Vec<F>, SoftAttentionTrace<F>)> {
        if h.row_len() != self.dim() || h.rows() == 0 {
            return Err(KwsError::Shape(format!(
                "attention expects T × {} frames, got {:?}",
                self.dim(),
                h.shape()
            )));
        }
        let hidden: Vec<Vec<F>> = (0..h.rows()).map(|t| self.hidden(h.row(t))).collect();
        let scores: Vec<F> = hidden.iter().map(|u| dot(self.v.data(), u)).collect();
        let alpha = softmax(&scores);
        let c = pool((0..h.rows()).map(|t| h.row(t)), &alpha);
        Ok((c, SoftAttentionTrace { scores, alpha, hidden }))
    }

    /// Accumulates parameter gradients and adds `dL/dh` into `dh`.
    pub fn backward(
        &self,
        h: &Tensor<F>,
        tr: &SoftAttentionTrace<F>,
        dc: &[F],
        grad: &mut SoftAttention<F>,
        dh: &mut Tensor<F>,
    ) {
        let d = self.dim();
        let dalpha: Vec<F> = (0..h.rows()).map(|t| dot(dc, h.row(t))).collect();
        let mean = dot(&tr.alpha, &dalpha);
        let mut dpre = vec![F::zero(); d];
        for t in 0..h.rows() {
            let a = tr.alpha[t];
            for (g, &x) in dh.row_mut(t).iter_mut().zip(dc) {
                *g += a * x;
            }
            let de = a * (dalpha[t] - mean);
            let u = &tr.hidden[t];
            for k in 0..d {
                grad.v.data_mut()[k] += de * u[k];
                dpre[k] = de * self.v.data()[k] * (F::one() - u[k] * u[k]);
            }
            outer_acc(h.row(t), &dpre, grad.w.data_mut());
            for (g, &x) in grad.b.data_mut().iter_mut().zip(&dpre) {
                *g += x;
            }
            gemv_t_acc(&dpre, self.w.data(), dh.row_mut(t));
        }
    }
}

fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |s, (&x, &y)| s + x * y)
}

/// `Σ alpha_t h_t`, accumulated in row order.
pub fn pool<'a, F: Real>(rows: impl IntoIterator<Item = &'a [F]>, alpha: &[F]) -> Vec<F> {
    let mut c: Vec<F> = Vec::new();
    for (row, &a) in rows.into_iter().zip(alpha) {
        if c.is_empty() {
            c = vec![F::zero(); row.len()];
        }
        for (ci, &x) in c.iter_mut().zip(row) {
            *ci += a * x;
        }
    }
    c
}

/// Uniform weights `1/T`.
pub fn uniform_weights<F: Real>(t: usize) -> Vec<F> {
    vec![F::one() / F::of(t as f64); t]
}

/// Mean of the rows of `h`.
pub fn attend_average<F: Real>(h: &Tensor<F>) -> Result<Vec<F>> {
    if h.rows() == 0 {
        return Err(KwsError::Shape("attention over an empty sequence".into()));
    }
    Ok(pool((0..h.rows()).map(|t| h.row(t)), &uniform_weights(h.rows())))
}

/// Soft attention context vector and weights.
pub fn attend_soft<F: Real>(h: &Tensor<F>, p: &SoftAttention<F>) -> Result<(Vec<F>, Vec<F>)> {
    let (c, tr) = p.forward(h)?;
    Ok((c, tr.alpha))
}
