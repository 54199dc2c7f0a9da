use super::{Real, Tensor};
use crate::error::{KwsError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coupled L2 decay: the effective gradient is `grad + l2 * param`.
    pub l2: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            l2: 0.0,
        }
    }
}

/// Moment accumulators, one pair per parameter tensor.
#[derive(Clone, Debug)]
pub struct AdamState<F = f32> {
    m: Vec<Tensor<F>>,
    v: Vec<Tensor<F>>,
    step: u64,
}

impl<F: Real> AdamState<F> {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor<F>>) -> Self {
        let m: Vec<Tensor<F>> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        let v = m.clone();
        Self { m, v, step: 0 }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// Adds `l2 * param` to each gradient.
pub fn add_l2<F: Real>(grads: &mut [&mut Tensor<F>], params: &[&Tensor<F>], l2: f64) -> Result<()> {
    if grads.len() != params.len() {
        return Err(KwsError::Shape(format!(
            "{} gradients for {} parameters",
            grads.len(),
            params.len()
        )));
    }
    if l2 == 0.0 {
        return Ok(());
    }
    for (g, p) in grads.iter_mut().zip(params) {
        g.axpy(F::of(l2), p)?;
    }
    Ok(())
}

/// One bias-corrected Adam update.
pub fn adam_step<F: Real>(
    params: &mut [&mut Tensor<F>],
    grads: &[&Tensor<F>],
    state: &mut AdamState<F>,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(KwsError::Shape(format!(
            "adam: {} params, {} grads, {} state slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        p.check_same_shape(g)?;
        p.check_same_shape(m)?;
        if !g.is_finite() {
            return Err(KwsError::NonFinite("gradient".into()));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (F::of(cfg.beta1), F::of(cfg.beta2));
    let bc1 = F::of(1.0 - cfg.beta1.powi(t));
    let bc2 = F::of(1.0 - cfg.beta2.powi(t));
    let lr = F::of(cfg.lr);
    let eps = F::of(cfg.eps);
    let l2 = F::of(cfg.l2);
    let one = F::one();

    for (i, p) in params.iter_mut().enumerate() {
        let g = grads[i].data();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (j, w) in p.data_mut().iter_mut().enumerate() {
            let gj = g[j] + l2 * *w;
            m[j] = b1 * m[j] + (one - b1) * gj;
            v[j] = b2 * v[j] + (one - b2) * gj * gj;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

pub fn global_norm<F: Real>(grads: &[&Tensor<F>]) -> f64 {
    grads.iter().map(|g| g.sum_squares()).sum::<f64>().sqrt()
}

/// Rescales all gradients jointly so their global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm<F: Real>(grads: &mut [&mut Tensor<F>], max_norm: f64) -> Result<f64> {
    if !(max_norm > 0.0) {
        return Err(KwsError::Config(format!("max_norm must be positive, got {max_norm}")));
    }
    let norm = grads.iter().map(|g| g.sum_squares()).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(KwsError::NonFinite("gradient norm".into()));
    }
    if norm > max_norm {
        let k = F::of(max_norm / norm);
        for g in grads.iter_mut() {
            g.scale(k);
        }
    }
    Ok(norm)
}
