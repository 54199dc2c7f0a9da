use super::{Dd, Real, Tensor};
use crate::error::{KwsError, Result};

/// A scalar-valued function of several tensors with an analytic gradient.
pub trait Differentiable {
    fn value(&self, inputs: &[Tensor<f64>]) -> Result<f64>;
    /// Gradient of `value` with respect to every input, same shapes as inputs.
    fn gradient(&self, inputs: &[Tensor<f64>]) -> Result<Vec<Tensor<f64>>>;
    /// `value` evaluated in double-double precision, when supported.
    fn value_extended(&self, _inputs: &[Tensor<f64>]) -> Option<Result<Dd>> {
        None
    }
}

impl<V, G> Differentiable for (V, G)
where
    V: Fn(&[Tensor<f64>]) -> Result<f64>,
    G: Fn(&[Tensor<f64>]) -> Result<Vec<Tensor<f64>>>,
{
    fn value(&self, inputs: &[Tensor<f64>]) -> Result<f64> {
        (self.0)(inputs)
    }
    fn gradient(&self, inputs: &[Tensor<f64>]) -> Result<Vec<Tensor<f64>>> {
        (self.1)(inputs)
    }
}

pub const DEFAULT_EPS: f64 = 1e-5;
/// Relative perturbation for [`grad_check_extended`].
pub const EXTENDED_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (input index, flat coordinate) where the maximum was found.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// Compares the analytic gradient with central differences at every input
/// coordinate, using a perturbation of `eps * (|x| + 1)`.
///
/// The relative error per coordinate is
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
/// A coordinate whose one-sided slopes disagree by a large margin is a kink
/// and is reported as [`KwsError::NotDifferentiable`].
pub fn grad_check(op: &dyn Differentiable, inputs: &[Tensor<f64>], eps: f64) -> Result<GradCheckReport> {
    let analytic = checked_gradient(op, inputs)?;
    let f0 = Dd::from_f64(op.value(inputs)?);
    let mut probe = inputs.to_vec();
    let mut report = GradCheckReport::empty();
    for (ti, grad) in analytic.iter().enumerate() {
        for j in 0..grad.len() {
            let (numeric, left, right) = difference(&mut probe, inputs, (ti, j), eps, f0, |xs| {
                op.value(xs).map(Dd::from_f64)
            })?
            .ok_or_else(|| KwsError::Config(format!("step {eps} vanishes at input {ti} coordinate {j}")))?;
            if is_kink(left, right, 1e-2, 1e-2) {
                return Err(kink_error(ti, j, left, right));
            }
            let a = grad.data()[j];
            report.record((ti, j), relative_error(a, numeric), a, numeric);
        }
    }
    Ok(report)
}

/// Like [`grad_check`], but coordinates the `f64` differences cannot settle
/// are re-evaluated in double-double precision through
/// [`Differentiable::value_extended`] with a step of `eps * (|x| + 1)`.
///
/// In `f64` the central difference carries a rounding error of roughly
/// `ε·|f| / h ≈ 1e-11`, which exceeds the tolerance on coordinates whose true
/// derivative is below about `1e-7`; any model with thousands of parameters
/// has some. Every coordinate is first screened with the `f64` difference at
/// [`DEFAULT_EPS`]. Those that agree with the analytic value to within
/// [`SCREEN_TOLERANCE`] are accepted with that error; the rest (including
/// apparent kinks) are settled by the extended reference, whose step is small
/// enough that piecewise-linear units rarely change regime within it.
pub fn grad_check_extended(op: &dyn Differentiable, inputs: &[Tensor<f64>], eps: f64) -> Result<GradCheckReport> {
    let f0_ext = op
        .value_extended(inputs)
        .ok_or_else(|| KwsError::Config("operation has no extended-precision evaluation".into()))??;
    let analytic = checked_gradient(op, inputs)?;
    let f0 = Dd::from_f64(op.value(inputs)?);
    let mut probe = inputs.to_vec();
    let mut report = GradCheckReport::empty();
    for (ti, grad) in analytic.iter().enumerate() {
        for j in 0..grad.len() {
            let a = grad.data()[j];
            let screened = difference(&mut probe, inputs, (ti, j), DEFAULT_EPS, f0, |xs| {
                op.value(xs).map(Dd::from_f64)
            })?;
            let rel = match screened {
                Some((numeric, left, right)) if !is_kink(left, right, 1e-2, 1e-2) => {
                    let rel = relative_error(a, numeric);
                    (rel <= SCREEN_TOLERANCE).then_some((rel, numeric))
                }
                _ => None,
            };
            let (rel, numeric) = match rel {
                Some(r) => r,
                None => {
                    let (numeric, left, right) = difference(&mut probe, inputs, (ti, j), eps, f0_ext, |xs| {
                        op.value_extended(xs).expect("support checked above")
                    })?
                    .expect("finite step");
                    if is_kink(left, right, 1e-3, 1e-6) {
                        return Err(kink_error(ti, j, left, right));
                    }
                    (relative_error(a, numeric), numeric)
                }
            };
            report.record((ti, j), rel, a, numeric);
        }
    }
    Ok(report)
}

/// Agreement at which an `f64` screening difference is accepted without
/// extended re-evaluation.
pub const SCREEN_TOLERANCE: f64 = 1e-6;

impl GradCheckReport {
    fn empty() -> Self {
        Self {
            max_rel_error: 0.0,
            worst: (0, 0),
            analytic: 0.0,
            numeric: 0.0,
            coordinates: 0,
        }
    }

    fn record(&mut self, at: (usize, usize), rel: f64, analytic: f64, numeric: f64) {
        self.coordinates += 1;
        if rel > self.max_rel_error || !rel.is_finite() {
            self.max_rel_error = rel;
            self.worst = at;
            self.analytic = analytic;
            self.numeric = numeric;
        }
    }
}

fn checked_gradient(op: &dyn Differentiable, inputs: &[Tensor<f64>]) -> Result<Vec<Tensor<f64>>> {
    let analytic = op.gradient(inputs)?;
    if analytic.len() != inputs.len() {
        return Err(KwsError::Shape(format!(
            "gradient has {} tensors for {} inputs",
            analytic.len(),
            inputs.len()
        )));
    }
    for (a, x) in analytic.iter().zip(inputs) {
        a.check_same_shape(x)?;
    }
    Ok(analytic)
}

fn relative_error(a: f64, numeric: f64) -> f64 {
    (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8)
}

fn is_kink(left: f64, right: f64, rel: f64, abs: f64) -> bool {
    (right - left).abs() > (rel * right.abs().max(left.abs())).max(abs)
}

fn kink_error(ti: usize, j: usize, left: f64, right: f64) -> KwsError {
    KwsError::NotDifferentiable(format!(
        "input {ti} coordinate {j}: left slope {left:.6e}, right slope {right:.6e}"
    ))
}

/// Central difference and one-sided slopes at one coordinate. The perturbed
/// points are exact `f64` values and their distances from `x` are exact in
/// double-double. `None` when the step vanishes at this magnitude.
fn difference(
    probe: &mut [Tensor<f64>],
    inputs: &[Tensor<f64>],
    (ti, j): (usize, usize),
    eps: f64,
    f0: Dd,
    value: impl Fn(&[Tensor<f64>]) -> Result<Dd>,
) -> Result<Option<(f64, f64, f64)>> {
    let x = inputs[ti].data()[j];
    let step = eps * (x.abs() + 1.0);
    let (xp, xm) = (x + step, x - step);
    if xp == x || xm == x {
        return Ok(None);
    }
    probe[ti].data_mut()[j] = xp;
    let fp = value(probe);
    probe[ti].data_mut()[j] = xm;
    let fm = value(probe);
    probe[ti].data_mut()[j] = x;
    let (fp, fm) = (fp?, fm?);
    let hp = Dd::from_f64(xp) - Dd::from_f64(x);
    let hm = Dd::from_f64(x) - Dd::from_f64(xm);
    Ok(Some((
        ((fp - fm) / (hp + hm)).as_f64(),
        ((f0 - fm) / hm).as_f64(),
        ((fp - f0) / hp).as_f64(),
    )))
}
