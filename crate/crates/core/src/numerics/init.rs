use super::{Real, Rng, Tensor};
use crate::error::{KwsError, Result};

/// Uniform initialization on `[-L, L]` with `L = sqrt(6 / (fan_in + fan_out))`,
/// returned with shape `(fan_in, fan_out)`.
pub fn normalized_init<F: Real>(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Tensor<F>> {
    if fan_in == 0 || fan_out == 0 {
        return Err(KwsError::Config(format!(
            "normalized_init needs non-zero fans, got ({fan_in}, {fan_out})"
        )));
    }
    let limit = normalized_limit(fan_in, fan_out);
    let data = (0..fan_in * fan_out)
        .map(|_| F::of(rng.uniform(-limit, limit)))
        .collect();
    Tensor::from_vec(&[fan_in, fan_out], data)
}

pub fn normalized_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Biases start at zero.
pub fn zero_bias<F: Real>(n: usize) -> Tensor<F> {
    Tensor::zeros(&[n])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_40_by_64() {
        let l = normalized_limit(40, 64);
        assert!((l - 0.2402).abs() < 1e-4);
        let t: Tensor<f32> = normalized_init(40, 64, &mut Rng::new(3)).unwrap();
        assert_eq!(t.shape(), &[40, 64]);
        assert!(t.data().iter().all(|&x| (x as f64).abs() <= l));
    }

    #[test]
    fn bounds_1_by_2() {
        let t: Tensor<f64> = normalized_init(1, 2, &mut Rng::new(9)).unwrap();
        assert!(t.data().iter().all(|x| x.abs() <= 2f64.sqrt()));
    }

    #[test]
    fn zero_fan_rejected() {
        assert!(normalized_init::<f32>(0, 4, &mut Rng::new(0)).is_err());
        assert!(normalized_init::<f32>(4, 0, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn biases_are_zero() {
        assert!(zero_bias::<f32>(7).data().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn seed_is_bit_identical() {
        let a: Tensor<f32> = normalized_init(13, 17, &mut Rng::new(5)).unwrap();
        let b: Tensor<f32> = normalized_init(13, 17, &mut Rng::new(5)).unwrap();
        let bits = |t: &Tensor<f32>| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }
}
