use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlannerScalar};

use crate::error::{KwsError, Result};

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular HTK-scale filters over the magnitude-squared spectrum of
/// zero-padded frames.
#[derive(Clone)]
pub struct MelFilterbank {
    n_fft: usize,
    n_mels: usize,
    /// `n_mels × (n_fft/2 + 1)`, row-major.
    weights: Vec<f64>,
    centers_hz: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MelFilterbank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MelFilterbank")
            .field("n_fft", &self.n_fft)
            .field("n_mels", &self.n_mels)
            .finish()
    }
}

impl MelFilterbank {
    pub fn new(sample_rate: u32, n_fft: usize, n_mels: usize, fmin: f64, fmax: f64) -> Result<Self> {
        let nyquist = sample_rate as f64 / 2.0;
        if n_mels == 0 || n_fft < 2 || !(0.0 <= fmin && fmin < fmax && fmax <= nyquist) {
            return Err(KwsError::Config(format!(
                "mel filterbank: n_mels={n_mels} n_fft={n_fft} range [{fmin}, {fmax}] Hz at {sample_rate} Hz"
            )));
        }
        let n_bins = n_fft / 2 + 1;
        if n_mels + 2 > n_bins {
            return Err(KwsError::Config(format!(
                "{n_mels} mel channels exceed the resolution of a {n_fft}-point FFT"
            )));
        }
        let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / n_fft as f64;

        let mut weights = vec![0.0; n_mels * n_bins];
        for m in 0..n_mels {
            let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
            let row = &mut weights[m * n_bins..(m + 1) * n_bins];
            for (k, w) in row.iter_mut().enumerate() {
                let f = k as f64 * bin_hz;
                *w = if f > l && f <= c {
                    (f - l) / (c - l)
                } else if f > c && f < r {
                    (r - f) / (r - c)
                } else {
                    0.0
                };
            }
            if row.iter().all(|&w| w == 0.0) {
                return Err(KwsError::Config(format!(
                    "mel channel {m} ({l:.1}-{r:.1} Hz) covers no FFT bin; \
                     {n_mels} channels exceed the resolution of a {n_fft}-point FFT"
                )));
            }
        }

        // The scalar planner keeps the butterfly order fixed across CPUs.
        let fft = FftPlannerScalar::new().plan_fft_forward(n_fft);
        Ok(Self {
            n_fft,
            n_mels,
            weights,
            centers_hz: edges[1..=n_mels].to_vec(),
            fft,
        })
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn center_hz(&self, channel: usize) -> f64 {
        self.centers_hz[channel]
    }

    pub fn power_spectrum(&self, frame: &[f64]) -> Result<Vec<f64>> {
        if frame.len() > self.n_fft {
            return Err(KwsError::Shape(format!(
                "frame of {} samples exceeds FFT size {}",
                frame.len(),
                self.n_fft
            )));
        }
        let mut buf: Vec<Complex<f64>> = frame.iter().map(|&x| Complex::new(x, 0.0)).collect();
        buf.resize(self.n_fft, Complex::new(0.0, 0.0));
        self.fft.process(&mut buf);
        Ok(buf[..self.n_fft / 2 + 1].iter().map(|c| c.norm_sqr()).collect())
    }

    /// Mel energies for one windowed frame.
    pub fn energies(&self, frame: &[f64]) -> Result<Vec<f64>> {
        let p = self.power_spectrum(frame)?;
        let n_bins = p.len();
        Ok((0..self.n_mels)
            .map(|m| {
                self.weights[m * n_bins..(m + 1) * n_bins]
                    .iter()
                    .zip(&p)
                    .map(|(w, e)| w * e)
                    .sum()
            })
            .collect())
    }
}

/// `T × n_mels` energies, one row per frame.
pub fn mel_energies(frames: &[Vec<f64>], bank: &MelFilterbank) -> Result<Vec<Vec<f64>>> {
    if frames.is_empty() {
        return Err(KwsError::Audio("no frames".into()));
    }
    frames.iter().map(|f| bank.energies(f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::frames::hann;

    fn bank() -> MelFilterbank {
        MelFilterbank::new(16000, 512, 40, 20.0, 8000.0).unwrap()
    }

    #[test]
    fn htk_scale_round_trip() {
        for f in [0.0, 20.0, 700.0, 4000.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
        assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn silence_gives_zero() {
        let e = bank().energies(&[0.0; 400]).unwrap();
        assert!(e.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn tone_at_center_peaks_in_its_channel() {
        let b = bank();
        let w = hann(400);
        for k in [5, 12, 20, 30, 38] {
            let f = b.center_hz(k);
            let frame: Vec<f64> = (0..400)
                .map(|n| (std::f64::consts::TAU * f * n as f64 / 16000.0).sin() * w[n])
                .collect();
            let e = b.energies(&frame).unwrap();
            let argmax = (0..40).max_by(|&a, &c| e[a].total_cmp(&e[c])).unwrap();
            assert_eq!(argmax, k, "tone at {f:.1} Hz");
        }
    }

    #[test]
    fn amplitude_scaling_is_quadratic_and_sign_invariant() {
        let b = bank();
        let frame: Vec<f64> = (0..400).map(|n| ((n * 37 % 101) as f64 / 101.0) - 0.5).collect();
        let e1 = b.energies(&frame).unwrap();
        let twice: Vec<f64> = frame.iter().map(|x| 2.0 * x).collect();
        let neg: Vec<f64> = frame.iter().map(|x| -x).collect();
        let e2 = b.energies(&twice).unwrap();
        let en = b.energies(&neg).unwrap();
        for m in 0..40 {
            assert!((e2[m] - 4.0 * e1[m]).abs() <= 1e-9 * e1[m].max(1e-12));
            assert_eq!(en[m], e1[m]);
        }
    }

    #[test]
    fn too_many_channels_rejected() {
        assert!(MelFilterbank::new(16000, 512, 256, 20.0, 8000.0).is_err());
        assert!(MelFilterbank::new(16000, 64, 40, 20.0, 8000.0).is_err());
    }
}
