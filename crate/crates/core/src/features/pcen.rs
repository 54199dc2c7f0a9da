use serde::{Deserialize, Serialize};

use crate::error::{KwsError, Result};

/// Per-channel energy normalization constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcenConfig {
    /// Smoother coefficient.
    pub s: f64,
    pub alpha: f64,
    pub delta: f64,
    pub r: f64,
    pub eps: f64,
}

impl Default for PcenConfig {
    fn default() -> Self {
        Self {
            s: 0.025,
            alpha: 0.98,
            delta: 2.0,
            r: 0.5,
            eps: 1e-6,
        }
    }
}

impl PcenConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.s > 0.0
            && self.s <= 1.0
            && self.alpha > 0.0
            && self.alpha <= 1.0
            && self.delta > 0.0
            && self.r > 0.0
            && self.r <= 1.0
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(KwsError::Config(format!("invalid PCEN parameters {self:?}")))
        }
    }
}

/// Causal PCEN state for one stream of frames. The smoother is seeded with
/// the first frame it sees.
#[derive(Clone, Debug)]
pub struct PcenState {
    cfg: PcenConfig,
    delta_r: f64,
    smooth: Option<Vec<f64>>,
}

impl PcenState {
    pub fn new(cfg: PcenConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            delta_r: cfg.delta.powf(cfg.r),
            cfg,
            smooth: None,
        })
    }

    pub fn reset(&mut self) {
        self.smooth = None;
    }

    pub fn is_seeded(&self) -> bool {
        self.smooth.is_some()
    }

    pub fn step(&mut self, e: &[f64]) -> Result<Vec<f64>> {
        if e.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(KwsError::Audio("PCEN input must be finite and non-negative".into()));
        }
        let cfg = &self.cfg;
        match &mut self.smooth {
            None => self.smooth = Some(e.to_vec()),
            Some(m) => {
                if m.len() != e.len() {
                    return Err(KwsError::Shape(format!(
                        "frame has {} channels, expected {}",
                        e.len(),
                        m.len()
                    )));
                }
                for (m, &x) in m.iter_mut().zip(e) {
                    *m = (1.0 - cfg.s) * *m + cfg.s * x;
                }
            }
        }
        let smooth = self.smooth.as_ref().expect("seeded above");
        Ok(e.iter()
            .zip(smooth)
            .map(|(&x, &m)| (x / (cfg.eps + m).powf(cfg.alpha) + cfg.delta).powf(cfg.r) - self.delta_r)
            .collect())
    }
}

/// Applies PCEN along time, independently per channel:
///
/// ```text
/// M(t) = (1 - s) M(t-1) + s E(t),   M(0) = E(0)
/// out  = (E / (eps + M)^alpha + delta)^r - delta^r
/// ```
pub fn pcen(energies: &[Vec<f64>], cfg: &PcenConfig) -> Result<Vec<Vec<f64>>> {
    let mut state = PcenState::new(*cfg)?;
    energies
        .iter()
        .enumerate()
        .map(|(t, e)| {
            state.step(e).map_err(|err| match err {
                KwsError::Shape(m) => KwsError::Shape(format!("frame {t}: {m}")),
                other => other,
            })
        })
        .collect()
}
