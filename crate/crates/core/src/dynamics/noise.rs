use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ensemble::hz;
use crate::error::{Error, Result};

/// Optional stochastic cavity drive, off unless configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// RMS amplitude (field units per second).
    pub amplitude: f64,
    /// Noise tones are drawn uniformly from ±bandwidth_hz around the frame.
    pub bandwidth_hz: f64,
    #[serde(default = "NoiseConfig::default_tones")]
    pub tones: usize,
    pub seed: u64,
}

impl NoiseConfig {
    fn default_tones() -> usize {
        64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.bandwidth_hz > 0.0 && self.tones > 0) {
            return Err(Error::Domain(
                "noise needs amplitude >= 0, bandwidth_hz > 0 and tones > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Complex noise synthesized as a sum of random-phase tones. It is smooth in
/// time, so the adaptive integrator can resolve it, and fully determined by
/// the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDrive {
    scale: f64,
    tones: Vec<(f64, f64)>,
}

impl NoiseDrive {
    pub fn new(config: &NoiseConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let bw = hz(config.bandwidth_hz);
        let tones = (0..config.tones)
            .map(|_| {
                let omega = rng.random_range(-bw..bw);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                (omega, phase)
            })
            .collect();
        Ok(Self {
            scale: config.amplitude / (config.tones as f64).sqrt(),
            tones,
        })
    }

    pub fn value_at(&self, t: f64) -> Complex64 {
        self.tones
            .iter()
            .map(|&(w, phi)| Complex64::from_polar(self.scale, w * t + phi))
            .sum()
    }
}
