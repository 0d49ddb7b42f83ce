use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Wrench6;

/// Isotropic zero-mean Gaussian measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    /// Per force axis, N. The default puts ±0.05 N at two sigma.
    pub sigma_force: f64,
    /// Per torque axis, N·m.
    pub sigma_torque: f64,
    pub seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            sigma_force: 0.025,
            sigma_torque: 0.005,
            seed: 0,
        }
    }
}

impl NoiseParams {
    pub fn noiseless() -> Self {
        NoiseParams {
            sigma_force: 0.0,
            sigma_torque: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_force >= 0.0 && self.sigma_torque >= 0.0 {
            Ok(())
        } else {
            Err(Error::invalid(format!("negative noise sigma: {self:?}")))
        }
    }
}

/// One independent noise stream, keyed by `(seed, stream_index)`.
///
/// Backed by ChaCha8 with the stream index in the cipher's stream word, so
/// sequences are identical across platforms and independent between
/// indices. Every call to [`NoiseStream::apply`] consumes exactly six
/// standard normals, whatever the sigmas.
pub struct NoiseStream {
    rng: ChaCha8Rng,
    sigma_force: f64,
    sigma_torque: f64,
}

impl NoiseStream {
    pub fn new(params: &NoiseParams, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(stream_index);
        NoiseStream {
            rng,
            sigma_force: params.sigma_force,
            sigma_torque: params.sigma_torque,
        }
    }

    pub fn apply(&mut self, w: Wrench6) -> Wrench6 {
        let z: [f64; 6] = std::array::from_fn(|_| StandardNormal.sample(&mut self.rng));
        let mut out = w.to_array();
        for (i, v) in out.iter_mut().enumerate() {
            let sigma = if i < 3 { self.sigma_force } else { self.sigma_torque };
            if sigma > 0.0 {
                *v += sigma * z[i];
            }
        }
        Wrench6::from_array(out)
    }
}

/// Add one draw of measurement noise from stream `stream_index`.
pub fn add_noise(w: Wrench6, params: &NoiseParams, stream_index: u64) -> Wrench6 {
    NoiseStream::new(params, stream_index).apply(w)
}
