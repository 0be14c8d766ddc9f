//! Oracle backends for benchmark instances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{noise_wrap, temperature_wrap, ModelBackend, OracleSupport};

/// Distortions applied to each instance's oracle model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleBackendSpec {
    /// Sharpening (< 1) or flattening (> 1) of masked rows.
    pub temperature: f64,
    /// Mixture weight of the uniform row.
    pub noise: f64,
}

impl Default for OracleBackendSpec {
    fn default() -> Self {
        Self { temperature: 1.0, noise: 0.0 }
    }
}

impl OracleBackendSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid(format!("temperature must be positive, got {}", self.temperature)));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::invalid(format!("noise must be in [0, 1], got {}", self.noise)));
        }
        Ok(())
    }

    /// The oracle over `support`, tempered then noised; undistorted
    /// settings return the bare oracle.
    pub fn build<'a>(&self, support: &'a OracleSupport) -> Result<Box<dyn ModelBackend + 'a>> {
        self.validate()?;
        Ok(match (self.temperature != 1.0, self.noise != 0.0) {
            (false, false) => Box::new(support),
            (true, false) => Box::new(temperature_wrap(support, self.temperature)?),
            (false, true) => Box::new(noise_wrap(support, self.noise)?),
            (true, true) => Box::new(noise_wrap(temperature_wrap(support, self.temperature)?, self.noise)?),
        })
    }
}
