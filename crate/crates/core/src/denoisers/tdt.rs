use super::{haar, Denoiser};
use crate::{Error, Image, Result};

/// Transform-domain thresholding: Haar analysis, soft threshold, synthesis.
///
/// The threshold is applied to every coefficient, the coarsest scaling
/// coefficient included, so constant images shrink slightly.
#[derive(Debug, Clone, PartialEq)]
pub struct TdtDenoiser {
    threshold: f64,
    nu: f64,
}

impl TdtDenoiser {
    pub fn new(threshold: f64, nu: f64) -> Result<Self> {
        if !(threshold >= 0.0) || !threshold.is_finite() {
            return Err(Error::Config(format!("TDT threshold must be finite and >= 0, got {threshold}")));
        }
        if !(nu > 0.0) {
            return Err(Error::Config(format!("noise variance must be > 0, got {nu}")));
        }
        Ok(Self { threshold, nu })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

pub(crate) fn soft_threshold(c: f64, tau: f64) -> f64 {
    c.signum() * (c.abs() - tau).max(0.0)
}

impl Denoiser for TdtDenoiser {
    fn apply(&self, x: &Image) -> Result<Image> {
        let coeffs = haar::forward(x)?;
        let tau = self.threshold;
        haar::inverse(&coeffs.map(|c| soft_threshold(c, tau)))
    }

    fn noise_variance(&self) -> f64 {
        self.nu
    }

    fn name(&self) -> String {
        "tdt".into()
    }
}
