use super::Denoiser;
use crate::{Error, Image, Result};

/// Posterior mean for pixels drawn independently and equiprobably from
/// `{0, 1}` and observed in Gaussian noise of variance `ν`.
///
/// `P(x=1 | r) = N(r;1,ν) / (N(r;1,ν) + N(r;0,ν)) = σ((2r − 1)/(2ν))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliMmseDenoiser {
    nu: f64,
}

impl BernoulliMmseDenoiser {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::Config(format!("noise variance must be finite and > 0, got {nu}")));
        }
        Ok(Self { nu })
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Denoiser for BernoulliMmseDenoiser {
    fn apply(&self, r: &Image) -> Result<Image> {
        let s = 1.0 / (2.0 * self.nu);
        Ok(r.map(|v| logistic((2.0 * v - 1.0) * s)))
    }

    fn noise_variance(&self) -> f64 {
        self.nu
    }

    fn name(&self) -> String {
        "bernoulli".into()
    }
}
