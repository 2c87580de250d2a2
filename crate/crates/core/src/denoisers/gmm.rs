use super::Denoiser;
use crate::{Error, Image, Result};

/// `log Σ exp(aᵢ)` with max subtraction. Empty input gives `-∞`.
pub(crate) fn log_sum_exp(a: &[f64]) -> f64 {
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + a.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Exact posterior mean under an equal-weight Gaussian mixture centred on
/// the training points, each with covariance `νI`.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmMmseDenoiser {
    centers: Vec<Image>,
    nu: f64,
}

impl GmmMmseDenoiser {
    pub fn new(centers: Vec<Image>, nu: f64) -> Result<Self> {
        let first = centers
            .first()
            .ok_or_else(|| Error::Config("mixture needs at least one center".into()))?;
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::Config(format!("bandwidth must be finite and > 0, got {nu}")));
        }
        for c in &centers {
            c.check_shape(first, "mixture centers")?;
        }
        Ok(Self { centers, nu })
    }

    pub fn centers(&self) -> &[Image] {
        &self.centers
    }

    /// `−‖r − xₜ‖²/(2ν)` for every center.
    pub(crate) fn log_kernels(&self, r: &Image) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.centers.len());
        for c in &self.centers {
            r.check_shape(c, "mixture input")?;
            out.push(-r.dist_sq(c) / (2.0 * self.nu));
        }
        Ok(out)
    }

    /// Posterior responsibilities `p(t | r)`.
    pub fn posterior_weights(&self, r: &Image) -> Result<Vec<f64>> {
        let logk = self.log_kernels(r)?;
        let lse = log_sum_exp(&logk);
        Ok(logk.iter().map(|l| (l - lse).exp()).collect())
    }
}

impl Denoiser for GmmMmseDenoiser {
    fn apply(&self, r: &Image) -> Result<Image> {
        let weights = self.posterior_weights(r)?;
        let mut out = Image::zeros(r.width(), r.height());
        for (c, w) in self.centers.iter().zip(weights) {
            out = out.lincomb(1.0, c, w);
        }
        Ok(out)
    }

    fn noise_variance(&self) -> f64 {
        self.nu
    }

    fn name(&self) -> String {
        "gmm".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::gaussian_image;

    #[test]
    fn single_center_and_symmetry() {
        let x1 = gaussian_image(3, 1, 1);
        let d = GmmMmseDenoiser::new(vec![x1.clone()], 0.3).unwrap();
        assert_eq!(d.apply(&gaussian_image(3, 1, 2)).unwrap(), x1);

        let pair = vec![Image::vector(vec![-2.0]).unwrap(), Image::vector(vec![2.0]).unwrap()];
        let d = GmmMmseDenoiser::new(pair, 1.0).unwrap();
        assert!(d.apply(&Image::vector(vec![0.0]).unwrap()).unwrap().pixels()[0].abs() < 1e-15);
    }

    #[test]
    fn matches_direct_weighted_mean() {
        let centers: Vec<Image> = (0..5).map(|t| gaussian_image(4, 1, 10 + t)).collect();
        let r = gaussian_image(4, 1, 99);
        let nu = 0.7;
        let d = GmmMmseDenoiser::new(centers.clone(), nu).unwrap();
        let got = d.apply(&r).unwrap();
        let norm = (2.0 * std::f64::consts::PI * nu).powf(-2.0);
        let dens: Vec<f64> = centers.iter().map(|c| norm * (-r.dist_sq(c) / (2.0 * nu)).exp()).collect();
        let total: f64 = dens.iter().sum();
        for i in 0..4 {
            let want: f64 = centers.iter().zip(&dens).map(|(c, p)| p * c.pixels()[i]).sum::<f64>() / total;
            assert!((got.pixels()[i] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn far_input_does_not_underflow() {
        let pair = vec![Image::vector(vec![0.0]).unwrap(), Image::vector(vec![1.0]).unwrap()];
        let d = GmmMmseDenoiser::new(pair, 1e-3).unwrap();
        let y = d.apply(&Image::vector(vec![1e4]).unwrap()).unwrap();
        assert_eq!(y.pixels()[0], 1.0);
    }

    #[test]
    fn log_sum_exp_edge_cases() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!(GmmMmseDenoiser::new(vec![], 1.0).is_err());
    }
}
