//! Kernel-density priors and the Tweedie identities linking their score to
//! the MMSE denoiser of the same mixture.

use std::f64::consts::PI;

use crate::denoisers::{log_sum_exp, BernoulliMmseDenoiser, GmmMmseDenoiser};
use crate::{Denoiser, Error, Image, QuadraticLoss, Result};

/// `p̃(x; ν) = (1/T) Σₜ N(x; xₜ, νI)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KdePrior {
    mmse: GmmMmseDenoiser,
}

impl KdePrior {
    pub fn new(centers: Vec<Image>, nu: f64) -> Result<Self> {
        Ok(Self { mmse: GmmMmseDenoiser::new(centers, nu)? })
    }

    pub fn centers(&self) -> &[Image] {
        self.mmse.centers()
    }

    pub fn bandwidth(&self) -> f64 {
        self.mmse.noise_variance()
    }

    pub fn dim(&self) -> usize {
        self.centers()[0].len()
    }

    /// The posterior-mean denoiser sharing these centers and `ν`.
    pub fn mmse_denoiser(&self) -> &GmmMmseDenoiser {
        &self.mmse
    }
}

/// `ln p̃(r; ν)`, evaluated with log-sum-exp.
pub fn kde_log_density(p: &KdePrior, r: &Image) -> Result<f64> {
    let logk = p.mmse.log_kernels(r)?;
    let nu = p.bandwidth();
    let t = logk.len() as f64;
    Ok(log_sum_exp(&logk) - t.ln() - 0.5 * p.dim() as f64 * (2.0 * PI * nu).ln())
}

/// `ρ_TR(r; ν) = −ν ln p̃(r; ν)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TweedieRegularizer {
    pub prior: KdePrior,
}

impl TweedieRegularizer {
    pub fn new(prior: KdePrior) -> Self {
        Self { prior }
    }

    pub fn value(&self, r: &Image) -> Result<f64> {
        rho_tr(self, r)
    }

    pub fn gradient(&self, r: &Image) -> Result<Image> {
        grad_rho_tr(self, r)
    }
}

pub fn rho_tr(t: &TweedieRegularizer, r: &Image) -> Result<f64> {
    Ok(-t.prior.bandwidth() * kde_log_density(&t.prior, r)?)
}

/// Tweedie's formula: `∇ρ_TR(r) = r − f̂_mmse(r)`.
pub fn grad_rho_tr(t: &TweedieRegularizer, r: &Image) -> Result<Image> {
    Ok(r.sub(&t.prior.mmse.apply(r)?))
}

/// `∇ ln p̃(r; ν) = (f̂_mmse(r) − r)/ν`.
pub fn score(p: &KdePrior, r: &Image) -> Result<Image> {
    Ok(p.mmse.apply(r)?.sub(r).scale(1.0 / p.bandwidth()))
}

/// Both sides of `‖f(x) − f̂_mmse(x)‖² = ν²‖ψ(x) − ∇ln p̃(x)‖²`
/// with `ψ(x) = (f(x) − x)/ν`.
pub fn score_match_identity(f: &dyn Denoiser, p: &KdePrior, x: &Image) -> Result<(f64, f64)> {
    let fx = f.apply(x)?;
    x.check_shape(&fx, "denoiser output")?;
    let nu = p.bandwidth();
    let lhs = fx.dist_sq(&p.mmse.apply(x)?);
    let psi = fx.sub(x).scale(1.0 / nu);
    let rhs = nu * nu * psi.dist_sq(&score(p, x)?);
    Ok((lhs, rhs))
}

/// Stationarity residual of KDE-MAP, `Aᵀ(Ax − y)/σ² − ∇ln p̃(x; ν)`.
pub fn kde_map_residual(p: &KdePrior, loss: &QuadraticLoss, x: &Image) -> Result<Image> {
    Ok(loss.grad(x)?.sub(&score(p, x)?))
}

/// The explicit KDE-MAP objective `ℓ(x; y) + ρ_TR(x)/ν`.
pub fn kde_map_cost(p: &KdePrior, loss: &QuadraticLoss, x: &Image) -> Result<f64> {
    let t = TweedieRegularizer::new(p.clone());
    Ok(loss.eval(x)? + rho_tr(&t, x)? / p.bandwidth())
}

/// Relative error `‖∇ρ_TR − ∇̂ρ_TR‖/‖∇̂ρ_TR‖` against central differences.
pub fn tweedie_gradient_error(t: &TweedieRegularizer, r: &Image, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("finite-difference step must be > 0, got {eps}")));
    }
    let analytic = grad_rho_tr(t, r)?;
    let mut numeric = Vec::with_capacity(r.len());
    for n in 0..r.len() {
        let (rp, rm) = (r.perturbed(n, eps), r.perturbed(n, -eps));
        let step = rp.pixels()[n] - rm.pixels()[n];
        numeric.push((rho_tr(t, &rp)? - rho_tr(t, &rm)?) / step);
    }
    let numeric = Image::new(r.width(), r.height(), numeric)?;
    let den = numeric.norm();
    if den == 0.0 {
        return Err(Error::Degenerate("numerical Tweedie gradient is zero".into()));
    }
    Ok(analytic.dist_sq(&numeric).sqrt() / den)
}

/// `−ν Σₙ ln(½N(rₙ; 0, ν) + ½N(rₙ; 1, ν))`, the Tweedie regularizer of the
/// equiprobable two-point prior on `{0, 1}`.
pub fn bernoulli_rho_tr(d: &BernoulliMmseDenoiser, r: &Image) -> f64 {
    let nu = d.noise_variance();
    let c = 0.5f64.ln() - 0.5 * (2.0 * PI * nu).ln();
    -nu * r
        .pixels()
        .iter()
        .map(|&v| c + log_sum_exp(&[-v * v / (2.0 * nu), -(v - 1.0) * (v - 1.0) / (2.0 * nu)]))
        .sum::<f64>()
}
