//! Consensus-equilibrium pairs `(F, G)` whose joint fixed points
//! `x̂ = F(x̂ + û)`, `x̂ = G(x̂ − û)` characterize PnP and RED solutions.

use crate::{Denoiser, Error, Image, QuadraticLoss, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAXITER: usize = 10_000;

/// `F(v) = argmin ℓ(x) + (w/2)‖x − v‖²`.
pub fn f_prox(loss: &QuadraticLoss, weight: f64, v: &Image) -> Result<Image> {
    loss.prox(v, weight)
}

/// The functional inverse `((1+c)I − c f)⁻¹(v)`, computed by the contraction
/// `x ← (c/(1+c)) f(x) + (1/(1+c)) v` from `x = v` until
/// `‖(1+c)x − c f(x) − v‖ ≤ tol`.
pub fn g_red_inverse(f: &dyn Denoiser, c: f64, v: &Image, tol: f64, maxiter: usize) -> Result<Image> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Precondition(format!("inverse parameter c must be > 0, got {c}")));
    }
    let (a, b) = (c / (1.0 + c), 1.0 / (1.0 + c));
    let mut x = v.clone();
    let mut iterations = 0;
    loop {
        let fx = f.apply(&x)?;
        x.check_shape(&fx, "denoiser output")?;
        let residual = x.lincomb(1.0 + c, &fx, -c).sub(v).norm();
        if residual <= tol {
            return Ok(x);
        }
        if iterations == maxiter || !residual.is_finite() {
            return Err(Error::NonConvergence { iterations, residual });
        }
        x = fx.lincomb(a, v, b);
        iterations += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GMap {
    /// `G = f` (plug-and-play).
    Denoiser,
    /// `G = ((1+c)I − c f)⁻¹`.
    RedInverse { c: f64 },
}

#[derive(Clone, Copy)]
pub struct EquilibriumPair<'a> {
    pub loss: &'a QuadraticLoss,
    pub denoiser: &'a dyn Denoiser,
    /// Prox weight of `F`: `β` for ADMM, `λL` for PG.
    pub f_weight: f64,
    pub g: GMap,
    pub tol: f64,
    pub maxiter: usize,
}

impl<'a> EquilibriumPair<'a> {
    fn build(loss: &'a QuadraticLoss, denoiser: &'a dyn Denoiser, f_weight: f64, g: GMap) -> Result<Self> {
        if !(f_weight > 0.0) || !f_weight.is_finite() {
            return Err(Error::Config(format!("prox weight must be > 0, got {f_weight}")));
        }
        Ok(Self { loss, denoiser, f_weight, g, tol: DEFAULT_TOL, maxiter: DEFAULT_MAXITER })
    }

    /// PnP-ADMM: `F = prox_β`, `G = f`.
    pub fn pnp(loss: &'a QuadraticLoss, denoiser: &'a dyn Denoiser, beta: f64) -> Result<Self> {
        Self::build(loss, denoiser, beta, GMap::Denoiser)
    }

    /// RED-ADMM: `F = prox_β`, `G = ((λ+β)/β I − (λ/β) f)⁻¹`.
    pub fn red_admm(loss: &'a QuadraticLoss, denoiser: &'a dyn Denoiser, lambda: f64, beta: f64) -> Result<Self> {
        Self::build(loss, denoiser, beta, GMap::RedInverse { c: lambda / beta })
    }

    /// RED-PG: `F = prox_{λL}`, `G = ((L+1)/L I − (1/L) f)⁻¹`.
    pub fn red_pg(loss: &'a QuadraticLoss, denoiser: &'a dyn Denoiser, lambda: f64, l: f64) -> Result<Self> {
        Self::build(loss, denoiser, lambda * l, GMap::RedInverse { c: 1.0 / l })
    }

    pub fn apply_f(&self, v: &Image) -> Result<Image> {
        f_prox(self.loss, self.f_weight, v)
    }

    pub fn apply_g(&self, v: &Image) -> Result<Image> {
        match self.g {
            GMap::Denoiser => self.denoiser.apply(v),
            GMap::RedInverse { c } => g_red_inverse(self.denoiser, c, v, self.tol, self.maxiter),
        }
    }
}

/// `(‖x̂ − F(x̂ + û)‖, ‖x̂ − G(x̂ − û)‖)`.
pub fn consensus_residual(pair: &EquilibriumPair<'_>, x: &Image, u: &Image) -> Result<(f64, f64)> {
    x.check_shape(u, "consensus residual")?;
    let rf = x.dist_sq(&pair.apply_f(&x.add(u))?).sqrt();
    let rg = x.dist_sq(&pair.apply_g(&x.sub(u))?).sqrt();
    Ok((rf, rg))
}

/// The PG dual variable `û = (f(x̂) − x̂)/L`.
pub fn pg_dual(f: &dyn Denoiser, x: &Image, l: f64) -> Result<Image> {
    Ok(f.apply(x)?.sub(x).scale(1.0 / l))
}

/// Equilibria for `A = I`, `λ = 1/σ²`: `x_pnp = f(y)` and `x_red = (2I − f)⁻¹(y)`.
pub fn denoising_equilibria(f: &dyn Denoiser, y: &Image, sigma2: f64, tol: f64) -> Result<(Image, Image)> {
    if !(sigma2 > 0.0) {
        return Err(Error::Config(format!("noise variance must be > 0, got {sigma2}")));
    }
    let pnp = f.apply(y)?;
    let red = g_red_inverse(f, 1.0, y, tol, DEFAULT_MAXITER)?;
    Ok((pnp, red))
}
