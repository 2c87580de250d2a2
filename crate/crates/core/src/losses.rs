//! The quadratic data term `ℓ(x; y) = ‖Ax − y‖² / (2σ²)` and its proximal map.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;

use crate::image::awgn;
use crate::operator::Stencil;
use crate::{fft, Error, Image, LinearOperator, Result};

#[derive(Debug, Clone)]
enum ProxCache {
    Identity,
    /// `|Ĥ|²` on the image grid.
    Fourier(Vec<f64>),
    /// `AᵀA`.
    Dense(DMatrix<f64>),
}

#[derive(Debug, Clone)]
pub struct QuadraticLoss {
    op: LinearOperator,
    y: Image,
    sigma2: f64,
    input_shape: (usize, usize),
    aty: Image,
    cache: ProxCache,
}

impl QuadraticLoss {
    pub fn new(op: LinearOperator, y: Image, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::Config(format!("noise variance must be finite and > 0, got {sigma2}")));
        }
        let input_shape = match &op {
            LinearOperator::Dense(d) => {
                if d.output_shape() != y.shape() {
                    return Err(Error::Shape(format!(
                        "operator output {:?} does not match measurements {:?}",
                        d.output_shape(),
                        y.shape()
                    )));
                }
                d.input_shape()
            }
            _ => y.shape(),
        };
        let cache = match &op {
            LinearOperator::Identity => ProxCache::Identity,
            LinearOperator::CircularConvolution(k) => {
                let (w, h) = input_shape;
                ProxCache::Fourier(k.spectrum(w, h).iter().map(|z| z.norm_sqr()).collect())
            }
            LinearOperator::Dense(d) => ProxCache::Dense(d.matrix().tr_mul(d.matrix())),
        };
        let aty = op.adjoint(&y)?;
        Ok(Self { op, y, sigma2, input_shape, aty, cache })
    }

    /// Measurements and loss for `y = Ax + e`, `e ~ N(0, σ²I)`.
    pub fn synthesize(op: LinearOperator, x: &Image, sigma2: f64, seed: u64) -> Result<Self> {
        let clean = op.apply(x)?;
        let y = awgn(&clean, sigma2, seed)?;
        Self::new(op, y, sigma2)
    }

    pub fn operator(&self) -> &LinearOperator {
        &self.op
    }

    pub fn measurements(&self) -> &Image {
        &self.y
    }

    pub fn noise_variance(&self) -> f64 {
        self.sigma2
    }

    /// Shape of the unknown `x`.
    pub fn input_shape(&self) -> (usize, usize) {
        self.input_shape
    }

    /// `Aᵀy`.
    pub fn adjoint_measurements(&self) -> &Image {
        &self.aty
    }

    /// `Aᵀy` divided by the DC gain `‖A1‖²/N` of `AᵀA`, so a constant scene
    /// back-projects to itself. This is the default starting point.
    pub fn backprojection(&self) -> Result<Image> {
        let (w, h) = self.input_shape;
        let gain = self.op.apply(&Image::filled(w, h, 1.0))?.norm_sq() / (w * h) as f64;
        if gain > 0.0 {
            Ok(self.aty.scale(1.0 / gain))
        } else {
            Ok(self.aty.clone())
        }
    }

    fn check_input(&self, x: &Image) -> Result<()> {
        x.expect_shape(self.input_shape.0, self.input_shape.1)
    }

    pub fn eval(&self, x: &Image) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.op.apply(x)?.dist_sq(&self.y) / (2.0 * self.sigma2))
    }

    /// `Aᵀ(Ax − y)/σ²`.
    pub fn grad(&self, x: &Image) -> Result<Image> {
        self.check_input(x)?;
        let r = self.op.apply(x)?.sub(&self.y);
        Ok(self.op.adjoint(&r)?.scale(1.0 / self.sigma2))
    }

    /// `argmin_x ℓ(x) + (τ/2)‖x − v‖²`, solved exactly.
    pub fn prox(&self, v: &Image, tau: f64) -> Result<Image> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Precondition(format!("prox weight must be finite and > 0, got {tau}")));
        }
        self.check_input(v)?;
        let s = 1.0 / self.sigma2;
        // Right-hand side Aᵀy/σ² + τv of the normal equations.
        let rhs = self.aty.lincomb(s, v, tau);
        let (w, h) = self.input_shape;
        match &self.cache {
            ProxCache::Identity => Ok(rhs.scale(1.0 / (s + tau))),
            ProxCache::Fourier(h2) => {
                let mut buf = fft::forward_real(rhs.pixels(), w, h);
                for (z, &g) in buf.iter_mut().zip(h2) {
                    *z /= Complex64::new(g * s + tau, 0.0);
                }
                Ok(Image::from_raw(w, h, fft::inverse_real(buf, w, h)))
            }
            ProxCache::Dense(ata) => {
                let n = ata.nrows();
                let m = ata * s + DMatrix::identity(n, n) * tau;
                let chol = m
                    .cholesky()
                    .ok_or_else(|| Error::Degenerate("prox system is not positive definite".into()))?;
                let x = chol.solve(&DVector::from_column_slice(rhs.pixels()));
                Ok(Image::from_raw(w, h, x.as_slice().to_vec()))
            }
        }
    }
}

/// Circular convolution with the `k × k` box kernel of weight `1/k²`.
pub fn make_uniform_blur(k: usize) -> Result<LinearOperator> {
    Ok(LinearOperator::circular(Stencil::uniform(k)?))
}
