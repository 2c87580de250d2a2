//! Plug-in denoisers `f: ℝᴺ → ℝᴺ`.
//!
//! Every denoiser is immutable after construction and `Send + Sync`, so the
//! diagnostics may evaluate it from several threads at once.

mod bernoulli;
mod gmm;
pub mod haar;
mod linear;
mod median;
mod nlm;
mod tdt;

use std::sync::Arc;

pub use bernoulli::BernoulliMmseDenoiser;
pub use gmm::GmmMmseDenoiser;
pub(crate) use gmm::log_sum_exp;
pub use linear::{DenseLinearDenoiser, LinearSymmetricDenoiser, SparseSymmetric};
pub use median::MedianFilterDenoiser;
pub use nlm::NlmDenoiser;
pub use tdt::TdtDenoiser;

use crate::{Image, Result};

pub trait Denoiser: Send + Sync {
    /// Denoises `x`; output has the shape of `x`.
    fn apply(&self, x: &Image) -> Result<Image>;

    /// The noise variance `ν` the denoiser is tuned for.
    fn noise_variance(&self) -> f64;

    fn name(&self) -> String;
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn apply(&self, x: &Image) -> Result<Image> {
        (**self).apply(x)
    }
    fn noise_variance(&self) -> f64 {
        (**self).noise_variance()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

impl<D: Denoiser + ?Sized> Denoiser for Box<D> {
    fn apply(&self, x: &Image) -> Result<Image> {
        (**self).apply(x)
    }
    fn noise_variance(&self) -> f64 {
        (**self).noise_variance()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

impl<D: Denoiser + ?Sized> Denoiser for Arc<D> {
    fn apply(&self, x: &Image) -> Result<Image> {
        (**self).apply(x)
    }
    fn noise_variance(&self) -> f64 {
        (**self).noise_variance()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

/// `f(x) = c·x`. `c = 1` is the identity, `c = 0` the zero map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledIdentity {
    pub factor: f64,
    pub nu: f64,
}

impl ScaledIdentity {
    pub fn identity() -> Self {
        Self { factor: 1.0, nu: 1.0 }
    }

    pub fn new(factor: f64) -> Self {
        Self { factor, nu: 1.0 }
    }
}

impl Denoiser for ScaledIdentity {
    fn apply(&self, x: &Image) -> Result<Image> {
        if self.factor == 1.0 {
            Ok(x.clone())
        } else {
            Ok(x.scale(self.factor))
        }
    }
    fn noise_variance(&self) -> f64 {
        self.nu
    }
    fn name(&self) -> String {
        if self.factor == 1.0 {
            "identity".into()
        } else {
            format!("scaled-{}", self.factor)
        }
    }
}

/// Wraps a closure as a denoiser.
pub struct FnDenoiser<F> {
    f: F,
    nu: f64,
    label: String,
}

impl<F> FnDenoiser<F>
where
    F: Fn(&Image) -> Image + Send + Sync,
{
    pub fn new(label: impl Into<String>, nu: f64, f: F) -> Self {
        Self { f, nu, label: label.into() }
    }
}

impl<F> Denoiser for FnDenoiser<F>
where
    F: Fn(&Image) -> Image + Send + Sync,
{
    fn apply(&self, x: &Image) -> Result<Image> {
        Ok((self.f)(x))
    }
    fn noise_variance(&self) -> f64 {
        self.nu
    }
    fn name(&self) -> String {
        self.label.clone()
    }
}
