//! Regularization by denoising (RED), checked from several directions.
//!
//! The crate bundles
//!
//! - an [`Image`] container with circular-convolution and dense
//!   [`LinearOperator`]s, PGM I/O and PSNR ([`image`], [`operator`], [`pgm`]);
//! - a family of plug-in [`Denoiser`]s, from Haar soft-thresholding and the
//!   median filter to exact Gaussian-mixture MMSE estimators ([`denoisers`]);
//! - finite-difference Jacobian, gradient, homogeneity and Hessian
//!   diagnostics for the RED regularizer `½ xᵀ(x − f(x))` ([`diagnostics`]);
//! - the quadratic data term and its exact proximal map ([`losses`]);
//! - the RED solver family SD / ADMM / FP / PG / DPG / APG with per-iteration
//!   instrumentation ([`solvers`]);
//! - KDE priors, the Tweedie regularizer and the score/denoiser identities
//!   ([`smd`]);
//! - consensus-equilibrium operator pairs and functional inverses
//!   ([`equilibrium`]).
//!
//! Everything works on `f64` pixels in the nominal range `[0, 255]` and never
//! clips implicitly.

pub mod denoisers;
pub mod diagnostics;
pub mod equilibrium;
mod error;
mod fft;
pub mod image;
pub mod losses;
pub mod operator;
pub mod pgm;
pub mod smd;
pub mod solvers;
pub mod synth;

pub use denoisers::Denoiser;
pub use error::{Error, Result};
pub use image::Image;
pub use losses::QuadraticLoss;
pub use operator::LinearOperator;
