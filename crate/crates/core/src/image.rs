//! Real-valued grayscale images and the elementwise algebra used by the
//! solvers.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// Peak value in the PSNR formula `-10 log10(‖x − x̂‖² / (N · 256²))`.
pub const PSNR_PEAK: f64 = 256.0;

/// A `width × height` grid of `f64` pixels stored row-major.
///
/// Vectors are represented as `N × 1` images, so every map in the crate can
/// share one signal type.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    /// Builds an image, checking the pixel count and that every value is
    /// finite.
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("empty image {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::Shape(format!(
                "{} pixels supplied for a {width}x{height} image",
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite pixel at index {i}")));
        }
        Ok(Self { width, height, pixels })
    }

    /// A column vector `N × 1`.
    pub fn vector(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(n, 1, values)
    }

    pub(crate) fn from_raw(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        debug_assert_eq!(pixels.len(), width * height);
        Self { width, height, pixels }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::from_raw(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self::from_raw(width, height, pixels)
    }

    /// An image of the same shape with the given pixels.
    pub fn with_pixels(&self, pixels: Vec<f64>) -> Result<Self> {
        Self::new(self.width, self.height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Number of pixels `N`.
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    #[cfg(test)]
    pub(crate) fn set(&mut self, row: usize, col: usize, value: f64) {
        self.pixels[row * self.width + col] = value;
    }

    pub(crate) fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn is_finite(&self) -> bool {
        self.pixels.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn expect_shape(&self, width: usize, height: usize) -> Result<()> {
        if self.shape() == (width, height) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "expected {width}x{height}, got {}x{}",
                self.width, self.height
            )))
        }
    }

    pub(crate) fn check_shape(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Self::from_raw(self.width, self.height, self.pixels.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise combination of two same-shaped images.
    ///
    /// Panics on a shape mismatch; callers validate shapes at API boundaries.
    pub fn zip_map(&self, other: &Image, f: impl Fn(f64, f64) -> f64) -> Image {
        assert!(self.same_shape(other), "zip_map on mismatched shapes");
        Self::from_raw(
            self.width,
            self.height,
            self.pixels.iter().zip(&other.pixels).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn add(&self, other: &Image) -> Image {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Image) -> Image {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Image {
        self.map(|v| s * v)
    }

    /// `a·self + b·other`.
    pub fn lincomb(&self, a: f64, other: &Image, b: f64) -> Image {
        self.zip_map(other, |u, v| a * u + b * v)
    }

    pub fn dot(&self, other: &Image) -> f64 {
        assert!(self.same_shape(other), "dot on mismatched shapes");
        self.pixels.iter().zip(&other.pixels).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.pixels.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(&self, other: &Image) -> f64 {
        assert!(self.same_shape(other), "dist_sq on mismatched shapes");
        self.pixels.iter().zip(&other.pixels).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn min(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.len() as f64
    }

    /// Clamps into `[lo, hi]`. Nothing in the crate clips implicitly; this is
    /// the explicit caller action.
    pub fn clamp(&self, lo: f64, hi: f64) -> Image {
        self.map(|v| v.clamp(lo, hi))
    }

    /// The image with a unit impulse added at flat index `n` scaled by `eps`.
    pub(crate) fn perturbed(&self, n: usize, eps: f64) -> Image {
        let mut out = self.clone();
        out.pixels[n] += eps;
        out
    }
}

/// PSNR in dB with peak 256: `-10 log10(‖x − ref‖² / (N · 256²))`.
///
/// Returns `f64::INFINITY` when the images are identical.
pub fn psnr(x: &Image, reference: &Image) -> Result<f64> {
    x.check_shape(reference, "psnr")?;
    let err = x.dist_sq(reference);
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * (err / (x.len() as f64 * PSNR_PEAK * PSNR_PEAK)).log10())
}

/// The centred `size × size` crop. For an odd remainder the top-left of the
/// two candidate centres is used.
pub fn extract_center_patch(img: &Image, size: usize) -> Result<Image> {
    if size == 0 || size > img.width.min(img.height) {
        return Err(Error::Shape(format!(
            "patch size {size} does not fit a {}x{} image",
            img.width, img.height
        )));
    }
    let r0 = (img.height - size) / 2;
    let c0 = (img.width - size) / 2;
    Ok(Image::from_fn(size, size, |r, c| img.get(r0 + r, c0 + c)))
}

/// Adds i.i.d. `N(0, variance)` noise.
///
/// The stream is ChaCha20 seeded with `seed` (via `SeedableRng::seed_from_u64`)
/// and mapped through `rand_distr::StandardNormal`, so identical arguments
/// give bit-identical output on every platform.
pub fn awgn(x: &Image, variance: f64, seed: u64) -> Result<Image> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::Domain(format!("noise variance must be >= 0, got {variance}")));
    }
    if variance == 0.0 {
        return Ok(x.clone());
    }
    let sd = variance.sqrt();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let pixels = x
        .pixels
        .iter()
        .map(|&v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + sd * z
        })
        .collect();
    Ok(Image::from_raw(x.width, x.height, pixels))
}

/// Deterministic standard-normal image, used for random directions and test
/// inputs.
pub fn gaussian_image(width: usize, height: usize, seed: u64) -> Image {
    awgn(&Image::zeros(width, height), 1.0, seed).expect("unit variance is valid")
}
