//! Deterministic synthetic test images.
//!
//! Each image is a 1/f random field plus a few soft-edged discs, affinely
//! mapped into `[16, 240]`. Pixels are not quantized, so order statistics
//! (medians) are tie-free almost surely.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

use crate::fft;
use crate::Image;

fn freq(k: usize, n: usize) -> f64 {
    let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    k / n as f64
}

/// A natural-looking `width × height` test image.
pub fn natural_image(width: usize, height: usize, seed: u64) -> Image {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = width * height;
    let mut spec = Vec::with_capacity(n);
    for r in 0..height {
        for c in 0..width {
            let f = freq(r, height).hypot(freq(c, width));
            let amp = if r == 0 && c == 0 { 0.0 } else { 1.0 / f };
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            spec.push(Complex64::new(amp * re, amp * im));
        }
    }
    fft::fft2(&mut spec, width, height, true);
    let mut px: Vec<f64> = spec.iter().map(|z| z.re).collect();
    let mean = px.iter().sum::<f64>() / n as f64;
    let sd = (px.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    px.iter_mut().for_each(|v| *v = (*v - mean) / sd * 30.0);

    let side = width.min(height) as f64;
    for _ in 0..4 {
        let cx = rng.gen_range(0.0..width as f64);
        let cy = rng.gen_range(0.0..height as f64);
        let radius = rng.gen_range(side / 8.0..side / 3.0);
        let amp = rng.gen_range(-60.0..60.0);
        for r in 0..height {
            for c in 0..width {
                let d = (c as f64 - cx).hypot(r as f64 - cy);
                px[r * width + c] += amp / (1.0 + ((d - radius) / 0.7).exp());
            }
        }
    }

    let lo = px.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = px.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    Image::from_raw(width, height, px.into_iter().map(|v| 16.0 + (v - lo) / span * 224.0).collect())
}

/// `count` natural images of size `side × side` with consecutive seeds.
pub fn test_set(side: usize, count: usize, seed: u64) -> Vec<Image> {
    (0..count as u64).map(|i| natural_image(side, side, seed.wrapping_add(i))).collect()
}

/// A random `{0, 1}` image with equiprobable pixels.
pub fn binary_image(width: usize, height: usize, seed: u64) -> Image {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Image::from_fn(width, height, |_, _| if rng.gen_bool(0.5) { 1.0 } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_and_determinism() {
        let a = natural_image(64, 32, 4);
        assert_eq!(a, natural_image(64, 32, 4));
        assert_ne!(a, natural_image(64, 32, 5));
        assert!((a.min() - 16.0).abs() < 1e-9 && (a.max() - 240.0).abs() < 1e-9);
    }

    #[test]
    fn pixels_are_distinct() {
        let a = natural_image(16, 16, 1);
        let mut v = a.pixels().to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        assert_eq!(v.len(), 256);
    }

    #[test]
    fn binary_is_binary() {
        let b = binary_image(8, 8, 0);
        assert!(b.pixels().iter().all(|&v| v == 0.0 || v == 1.0));
    }
}
