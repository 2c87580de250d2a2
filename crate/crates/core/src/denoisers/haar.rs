//! Orthonormal 2-D Haar transform at maximum depth.
//!
//! Each level transforms the rows of the current low-pass block (while its
//! width exceeds one) and then its columns (while its height exceeds one), so
//! rectangular and 1-D dyadic signals are handled too.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::{Error, Image, Result};

fn check_dyadic(x: &Image) -> Result<()> {
    let (w, h) = x.shape();
    if !w.is_power_of_two() || !h.is_power_of_two() {
        return Err(Error::Shape(format!("Haar transform needs power-of-two sides, got {w}x{h}")));
    }
    Ok(())
}

/// The sequence of low-pass block sizes visited by the analysis.
fn levels(width: usize, height: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let (mut w, mut h) = (width, height);
    while w > 1 || h > 1 {
        out.push((w, h));
        if w > 1 {
            w /= 2;
        }
        if h > 1 {
            h /= 2;
        }
    }
    out
}

fn analyze_line(buf: &mut [f64], scratch: &mut [f64]) {
    let half = buf.len() / 2;
    for i in 0..half {
        let (a, b) = (buf[2 * i], buf[2 * i + 1]);
        scratch[i] = (a + b) * FRAC_1_SQRT_2;
        scratch[half + i] = (a - b) * FRAC_1_SQRT_2;
    }
    buf.copy_from_slice(&scratch[..buf.len()]);
}

fn synthesize_line(buf: &mut [f64], scratch: &mut [f64]) {
    let half = buf.len() / 2;
    for i in 0..half {
        let (a, d) = (buf[i], buf[half + i]);
        scratch[2 * i] = (a + d) * FRAC_1_SQRT_2;
        scratch[2 * i + 1] = (a - d) * FRAC_1_SQRT_2;
    }
    buf.copy_from_slice(&scratch[..buf.len()]);
}

fn rows(data: &mut [f64], stride: usize, w: usize, h: usize, f: fn(&mut [f64], &mut [f64])) {
    let mut scratch = vec![0.0; w];
    for r in 0..h {
        f(&mut data[r * stride..r * stride + w], &mut scratch);
    }
}

fn cols(data: &mut [f64], stride: usize, w: usize, h: usize, f: fn(&mut [f64], &mut [f64])) {
    let mut line = vec![0.0; h];
    let mut scratch = vec![0.0; h];
    for c in 0..w {
        for r in 0..h {
            line[r] = data[r * stride + c];
        }
        f(&mut line, &mut scratch);
        for r in 0..h {
            data[r * stride + c] = line[r];
        }
    }
}

/// Haar coefficients `Wx`, laid out in the usual nested-quadrant order.
pub fn forward(x: &Image) -> Result<Image> {
    check_dyadic(x)?;
    let (width, height) = x.shape();
    let mut out = x.clone();
    let data = out.pixels_mut();
    for (w, h) in levels(width, height) {
        if w > 1 {
            rows(data, width, w, h, analyze_line);
        }
        if h > 1 {
            cols(data, width, w, h, analyze_line);
        }
    }
    Ok(out)
}

/// `Wᵀc`, the exact inverse of [`forward`].
pub fn inverse(coeffs: &Image) -> Result<Image> {
    check_dyadic(coeffs)?;
    let (width, height) = coeffs.shape();
    let mut out = coeffs.clone();
    let data = out.pixels_mut();
    for (w, h) in levels(width, height).into_iter().rev() {
        if h > 1 {
            cols(data, width, w, h, synthesize_line);
        }
        if w > 1 {
            rows(data, width, w, h, synthesize_line);
        }
    }
    Ok(out)
}
