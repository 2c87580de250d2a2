use super::Denoiser;
use crate::{Error, Image, Result};

/// Non-local means.
///
/// Patch distances use clamp-to-edge padding; the search window is truncated
/// at the image border.
#[derive(Debug, Clone, PartialEq)]
pub struct NlmDenoiser {
    patch_radius: usize,
    search_radius: usize,
    h: f64,
    nu: f64,
}

impl NlmDenoiser {
    pub fn new(patch_radius: usize, search_radius: usize, h: f64, nu: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Config(format!("NLM bandwidth h must be finite and > 0, got {h}")));
        }
        if !(nu > 0.0) {
            return Err(Error::Config(format!("noise variance must be > 0, got {nu}")));
        }
        Ok(Self { patch_radius, search_radius, h, nu })
    }

    /// 3×3 patches, 11×11 search window, `h² = 2ν·9`.
    pub fn for_noise_variance(nu: f64) -> Result<Self> {
        let patch = 3.0 * 3.0;
        Self::new(1, 5, (2.0 * nu * patch).sqrt(), nu)
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn patch_radius(&self) -> usize {
        self.patch_radius
    }

    pub fn search_radius(&self) -> usize {
        self.search_radius
    }

    /// Normalized weights `(row, col, w)` that produce output pixel `(row, col)`.
    pub fn weights(&self, x: &Image, row: usize, col: usize) -> Vec<(usize, usize, f64)> {
        let mut out = self.raw_weights(x, row, col);
        let total: f64 = out.iter().map(|t| t.2).sum();
        for t in &mut out {
            t.2 /= total;
        }
        out
    }

    fn raw_weights(&self, x: &Image, row: usize, col: usize) -> Vec<(usize, usize, f64)> {
        let (w, h) = x.shape();
        let px = x.pixels();
        let p = self.patch_radius as isize;
        let s = self.search_radius;
        let inv_h2 = 1.0 / (self.h * self.h);
        let at = |r: isize, c: isize| {
            let r = r.clamp(0, h as isize - 1) as usize;
            let c = c.clamp(0, w as isize - 1) as usize;
            px[r * w + c]
        };
        let mut out = Vec::new();
        for jr in row.saturating_sub(s)..(row + s + 1).min(h) {
            for jc in col.saturating_sub(s)..(col + s + 1).min(w) {
                let mut d2 = 0.0;
                for dr in -p..=p {
                    for dc in -p..=p {
                        let a = at(row as isize + dr, col as isize + dc);
                        let b = at(jr as isize + dr, jc as isize + dc);
                        d2 += (a - b) * (a - b);
                    }
                }
                out.push((jr, jc, (-d2 * inv_h2).exp()));
            }
        }
        out
    }
}

impl Denoiser for NlmDenoiser {
    fn apply(&self, x: &Image) -> Result<Image> {
        let (w, h) = x.shape();
        let mut out = Vec::with_capacity(x.len());
        for r in 0..h {
            for c in 0..w {
                // The self-weight is exactly 1, so the normalizer never underflows.
                let (mut num, mut den) = (0.0, 0.0);
                for (jr, jc, wt) in self.raw_weights(x, r, c) {
                    num += wt * x.get(jr, jc);
                    den += wt;
                }
                out.push(num / den);
            }
        }
        Ok(Image::from_raw(w, h, out))
    }

    fn noise_variance(&self) -> f64 {
        self.nu
    }

    fn name(&self) -> String {
        "nlm".into()
    }
}
