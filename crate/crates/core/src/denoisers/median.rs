use super::Denoiser;
use crate::{Error, Image, Result};

/// Square-window median filter with clamp-to-edge padding.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianFilterDenoiser {
    window: usize,
    nu: f64,
}

impl MedianFilterDenoiser {
    pub fn new(window: usize, nu: f64) -> Result<Self> {
        if window % 2 == 0 {
            return Err(Error::Config(format!("median window must be odd, got {window}")));
        }
        if !(nu > 0.0) {
            return Err(Error::Config(format!("noise variance must be > 0, got {nu}")));
        }
        Ok(Self { window, nu })
    }

    pub fn window(&self) -> usize {
        self.window
    }
}

impl Default for MedianFilterDenoiser {
    fn default() -> Self {
        Self { window: 3, nu: 1.0 }
    }
}

impl Denoiser for MedianFilterDenoiser {
    fn apply(&self, x: &Image) -> Result<Image> {
        let (w, h) = x.shape();
        if self.window > w.min(h) {
            return Err(Error::Shape(format!(
                "median window {} exceeds image size {w}x{h}",
                self.window
            )));
        }
        let r = (self.window / 2) as isize;
        let mid = self.window * self.window / 2;
        let px = x.pixels();
        let mut buf = Vec::with_capacity(self.window * self.window);
        let mut out = Vec::with_capacity(px.len());
        for row in 0..h as isize {
            for col in 0..w as isize {
                buf.clear();
                for dr in -r..=r {
                    let rr = (row + dr).clamp(0, h as isize - 1) as usize;
                    for dc in -r..=r {
                        let cc = (col + dc).clamp(0, w as isize - 1) as usize;
                        buf.push(px[rr * w + cc]);
                    }
                }
                let (_, m, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
                out.push(*m);
            }
        }
        Ok(Image::from_raw(w, h, out))
    }

    fn noise_variance(&self) -> f64 {
        self.nu
    }

    fn name(&self) -> String {
        "median".into()
    }
}
