#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use redlab::denoisers::{LinearSymmetricDenoiser, MedianFilterDenoiser, NlmDenoiser, TdtDenoiser};
use redlab::image::extract_center_patch;
use redlab::losses::make_uniform_blur;
use redlab::operator::Stencil;
use redlab::synth::natural_image;
use redlab::{Image, LinearOperator, QuadraticLoss};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Noise variance assumed by the diagnostic denoisers.
pub const DIAG_NU: f64 = 625.0;
/// Noise variance assumed by the deblurring denoisers.
pub const DEBLUR_NU: f64 = 3.25 * 3.25;
pub const DEBLUR_SIGMA2: f64 = 2.0;
pub const DEBLUR_LAMBDA: f64 = 0.02;
pub const DEBLUR_TDT_THRESHOLD: f64 = 0.001;

/// Centre 16×16 patches of `count` synthetic 64×64 images.
pub fn patches(count: usize) -> Vec<Image> {
    (0..count as u64).map(|s| extract_center_patch(&natural_image(64, 64, 100 + s), 16).unwrap()).collect()
}

pub fn diag_tdt() -> TdtDenoiser {
    TdtDenoiser::new(DIAG_NU.sqrt(), DIAG_NU).unwrap()
}

pub fn diag_mf() -> MedianFilterDenoiser {
    MedianFilterDenoiser::new(3, DIAG_NU).unwrap()
}

pub fn diag_nlm() -> NlmDenoiser {
    NlmDenoiser::for_noise_variance(DIAG_NU).unwrap()
}

pub struct Deblur {
    pub truth: Image,
    pub loss: QuadraticLoss,
}

/// 64×64 scene, 9×9 circular box blur, σ² = 2.
pub fn deblur_instance() -> Deblur {
    let truth = natural_image(64, 64, 7);
    let loss = QuadraticLoss::synthesize(make_uniform_blur(9).unwrap(), &truth, DEBLUR_SIGMA2, 8).unwrap();
    Deblur { truth, loss }
}

pub fn deblur_tdt() -> TdtDenoiser {
    TdtDenoiser::new(DEBLUR_TDT_THRESHOLD, DEBLUR_NU).unwrap()
}

pub fn deblur_linear() -> LinearSymmetricDenoiser {
    LinearSymmetricDenoiser::new(64, 64, DEBLUR_NU).unwrap()
}

fn dft2(data: &mut [Complex64], w: usize, h: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let rows = if inverse { planner.plan_fft_inverse(w) } else { planner.plan_fft_forward(w) };
    let cols = if inverse { planner.plan_fft_inverse(h) } else { planner.plan_fft_forward(h) };
    for r in data.chunks_exact_mut(w) {
        rows.process(r);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); h];
    for c in 0..w {
        for r in 0..h {
            col[r] = data[r * w + c];
        }
        cols.process(&mut col);
        for r in 0..h {
            data[r * w + c] = col[r];
        }
    }
    if inverse {
        let s = 1.0 / (w * h) as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }
}

/// `x* = (AᵀA/σ² + λ(I − W))⁻¹ Aᵀy/σ²` for a circular blur `A` and the
/// separable `[¼ ½ ¼]` smoother `W`, solved per frequency.
pub fn linear_red_solution_fourier(stencil: &Stencil, y: &Image, sigma2: f64, lambda: f64) -> Image {
    let (w, h) = y.shape();
    let mut kernel = vec![Complex64::new(0.0, 0.0); w * h];
    let (kw, kh) = (stencil.width() as isize, stencil.height() as isize);
    for (i, &v) in stencil.weights().iter().enumerate() {
        let dr = i as isize / kw - kh / 2;
        let dc = i as isize % kw - kw / 2;
        let idx = dr.rem_euclid(h as isize) as usize * w + dc.rem_euclid(w as isize) as usize;
        kernel[idx] += Complex64::new(v, 0.0);
    }
    dft2(&mut kernel, w, h, false);
    let mut ybuf: Vec<Complex64> = y.pixels().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    dft2(&mut ybuf, w, h, false);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let th = 2.0 * std::f64::consts::PI * r as f64 / h as f64;
            let tc = 2.0 * std::f64::consts::PI * c as f64 / w as f64;
            let wk = (0.5 + 0.5 * th.cos()) * (0.5 + 0.5 * tc.cos());
            let hk = kernel[i];
            ybuf[i] = hk.conj() * ybuf[i] / sigma2 / (hk.norm_sqr() / sigma2 + lambda * (1.0 - wk));
        }
    }
    dft2(&mut ybuf, w, h, true);
    Image::new(w, h, ybuf.iter().map(|z| z.re).collect()).unwrap()
}

/// Conjugate gradients on `M x = b` given `M` as a closure.
pub fn conjugate_gradient(m: impl Fn(&Image) -> Image, b: &Image, tol: f64, maxiter: usize) -> Image {
    let mut x = Image::zeros(b.width(), b.height());
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.norm_sq();
    let stop = tol * tol * b.norm_sq();
    for _ in 0..maxiter {
        if rr <= stop {
            break;
        }
        let mp = m(&p);
        let alpha = rr / p.dot(&mp);
        x = x.lincomb(1.0, &p, alpha);
        r = r.lincomb(1.0, &mp, -alpha);
        let next = r.norm_sq();
        p = r.lincomb(1.0, &p, next / rr);
        rr = next;
    }
    x
}

/// `x*` by CG in the pixel domain; independent of the solver code.
pub fn linear_red_solution_cg(loss: &QuadraticLoss, w: &LinearSymmetricDenoiser, lambda: f64) -> Image {
    use redlab::Denoiser;
    let a = loss.operator();
    let s2 = loss.noise_variance();
    let b = a.adjoint(loss.measurements()).unwrap().scale(1.0 / s2);
    conjugate_gradient(
        |x| {
            let ata = a.adjoint(&a.apply(x).unwrap()).unwrap().scale(1.0 / s2);
            ata.lincomb(1.0, &x.sub(&w.apply(x).unwrap()), lambda)
        },
        &b,
        1e-14,
        20_000,
    )
}

pub fn relative_error(x: &Image, reference: &Image) -> f64 {
    x.dist_sq(reference).sqrt() / reference.norm()
}

pub fn dense(op: &LinearOperator, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        let mut e = vec![0.0; cols];
        e[j] = 1.0;
        let col = op.apply(&Image::vector(e).unwrap()).unwrap();
        m.set_column(j, &DVector::from_column_slice(col.pixels()));
    }
    m
}
