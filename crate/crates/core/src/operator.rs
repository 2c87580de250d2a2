//! Linear measurement maps `A` with their adjoints.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;

use crate::{fft, Error, Image, Result};

/// An odd-sized convolution kernel centred on its middle tap.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl Stencil {
    pub fn new(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        if width % 2 == 0 || height % 2 == 0 {
            return Err(Error::Config(format!("stencil must have odd size, got {width}x{height}")));
        }
        if weights.len() != width * height {
            return Err(Error::Shape(format!("{} weights for a {width}x{height} stencil", weights.len())));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Domain("non-finite stencil weight".into()));
        }
        Ok(Self { width, height, weights })
    }

    /// The `k × k` box with weights `1/k²`.
    pub fn uniform(k: usize) -> Result<Self> {
        if k % 2 == 0 {
            return Err(Error::Config(format!("uniform blur size must be odd, got {k}")));
        }
        Self::new(k, k, vec![1.0 / (k * k) as f64; k * k])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Tap `(di, dj)` with offsets relative to the centre.
    fn taps(&self) -> impl Iterator<Item = (isize, isize, f64)> + '_ {
        let ci = (self.height / 2) as isize;
        let cj = (self.width / 2) as isize;
        self.weights.iter().enumerate().map(move |(idx, &w)| {
            let i = (idx / self.width) as isize;
            let j = (idx % self.width) as isize;
            (i - ci, j - cj, w)
        })
    }

    /// Periodic convolution `(k ⊛ x)[r, c] = Σ k[di, dj] x[r − di, c − dj]`.
    /// With `flip` the kernel is mirrored, giving the adjoint (correlation).
    fn convolve(&self, x: &Image, flip: bool) -> Image {
        let (w, h) = x.shape();
        let (wi, hi) = (w as isize, h as isize);
        let mut out = Image::zeros(w, h);
        for (di, dj, k) in self.taps() {
            if k == 0.0 {
                continue;
            }
            let (di, dj) = if flip { (-di, -dj) } else { (di, dj) };
            let dr = (-di).rem_euclid(hi) as usize;
            let dc = (-dj).rem_euclid(wi) as usize;
            let src = x.pixels();
            let dst = out.pixels_mut();
            for r in 0..h {
                let sr = (r + dr) % h;
                for c in 0..w {
                    dst[r * w + c] += k * src[sr * w + (c + dc) % w];
                }
            }
        }
        out
    }

    /// Circulant eigenvalues on a `width × height` periodic grid, i.e. the
    /// DFT of the wrapped kernel.
    pub(crate) fn spectrum(&self, width: usize, height: usize) -> Vec<Complex64> {
        let mut embed = vec![0.0; width * height];
        for (di, dj, k) in self.taps() {
            let r = di.rem_euclid(height as isize) as usize;
            let c = dj.rem_euclid(width as isize) as usize;
            embed[r * width + c] += k;
        }
        fft::forward_real(&embed, width, height)
    }
}

/// A dense `M × N` matrix acting on flattened images.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: DMatrix<f64>,
    input_shape: (usize, usize),
    output_shape: (usize, usize),
}

impl DenseOperator {
    /// `input_shape` and `output_shape` are `(width, height)`.
    pub fn new(matrix: DMatrix<f64>, input_shape: (usize, usize), output_shape: (usize, usize)) -> Result<Self> {
        if matrix.ncols() != input_shape.0 * input_shape.1 || matrix.nrows() != output_shape.0 * output_shape.1 {
            return Err(Error::Shape(format!(
                "{}x{} matrix vs input {:?} / output {:?}",
                matrix.nrows(),
                matrix.ncols(),
                input_shape,
                output_shape
            )));
        }
        Ok(Self { matrix, input_shape, output_shape })
    }

    /// A matrix acting on column vectors (`N × 1` images).
    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        let (m, n) = matrix.shape();
        Self { matrix, input_shape: (n, 1), output_shape: (m, 1) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn input_shape(&self) -> (usize, usize) {
        self.input_shape
    }

    pub fn output_shape(&self) -> (usize, usize) {
        self.output_shape
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinearOperator {
    /// `A = I` on any shape.
    Identity,
    /// Periodic convolution; shape-preserving on any image size.
    CircularConvolution(Stencil),
    Dense(DenseOperator),
}

impl LinearOperator {
    pub fn circular(stencil: Stencil) -> Self {
        Self::CircularConvolution(stencil)
    }

    pub fn dense(matrix: DMatrix<f64>) -> Self {
        Self::Dense(DenseOperator::from_matrix(matrix))
    }

    /// Output `(width, height)` for an input of the given shape.
    pub fn output_shape(&self, input: (usize, usize)) -> Result<(usize, usize)> {
        match self {
            Self::Identity | Self::CircularConvolution(_) => Ok(input),
            Self::Dense(d) if d.input_shape == input => Ok(d.output_shape),
            Self::Dense(d) => Err(Error::Shape(format!("operator expects input {:?}, got {input:?}", d.input_shape))),
        }
    }

    pub fn apply(&self, x: &Image) -> Result<Image> {
        match self {
            Self::Identity => Ok(x.clone()),
            Self::CircularConvolution(k) => Ok(k.convolve(x, false)),
            Self::Dense(d) => {
                if x.shape() != d.input_shape {
                    return Err(Error::Shape(format!("operator expects input {:?}, got {:?}", d.input_shape, x.shape())));
                }
                let v = &d.matrix * DVector::from_column_slice(x.pixels());
                Ok(Image::from_raw(d.output_shape.0, d.output_shape.1, v.as_slice().to_vec()))
            }
        }
    }

    pub fn adjoint(&self, y: &Image) -> Result<Image> {
        match self {
            Self::Identity => Ok(y.clone()),
            Self::CircularConvolution(k) => Ok(k.convolve(y, true)),
            Self::Dense(d) => {
                if y.shape() != d.output_shape {
                    return Err(Error::Shape(format!("adjoint expects input {:?}, got {:?}", d.output_shape, y.shape())));
                }
                let v = d.matrix.tr_mul(&DVector::from_column_slice(y.pixels()));
                Ok(Image::from_raw(d.input_shape.0, d.input_shape.1, v.as_slice().to_vec()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::gaussian_image;
    use proptest::prelude::*;

    /// Row `(r, c)` of the circulant: `A[(r,c),(r',c')] = k[(r − r') mod h, (c − c') mod w]`
    /// summed over all taps that alias onto the same offset.
    fn brute_force_circulant(k: &Stencil, w: usize, h: usize) -> DMatrix<f64> {
        let n = w * h;
        let mut m = DMatrix::zeros(n, n);
        let ci = k.height() as isize / 2;
        let cj = k.width() as isize / 2;
        for r in 0..h {
            for c in 0..w {
                for i in 0..k.height() {
                    for j in 0..k.width() {
                        let di = i as isize - ci;
                        let dj = j as isize - cj;
                        let sr = (r as isize - di).rem_euclid(h as isize) as usize;
                        let sc = (c as isize - dj).rem_euclid(w as isize) as usize;
                        m[(r * w + c, sr * w + sc)] += k.weights()[i * k.width() + j];
                    }
                }
            }
        }
        m
    }

    fn relerr(a: &Image, b: &Image) -> f64 {
        a.dist_sq(b).sqrt() / (b.norm() + 1e-300)
    }

    #[test]
    fn identity_apply() {
        let x = gaussian_image(3, 5, 1);
        assert_eq!(LinearOperator::Identity.apply(&x).unwrap(), x);
    }

    #[test]
    fn box_blur_preserves_constants() {
        let a = LinearOperator::circular(Stencil::uniform(3).unwrap());
        let y = a.apply(&Image::filled(6, 5, 42.0)).unwrap();
        for v in y.pixels() {
            assert!((v - 42.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circular_blur_matches_dense_circulant() {
        let k = Stencil::new(3, 3, vec![0.1, 0.2, 0.05, 0.0, 0.3, 0.1, 0.05, 0.1, 0.1]).unwrap();
        let a = LinearOperator::circular(k.clone());
        let m = brute_force_circulant(&k, 4, 4);
        let x = gaussian_image(4, 4, 7);
        let dense = &m * DVector::from_column_slice(x.pixels());
        let got = a.apply(&x).unwrap();
        for (g, d) in got.pixels().iter().zip(dense.iter()) {
            assert!((g - d).abs() < 1e-12);
        }
        let adj = m.tr_mul(&DVector::from_column_slice(x.pixels()));
        let got = a.adjoint(&x).unwrap();
        for (g, d) in got.pixels().iter().zip(adj.iter()) {
            assert!((g - d).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_larger_than_image_wraps() {
        let k = Stencil::uniform(5).unwrap();
        let m = brute_force_circulant(&k, 3, 2);
        let x = gaussian_image(3, 2, 2);
        let dense = &m * DVector::from_column_slice(x.pixels());
        let got = LinearOperator::circular(k).apply(&x).unwrap();
        assert!(relerr(&got, &Image::new(3, 2, dense.as_slice().to_vec()).unwrap()) < 1e-12);
    }

    #[test]
    fn spectrum_diagonalizes_convolution() {
        let k = Stencil::new(3, 1, vec![0.2, 0.5, 0.3]).unwrap();
        let x = gaussian_image(8, 4, 3);
        let direct = LinearOperator::circular(k.clone()).apply(&x).unwrap();
        let spec = k.spectrum(8, 4);
        let xf = fft::forward_real(x.pixels(), 8, 4);
        let prod = xf.iter().zip(&spec).map(|(a, b)| a * b).collect();
        let via = Image::new(8, 4, fft::inverse_real(prod, 8, 4)).unwrap();
        assert!(relerr(&via, &direct) < 1e-12);
    }

    #[test]
    fn dense_shape_errors() {
        let a = LinearOperator::dense(DMatrix::from_element(2, 3, 1.0));
        assert!(matches!(a.apply(&Image::zeros(2, 1)), Err(Error::Shape(_))));
        assert!(matches!(a.adjoint(&Image::zeros(3, 1)), Err(Error::Shape(_))));
        assert_eq!(a.apply(&Image::filled(3, 1, 1.0)).unwrap().pixels(), &[3.0, 3.0]);
    }

    #[test]
    fn even_stencil_rejected() {
        assert!(matches!(Stencil::uniform(4), Err(Error::Config(_))));
    }

    fn check_adjoint(a: &LinearOperator, w: usize, h: usize, seed: u64) -> (f64, f64) {
        let u = gaussian_image(w, h, seed);
        let au = a.apply(&u).unwrap();
        let v = gaussian_image(au.width(), au.height(), seed ^ 0x9e37);
        let atv = a.adjoint(&v).unwrap();
        ((au.dot(&v) - u.dot(&atv)).abs(), 1e-12 * (au.norm() * v.norm() + 1.0))
    }

    #[test]
    fn adjoint_identity_for_all_kinds() {
        let mut m = DMatrix::zeros(6, 8);
        let g = gaussian_image(8, 6, 11);
        for i in 0..6 {
            for j in 0..8 {
                m[(i, j)] = g.get(i, j);
            }
        }
        let ops = [
            (LinearOperator::Identity, 5, 4),
            (LinearOperator::circular(Stencil::uniform(3).unwrap()), 7, 6),
            (LinearOperator::circular(Stencil::new(3, 5, (0..15).map(|i| i as f64 / 50.0).collect()).unwrap()), 6, 9),
            (LinearOperator::dense(m), 8, 1),
        ];
        for (a, w, h) in &ops {
            for seed in 0..100 {
                let (gap, tol) = check_adjoint(a, *w, *h, seed);
                assert!(gap <= tol, "{a:?}: {gap} > {tol}");
            }
        }
    }

    proptest! {
        #[test]
        fn convolution_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let op = LinearOperator::circular(Stencil::uniform(3).unwrap());
            let x = gaussian_image(5, 4, seed);
            let y = gaussian_image(5, 4, seed.wrapping_add(1));
            let lhs = op.apply(&x.lincomb(a, &y, b)).unwrap();
            let rhs = op.apply(&x).unwrap().lincomb(a, &op.apply(&y).unwrap(), b);
            prop_assert!(relerr(&lhs, &rhs) < 1e-12 || rhs.norm() < 1e-12);
        }
    }
}
