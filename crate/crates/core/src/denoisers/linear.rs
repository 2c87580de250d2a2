use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Denoiser;
use crate::{Error, Image, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymmetric {
    fn from_rows(rows: Vec<BTreeMap<usize, f64>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[range.clone()].binary_search(&col) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.vals[k] * x[self.cols[k]])
                    .sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] = self.vals[k];
            }
        }
        m
    }

    /// Largest `|aᵢⱼ − aⱼᵢ|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                worst = worst.max((self.vals[k] - self.entry(self.cols[k], r)).abs());
            }
        }
        worst
    }
}

/// `f(x) = Wx` with `W` symmetric, built from the periodic separable stencil
/// `[¼ ½ ¼] ⊗ [¼ ½ ¼]`. Its eigenvalues `(½ + ½cos θ)(½ + ½cos φ)` lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSymmetricDenoiser {
    width: usize,
    height: usize,
    matrix: SparseSymmetric,
    nu: f64,
}

impl LinearSymmetricDenoiser {
    pub fn new(width: usize, height: usize, nu: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config("linear denoiser needs a nonempty shape".into()));
        }
        if !(nu > 0.0) {
            return Err(Error::Config(format!("noise variance must be > 0, got {nu}")));
        }
        let taps = [(-1isize, 0.25), (0, 0.5), (1, 0.25)];
        let wrap = |i: usize, d: isize, n: usize| (i as isize + d).rem_euclid(n as isize) as usize;
        let mut rows = vec![BTreeMap::new(); width * height];
        for r in 0..height {
            for c in 0..width {
                let row = &mut rows[r * width + c];
                for &(dr, wr) in &taps {
                    for &(dc, wc) in &taps {
                        let j = wrap(r, dr, height) * width + wrap(c, dc, width);
                        *row.entry(j).or_insert(0.0) += wr * wc;
                    }
                }
            }
        }
        Ok(Self { width, height, matrix: SparseSymmetric::from_rows(rows), nu })
    }

    pub fn matrix(&self) -> &SparseSymmetric {
        &self.matrix
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Power-iteration estimate of the spectral radius of `W`.
    pub fn spectral_radius(&self, iterations: usize, seed: u64) -> f64 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..self.matrix.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut est = 0.0;
        for _ in 0..iterations {
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= norm);
            let wv = self.matrix.mul(&v);
            est = wv.iter().map(|a| a * a).sum::<f64>().sqrt();
            v = wv;
        }
        est
    }
}

impl Denoiser for LinearSymmetricDenoiser {
    fn apply(&self, x: &Image) -> Result<Image> {
        x.expect_shape(self.width, self.height)?;
        Ok(Image::from_raw(self.width, self.height, self.matrix.mul(x.pixels())))
    }

    fn noise_variance(&self) -> f64 {
        self.nu
    }

    fn name(&self) -> String {
        "linear-symmetric".into()
    }
}

/// `f(x) = Wx` for an arbitrary dense `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLinearDenoiser {
    width: usize,
    height: usize,
    matrix: DMatrix<f64>,
    nu: f64,
}

impl DenseLinearDenoiser {
    pub fn new(width: usize, height: usize, matrix: DMatrix<f64>, nu: f64) -> Result<Self> {
        let n = width * height;
        if matrix.shape() != (n, n) {
            return Err(Error::Shape(format!(
                "matrix is {:?}, expected {n}x{n}",
                matrix.shape()
            )));
        }
        Ok(Self { width, height, matrix, nu })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl Denoiser for DenseLinearDenoiser {
    fn apply(&self, x: &Image) -> Result<Image> {
        x.expect_shape(self.width, self.height)?;
        let v = &self.matrix * DVector::from_column_slice(x.pixels());
        Ok(Image::from_raw(self.width, self.height, v.as_slice().to_vec()))
    }

    fn noise_variance(&self) -> f64 {
        self.nu
    }

    fn name(&self) -> String {
        "dense-linear".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_with_unit_radius() {
        for &(w, h) in &[(6, 5), (2, 2), (1, 4), (8, 8)] {
            let d = LinearSymmetricDenoiser::new(w, h, 1.0).unwrap();
            assert!(d.matrix().asymmetry() <= 1e-14);
            let rho = d.spectral_radius(200, 1);
            assert!(rho <= 1.0 + 1e-12 && rho > 0.99, "{w}x{h}: {rho}");
            // Rows sum to one: constants are preserved.
            let y = d.apply(&Image::filled(w, h, 2.0)).unwrap();
            assert!(y.pixels().iter().all(|v| (v - 2.0).abs() < 1e-14));
        }
    }

    #[test]
    fn eigenvalues_in_unit_interval() {
        let d = LinearSymmetricDenoiser::new(5, 4, 1.0).unwrap();
        let eig = nalgebra::SymmetricEigen::new(d.matrix().to_dense()).eigenvalues;
        assert!(eig.iter().all(|&l| l > -1e-12 && l < 1.0 + 1e-12));
    }

    #[test]
    fn dense_matches_sparse() {
        let d = LinearSymmetricDenoiser::new(4, 4, 1.0).unwrap();
        let dense = DenseLinearDenoiser::new(4, 4, d.matrix().to_dense(), 1.0).unwrap();
        let x = crate::image::gaussian_image(4, 4, 2);
        let a = d.apply(&x).unwrap();
        let b = dense.apply(&x).unwrap();
        assert!(a.dist_sq(&b) < 1e-28);
        assert!(d.apply(&Image::zeros(3, 4)).is_err());
    }
}
