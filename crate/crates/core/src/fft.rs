use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place 2-D DFT of a row-major `width × height` grid. The inverse is
/// normalized by `1/N` so that `inverse(forward(x)) = x`.
pub(crate) fn fft2(data: &mut [Complex64], width: usize, height: usize, inverse: bool) {
    debug_assert_eq!(data.len(), width * height);
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = if inverse { planner.plan_fft_inverse(width) } else { planner.plan_fft_forward(width) };
    for row in data.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    if height > 1 {
        let col_fft = if inverse { planner.plan_fft_inverse(height) } else { planner.plan_fft_forward(height) };
        let mut col = vec![Complex64::new(0.0, 0.0); height];
        for c in 0..width {
            for r in 0..height {
                col[r] = data[r * width + c];
            }
            col_fft.process(&mut col);
            for r in 0..height {
                data[r * width + c] = col[r];
            }
        }
    }
    if inverse {
        let scale = 1.0 / (width * height) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

pub(crate) fn forward_real(values: &[f64], width: usize, height: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut buf, width, height, false);
    buf
}

/// Inverse transform keeping the real part.
pub(crate) fn inverse_real(mut spectrum: Vec<Complex64>, width: usize, height: usize) -> Vec<f64> {
    fft2(&mut spectrum, width, height, true);
    spectrum.into_iter().map(|c| c.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let x: Vec<f64> = (0..24).map(|i| ((i * 7) % 5) as f64 - 1.5).collect();
        let back = inverse_real(forward_real(&x, 6, 4), 6, 4);
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dc_term_is_sum() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let s = forward_real(&x, 3, 2);
        assert!((s[0].re - 21.0).abs() < 1e-12 && s[0].im.abs() < 1e-12);
    }
}
