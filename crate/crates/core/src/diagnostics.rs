//! Finite-difference probes of the RED regularizer `ρ(x) = ½ xᵀ(x − f(x))`.
//!
//! Everything here works on the mathematical map `f`; nothing is clipped to
//! the pixel range, so points near 0 or 255 are differentiated as-is.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::{Denoiser, Error, Image, QuadraticLoss, Result};

/// Default finite-difference step.
pub const DEFAULT_EPSILON: f64 = 1e-3;

/// A central-difference Jacobian `Ĵ`, column `n` being `(f(x+εeₙ) − f(x−εeₙ))/(2ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianEstimate {
    pub matrix: DMatrix<f64>,
    pub epsilon: f64,
}

impl JacobianEstimate {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        Self { matrix, epsilon: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `Ĵv` on an image of matching size.
    pub fn apply(&self, v: &Image) -> Result<Image> {
        self.mul(v, false)
    }

    /// `Ĵᵀv`.
    pub fn apply_transpose(&self, v: &Image) -> Result<Image> {
        self.mul(v, true)
    }

    fn mul(&self, v: &Image, transpose: bool) -> Result<Image> {
        if v.len() != self.dim() {
            return Err(Error::Shape(format!("Jacobian is {n}x{n}, vector has {}", v.len(), n = self.dim())));
        }
        let dv = DVector::from_column_slice(v.pixels());
        let out = if transpose { self.matrix.tr_mul(&dv) } else { &self.matrix * dv };
        Image::new(v.width(), v.height(), out.as_slice().to_vec())
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Precondition(format!("finite-difference step must be > 0, got {eps}")))
    }
}

/// Central-difference Jacobian of `f` at `x`; exactly `2N` denoiser calls,
/// evaluated in parallel over columns. Differences are divided by the step
/// actually realized in floating point, so linear maps come out exact.
pub fn numerical_jacobian(f: &dyn Denoiser, x: &Image, eps: f64) -> Result<JacobianEstimate> {
    check_eps(eps)?;
    let n = x.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let (xp, xm) = (x.perturbed(j, eps), x.perturbed(j, -eps));
            let step = xp.pixels()[j] - xm.pixels()[j];
            let plus = f.apply(&xp)?;
            let minus = f.apply(&xm)?;
            x.check_shape(&plus, "denoiser output")?;
            Ok(plus.pixels().iter().zip(minus.pixels()).map(|(a, b)| (a - b) / step).collect())
        })
        .collect::<Result<_>>()?;
    let mut matrix = DMatrix::zeros(n, n);
    for (j, col) in cols.iter().enumerate() {
        matrix.set_column(j, &DVector::from_column_slice(col));
    }
    Ok(JacobianEstimate { matrix, epsilon: eps })
}

/// `e^J = ‖Ĵ − Ĵᵀ‖²_F / ‖Ĵ‖²_F`, in `[0, 2]`.
pub fn js_error(j: &JacobianEstimate) -> Result<f64> {
    let den = j.matrix.norm_squared();
    if den == 0.0 {
        return Err(Error::Degenerate("Jacobian is identically zero".into()));
    }
    Ok((&j.matrix - j.matrix.transpose()).norm_squared() / den)
}

pub fn rho_red(f: &dyn Denoiser, x: &Image) -> Result<f64> {
    let fx = f.apply(x)?;
    x.check_shape(&fx, "denoiser output")?;
    Ok(rho_from(x, &fx))
}

fn rho_from(x: &Image, fx: &Image) -> f64 {
    0.5 * x.pixels().iter().zip(fx.pixels()).map(|(a, b)| a * (a - b)).sum::<f64>()
}

/// The claimed gradient `x − f(x)`.
pub fn grad_red_romano(f: &dyn Denoiser, x: &Image) -> Result<Image> {
    let fx = f.apply(x)?;
    x.check_shape(&fx, "denoiser output")?;
    Ok(x.sub(&fx))
}

/// The exact gradient `x − ½f(x) − ½Ĵᵀx`.
pub fn grad_red_true(f: &dyn Denoiser, x: &Image, j: &JacobianEstimate) -> Result<Image> {
    let fx = f.apply(x)?;
    x.check_shape(&fx, "denoiser output")?;
    let jtx = j.apply_transpose(x)?;
    Ok(x.lincomb(1.0, &fx, -0.5).lincomb(1.0, &jtx, -0.5))
}

/// The gradient under local homogeneity, `x − ½Ĵx − ½Ĵᵀx`.
pub fn grad_red_lh(x: &Image, j: &JacobianEstimate) -> Result<Image> {
    let jx = j.apply(x)?;
    let jtx = j.apply_transpose(x)?;
    Ok(x.lincomb(1.0, &jx, -0.5).lincomb(1.0, &jtx, -0.5))
}

/// Central-difference gradient of `ρ`.
pub fn numerical_gradient_rho(f: &dyn Denoiser, x: &Image, eps: f64) -> Result<Image> {
    check_eps(eps)?;
    let g: Vec<f64> = (0..x.len())
        .into_par_iter()
        .map(|j| {
            let (xp, xm) = (x.perturbed(j, eps), x.perturbed(j, -eps));
            let step = xp.pixels()[j] - xm.pixels()[j];
            Ok((rho_red(f, &xp)? - rho_red(f, &xm)?) / step)
        })
        .collect::<Result<_>>()?;
    Image::new(x.width(), x.height(), g)
}

/// `e^∇ = ‖a − n‖² / ‖n‖²`.
pub fn grad_error(analytic: &Image, numeric: &Image) -> Result<f64> {
    analytic.check_shape(numeric, "gradient error")?;
    let den = numeric.norm_sq();
    if den == 0.0 {
        return Err(Error::Degenerate("numerical gradient is zero".into()));
    }
    Ok(analytic.dist_sq(numeric) / den)
}

/// `e^{LH,1} = ‖f((1+ε)x) − (1+ε)f(x)‖² / ‖(1+ε)f(x)‖²`.
pub fn lh_error_1(f: &dyn Denoiser, x: &Image, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let scaled = f.apply(&x.scale(1.0 + eps))?;
    let fx = f.apply(x)?.scale(1.0 + eps);
    let den = fx.norm_sq();
    if den == 0.0 {
        return Err(Error::Degenerate("denoiser output is zero".into()));
    }
    Ok(scaled.dist_sq(&fx) / den)
}

/// `e^{LH,2} = ‖Ĵx − f(x)‖² / ‖f(x)‖²` with a fresh Jacobian.
pub fn lh_error_2(f: &dyn Denoiser, x: &Image, eps: f64) -> Result<f64> {
    let j = numerical_jacobian(f, x, eps)?;
    lh_error_2_with(f, x, &j)
}

/// [`lh_error_2`] reusing an existing Jacobian evaluated at `x`.
pub fn lh_error_2_with(f: &dyn Denoiser, x: &Image, j: &JacobianEstimate) -> Result<f64> {
    let fx = f.apply(x)?;
    let den = fx.norm_sq();
    if den == 0.0 {
        return Err(Error::Degenerate("denoiser output is zero".into()));
    }
    Ok(j.apply(x)?.dist_sq(&fx) / den)
}

/// Hessian of `ρ` by second central differences (`2N² + 2N` evaluations
/// of `ρ`). Symmetric by construction.
pub fn numerical_hessian_rho(f: &dyn Denoiser, x: &Image, eps: f64) -> Result<DMatrix<f64>> {
    check_eps(eps)?;
    let n = x.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let vals: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let at = |si: f64, sj: f64| rho_red(f, &x.perturbed(i, si * eps).perturbed(j, sj * eps));
            Ok((at(1.0, 1.0)? - at(1.0, -1.0)? - at(-1.0, 1.0)? + at(-1.0, -1.0)?) / (4.0 * eps * eps))
        })
        .collect::<Result<_>>()?;
    let mut h = DMatrix::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(vals) {
        h[(i, j)] = v;
        h[(j, i)] = v;
    }
    Ok(h)
}

/// `I − ½W − ½Wᵀ`, the Hessian of `ρ` for `f(x) = Wx`.
pub fn analytic_hessian_linear(w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows();
    DMatrix::identity(n, n) - (w + w.transpose()) * 0.5
}

/// The RED objective `ℓ(x; y) + λρ(x)` with a concrete denoiser.
#[derive(Clone, Copy)]
pub struct RedProblem<'a> {
    pub loss: &'a QuadraticLoss,
    pub lambda: f64,
    pub denoiser: &'a dyn Denoiser,
}

impl<'a> RedProblem<'a> {
    pub fn new(loss: &'a QuadraticLoss, lambda: f64, denoiser: &'a dyn Denoiser) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be finite and > 0, got {lambda}")));
        }
        Ok(Self { loss, lambda, denoiser })
    }

    /// `C_RED(x) = ‖Ax − y‖²/(2σ²) + λρ(x)`.
    pub fn cost(&self, x: &Image) -> Result<f64> {
        Ok(self.loss.eval(x)? + self.lambda * rho_red(self.denoiser, x)?)
    }

    /// The fixed-point residual `g(x) = Aᵀ(Ax − y)/σ² + λ(x − f(x))`.
    pub fn residual(&self, x: &Image) -> Result<Image> {
        let fx = self.denoiser.apply(x)?;
        self.residual_with(x, &fx)
    }

    /// [`RedProblem::residual`] with `f(x)` already computed.
    pub fn residual_with(&self, x: &Image, fx: &Image) -> Result<Image> {
        x.check_shape(fx, "denoiser output")?;
        let g = self.loss.grad(x)?;
        Ok(g.lincomb(1.0, &x.sub(fx), self.lambda))
    }

    /// `‖g(x)‖² / N`, the per-pixel fixed-point error.
    pub fn residual_mse(&self, x: &Image) -> Result<f64> {
        Ok(self.residual(x)?.norm_sq() / x.len() as f64)
    }
}

pub fn cost_red(p: &RedProblem<'_>, x: &Image) -> Result<f64> {
    p.cost(x)
}

pub fn fp_residual(p: &RedProblem<'_>, x: &Image) -> Result<Image> {
    p.residual(x)
}

/// One grid point of a 2-D cost slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceSample {
    pub alpha: f64,
    pub beta: f64,
    pub cost: f64,
    /// `⟨g, e₁⟩` at the sample.
    pub grad_alpha: f64,
    /// `⟨g, e₂⟩` at the sample.
    pub grad_beta: f64,
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Samples `C_RED` and the projected residual field on
/// `x̂ + αe₁ + βe₂`, row-major in `(α, β)`.
pub fn cost_slice(
    p: &RedProblem<'_>,
    center: &Image,
    e1: &Image,
    e2: &Image,
    alphas: &[f64],
    betas: &[f64],
) -> Result<Vec<SliceSample>> {
    for (name, e) in [("e1", e1), ("e2", e2)] {
        center.check_shape(e, "slice direction")?;
        if (e.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!("slice direction {name} is not unit-norm")));
        }
    }
    let grid: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| betas.iter().map(move |&b| (a, b))).collect();
    grid.par_iter()
        .map(|&(alpha, beta)| {
            let x = center.lincomb(1.0, e1, alpha).lincomb(1.0, e2, beta);
            let fx = p.denoiser.apply(&x)?;
            x.check_shape(&fx, "denoiser output")?;
            let cost = p.loss.eval(&x)? + p.lambda * rho_from(&x, &fx);
            let g = p.residual_with(&x, &fx)?;
            Ok(SliceSample { alpha, beta, cost, grad_alpha: g.dot(e1), grad_beta: g.dot(e2) })
        })
        .collect()
}

/// All six per-image metrics for one denoiser at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticRow {
    pub e_j: f64,
    pub e_grad_romano: f64,
    pub e_grad_lh: f64,
    pub e_grad_true: f64,
    pub e_lh1: f64,
    pub e_lh2: f64,
}

/// Computes every metric with one shared Jacobian.
pub fn diagnose(f: &dyn Denoiser, x: &Image, eps: f64) -> Result<DiagnosticRow> {
    let j = numerical_jacobian(f, x, eps)?;
    let numeric = numerical_gradient_rho(f, x, eps)?;
    Ok(DiagnosticRow {
        e_j: js_error(&j)?,
        e_grad_romano: grad_error(&grad_red_romano(f, x)?, &numeric)?,
        e_grad_lh: grad_error(&grad_red_lh(x, &j)?, &numeric)?,
        e_grad_true: grad_error(&grad_red_true(f, x, &j)?, &numeric)?,
        e_lh1: lh_error_1(f, x, eps)?,
        e_lh2: lh_error_2_with(f, x, &j)?,
    })
}
