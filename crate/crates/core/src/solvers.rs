//! The RED solver family with per-iteration instrumentation.
//!
//! The proximal-gradient family (PG, DPG, APG) starts from
//! `v₀ = f(x₀)/L − ((1 − L)/L)x₀`, i.e. its own `v`-update applied to `x₀`;
//! with `L = 1` PG then reproduces the fixed-point iteration exactly. ADMM
//! starts from `v₀ = x₀`, `u₀ = 0`.
//!
//! Every solver runs exactly `K` outer iterations unless an early-stop
//! tolerance is set, and fails fast with [`Error::Divergence`] once
//! `‖x_k‖ > 10⁶`.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::diagnostics::RedProblem;
use crate::image::{gaussian_image, psnr};
use crate::{Denoiser, Error, Image, Result};

/// Iterates whose norm exceeds this are treated as divergent.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// Header of the trajectory CSV.
pub const TRAJECTORY_COLUMNS: [&str; 6] = ["iter", "psnr_db", "cost_red", "fp_residual", "update_dist", "time_s"];

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// `Aᵀy` normalized to unit DC gain.
    Backprojection,
    Zeros,
    Provided(Image),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// ADMM penalty `β`.
    pub beta: f64,
    /// PG / APG step parameter `L`.
    pub l: f64,
    /// DPG schedule endpoints.
    pub l0: f64,
    pub l_inf: f64,
    /// Outer iterations `K`.
    pub iterations: usize,
    /// ADMM inner iterations `I`.
    pub inner_iterations: usize,
    /// SD stepsize; `None` selects `σ²/(1 + λσ²)`.
    pub mu: Option<f64>,
    pub init: Init,
    /// Ground truth for the PSNR column.
    pub reference: Option<Image>,
    /// Stop once `‖g(x_k)‖²/N` drops to this value.
    pub tolerance: Option<f64>,
    /// Keep every iterate in the trajectory.
    pub keep_iterates: bool,
    /// Fill `time_s`; off by default so trajectories are reproducible bit for bit.
    pub record_time: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta: 0.001,
            l: 1.01,
            l0: 0.2,
            l_inf: 2.0,
            iterations: 200,
            inner_iterations: 1,
            mu: None,
            init: Init::Backprojection,
            reference: None,
            tolerance: None,
            keep_iterates: false,
            record_time: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("beta", self.beta), ("L", self.l), ("L0", self.l0), ("L_inf", self.l_inf)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if let Some(mu) = self.mu {
            if !(mu > 0.0) || !mu.is_finite() {
                return Err(Error::Config(format!("mu must be finite and > 0, got {mu}")));
            }
        }
        if self.inner_iterations == 0 {
            return Err(Error::Config("inner iterations must be >= 1".into()));
        }
        Ok(())
    }

    /// Non-fatal remarks, e.g. PG convergence is only guaranteed for `L > 1`.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.l <= 1.0 {
            out.push(format!("L = {} <= 1: PG/APG convergence is not guaranteed", self.l));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub psnr_db: Option<f64>,
    pub cost_red: f64,
    /// `‖g(x_k)‖²/N`.
    pub fp_residual: f64,
    /// `‖x_k − x_{k−1}‖²/N`.
    pub update_dist: f64,
    pub time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<IterationRecord>,
    /// `x_1 … x_K`, filled only with `keep_iterates`.
    pub iterates: Vec<Image>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = TRAJECTORY_COLUMNS.join(",");
        s.push('\n');
        for r in &self.records {
            let psnr = r.psnr_db.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{},{},{}", r.iter, psnr, r.cost_red, r.fp_residual, r.update_dist, r.time_s);
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Shared bookkeeping: divergence guard, metrics, early stop.
struct Recorder<'c> {
    cfg: &'c SolverConfig,
    start: Instant,
    traj: Trajectory,
}

impl<'c> Recorder<'c> {
    fn new(cfg: &'c SolverConfig) -> Self {
        Self { cfg, start: Instant::now(), traj: Trajectory::default() }
    }

    /// Logs iterate `k` given `f(x_k)`; returns `true` when the early-stop
    /// tolerance is met.
    fn record(&mut self, p: &RedProblem<'_>, k: usize, x: &Image, fx: &Image, prev: &Image) -> Result<bool> {
        let norm = x.norm();
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            return Err(Error::Divergence { iteration: k, norm });
        }
        let n = x.len() as f64;
        let rho = 0.5 * x.pixels().iter().zip(fx.pixels()).map(|(a, b)| a * (a - b)).sum::<f64>();
        let fp_residual = p.residual_with(x, fx)?.norm_sq() / n;
        let rec = IterationRecord {
            iter: k,
            psnr_db: self.cfg.reference.as_ref().map(|r| psnr(r, x)).transpose()?,
            cost_red: p.loss.eval(x)? + p.lambda * rho,
            fp_residual,
            update_dist: x.dist_sq(prev) / n,
            time_s: if self.cfg.record_time { self.start.elapsed().as_secs_f64() } else { 0.0 },
        };
        self.traj.records.push(rec);
        if self.cfg.keep_iterates {
            self.traj.iterates.push(x.clone());
        }
        Ok(self.cfg.tolerance.is_some_and(|tol| fp_residual <= tol))
    }

    fn finish(self, x: Image) -> (Image, Trajectory) {
        (x, self.traj)
    }
}

fn initial(p: &RedProblem<'_>, cfg: &SolverConfig) -> Result<Image> {
    cfg.validate()?;
    let (w, h) = p.loss.input_shape();
    match &cfg.init {
        Init::Backprojection => p.loss.backprojection(),
        Init::Zeros => Ok(Image::zeros(w, h)),
        Init::Provided(x) => {
            x.expect_shape(w, h)?;
            Ok(x.clone())
        }
    }
}

fn denoise(f: &dyn Denoiser, x: &Image) -> Result<Image> {
    let fx = f.apply(x)?;
    x.check_shape(&fx, "denoiser output")?;
    Ok(fx)
}

/// `v = f(x)/L − ((1 − L)/L)x`.
fn pg_v(fx: &Image, x: &Image, l: f64) -> Image {
    fx.lincomb(1.0 / l, x, -(1.0 - l) / l)
}

/// Default SD stepsize `σ²/(1 + λσ²)`.
pub fn default_sd_step(sigma2: f64, lambda: f64) -> f64 {
    sigma2 / (1.0 + lambda * sigma2)
}

/// Steepest descent `x_k = x_{k−1} − μ g(x_{k−1})`.
pub fn red_sd(p: &RedProblem<'_>, cfg: &SolverConfig) -> Result<(Image, Trajectory)> {
    let mut x = initial(p, cfg)?;
    let mu = cfg.mu.unwrap_or_else(|| default_sd_step(p.loss.noise_variance(), p.lambda));
    let mut rec = Recorder::new(cfg);
    let mut fx = denoise(p.denoiser, &x)?;
    for k in 1..=cfg.iterations {
        let g = p.residual_with(&x, &fx)?;
        let next = x.lincomb(1.0, &g, -mu);
        fx = denoise(p.denoiser, &next)?;
        let stop = rec.record(p, k, &next, &fx, &x)?;
        x = next;
        if stop {
            break;
        }
    }
    Ok(rec.finish(x))
}

/// ADMM with `I` inner fixed-point iterations for the `v`-update.
pub fn red_admm(p: &RedProblem<'_>, cfg: &SolverConfig) -> Result<(Image, Trajectory)> {
    let mut x = initial(p, cfg)?;
    let (lambda, beta) = (p.lambda, cfg.beta);
    let (a, b) = (lambda / (lambda + beta), beta / (lambda + beta));
    let mut v = x.clone();
    let mut u = Image::zeros(x.width(), x.height());
    let mut rec = Recorder::new(cfg);
    for k in 1..=cfg.iterations {
        let xk = p.loss.prox(&v.sub(&u), beta)?;
        let target = xk.add(&u);
        let mut z = v;
        for _ in 0..cfg.inner_iterations {
            z = denoise(p.denoiser, &z)?.lincomb(a, &target, b);
        }
        v = z;
        u = u.add(&xk).sub(&v);
        let fx = denoise(p.denoiser, &xk)?;
        let stop = rec.record(p, k, &xk, &fx, &x)?;
        x = xk;
        if stop {
            break;
        }
    }
    Ok(rec.finish(x))
}

/// Inexact ADMM: a single denoiser step replaces the `v`-update.
pub fn red_admm_i1(p: &RedProblem<'_>, cfg: &SolverConfig) -> Result<(Image, Trajectory)> {
    let mut x = initial(p, cfg)?;
    let (lambda, beta) = (p.lambda, cfg.beta);
    let mut v = x.clone();
    let mut u = Image::zeros(x.width(), x.height());
    let mut rec = Recorder::new(cfg);
    for k in 1..=cfg.iterations {
        let xk = p.loss.prox(&v.sub(&u), beta)?;
        v = denoise(p.denoiser, &v)?.lincomb(lambda / (lambda + beta), &xk.add(&u), beta / (lambda + beta));
        u = u.add(&xk).sub(&v);
        let fx = denoise(p.denoiser, &xk)?;
        let stop = rec.record(p, k, &xk, &fx, &x)?;
        x = xk;
        if stop {
            break;
        }
    }
    Ok(rec.finish(x))
}

/// Fixed point `x_k = argmin ℓ(x) + (λ/2)‖x − f(x_{k−1})‖²`.
pub fn red_fp(p: &RedProblem<'_>, cfg: &SolverConfig) -> Result<(Image, Trajectory)> {
    let mut x = initial(p, cfg)?;
    let mut fx = denoise(p.denoiser, &x)?;
    let mut rec = Recorder::new(cfg);
    for k in 1..=cfg.iterations {
        let xk = p.loss.prox(&fx, p.lambda)?;
        fx = denoise(p.denoiser, &xk)?;
        let stop = rec.record(p, k, &xk, &fx, &x)?;
        x = xk;
        if stop {
            break;
        }
    }
    Ok(rec.finish(x))
}

/// Proximal gradient with fixed `L`.
pub fn red_pg(p: &RedProblem<'_>, cfg: &SolverConfig) -> Result<(Image, Trajectory)> {
    let l = cfg.l;
    let mut x = initial(p, cfg)?;
    let mut v = pg_v(&denoise(p.denoiser, &x)?, &x, l);
    let mut rec = Recorder::new(cfg);
    for k in 1..=cfg.iterations {
        let xk = p.loss.prox(&v, p.lambda * l)?;
        let fx = denoise(p.denoiser, &xk)?;
        v = pg_v(&fx, &xk, l);
        let stop = rec.record(p, k, &xk, &fx, &x)?;
        x = xk;
        if stop {
            break;
        }
    }
    Ok(rec.finish(x))
}

/// `L_k = (1/L∞ + (1/L₀ − 1/L∞)/√(k+1))⁻¹`; `L_0 = L₀`.
pub fn dpg_schedule(k: usize, l0: f64, l_inf: f64) -> f64 {
    1.0 / (1.0 / l_inf + (1.0 / l0 - 1.0 / l_inf) / ((k + 1) as f64).sqrt())
}

/// Proximal gradient with the dynamic `L_k` schedule.
pub fn red_dpg(p: &RedProblem<'_>, cfg: &SolverConfig) -> Result<(Image, Trajectory)> {
    let mut x = initial(p, cfg)?;
    let mut l_prev = dpg_schedule(0, cfg.l0, cfg.l_inf);
    let mut v = pg_v(&denoise(p.denoiser, &x)?, &x, l_prev);
    let mut rec = Recorder::new(cfg);
    for k in 1..=cfg.iterations {
        let xk = p.loss.prox(&v, p.lambda * l_prev)?;
        let l = dpg_schedule(k, cfg.l0, cfg.l_inf);
        let fx = denoise(p.denoiser, &xk)?;
        v = pg_v(&fx, &xk, l);
        l_prev = l;
        let stop = rec.record(p, k, &xk, &fx, &x)?;
        x = xk;
        if stop {
            break;
        }
    }
    Ok(rec.finish(x))
}

/// `t_k = (1 + √(1 + 4t²_{k−1}))/2` with `t_0 = 1`.
pub fn apg_t(k: usize) -> f64 {
    (0..k).fold(1.0, |t, _| (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0)
}

/// Accelerated proximal gradient with FISTA-style momentum.
pub fn red_apg(p: &RedProblem<'_>, cfg: &SolverConfig) -> Result<(Image, Trajectory)> {
    let l = cfg.l;
    let mut x = initial(p, cfg)?;
    let mut v = pg_v(&denoise(p.denoiser, &x)?, &x, l);
    let mut t_prev = 1.0f64;
    let mut rec = Recorder::new(cfg);
    for k in 1..=cfg.iterations {
        let xk = p.loss.prox(&v, p.lambda * l)?;
        let t = (1.0 + (1.0 + 4.0 * t_prev * t_prev).sqrt()) / 2.0;
        let z = xk.lincomb(1.0, &xk.sub(&x), (t_prev - 1.0) / t);
        v = pg_v(&denoise(p.denoiser, &z)?, &z, l);
        t_prev = t;
        let fx = denoise(p.denoiser, &xk)?;
        let stop = rec.record(p, k, &xk, &fx, &x)?;
        x = xk;
        if stop {
            break;
        }
    }
    Ok(rec.finish(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Solver {
    Sd,
    Admm,
    AdmmI1,
    Fp,
    Pg,
    Dpg,
    Apg,
}

impl Solver {
    pub const ALL: [Solver; 7] = [Solver::Sd, Solver::Admm, Solver::AdmmI1, Solver::Fp, Solver::Pg, Solver::Dpg, Solver::Apg];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Sd => "sd",
            Solver::Admm => "admm",
            Solver::AdmmI1 => "admm-i1",
            Solver::Fp => "fp",
            Solver::Pg => "pg",
            Solver::Dpg => "dpg",
            Solver::Apg => "apg",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn run(self, p: &RedProblem<'_>, cfg: &SolverConfig) -> Result<(Image, Trajectory)> {
        match self {
            Solver::Sd => red_sd(p, cfg),
            Solver::Admm => red_admm(p, cfg),
            Solver::AdmmI1 => red_admm_i1(p, cfg),
            Solver::Fp => red_fp(p, cfg),
            Solver::Pg => red_pg(p, cfg),
            Solver::Dpg => red_dpg(p, cfg),
            Solver::Apg => red_apg(p, cfg),
        }
    }
}

/// Largest `‖f(x₁) − f(x₂)‖/‖x₁ − x₂‖` over random pairs, a lower bound on
/// the Lipschitz constant of `f`.
///
/// Pairs are pixel-scale images (`128 + 50·N(0,1)`) separated by
/// perturbations whose size spans four decades.
pub fn nonexpansiveness_probe(f: &dyn Denoiser, width: usize, height: usize, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Precondition("probe needs at least one trial".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let x1 = gaussian_image(width, height, rng.gen()).scale(50.0).map(|v| v + 128.0);
        let size = 10f64.powf(rng.gen_range(-2.0..2.0));
        let x2 = x1.lincomb(1.0, &gaussian_image(width, height, rng.gen()), size);
        let d = x1.dist_sq(&x2).sqrt();
        if d == 0.0 {
            continue;
        }
        worst = worst.max(f.apply(&x1)?.dist_sq(&f.apply(&x2)?).sqrt() / d);
    }
    Ok(worst)
}

/// Fixed point of RED for a linear symmetric denoiser `W`, found by
/// conjugate gradients on `(AᵀA/σ² + λ(I − W)) x = Aᵀy/σ²`.
///
/// The caller vouches that `p.denoiser` is linear and symmetric with
/// spectrum in `[0, 1]`; CG stops once the relative residual is below `tol`.
pub fn linear_fixed_point(p: &RedProblem<'_>, tol: f64, maxiter: usize) -> Result<Image> {
    let sigma2 = p.loss.noise_variance();
    let op = p.loss.operator();
    let apply = |x: &Image| -> Result<Image> {
        let data = op.adjoint(&op.apply(x)?)?.scale(1.0 / sigma2);
        let reg = x.sub(&p.denoiser.apply(x)?);
        Ok(data.lincomb(1.0, &reg, p.lambda))
    };
    let b = p.loss.adjoint_measurements().scale(1.0 / sigma2);
    let bn = b.norm();
    let (w, h) = b.shape();
    let mut x = Image::zeros(w, h);
    let mut r = b.clone();
    let mut d = r.clone();
    let mut rr = r.norm_sq();
    for k in 0..maxiter {
        if rr.sqrt() <= tol * bn {
            return Ok(x);
        }
        let md = apply(&d)?;
        let curv = d.dot(&md);
        if !(curv > 0.0) {
            return Err(Error::Degenerate(format!("system is not positive definite (step {k})")));
        }
        let a = rr / curv;
        x = x.lincomb(1.0, &d, a);
        r = r.lincomb(1.0, &md, -a);
        let next = r.norm_sq();
        d = r.lincomb(1.0, &d, next / rr);
        rr = next;
    }
    if rr.sqrt() <= tol * bn {
        Ok(x)
    } else {
        Err(Error::NonConvergence { iterations: maxiter, residual: rr.sqrt() / bn })
    }
}
