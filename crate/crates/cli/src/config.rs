//! Experiment configuration.
//!
//! A config is a TOML document: top-level keys followed by optional
//! `[section]` tables, each holding flat `key = value` pairs. Unknown keys
//! and sections are rejected. Every key except `experiment` and `seed` has an
//! experiment-specific default.
//!
//! ```toml
//! experiment = "deblur"
//! seed = 7
//! output = "out"            # relative to the config file; REDLAB_OUT wins
//!
//! [image]
//! paths = ["cameraman.pgm"] # PGM P2/P5; omit for synthetic images
//! width = 64                # synthetic size
//! height = 64
//! count = 10                # diagnostics: number of synthetic patches
//! patch = 16                # diagnostics: centre patch side
//!
//! [denoiser]
//! kinds = ["tdt", "linear"] # tdt, mf, nlm, linear, identity
//! nu = 10.5625
//! threshold = 0.001         # tdt
//! window = 3                # mf
//! patch_radius = 1          # nlm
//! search_radius = 5         # nlm
//! h = 50.0                  # nlm bandwidth, default sqrt(18 nu)
//!
//! [problem]
//! blur = 9                  # uniform blur width, 0 for denoising
//! sigma2 = 2.0
//! lambda = 0.02
//!
//! [solver]
//! algorithms = ["fp", "pg"] # sd, admm, admm-i1, fp, pg, dpg, apg
//! iterations = 200
//! beta = 0.001
//! l = 1.01
//! apg_l = 1.0
//! l0 = 0.2
//! l_inf = 2.0
//! inner_iterations = 1
//! mu = 1.0                  # sd step, default sigma2/(1 + lambda sigma2)
//! init = "backprojection"   # or "zeros"
//! tolerance = 1e-8          # optional early stop on the fixed-point residual
//! record_time = false       # wall time makes outputs non-reproducible
//!
//! [diagnostics]
//! epsilon = 1e-3
//!
//! [slice]
//! radius = 40.0
//! points = 21
//!
//! [tweedie]
//! instances = 20
//! dims = [2, 4, 8]
//! nus = [0.1, 1.0, 10.0]
//! centers = 5
//! epsilon = 1e-5
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use redlab::denoisers::{LinearSymmetricDenoiser, MedianFilterDenoiser, NlmDenoiser, ScaledIdentity, TdtDenoiser};
use redlab::solvers::{Init, Solver, SolverConfig};
use redlab::Denoiser;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    JacobianReport,
    GradientReport,
    LhReport,
    Trajectory,
    CostSlice,
    Deblur,
    TweedieCheck,
    EquilibriumCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::JacobianReport,
        Experiment::GradientReport,
        Experiment::LhReport,
        Experiment::Trajectory,
        Experiment::CostSlice,
        Experiment::Deblur,
        Experiment::TweedieCheck,
        Experiment::EquilibriumCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::JacobianReport => "jacobian-report",
            Experiment::GradientReport => "gradient-report",
            Experiment::LhReport => "lh-report",
            Experiment::Trajectory => "trajectory",
            Experiment::CostSlice => "cost-slice",
            Experiment::Deblur => "deblur",
            Experiment::TweedieCheck => "tweedie-check",
            Experiment::EquilibriumCheck => "equilibrium-check",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Experiment::JacobianReport => "Jacobian symmetry error of each denoiser on image patches",
            Experiment::GradientReport => "accuracy of the three RED gradient expressions against finite differences",
            Experiment::LhReport => "local homogeneity errors of each denoiser",
            Experiment::Trajectory => "per-iteration RED-SD trajectory with cost, residual and PSNR",
            Experiment::CostSlice => "RED cost and residual field on a 2-D slice through the fixed point",
            Experiment::Deblur => "all RED solvers on a deblurring problem",
            Experiment::TweedieCheck => "Tweedie regularizer gradient against finite differences",
            Experiment::EquilibriumCheck => "consensus-equilibrium residuals of converged RED solutions",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    fn is_diagnostic(self) -> bool {
        matches!(self, Experiment::JacobianReport | Experiment::GradientReport | Experiment::LhReport)
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: String,
    seed: Option<u64>,
    output: Option<PathBuf>,
    #[serde(default)]
    image: RawImage,
    #[serde(default)]
    denoiser: RawDenoiser,
    #[serde(default)]
    problem: RawProblem,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    diagnostics: RawDiagnostics,
    #[serde(default)]
    slice: RawSlice,
    #[serde(default)]
    tweedie: RawTweedie,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawImage {
    #[serde(default)]
    paths: Vec<PathBuf>,
    width: Option<usize>,
    height: Option<usize>,
    count: Option<usize>,
    patch: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDenoiser {
    kinds: Option<Vec<String>>,
    nu: Option<f64>,
    threshold: Option<f64>,
    window: Option<usize>,
    patch_radius: Option<usize>,
    search_radius: Option<usize>,
    h: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    blur: Option<usize>,
    sigma2: Option<f64>,
    lambda: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    algorithms: Option<Vec<String>>,
    iterations: Option<usize>,
    beta: Option<f64>,
    l: Option<f64>,
    apg_l: Option<f64>,
    l0: Option<f64>,
    l_inf: Option<f64>,
    inner_iterations: Option<usize>,
    mu: Option<f64>,
    init: Option<String>,
    tolerance: Option<f64>,
    record_time: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDiagnostics {
    epsilon: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSlice {
    radius: Option<f64>,
    points: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTweedie {
    instances: Option<usize>,
    dims: Option<Vec<usize>>,
    nus: Option<Vec<f64>>,
    centers: Option<usize>,
    epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenoiserKind {
    Tdt,
    Median,
    Nlm,
    Linear,
    Identity,
}

impl DenoiserKind {
    const NAMES: [&'static str; 5] = ["tdt", "mf", "nlm", "linear", "identity"];

    fn parse(s: &str) -> Result<Self, ConfigError> {
        Ok(match s {
            "tdt" => DenoiserKind::Tdt,
            "mf" => DenoiserKind::Median,
            "nlm" => DenoiserKind::Nlm,
            "linear" => DenoiserKind::Linear,
            "identity" => DenoiserKind::Identity,
            _ => return err(format!("unknown denoiser `{s}`; valid denoisers: {}", Self::NAMES.join(", "))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            DenoiserKind::Tdt => "tdt",
            DenoiserKind::Median => "mf",
            DenoiserKind::Nlm => "nlm",
            DenoiserKind::Linear => "linear",
            DenoiserKind::Identity => "identity",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenoiserSpec {
    pub kind: DenoiserKind,
    pub nu: f64,
    pub threshold: f64,
    pub window: usize,
    pub patch_radius: usize,
    pub search_radius: usize,
    pub h: f64,
}

impl DenoiserSpec {
    /// Builds the denoiser for images of the given shape.
    pub fn build(&self, width: usize, height: usize) -> redlab::Result<Box<dyn Denoiser>> {
        Ok(match self.kind {
            DenoiserKind::Tdt => Box::new(TdtDenoiser::new(self.threshold, self.nu)?),
            DenoiserKind::Median => Box::new(MedianFilterDenoiser::new(self.window, self.nu)?),
            DenoiserKind::Nlm => Box::new(NlmDenoiser::new(self.patch_radius, self.search_radius, self.h, self.nu)?),
            DenoiserKind::Linear => Box::new(LinearSymmetricDenoiser::new(width, height, self.nu)?),
            DenoiserKind::Identity => Box::new(ScaledIdentity::identity()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImageSource {
    Files(Vec<PathBuf>),
    Synthetic { width: usize, height: usize, count: usize },
}

#[derive(Debug, Clone)]
pub struct TweedieParams {
    pub instances: usize,
    pub dims: Vec<usize>,
    pub nus: Vec<f64>,
    pub centers: usize,
    pub epsilon: f64,
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone)]
pub struct Plan {
    pub experiment: Experiment,
    pub seed: u64,
    pub output: PathBuf,
    pub images: ImageSource,
    pub patch: usize,
    pub denoisers: Vec<DenoiserSpec>,
    pub blur: usize,
    pub sigma2: f64,
    pub lambda: f64,
    pub solvers: Vec<Solver>,
    pub solver: SolverConfig,
    pub apg_l: f64,
    pub epsilon: f64,
    pub slice_radius: f64,
    pub slice_points: usize,
    pub tweedie: TweedieParams,
}

fn positive(name: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        err(format!("`{name}` must be a positive finite number, got {v}"))
    }
}

/// Parses and validates a config. Image paths and `output` are resolved
/// against `base`; the `REDLAB_OUT` override is applied by the caller via
/// `out_override`.
pub fn parse(text: &str, base: &Path, out_override: Option<PathBuf>) -> Result<Plan, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError(format!("malformed config: {e}")))?;
    let experiment = Experiment::from_name(&raw.experiment).ok_or_else(|| {
        let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
        ConfigError(format!("unknown experiment `{}`; valid experiments: {}", raw.experiment, names.join(", ")))
    })?;
    let Some(seed) = raw.seed else {
        return err("`seed` is required");
    };
    let output = out_override.unwrap_or_else(|| base.join(raw.output.unwrap_or_else(|| PathBuf::from("redlab-out"))));

    let diag = experiment.is_diagnostic();
    let denoising = matches!(experiment, Experiment::Trajectory | Experiment::CostSlice);

    // Images.
    let ri = raw.image;
    let patch = ri.patch.unwrap_or(16);
    let images = if !ri.paths.is_empty() {
        if ri.width.is_some() || ri.height.is_some() || ri.count.is_some() {
            return err("`image.paths` cannot be combined with `width`, `height` or `count`");
        }
        let paths: Vec<PathBuf> = ri.paths.iter().map(|p| base.join(p)).collect();
        for p in &paths {
            if !p.is_file() {
                return err(format!("image file {} does not exist", p.display()));
            }
        }
        if !diag && paths.len() != 1 {
            return err(format!("{} takes exactly one image path, got {}", experiment.name(), paths.len()));
        }
        ImageSource::Files(paths)
    } else {
        let width = ri.width.unwrap_or(64);
        let height = ri.height.unwrap_or(width);
        let count = ri.count.unwrap_or(if diag { 10 } else { 1 });
        if width == 0 || height == 0 || count == 0 {
            return err("image `width`, `height` and `count` must be positive");
        }
        if diag && (patch > width || patch > height) {
            return err(format!("patch size {patch} exceeds image size {width}x{height}"));
        }
        ImageSource::Synthetic { width, height, count }
    };
    if diag && patch == 0 {
        return err("`image.patch` must be positive");
    }

    // Problem.
    let rp = raw.problem;
    let blur = rp.blur.unwrap_or(if denoising { 0 } else { 9 });
    if blur != 0 && blur % 2 == 0 {
        return err(format!("`problem.blur` must be odd or 0, got {blur}"));
    }
    let sigma2 = positive("problem.sigma2", rp.sigma2.unwrap_or(if denoising { 20.0 } else { 2.0 }))?;
    let lambda = positive("problem.lambda", rp.lambda.unwrap_or(if denoising { 0.05 } else { 0.02 }))?;

    // Denoisers.
    let rd = raw.denoiser;
    let default_kinds: &[&str] = match experiment {
        e if e.is_diagnostic() => &["tdt", "mf", "nlm"],
        Experiment::Trajectory | Experiment::CostSlice => &["mf"],
        Experiment::Deblur => &["tdt"],
        Experiment::EquilibriumCheck => &["linear", "tdt"],
        _ => &[],
    };
    let kinds: Vec<String> = rd.kinds.unwrap_or_else(|| default_kinds.iter().map(|s| s.to_string()).collect());
    let nu = positive(
        "denoiser.nu",
        rd.nu.unwrap_or(if diag {
            625.0
        } else if denoising {
            sigma2
        } else {
            3.25 * 3.25
        }),
    )?;
    let threshold = rd.threshold.unwrap_or(if diag { nu.sqrt() } else { 0.001 });
    if !(threshold >= 0.0) || !threshold.is_finite() {
        return err(format!("`denoiser.threshold` must be >= 0, got {threshold}"));
    }
    let window = rd.window.unwrap_or(3);
    if window % 2 == 0 {
        return err(format!("`denoiser.window` must be odd, got {window}"));
    }
    let patch_radius = rd.patch_radius.unwrap_or(1);
    let search_radius = rd.search_radius.unwrap_or(5);
    let side = (2 * patch_radius + 1) as f64;
    let h = positive("denoiser.h", rd.h.unwrap_or((2.0 * nu * side * side).sqrt()))?;
    let mut denoisers = Vec::new();
    for k in &kinds {
        let kind = DenoiserKind::parse(k)?;
        if denoisers.iter().any(|d: &DenoiserSpec| d.kind == kind) {
            return err(format!("denoiser `{k}` listed twice"));
        }
        denoisers.push(DenoiserSpec { kind, nu, threshold, window, patch_radius, search_radius, h });
    }
    if experiment != Experiment::TweedieCheck && denoisers.is_empty() {
        return err("`denoiser.kinds` must name at least one denoiser");
    }

    // Solvers.
    let rs = raw.solver;
    let default_solvers: Vec<&str> = match experiment {
        Experiment::Trajectory | Experiment::CostSlice => vec!["sd"],
        Experiment::Deblur => Solver::ALL.iter().map(|s| s.name()).collect(),
        _ => vec![],
    };
    let names = rs.algorithms.unwrap_or_else(|| default_solvers.iter().map(|s| s.to_string()).collect());
    let mut solvers = Vec::new();
    for n in &names {
        let s = Solver::from_name(n).ok_or_else(|| {
            let valid: Vec<_> = Solver::ALL.iter().map(|s| s.name()).collect();
            ConfigError(format!("unknown solver `{n}`; valid solvers: {}", valid.join(", ")))
        })?;
        if solvers.contains(&s) {
            return err(format!("solver `{n}` listed twice"));
        }
        solvers.push(s);
    }
    let default_iters = match experiment {
        Experiment::Trajectory | Experiment::CostSlice => 500,
        Experiment::EquilibriumCheck => 2000,
        _ => 200,
    };
    let base_cfg = SolverConfig::default();
    let init = match rs.init.as_deref() {
        None | Some("backprojection") => Init::Backprojection,
        Some("zeros") => Init::Zeros,
        Some(other) => return err(format!("unknown init `{other}`; valid: backprojection, zeros")),
    };
    let solver = SolverConfig {
        beta: rs.beta.unwrap_or(base_cfg.beta),
        l: rs.l.unwrap_or(base_cfg.l),
        l0: rs.l0.unwrap_or(base_cfg.l0),
        l_inf: rs.l_inf.unwrap_or(base_cfg.l_inf),
        iterations: rs.iterations.unwrap_or(default_iters),
        inner_iterations: rs.inner_iterations.unwrap_or(base_cfg.inner_iterations),
        mu: rs.mu,
        init,
        tolerance: rs.tolerance,
        record_time: rs.record_time.unwrap_or(false),
        ..base_cfg
    };
    solver.validate().map_err(|e| ConfigError(format!("invalid solver settings: {e}")))?;
    let apg_l = positive("solver.apg_l", rs.apg_l.unwrap_or(1.0))?;
    if solver.iterations == 0 {
        return err("`solver.iterations` must be positive");
    }

    let epsilon = positive("diagnostics.epsilon", raw.diagnostics.epsilon.unwrap_or(1e-3))?;
    let slice_radius = positive("slice.radius", raw.slice.radius.unwrap_or(40.0))?;
    let slice_points = raw.slice.points.unwrap_or(21);
    if slice_points < 2 {
        return err("`slice.points` must be at least 2");
    }

    let rt = raw.tweedie;
    let tweedie = TweedieParams {
        instances: rt.instances.unwrap_or(20),
        dims: rt.dims.unwrap_or_else(|| vec![2, 4, 8]),
        nus: rt.nus.unwrap_or_else(|| vec![0.1, 1.0, 10.0]),
        centers: rt.centers.unwrap_or(5),
        epsilon: positive("tweedie.epsilon", rt.epsilon.unwrap_or(1e-5))?,
    };
    if tweedie.instances == 0 || tweedie.centers == 0 || tweedie.dims.is_empty() || tweedie.nus.is_empty() {
        return err("`tweedie` needs positive `instances` and `centers` and nonempty `dims` and `nus`");
    }
    if tweedie.dims.contains(&0) {
        return err("`tweedie.dims` entries must be positive");
    }
    for &v in &tweedie.nus {
        positive("tweedie.nus", v)?;
    }

    // Shape requirements that would otherwise only surface mid-run.
    if let ImageSource::Synthetic { width, height, .. } = images {
        let (w, h) = if diag { (patch, patch) } else { (width, height) };
        if denoisers.iter().any(|d| d.kind == DenoiserKind::Tdt) && !(w.is_power_of_two() && h.is_power_of_two()) {
            return err(format!("the tdt denoiser needs power-of-two image sides, got {w}x{h}"));
        }
        if !diag && blur > w.min(h) {
            return err(format!("blur width {blur} exceeds image size {w}x{h}"));
        }
    }

    Ok(Plan {
        experiment,
        seed,
        output,
        images,
        patch,
        denoisers,
        blur,
        sigma2,
        lambda,
        solvers,
        solver,
        apg_l,
        epsilon,
        slice_radius,
        slice_points,
        tweedie,
    })
}
