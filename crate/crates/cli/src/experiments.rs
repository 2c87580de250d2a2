//! Experiment drivers. Each returns its files in memory so nothing is
//! written unless the whole run succeeds.

use std::fmt::Write as _;
use std::path::Path;

use redlab::diagnostics::{cost_slice, diagnose, linspace, RedProblem};
use redlab::equilibrium::{consensus_residual, denoising_equilibria, pg_dual, EquilibriumPair};
use redlab::image::{awgn, extract_center_patch, gaussian_image};
use redlab::losses::make_uniform_blur;
use redlab::pgm::load_pgm;
use redlab::smd::{tweedie_gradient_error, KdePrior, TweedieRegularizer};
use redlab::solvers::{linear_fixed_point, Solver, SolverConfig, Trajectory};
use redlab::synth::natural_image;
use redlab::{Denoiser, Error, Image, LinearOperator, QuadraticLoss};

use crate::config::{DenoiserKind, DenoiserSpec, Experiment, ImageSource, Plan};
use crate::table::{sci, Table};

pub struct Output {
    pub files: Vec<(String, String)>,
    pub tables: Vec<Table>,
}

pub fn run(plan: &Plan) -> redlab::Result<Output> {
    match plan.experiment {
        Experiment::JacobianReport | Experiment::GradientReport | Experiment::LhReport => diagnostics(plan),
        Experiment::Trajectory => trajectory(plan),
        Experiment::CostSlice => slice(plan),
        Experiment::Deblur => deblur(plan),
        Experiment::TweedieCheck => tweedie(plan),
        Experiment::EquilibriumCheck => equilibrium(plan),
    }
}

fn file_label(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string())
}

/// Labelled evaluation images: whole images for solver experiments, centre
/// patches for diagnostics.
pub fn load_images(plan: &Plan) -> redlab::Result<Vec<(String, Image)>> {
    let diag = matches!(plan.experiment, Experiment::JacobianReport | Experiment::GradientReport | Experiment::LhReport);
    let full: Vec<(String, Image)> = match &plan.images {
        ImageSource::Files(paths) => {
            paths.iter().map(|p| Ok((file_label(p), load_pgm(p)?))).collect::<redlab::Result<_>>()?
        }
        ImageSource::Synthetic { width, height, count } => (0..*count as u64)
            .map(|i| (format!("synthetic-{i}"), natural_image(*width, *height, plan.seed.wrapping_add(i))))
            .collect(),
    };
    if !diag {
        return Ok(full);
    }
    full.into_iter().map(|(n, img)| Ok((n, extract_center_patch(&img, plan.patch)?))).collect()
}

fn blur_operator(plan: &Plan) -> redlab::Result<LinearOperator> {
    if plan.blur == 0 {
        Ok(LinearOperator::Identity)
    } else {
        make_uniform_blur(plan.blur)
    }
}

fn solver_config(plan: &Plan, s: Solver, truth: &Image) -> SolverConfig {
    let mut cfg = plan.solver.clone();
    cfg.reference = Some(truth.clone());
    if s == Solver::Apg {
        cfg.l = plan.apg_l;
    }
    cfg
}

fn diagnostics(plan: &Plan) -> redlab::Result<Output> {
    let images = load_images(plan)?;
    let (cols, headers): (Vec<usize>, Vec<&str>) = match plan.experiment {
        Experiment::JacobianReport => (vec![0], vec!["mean e_J"]),
        Experiment::GradientReport => (vec![1, 2, 3], vec!["mean e_grad_romano", "mean e_grad_lh", "mean e_grad_true"]),
        _ => (vec![4, 5], vec!["mean e_LH1", "mean e_LH2"]),
    };
    let mut head = vec!["denoiser"];
    head.extend(&headers);
    let mut table = Table::new(format!("{} over {} images", plan.experiment.name(), images.len()), &head);
    let mut files = Vec::new();
    for spec in &plan.denoisers {
        let mut csv = String::from("image,e_J,e_grad_romano,e_grad_lh,e_grad_true,e_LH1,e_LH2\n");
        let mut sums = [0.0f64; 6];
        for (label, x) in &images {
            let f = spec.build(x.width(), x.height())?;
            let r = diagnose(f.as_ref(), x, plan.epsilon)?;
            let vals = [r.e_j, r.e_grad_romano, r.e_grad_lh, r.e_grad_true, r.e_lh1, r.e_lh2];
            let _ = writeln!(csv, "{label},{},{},{},{},{},{}", vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]);
            for (s, v) in sums.iter_mut().zip(vals) {
                *s += v;
            }
        }
        let n = images.len() as f64;
        let means = sums.map(|s| s / n);
        let _ = writeln!(csv, "mean,{},{},{},{},{},{}", means[0], means[1], means[2], means[3], means[4], means[5]);
        files.push((format!("{}_{}.csv", plan.experiment.name(), spec.kind.name()), csv));
        let mut row = vec![spec.kind.name().to_string()];
        row.extend(cols.iter().map(|&c| sci(means[c])));
        table.push(row);
    }
    Ok(Output { files, tables: vec![table] })
}

struct Instance {
    truth: Image,
    loss: QuadraticLoss,
}

fn instance(plan: &Plan) -> redlab::Result<Instance> {
    let (_, truth) = load_images(plan)?.remove(0);
    let loss = QuadraticLoss::synthesize(blur_operator(plan)?, &truth, plan.sigma2, plan.seed.wrapping_add(1_000_003))?;
    Ok(Instance { truth, loss })
}

fn trajectory_name(plan: &Plan, spec: &DenoiserSpec, s: Solver) -> String {
    if plan.solvers.len() == 1 {
        format!("{}_{}.csv", plan.experiment.name(), spec.kind.name())
    } else {
        format!("{}_{}_{}.csv", plan.experiment.name(), spec.kind.name(), s.name())
    }
}

fn psnr_cell(t: &Trajectory) -> String {
    match t.last().and_then(|r| r.psnr_db) {
        Some(v) => format!("{v:.2}"),
        None => "-".into(),
    }
}

fn trajectory(plan: &Plan) -> redlab::Result<Output> {
    let inst = instance(plan)?;
    let (w, h) = inst.truth.shape();
    let mut table = Table::new(
        format!("trajectory, {} iterations", plan.solver.iterations),
        &["denoiser", "solver", "residual decades", "cost increases", "final psnr_db"],
    );
    let mut files = Vec::new();
    for spec in &plan.denoisers {
        let f = spec.build(w, h)?;
        let p = RedProblem::new(&inst.loss, plan.lambda, f.as_ref())?;
        for &s in &plan.solvers {
            let (_, t) = s.run(&p, &solver_config(plan, s, &inst.truth))?;
            let first = t.records.first().map_or(f64::NAN, |r| r.fp_residual);
            let last = t.last().map_or(f64::NAN, |r| r.fp_residual);
            let increases = t.records.windows(2).filter(|w| w[1].cost_red > w[0].cost_red).count();
            table.push(vec![
                spec.kind.name().into(),
                s.name().into(),
                format!("{:.2}", 0.5 * (first / last).log10()),
                increases.to_string(),
                psnr_cell(&t),
            ]);
            files.push((trajectory_name(plan, spec, s), t.to_csv()));
        }
    }
    Ok(Output { files, tables: vec![table] })
}

fn unit(x: Image) -> Image {
    let n = x.norm();
    x.scale(1.0 / n)
}

fn slice(plan: &Plan) -> redlab::Result<Output> {
    let inst = instance(plan)?;
    let (w, h) = inst.truth.shape();
    let e1 = unit(gaussian_image(w, h, plan.seed.wrapping_add(2_000_003)));
    let r = gaussian_image(w, h, plan.seed.wrapping_add(2_000_005));
    let e2 = unit(r.lincomb(1.0, &e1, -r.dot(&e1)));
    let grid = linspace(-plan.slice_radius, plan.slice_radius, plan.slice_points);
    let solver = plan.solvers.first().copied().unwrap_or(Solver::Sd);
    let mut table = Table::new(
        format!("cost-slice, {0}x{0} grid of radius {1}", plan.slice_points, plan.slice_radius),
        &["denoiser", "cost at centre", "grid min cost", "argmin (alpha, beta)", "centre |g| in slice"],
    );
    let mut files = Vec::new();
    for spec in &plan.denoisers {
        let f = spec.build(w, h)?;
        let p = RedProblem::new(&inst.loss, plan.lambda, f.as_ref())?;
        let (center, _) = solver.run(&p, &solver_config(plan, solver, &inst.truth))?;
        let samples = cost_slice(&p, &center, &e1, &e2, &grid, &grid)?;
        let mut csv = String::from("alpha,beta,cost_red,grad_alpha,grad_beta\n");
        for s in &samples {
            let _ = writeln!(csv, "{},{},{},{},{}", s.alpha, s.beta, s.cost, s.grad_alpha, s.grad_beta);
        }
        let best = samples.iter().min_by(|a, b| a.cost.total_cmp(&b.cost)).expect("grid is nonempty");
        let g = p.residual(&center)?;
        table.push(vec![
            spec.kind.name().into(),
            format!("{:.6e}", p.cost(&center)?),
            format!("{:.6e}", best.cost),
            format!("({:.2}, {:.2})", best.alpha, best.beta),
            sci(g.dot(&e1).hypot(g.dot(&e2))),
        ]);
        files.push((format!("cost-slice_{}.csv", spec.kind.name()), csv));
    }
    Ok(Output { files, tables: vec![table] })
}

fn deblur(plan: &Plan) -> redlab::Result<Output> {
    let inst = instance(plan)?;
    let (w, h) = inst.truth.shape();
    let mut tables = Vec::new();
    let mut files = Vec::new();
    for spec in &plan.denoisers {
        let f = spec.build(w, h)?;
        let p = RedProblem::new(&inst.loss, plan.lambda, f.as_ref())?;
        let oracle = if spec.kind == DenoiserKind::Linear { Some(linear_fixed_point(&p, 1e-13, 20_000)?) } else { None };
        let mut table = Table::new(
            format!("deblur with {}, {} iterations", spec.kind.name(), plan.solver.iterations),
            &["solver", "psnr_db", "cost_red", "fp_residual", "update_dist", "oracle_gap"],
        );
        let mut csv = String::from("solver,psnr_db,cost_red,fp_residual,update_dist,oracle_gap\n");
        for &s in &plan.solvers {
            let (x, t) = s.run(&p, &solver_config(plan, s, &inst.truth))?;
            let last = *t.last().expect("at least one iteration");
            let gap = oracle.as_ref().map(|o| x.dist_sq(o).sqrt() / o.norm());
            let cell = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                s.name(),
                cell(last.psnr_db),
                last.cost_red,
                last.fp_residual,
                last.update_dist,
                cell(gap)
            );
            table.push(vec![
                s.name().into(),
                psnr_cell(&t),
                format!("{:.6e}", last.cost_red),
                sci(last.fp_residual),
                sci(last.update_dist),
                gap.map_or("-".into(), sci),
            ]);
            files.push((format!("deblur_{}_{}.csv", spec.kind.name(), s.name()), t.to_csv()));
        }
        files.push((format!("deblur_{}.csv", spec.kind.name()), csv));
        tables.push(table);
    }
    Ok(Output { files, tables })
}

fn tweedie(plan: &Plan) -> redlab::Result<Output> {
    let t = &plan.tweedie;
    let mut csv = String::from("instance,dim,nu,rel_error\n");
    let mut worst = 0.0f64;
    for i in 0..t.instances {
        let n = t.dims[i % t.dims.len()];
        let nu = t.nus[(i / t.dims.len()) % t.nus.len()];
        let base = plan.seed.wrapping_add(1000 * i as u64);
        let centers = (0..t.centers as u64).map(|c| gaussian_image(n, 1, base.wrapping_add(c))).collect();
        let reg = TweedieRegularizer::new(KdePrior::new(centers, nu)?);
        let r = gaussian_image(n, 1, base.wrapping_add(999)).scale(1.5);
        let e = tweedie_gradient_error(&reg, &r, t.epsilon)?;
        worst = worst.max(e);
        let _ = writeln!(csv, "{i},{n},{nu},{e}");
    }
    let mut table = Table::new("tweedie-check".into(), &["prior", "instances", "max rel_error"]);
    table.push(vec!["kde".into(), t.instances.to_string(), sci(worst)]);
    Ok(Output { files: vec![("tweedie-check_kde.csv".into(), csv)], tables: vec![table] })
}

/// A residual, or the reason it could not be computed.
fn residual_cells(r: redlab::Result<(f64, f64)>) -> redlab::Result<[(String, &'static str); 2]> {
    match r {
        Ok((a, b)) => Ok([(a.to_string(), "converged"), (b.to_string(), "converged")]),
        Err(Error::NonConvergence { .. }) => Ok([(String::new(), "nonconverged"), (String::new(), "nonconverged")]),
        Err(e) => Err(e),
    }
}

fn equilibrium(plan: &Plan) -> redlab::Result<Output> {
    let inst = instance(plan)?;
    let (w, h) = inst.truth.shape();
    let beta = plan.solver.beta;
    let mut table = Table::new(format!("equilibrium-check, {} iterations", plan.solver.iterations), &["denoiser", "check", "residual", "status"]);
    let mut files = Vec::new();
    for spec in &plan.denoisers {
        let f = spec.build(w, h)?;
        let p = RedProblem::new(&inst.loss, plan.lambda, f.as_ref())?;
        let mut rows: Vec<(String, String, &str)> = Vec::new();

        let (x, _) = Solver::Pg.run(&p, &solver_config(plan, Solver::Pg, &inst.truth))?;
        let u = pg_dual(f.as_ref(), &x, plan.solver.l)?;
        let pair = EquilibriumPair::red_pg(&inst.loss, f.as_ref(), plan.lambda, plan.solver.l)?;
        let [a, b] = residual_cells(consensus_residual(&pair, &x, &u))?;
        rows.push(("red-pg r_F".into(), a.0, a.1));
        rows.push(("red-pg r_G".into(), b.0, b.1));

        let (x, _) = Solver::Admm.run(&p, &solver_config(plan, Solver::Admm, &inst.truth))?;
        let u = f.apply(&x)?.sub(&x).scale(plan.lambda / beta);
        let pair = EquilibriumPair::red_admm(&inst.loss, f.as_ref(), plan.lambda, beta)?;
        let [a, b] = residual_cells(consensus_residual(&pair, &x, &u))?;
        rows.push(("red-admm r_F".into(), a.0, a.1));
        rows.push(("red-admm r_G".into(), b.0, b.1));

        let y = awgn(&inst.truth, plan.sigma2, plan.seed.wrapping_add(3_000_017))?;
        match denoising_equilibria(f.as_ref(), &y, plan.sigma2, 1e-10) {
            Ok((pnp, red)) => {
                let fx = f.apply(&red)?;
                let neg = y.sub(&red).sub(&red.sub(&fx)).norm();
                let same = pnp == f.apply(&y)?;
                rows.push(("denoising negation".into(), neg.to_string(), "converged"));
                rows.push(("pnp minus f(y)".into(), pnp.dist_sq(&f.apply(&y)?).sqrt().to_string(), if same { "bitwise" } else { "differs" }));
            }
            Err(Error::NonConvergence { .. }) => {
                rows.push(("denoising negation".into(), String::new(), "nonconverged"));
            }
            Err(e) => return Err(e),
        }

        let mut csv = String::from("check,residual,status\n");
        for (check, value, status) in &rows {
            let _ = writeln!(csv, "{check},{value},{status}");
            let shown = value.parse::<f64>().map_or("-".into(), sci);
            table.push(vec![spec.kind.name().into(), check.clone(), shown, (*status).into()]);
        }
        files.push((format!("equilibrium-check_{}.csv", spec.kind.name()), csv));
    }
    Ok(Output { files, tables: vec![table] })
}
