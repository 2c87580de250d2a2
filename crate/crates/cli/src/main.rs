use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod experiments;
mod table;

use config::{Experiment, Plan};

/// Regularization-by-denoising experiment runner.
#[derive(Parser)]
#[command(name = "redlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Check a config file without running it.
    Validate { config: PathBuf },
    /// List the available experiments.
    ListExperiments,
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;

fn load_plan(path: &Path) -> Result<Plan, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let out = std::env::var_os("REDLAB_OUT").filter(|v| !v.is_empty()).map(PathBuf::from);
    let plan = config::parse(&text, base, out).map_err(|e| e.to_string())?;
    // Input images are part of validation: unreadable or malformed files fail here.
    experiments::load_images(&plan).map_err(|e| e.to_string())?;
    Ok(plan)
}

fn exit_for(e: &redlab::Error) -> u8 {
    use redlab::Error::*;
    match e {
        Divergence { .. } | NonConvergence { .. } => EXIT_DIVERGENCE,
        Shape(_) | Parse { .. } | UnsupportedFormat(_) | Precondition(_) | Config(_) | Domain(_) => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    }
}

fn run(path: &Path) -> Result<(), (u8, String)> {
    let plan = load_plan(path).map_err(|m| (EXIT_VALIDATION, m))?;
    for w in plan.solver.warnings() {
        eprintln!("warning: {w}");
    }
    let out = experiments::run(&plan).map_err(|e| (exit_for(&e), e.to_string()))?;
    let mut summary = String::new();
    for t in &out.tables {
        summary.push_str(&t.to_string());
        summary.push('\n');
    }
    let io = |e: std::io::Error| (EXIT_RUNTIME, format!("cannot write to {}: {e}", plan.output.display()));
    std::fs::create_dir_all(&plan.output).map_err(io)?;
    for (name, body) in &out.files {
        std::fs::write(plan.output.join(name), body).map_err(io)?;
    }
    let summary_name = format!("{}_summary.txt", plan.experiment.name());
    std::fs::write(plan.output.join(&summary_name), &summary).map_err(io)?;
    print!("{summary}");
    println!("wrote {} files to {}", out.files.len() + 1, plan.output.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<18} {}", e.name(), e.about());
            }
            Ok(())
        }
        Command::Validate { config } => load_plan(&config)
            .map(|plan| {
                println!(
                    "{}: ok ({} experiment, outputs to {})",
                    config.display(),
                    plan.experiment.name(),
                    plan.output.display()
                );
                for w in plan.solver.warnings() {
                    println!("warning: {w}");
                }
            })
            .map_err(|m| (EXIT_VALIDATION, m)),
        Command::Run { config } => run(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
