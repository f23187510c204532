use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use visilin_core::consistent;
use visilin_core::estimators::{self, Method};
use visilin_core::identifiability;
use visilin_core::lti::{self, SystemDocument, Trajectory};
use visilin_core::visibility::{self, DEFAULT_RTOL};
use visilin_harness::{HarnessError, Result, RunConfig, Workers};

#[derive(Parser)]
#[command(
    name = "visilin",
    version,
    about = "Experiment-conditional identifiability of linear systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Base seed; overrides the config's `base_seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Visible dimension and identifiability margins of a system and x0.
    Margins {
        /// System JSON with `A`, `B` and `x0`.
        #[arg(long)]
        system: PathBuf,
        #[arg(long, default_value_t = identifiability::DEFAULT_EPS)]
        eps: f64,
    },
    /// Sample systems that reproduce every experiment started at x0.
    Consistent {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, default_value_t = 1)]
        samples: usize,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit the one-step map to a recorded trajectory.
    Fit {
        #[arg(long, default_value = "dmdc")]
        method: Method,
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the experiment stored in a system JSON (needs `x0`, `u`, `dt`).
    Simulate {
        #[arg(long)]
        system: PathBuf,
        /// Forward Euler instead of exact zero-order hold.
        #[arg(long)]
        euler: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => Ok(std::fs::write(path, text)?),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_system(path: &PathBuf) -> Result<(SystemDocument, visilin_core::LtiSystem, DVector<f64>)> {
    let doc = SystemDocument::from_json(&read(path)?)?;
    let sys = doc.system()?;
    let x0 = doc
        .x0()
        .ok_or_else(|| HarnessError::Config(format!("{} has no x0", path.display())))?;
    Ok((doc, sys, x0))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            workers,
            seed,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if out.is_some() {
                cfg.output = out;
            }
            let dir = cfg
                .output
                .clone()
                .ok_or_else(|| HarnessError::Config("no output directory (use --out)".into()))?;
            let report = visilin_harness::run(&cfg, Workers(workers))?;
            report.write(&dir)?;
            eprintln!(
                "{}: {} rows written to {}",
                cfg.experiment_id,
                report.rows.len(),
                dir.display()
            );
            Ok(())
        }
        Command::Margins { system, eps } => {
            let (_, sys, x0) = load_system(&system)?;
            let report = identifiability::margin_report(&sys, &x0, eps, None)?;
            emit(&serde_json::to_string_pretty(&report).expect("json"), None)
        }
        Command::Consistent {
            system,
            samples,
            scale,
            seed,
        } => {
            let (_, sys, x0) = load_system(&system)?;
            let sub = visibility::visible_subspace(&sys, &x0, DEFAULT_RTOL)?;
            let mut members = Vec::with_capacity(samples);
            for i in 0..samples as u64 {
                let member = consistent::sample_consistent(&sys, &x0, scale, seed.wrapping_add(i))?;
                members.push(SystemDocument::from_system(&member));
            }
            let doc = serde_json::json!({
                "n": sys.n(),
                "visible_dim": sub.k,
                "degrees_of_freedom": sys.n() * (sys.n() - sub.k),
                "singleton": sub.is_full(),
                "members": members,
            });
            emit(&serde_json::to_string_pretty(&doc).expect("json"), None)
        }
        Command::Fit {
            method,
            traj,
            inputs,
            out,
        } => {
            let traj = Trajectory::from_csv(&read(&traj)?, 1.0)?;
            let (u, _) = lti::samples_from_csv(&read(&inputs)?)?;
            let fit = estimators::fit(method, &traj, &u)?;
            emit(
                &serde_json::to_string_pretty(&fit.to_document()).expect("json"),
                out.as_ref(),
            )
        }
        Command::Simulate { system, euler, out } => {
            let doc = SystemDocument::from_json(&read(&system)?)?;
            let sys = doc.system()?;
            let exp = doc.experiment()?.ok_or_else(|| {
                HarnessError::Config("system JSON needs x0, u and dt to simulate".into())
            })?;
            let traj = if euler {
                lti::simulate_euler(&sys, &exp)?
            } else {
                lti::simulate_discrete(&lti::discretize_zoh(&sys, exp.dt())?, &exp)?
            };
            emit(traj.to_csv().trim_end(), out.as_ref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
