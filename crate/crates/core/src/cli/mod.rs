//! `tclsteady` command line: JSON reports on stdout, diagnostics on stderr.
//!
//! Exit codes: 0 success, 1 negative verdict (non-commuting, not
//! attractive), 2 input error, 3 failed internal verification.

mod preset;
mod state;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::dynamics::{attraction_trace, evolve_exact, evolve_ode, uniform_times};
use crate::error::{Error, Result};
use crate::manifold::{project_to_manifold, steady_projector, structure_decomposition_seeded, SamplingOptions};
use crate::models::json::{load_model, MatrixDoc};
use crate::models::{check_commutativity, require_commuting, CommutativityOptions, GeneratorModel};
use crate::spectral::{attractiveness, damping_basis_seeded, AttractivenessOptions};

pub use preset::build_preset;
pub use state::parse_state;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tclsteady", version, about = "Steady-state manifolds of commuting time-dependent master equations")]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = crate::DEFAULT_SEED)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Rk4,
    Exact,
}

#[derive(Debug, clap::Args)]
pub struct GridArgs {
    /// Horizon of the sampling grid for the steady projector.
    #[arg(long = "t-max", default_value_t = 10.0)]
    pub t_max: f64,
    /// Number of grid points.
    #[arg(long, default_value_t = 16)]
    pub grid: usize,
}

impl GridArgs {
    fn options(&self) -> SamplingOptions {
        SamplingOptions {
            horizon: self.t_max,
            points: self.grid,
            ..SamplingOptions::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test whether the generator commutes with itself at all times.
    CheckCommute {
        model: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 10)]
        samples: usize,
    },
    /// Steady-state projector and reference state.
    Steady {
        model: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Block decomposition of the steady manifold.
    Structure {
        model: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Damping basis of the generator family.
    Spectrum { model: PathBuf },
    /// Attractiveness of the steady manifold on a finite horizon.
    Attract {
        model: PathBuf,
        #[arg(long, default_value_t = 100.0)]
        horizon: f64,
        #[arg(long, default_value_t = 20.0)]
        threshold: f64,
        #[arg(long, default_value_t = 1.0)]
        growth: f64,
    },
    /// Evolve a state and write the trajectory as CSV.
    Simulate {
        model: PathBuf,
        /// `basis:i`, `mixed`, or a JSON file.
        #[arg(long)]
        state: String,
        #[arg(long = "t-max", default_value_t = 10.0)]
        t_max: f64,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Rk4)]
        method: MethodArg,
        /// CSV destination; stdout when absent (the summary then goes to stderr).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project a state onto the steady manifold.
    Project {
        model: PathBuf,
        #[arg(long)]
        state: String,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Write a preset model file.
    Preset {
        /// amplitude-damping, pure-dephasing, two-qubit-dephasing or double-dot.
        name: String,
        /// Parameters as `key=value`.
        params: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Verification { .. } | Error::Linalg(_) | Error::PositivityViolation { .. } => EXIT_VERIFICATION,
        _ => EXIT_INPUT,
    }
}

fn read_model(path: &Path) -> Result<GeneratorModel> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read model file {}: {e}", path.display())))?;
    load_model(&text).map_err(|e| match e {
        Error::Schema { path: p, message } => Error::Schema {
            path: format!("{}: {p}", path.display()),
            message,
        },
        other => other,
    })
}

fn emit<T: Serialize>(out: &mut dyn Write, report: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, report)?;
    writeln!(out)?;
    Ok(())
}

/// Run a parsed command, writing the report to `out` and diagnostics to
/// `err`; returns the exit code.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let seed = cli.seed;
    match &cli.command {
        Command::CheckCommute { model, tol, samples } => {
            let model = read_model(model)?;
            let report = check_commutativity(
                &model,
                CommutativityOptions {
                    tol: *tol,
                    samples: *samples,
                    seed,
                    ..CommutativityOptions::default()
                },
            )?;
            let mut value = serde_json::to_value(&report)?;
            value["schema_version"] = json!(1);
            emit(out, &value)?;
            Ok(if report.commuting { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Steady { model, grid } => {
            let model = read_model(model)?;
            let p = steady_projector(&model, grid.options())?;
            for w in &p.warnings {
                writeln!(err, "warning: {w}")?;
            }
            emit(out, &p.report()?)?;
            Ok(EXIT_OK)
        }
        Command::Structure { model, grid } => {
            let model = read_model(model)?;
            let p = steady_projector(&model, grid.options())?;
            let s = structure_decomposition_seeded(&p, seed)?;
            emit(out, &s.report())?;
            Ok(EXIT_OK)
        }
        Command::Spectrum { model } => {
            let model = read_model(model)?;
            let basis = damping_basis_seeded(&model, seed)?;
            if !basis.diagonalizable {
                writeln!(
                    err,
                    "warning: generator family is not diagonalizable (condition number {:.3e}); propagators use the matrix exponential",
                    basis.condition_number
                )?;
            }
            emit(out, &basis.report())?;
            Ok(EXIT_OK)
        }
        Command::Attract {
            model,
            horizon,
            threshold,
            growth,
        } => {
            let model = read_model(model)?;
            if !(*horizon > 0.0) {
                return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
            }
            let report = attractiveness(
                &model,
                AttractivenessOptions {
                    horizon: *horizon,
                    threshold: *threshold,
                    growth: *growth,
                },
            )?;
            emit(out, &report)?;
            Ok(if report.attractive { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Simulate {
            model,
            state,
            t_max,
            steps,
            method,
            out: csv_path,
        } => {
            let model = read_model(model)?;
            let rho0 = parse_state(state, model.hilbert_dim())?;
            let commuting = require_commuting(&model).is_ok();
            let traj = match method {
                MethodArg::Rk4 => evolve_ode(&model, &rho0, *t_max, *steps)?,
                MethodArg::Exact => {
                    require_commuting(&model)?;
                    if *steps < 2 {
                        return Err(Error::InvalidInput(format!("need at least 2 steps, got {steps}")));
                    }
                    evolve_exact(&model, &rho0, &uniform_times(*t_max, *steps))?
                }
            };
            let (distances, exact_gap) = if commuting {
                let p = steady_projector(&model, SamplingOptions::default())?;
                let distances = attraction_trace(&traj, &p)?;
                let gap = match method {
                    MethodArg::Rk4 => Some(traj.max_distance_to(&evolve_exact(&model, &rho0, &traj.times)?)?),
                    MethodArg::Exact => None,
                };
                (Some(distances), gap)
            } else {
                (None, None)
            };
            let (t_end, final_state) = traj.last().expect("trajectories hold at least two points");
            let summary = json!({
                "schema_version": 1,
                "method": match method { MethodArg::Rk4 => "rk4", MethodArg::Exact => "exact" },
                "t_max": t_end,
                "steps": steps,
                "points": traj.len(),
                "commuting": commuting,
                "max_trace_drift": traj.max_trace_drift,
                "max_trace_distance_to_exact": exact_gap,
                "final_manifold_distance": distances.as_ref().map(|d| d.final_distance),
                "final_state": MatrixDoc::from_matrix(final_state.matrix()),
                "csv": csv_path.as_ref().map(|p| p.display().to_string()),
            });
            match csv_path {
                Some(path) => {
                    let mut file = std::io::BufWriter::new(
                        fs::File::create(path)
                            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))?,
                    );
                    traj.write_csv(&mut file, distances.as_ref())?;
                    file.flush()?;
                    emit(out, &summary)?;
                }
                None => {
                    traj.write_csv(out, distances.as_ref())?;
                    emit(err, &summary)?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Project { model, state, grid } => {
            let model = read_model(model)?;
            let rho = parse_state(state, model.hilbert_dim())?;
            let p = steady_projector(&model, grid.options())?;
            let projected = project_to_manifold(&p, &rho)?;
            emit(
                out,
                &json!({
                    "schema_version": 1,
                    "dimension": model.hilbert_dim(),
                    "input": MatrixDoc::from_matrix(rho.matrix()),
                    "projected": MatrixDoc::from_matrix(projected.matrix()),
                    "trace_distance": rho.trace_distance(&projected),
                }),
            )?;
            Ok(EXIT_OK)
        }
        Command::Preset {
            name,
            params,
            out: path,
        } => {
            let model = build_preset(name, params)?;
            let text = crate::models::json::save_model(&model)?;
            match path {
                Some(p) => {
                    fs::write(p, format!("{text}\n"))
                        .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", p.display())))?;
                    emit(
                        out,
                        &json!({
                            "schema_version": 1,
                            "preset": name,
                            "path": p.display().to_string(),
                            "dimension": model.hilbert_dim(),
                            "terms": model.terms().len(),
                        }),
                    )?;
                }
                None => writeln!(out, "{text}")?,
            }
            Ok(EXIT_OK)
        }
    }
}
