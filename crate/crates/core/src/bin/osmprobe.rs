//! Command-line front end: probe, sweep, solve and compare workflows over a
//! JSON experiment config.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use osmprobe_core::experiment::{
    cmd_compare, cmd_probe, cmd_solve, cmd_sweep, compare_to_csv, field_to_text, history_to_csv,
    sweep_to_csv, ExperimentConfig, Preset, SweepSpec, Workbench,
};
use osmprobe_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "osmprobe",
    about = "Discover optimized transmission conditions for two-subdomain \
             Schwarz methods by probing the interface operators",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to a JSON experiment config; omit to use a preset's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset used when no config file is given.
    #[arg(long, default_value = "laplace-strip", value_parser = parse_preset)]
    preset: Preset,
    /// Interface resolution used when no config file is given.
    #[arg(long, default_value_t = 50)]
    interface_nodes: usize,
    /// Override the iteration tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Override the iteration budget.
    #[arg(long)]
    max_it: Option<usize>,
    /// Worker threads for parallel grid sweeps (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit transmission parameters by probing the interface operators.
    Probe {
        #[command(flatten)]
        common: CommonArgs,
        /// Write the probe report JSON here (also printed).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Map the iteration's spectral radius over a parameter grid.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated per-parameter grid lower bounds.
        #[arg(long, value_delimiter = ',', required = true)]
        min: Vec<f64>,
        /// Comma-separated per-parameter grid upper bounds.
        #[arg(long, value_delimiter = ',', required = true)]
        max: Vec<f64>,
        /// Grid points per parameter.
        #[arg(long, default_value_t = 30)]
        points: usize,
        /// Write the sweep CSV here (also printed).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the interface iteration with explicit transmission parameters.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated transmission parameters.
        #[arg(long, value_delimiter = ',', required = true)]
        params: Vec<f64>,
        /// Write the convergence history CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the reconstructed nodal field here (x y value lines).
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Benchmark frequency-domain calibration against probed fits.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Write the comparison CSV here (also printed).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_preset(text: &str) -> std::result::Result<Preset, String> {
    match text {
        "laplace-strip" | "laplace_strip" => Ok(Preset::LaplaceStrip),
        "curved-advection" | "curved_advection" => Ok(Preset::CurvedAdvection),
        other => Err(format!(
            "unknown preset {other:?} (expected laplace-strip or curved-advection)"
        )),
    }
}

fn load_bench(common: &CommonArgs) -> Result<Workbench> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::from_json(&fs::read_to_string(path)?)?,
        None => ExperimentConfig::preset_default(common.preset, common.interface_nodes),
    };
    if let Some(tol) = common.tol {
        config.tol = tol;
    }
    if let Some(max_it) = common.max_it {
        config.max_iterations = max_it;
    }
    if let Some(threads) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Workbench::build(config)
}

fn write_or_print(out: &Option<PathBuf>, content: &[u8]) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, content)?;
            eprintln!("wrote {}", path.display());
        }
        None => std::io::stdout().write_all(content)?,
    }
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Probe { common, out } => {
            let bench = load_bench(&common)?;
            let outcome = cmd_probe(&bench)?;
            let names = outcome.param_names.join(", ");
            let values = outcome
                .report
                .params
                .iter()
                .map(|p| format!("{p:.6}"))
                .collect::<Vec<_>>()
                .join(", ");
            eprintln!(
                "fitted {} ({names}) = ({values}) from {} probes, {} solves, objective {:.3e}",
                outcome.report.family,
                outcome.report.probes_used,
                outcome.report.total_solves(),
                outcome.report.objective
            );
            let json = serde_json::to_string_pretty(&outcome)?;
            write_or_print(&out, json.as_bytes())
        }
        Command::Sweep {
            common,
            min,
            max,
            points,
            out,
        } => {
            let bench = load_bench(&common)?;
            let spec = SweepSpec { min, max, points };
            let result = cmd_sweep(&bench, &spec)?;
            eprintln!(
                "grid best rho {:.6} at ({})",
                result.best_rho,
                result
                    .best_params
                    .iter()
                    .map(|p| format!("{p:.6}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            let mut csv = Vec::new();
            sweep_to_csv(&bench, &result, &mut csv)?;
            write_or_print(&out, &csv)
        }
        Command::Solve {
            common,
            params,
            out,
            field,
        } => {
            let bench = load_bench(&common)?;
            let outcome = cmd_solve(&bench, &params)?;
            eprintln!(
                "{} after {} iterations (rho ≈ {}), {} subdomain solves",
                if outcome.converged {
                    "converged"
                } else if outcome.diverged {
                    "diverged"
                } else {
                    "stopped"
                },
                outcome.iterations,
                outcome
                    .rho_estimate
                    .map_or("n/a".into(), |r| format!("{r:.4}")),
                outcome.solve_count
            );
            if let Some(path) = field {
                if outcome.field.is_empty() {
                    eprintln!("no converged field to write");
                } else {
                    let mut text = Vec::new();
                    field_to_text(&bench.mesh, &outcome.field, &mut text)?;
                    fs::write(&path, text)?;
                    eprintln!("wrote {}", path.display());
                }
            }
            let mut csv = Vec::new();
            history_to_csv(&outcome, &mut csv)?;
            write_or_print(&out, &csv)
        }
        Command::Compare { common, out } => {
            let bench = load_bench(&common)?;
            let rows = cmd_compare(&bench)?;
            for row in &rows {
                eprintln!(
                    "{:<13} {:>3} calibration solves, {:>3} iterations, predicted rho {:.4}",
                    row.method, row.calibration_solves, row.iterations, row.predicted_rho
                );
            }
            let mut csv = Vec::new();
            compare_to_csv(&rows, &mut csv)?;
            write_or_print(&out, &csv)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
