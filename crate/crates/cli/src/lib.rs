//! Command-line front end: scenario files, CSV logs, metrics and SVG charts.

pub mod commands;
pub mod csv;
mod error;
pub mod plot;
pub mod scenario;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use slipwalk::WeightName;

pub use commands::{
    cmd_plot, cmd_run, cmd_sweep, metrics_path, parse_grid, simulate, MetricsReport, RunOutcome, SweepPoint,
};
pub use error::CliError;
pub use plot::PlotKind;
pub use scenario::{parse_scenario, resolve, Scenario};

#[derive(Debug, Parser)]
#[command(name = "slipwalk", version, about = "Friction-aware walking pattern generator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Source {
    /// Compiled-in scenario to use as the base.
    #[arg(long)]
    preset: Option<String>,
    /// JSON scenario file; its keys override the preset.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario; writes a CSV log and a metrics JSON beside it.
    Run {
        #[command(flatten)]
        source: Source,
        /// CSV output path (metrics go to the same path with a .json extension).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate once per value of a cost weight.
    Sweep {
        /// beta, gamma or delta; defaults to the preset's own sweep.
        weight: Option<String>,
        #[command(flatten)]
        source: Source,
        /// Comma-separated nonnegative values.
        #[arg(long)]
        grid: Option<String>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a CSV log as SVG.
    Plot {
        csv: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// SVG output path.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        source: Source,
    },
}

fn source(s: &Source) -> Result<Scenario, CliError> {
    resolve(s.preset.as_deref(), s.scenario.as_deref())
}

fn dispatch(command: Command) -> Result<String, CliError> {
    match command {
        Command::Run { source: src, out } => {
            let scenario = source(&src)?;
            let csv = out.unwrap_or_else(|| PathBuf::from(format!("{}.csv", scenario.name)));
            let json = metrics_path(&csv);
            let o = cmd_run(&scenario, &csv, &json)?;
            Ok(format!(
                "{}: {} ticks, steady velocity {:.3} m/s, max steady RCoF {:.3}; wrote {} and {}",
                scenario.name,
                o.report.ticks,
                o.report.metrics.steady_velocity_mean,
                o.report.metrics.max_rcof_steady,
                csv.display(),
                json.display()
            ))
        }
        Command::Sweep {
            weight,
            source: src,
            grid,
            out,
        } => {
            let scenario = source(&src)?;
            let weight =
                match weight.as_deref() {
                    Some(w) => Some(WeightName::parse(w).ok_or_else(|| {
                        CliError::Validation(format!("weight must be beta, gamma or delta, got `{w}`"))
                    })?),
                    None => scenario.sweep.as_ref().map(|s| s.weight),
                }
                .ok_or_else(|| CliError::Validation("no weight given and the scenario defines no sweep".into()))?;
            let grid = match grid.as_deref() {
                Some(g) => parse_grid(g)?,
                None => match &scenario.sweep {
                    Some(s) if s.weight == weight => s.grid.clone(),
                    _ => return Err(CliError::Validation("--grid is required".into())),
                },
            };
            let dir = out.unwrap_or_else(|| PathBuf::from(format!("{}_{}", scenario.name, weight.as_str())));
            let points = cmd_sweep(&scenario, weight, &grid, &dir)?;
            let failed = points.iter().filter(|p| p.status != "ok").count();
            Ok(format!(
                "{} points ({failed} failed); summary in {}",
                points.len(),
                dir.join("summary.csv").display()
            ))
        }
        Command::Plot {
            csv,
            kind,
            out,
            source: src,
        } => {
            let scenario = match (&src.preset, &src.scenario) {
                (None, None) => None,
                _ => Some(source(&src)?),
            };
            let svg = out.unwrap_or_else(|| csv.with_extension("svg"));
            cmd_plot(&csv, kind, &svg, scenario.as_ref())?;
            Ok(format!("wrote {}", svg.display()))
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
