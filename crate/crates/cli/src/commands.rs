//! The `run`, `sweep` and `plot` commands.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use slipwalk::{run_scenario, summarize, Metrics, ScenarioConfig, SimError, TrajectoryLog, WeightName};

use crate::csv::{parse_csv, rows_from_log, to_csv};
use crate::error::CliError;
use crate::plot::{render, PlotContext, PlotKind};
use crate::scenario::Scenario;

/// Metrics document written next to every CSV log.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub scenario: String,
    /// `ok` or `infeasible`.
    pub status: String,
    pub ticks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: MetricsReport,
    pub log: TrajectoryLog,
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Simulates without touching the filesystem.
pub fn simulate(name: &str, config: &ScenarioConfig) -> Result<RunOutcome, CliError> {
    let (log, error) = match run_scenario(config) {
        Ok(log) => (log, None),
        Err(failure) => match failure.error {
            SimError::Config(e) => return Err(e.into()),
            SimError::Solver { .. } => (*failure.log, Some(failure.error.to_string())),
        },
    };
    let report = MetricsReport {
        scenario: name.to_string(),
        status: if error.is_some() { "infeasible" } else { "ok" }.into(),
        ticks: log.samples.len(),
        error,
        metrics: summarize(&log),
    };
    Ok(RunOutcome { report, log })
}

/// Runs a scenario and writes its CSV log and metrics JSON. A solver failure
/// still writes the partial log, then reports [`CliError::Infeasible`].
pub fn cmd_run(scenario: &Scenario, csv_path: &Path, json_path: &Path) -> Result<RunOutcome, CliError> {
    let outcome = simulate(&scenario.name, &scenario.config)?;
    write(csv_path, &to_csv(&rows_from_log(&outcome.log)))?;
    write(json_path, &to_json(&outcome.report))?;
    match &outcome.report.error {
        Some(msg) => Err(CliError::Infeasible(format!("{}: {msg}", scenario.name))),
        None => Ok(outcome),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub weight: &'static str,
    pub value: f64,
    pub status: String,
    pub steady_velocity_mean: Option<f64>,
    pub max_rcof_steady: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn point_stem(weight: WeightName, value: f64) -> String {
    format!("{}_{}", weight.as_str(), crate::csv::format_g9(value))
}

pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let grid = text
        .split(',')
        .map(|s| {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| CliError::Validation(format!("grid value `{s}` is not a number")))?;
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                Err(CliError::Validation(format!(
                    "grid value `{s}` must be finite and nonnegative"
                )))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(grid)
}

/// Runs one simulation per grid value in parallel. Failed points are recorded
/// in the summary; only I/O failures abort the sweep.
pub fn cmd_sweep(
    scenario: &Scenario,
    weight: WeightName,
    grid: &[f64],
    out_dir: &Path,
) -> Result<Vec<SweepPoint>, CliError> {
    if grid.is_empty() {
        return Err(CliError::Validation("grid must not be empty".into()));
    }
    if let Some(v) = grid.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(CliError::Validation(format!(
            "grid value {v} must be finite and nonnegative"
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let points = grid
        .par_iter()
        .map(|&value| {
            let mut point = scenario.clone();
            weight.apply(&mut point.config.weights, value);
            let stem = point_stem(weight, value);
            let csv = out_dir.join(format!("{stem}.csv"));
            let json = out_dir.join(format!("{stem}.json"));
            let (status, metrics, error) = match cmd_run(&point, &csv, &json) {
                Ok(o) => ("ok", Some(o.report.metrics), None),
                Err(e @ CliError::Io(_)) => return Err(e),
                Err(e @ CliError::Infeasible(_)) => ("infeasible", None, Some(e.to_string())),
                Err(e) => ("invalid", None, Some(e.to_string())),
            };
            Ok(SweepPoint {
                weight: weight.as_str(),
                value,
                status: status.into(),
                steady_velocity_mean: metrics.as_ref().map(|m| m.steady_velocity_mean),
                max_rcof_steady: metrics.as_ref().map(|m| m.max_rcof_steady),
                error,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let blank = |v: Option<f64>| v.map(crate::csv::format_g9).unwrap_or_default();
    let mut table = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let record = |w: &mut csv::Writer<Vec<u8>>, fields: [&str; 5]| w.write_record(fields).expect("in-memory CSV");
    record(
        &mut table,
        ["weight", "value", "status", "steady_velocity_mean", "max_rcof_steady"],
    );
    for p in &points {
        let value = crate::csv::format_g9(p.value);
        let (v, r) = (blank(p.steady_velocity_mean), blank(p.max_rcof_steady));
        record(&mut table, [p.weight, &value, &p.status, &v, &r]);
    }
    let table = String::from_utf8(table.into_inner().expect("in-memory CSV")).expect("ASCII output");
    write(&out_dir.join("summary.csv"), &table)?;
    write(&out_dir.join("summary.json"), &to_json(&points))?;
    Ok(points)
}

/// Renders a chart of a CSV log. The optional scenario supplies the command
/// velocity and foot dimensions, which the CSV does not carry.
pub fn cmd_plot(csv_path: &Path, kind: PlotKind, svg_path: &Path, scenario: Option<&Scenario>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(csv_path).map_err(|e| CliError::io(csv_path, e))?;
    let rows = parse_csv(&text)?;
    let ctx = match scenario {
        Some(s) => {
            let t = s.config.params.interval;
            PlotContext {
                desired_velocity: Some(rows.iter().map(|r| s.config.velocity_at(r.t - t)).collect()),
                params: s.config.params,
            }
        }
        None => PlotContext::default(),
    };
    let svg = render(kind, &rows, &ctx)?;
    write(svg_path, &svg)
}

/// `out.csv` becomes `out.json`.
pub fn metrics_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}
