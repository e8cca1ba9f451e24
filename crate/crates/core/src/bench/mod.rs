//! Experiment orchestration: configuration, synthetic streams, runs and the
//! files they leave behind.
//!
//! A run writes
//! - `trace.csv` with columns `t, x_0 … x_{n−1}, loss_value,
//!   comparator_value, oracle_value, budget_total, lambda, eta, eta_out_min,
//!   lambda_lip_guess, bisection_steps`,
//! - `timing.csv` with columns `t, wall_time_s`,
//! - `summary.json`,
//! - `validation.json` when brute-force validation is enabled.
//!
//! Wall times live in their own file so that the trace is byte-identical
//! across reruns of the same config and seed.

mod atoms;
mod config;
mod stream;

pub use atoms::{parse_atoms, read_atoms};
pub use config::{ComparatorSpec, ExperimentConfig, ExperimentSection, LossSpec, OutputSpec, PieceSpec, SpaceSpec, ValidationSpec};
pub use stream::{generate_stream, holdout_sample, holdout_w1, Component, StreamFamily, StreamSpec};

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::learner::{run, Problem, RunOptions, RunTrace, TraceRow};
use crate::model::SampleBuffer;
use crate::reference::{brute_force_master, GapEstimate, GapEstimator, GridSpec};

#[derive(Clone, Debug, Serialize)]
pub struct GapSummary {
    #[serde(flatten)]
    pub estimate: GapEstimate,
    pub holdout_size: usize,
    /// Estimated `W₁` between the hold-out measure and the stream law.
    pub holdout_w1: Option<f64>,
    /// `2·lip_xi·holdout_w1`, a bound on how far the proxy can sit from the
    /// gap measured against the true law.
    pub proxy_bias_bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub name: String,
    pub seed: u64,
    pub horizon: usize,
    pub rounds: usize,
    pub radius: f64,
    pub delta: f64,
    pub x_bar: Vec<f64>,
    pub x_next: Vec<f64>,
    pub comparator: Option<Vec<f64>>,
    pub average_regret: Option<f64>,
    pub gap: Option<GapSummary>,
    /// `max_t (Σ_i b̂_i − ρ·t)` over the run.
    pub max_budget_excess: f64,
    pub total_wall_time_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationRow {
    pub t: usize,
    pub oracle_value: f64,
    pub brute_value: f64,
    pub resolution: f64,
    pub deviation: f64,
    /// `δ + resolution`.
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub grid: GridSpec,
    pub rows: Vec<ValidationRow>,
    pub max_deviation: f64,
    pub all_within_bound: bool,
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub trace: RunTrace,
    pub summary: Summary,
    pub validation: Option<ValidationReport>,
    pub files: Vec<PathBuf>,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the per-round trace in the documented column order.
pub fn write_trace(path: &Path, rows: &[TraceRow], dim: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..dim).map(|j| format!("x_{j}")));
    header.extend(
        ["loss_value", "comparator_value", "oracle_value", "budget_total", "lambda", "eta", "eta_out_min", "lambda_lip_guess", "bisection_steps"]
            .map(String::from),
    );
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.t.to_string()];
        rec.extend(r.x.iter().map(f64::to_string));
        rec.extend([
            r.loss_value.to_string(),
            fmt_opt(r.comparator_value),
            r.oracle_value.to_string(),
            r.budget_total.to_string(),
            r.lambda.to_string(),
            r.eta.to_string(),
            r.eta_out_min.to_string(),
            r.lambda_lip_guess.to_string(),
            r.bisection_steps.to_string(),
        ]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_timing(path: &Path, times: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["t", "wall_time_s"]).map_err(csv_err)?;
    for (i, s) in times.iter().enumerate() {
        w.write_record([(i + 1).to_string(), s.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Compares the oracle values of the first `spec.rounds` rounds with an
/// exhaustive grid search.
pub fn validation_report(
    problem: &Problem,
    stream: &[Vec<f64>],
    rows: &[TraceRow],
    spec: &ValidationSpec,
) -> Result<ValidationReport> {
    let n = spec.rounds.min(rows.len()).min(stream.len());
    let mut out = Vec::with_capacity(n);
    for t in 1..=n {
        let row = &rows[t - 1];
        let samples = SampleBuffer::from_rows(problem.loss.sample_dim(), &stream[..t])?;
        let at = problem.loss.at(&row.x)?;
        let brute = brute_force_master(&at, &samples, problem.ambiguity.radius(), &spec.grid)?;
        let deviation = (row.loss_value - brute.value).abs();
        out.push(ValidationRow {
            t,
            oracle_value: row.loss_value,
            brute_value: brute.value,
            resolution: brute.resolution,
            deviation,
            bound: problem.tolerance.delta + brute.resolution,
        });
    }
    let max_deviation = out.iter().map(|r| r.deviation).fold(0.0, f64::max);
    let all_within_bound = out.iter().all(|r| r.deviation <= r.bound);
    Ok(ValidationReport { grid: spec.grid, rows: out, max_deviation, all_within_bound })
}

/// Runs the configured experiment and writes its artifacts under `out_dir`
/// (default: `output.dir`). `seed` overrides `stream.seed`.
///
/// A run that stops early still writes the rows it completed before the
/// error is returned.
pub fn run_experiment(cfg: &ExperimentConfig, seed: Option<u64>, out_dir: Option<&Path>) -> Result<RunArtifacts> {
    cfg.validate()?;
    let problem = cfg.problem()?;
    let seed = seed.unwrap_or(cfg.stream.seed);
    let horizon = cfg.experiment.horizon;
    let stream = generate_stream(&cfg.stream, seed, horizon)?;

    let (comparator, estimator, holdout_w1_est) = match &cfg.comparator {
        ComparatorSpec::None => (None, None, None),
        ComparatorSpec::Fixed { x } => (Some(x.clone()), None, None),
        ComparatorSpec::Reference { holdout, grid_points, refine } => {
            let hold = holdout_sample(&cfg.stream, *holdout)?;
            let w = holdout_w1(&cfg.stream, &hold)?;
            let est = GapEstimator::new(&problem, hold, *grid_points, *refine)?;
            let (argmin, _) = est.minimum()?;
            (Some(argmin), Some(est), w)
        }
    };

    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&dir)?;
    let trace_path = dir.join(&cfg.output.trace);
    let timing_path = dir.join(&cfg.output.timing);
    let n = problem.space.dim();

    let opts = RunOptions { x1: cfg.experiment.x1.clone(), comparator: comparator.clone(), keep_distributions: false };
    let trace = match run(&stream, horizon, &problem, &opts) {
        Ok(t) => t,
        Err(partial) => {
            write_trace(&trace_path, &partial.trace.rows, n)?;
            write_timing(&timing_path, &partial.trace.wall_times)?;
            return Err(partial.error);
        }
    };
    write_trace(&trace_path, &trace.rows, n)?;
    write_timing(&timing_path, &trace.wall_times)?;
    let mut files = vec![trace_path, timing_path];

    let gap = match &estimator {
        Some(est) => {
            let estimate = est.gap(&trace.x_bar)?;
            Some(GapSummary {
                estimate,
                holdout_size: est.holdout().len(),
                holdout_w1: holdout_w1_est,
                proxy_bias_bound: holdout_w1_est.map(|w| 2.0 * problem.loss.lip_xi() * w),
            })
        }
        None => None,
    };
    let max_budget_excess = trace
        .rows
        .iter()
        .map(|r| r.budget_total - problem.ambiguity.radius() * r.t as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    let summary = Summary {
        name: cfg.experiment.name.clone(),
        seed,
        horizon,
        rounds: trace.rows.len(),
        radius: problem.ambiguity.radius(),
        delta: problem.tolerance.delta,
        x_bar: trace.x_bar.clone(),
        x_next: trace.x_next.clone(),
        average_regret: trace.average_regret(trace.rows.len()),
        comparator,
        gap,
        max_budget_excess,
        total_wall_time_s: trace.wall_times.iter().sum(),
    };
    let summary_path = dir.join(&cfg.output.summary);
    write_json(&summary_path, &summary)?;
    files.push(summary_path);

    let validation = if cfg.validation.enabled {
        let report = validation_report(&problem, &stream, &trace.rows, &cfg.validation)?;
        let p = dir.join(&cfg.output.validation);
        write_json(&p, &report)?;
        files.push(p);
        Some(report)
    } else {
        None
    };
    Ok(RunArtifacts { trace, summary, validation, files })
}

/// Runs only the first `validation.rounds` rounds and compares each oracle
/// call with the grid search. Writes the report under `out_dir`.
pub fn validate_experiment(cfg: &ExperimentConfig, seed: Option<u64>, out_dir: Option<&Path>) -> Result<ValidationReport> {
    cfg.validate()?;
    cfg.validation.grid.validate()?;
    let problem = cfg.problem()?;
    let rounds = cfg.validation.rounds.min(cfg.experiment.horizon);
    if rounds == 0 {
        return Err(Error::Config("validation.rounds must be at least 1".into()));
    }
    let stream = generate_stream(&cfg.stream, seed.unwrap_or(cfg.stream.seed), rounds)?;
    let opts = RunOptions { x1: cfg.experiment.x1.clone(), ..RunOptions::default() };
    let trace = run(&stream, rounds, &problem, &opts).map_err(|p| p.error)?;
    let report = validation_report(&problem, &stream, &trace.rows, &cfg.validation)?;
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&dir)?;
    write_json(&dir.join(&cfg.output.validation), &report)?;
    Ok(report)
}
