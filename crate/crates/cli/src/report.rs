//! Report schemas: the JSON written by `denoise`, the benchmark CSV rows and
//! the per-run residual history.

use std::path::Path;

use serde::Serialize;
use tvpwl::io::write_atomic;
use tvpwl::SolveReport;

use crate::{CliResult, SolverArgs};

/// Every parameter in effect, echoed into reports.
#[derive(Serialize, Debug, Clone)]
pub struct ParamEcho {
    /// Effective steps (TGV^2 rescales the configured ones).
    pub sigma: f64,
    pub tau: f64,
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub beta: f64,
    pub lambda: f64,
    pub rho: f64,
    pub rof_tol: f64,
    pub rof_max_iter: usize,
}

impl ParamEcho {
    pub fn new(args: &SolverArgs, report: &SolveReport) -> Self {
        Self {
            sigma: report.sigma,
            tau: report.tau,
            theta: args.theta,
            tol: args.tol,
            max_iter: args.max_iter,
            beta: args.beta,
            lambda: args.lambda,
            rho: args.rho,
            rof_tol: args.rof_tol,
            rof_max_iter: args.rof_max_iter,
        }
    }
}

#[derive(Serialize, Debug)]
pub struct Metrics {
    pub ssim: f64,
    /// `null` when the output equals the ground truth.
    pub psnr_db: Option<f64>,
}

#[derive(Serialize, Debug)]
pub struct DenoiseReport {
    pub input: String,
    pub output: String,
    pub regulariser: &'static str,
    /// `null` for TV and TGV^2.
    pub gamma_source: Option<&'static str>,
    pub delta: f64,
    pub delta_source: &'static str,
    pub params: ParamEcho,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub wall_time_s: f64,
    pub gamma_time_s: Option<f64>,
    pub metrics: Option<Metrics>,
    pub residual_history: Vec<f64>,
    pub gap_history: Vec<f64>,
}

pub fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| crate::CliError::Io(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)?;
    Ok(())
}

fn csv_err(e: csv::Error) -> crate::CliError {
    crate::CliError::Io(format!("csv: {e}"))
}

/// `iter,residual,gap`, one row per iteration (1-based).
pub fn write_history(path: &Path, report: &SolveReport) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iter", "residual", "gap"]).map_err(csv_err)?;
    for (k, r) in report.residual_history.iter().enumerate() {
        let gap = report.gap_history.get(k).map(f64::to_string).unwrap_or_default();
        w.write_record([(k + 1).to_string(), r.to_string(), gap]).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::CliError::Io(e.to_string()))?;
    write_atomic(path, &bytes)?;
    Ok(())
}

/// One benchmark row; field order is the CSV column order.
#[derive(Serialize, Debug, Clone)]
pub struct BenchmarkRecord {
    pub image: String,
    pub noise_level: f64,
    pub method: &'static str,
    pub gamma_source: &'static str,
    pub ssim: f64,
    pub psnr_db: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    pub sigma: f64,
    pub tau: f64,
    pub theta: f64,
    pub tol: f64,
    pub beta: f64,
    pub lambda: f64,
    pub rho: f64,
    pub seed: u64,
}

pub const BENCHMARK_COLUMNS: [&str; 17] = [
    "image",
    "noise_level",
    "method",
    "gamma_source",
    "ssim",
    "psnr_db",
    "iterations",
    "converged",
    "wall_time_s",
    "sigma",
    "tau",
    "theta",
    "tol",
    "beta",
    "lambda",
    "rho",
    "seed",
];

pub fn write_benchmark_csv(path: &Path, rows: &[BenchmarkRecord]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(BENCHMARK_COLUMNS).map_err(csv_err)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::CliError::Io(e.to_string()))?;
    write_atomic(path, &bytes)?;
    Ok(())
}
