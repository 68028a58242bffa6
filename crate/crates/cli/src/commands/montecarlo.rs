//! Monte Carlo sweeps over a grid of `(H, lambda^2)`.
//!
//! Replication `r` of cell `c` is simulated with seed
//! `seed + c * CELL_SEED_STRIDE + r`, so results do not depend on how
//! replications are spread over threads.

use super::estimate::{estimate_series, Estimate, EstimatorArgs, Method};
use crate::error::{io_err, CliError, CliResult, Context};
use crate::manifest::{ensure_parent, sibling, RunManifest};
use clap::{Args, ValueEnum};
use lsfbm::kernels::ModelParams;
use lsfbm::simulate::{simulate_with, LogVolSampler, SimConfig};
use lsfbm::stats;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

pub const CELL_SEED_STRIDE: u64 = 1 << 32;

/// Written where a statistic is undefined.
pub const ABSENT: &str = "NA";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Proxy {
    /// Realized variance of the simulated fine returns
    Realized,
    /// The exact measure of each cell
    Measure,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MonteCarloArgs {
    /// Hurst exponents of the grid
    #[arg(long = "H", value_delimiter = ',', required = true)]
    pub hurst: Vec<f64>,
    /// Intermittency coefficients of the grid
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambda2: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub reps: u64,
    #[arg(long = "L")]
    pub length: f64,
    #[arg(long = "T")]
    pub corr_length: f64,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 32)]
    pub subdivisions: usize,
    #[arg(long, value_enum, default_value = "realized")]
    pub proxy: Proxy,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores)
    #[arg(long, env = "LSFBM_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, default_value_t = 4096)]
    pub max_memory_mb: usize,
    /// Per-cell timing on stderr
    #[arg(long)]
    pub progress: bool,
    /// Aggregate CSV, one row per cell
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV with one row per replication
    #[arg(long)]
    pub fits: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub hurst: f64,
    pub lambda2: f64,
    pub length: f64,
    pub corr_length: f64,
    pub delta: f64,
    pub subdivisions: usize,
    pub proxy: Proxy,
    pub seed: u64,
    pub reps: u64,
}

impl Cell {
    pub fn config(&self) -> CliResult<SimConfig> {
        let p = ModelParams::new(self.hurst, self.lambda2, self.corr_length, 1.0)
            .context(|| format!("cell H = {}, lambda2 = {}", self.hurst, self.lambda2))?;
        SimConfig::new(p, self.length, self.delta, self.subdivisions, self.seed, self.proxy == Proxy::Realized)
            .context(|| "simulation grid".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepOutcome {
    pub rep: u64,
    pub hurst: f64,
    pub lambda2: Option<f64>,
    pub nu2: Option<f64>,
    pub converged: bool,
}

/// Simulates and fits every replication of `cell`, in replication order.
pub fn run_cell(cell: &Cell, est: &EstimatorArgs) -> CliResult<Vec<RepOutcome>> {
    let cfg = cell.config()?;
    let sampler = LogVolSampler::new(&cfg).context(|| "covariance embedding".into())?;
    (0..cell.reps)
        .into_par_iter()
        .map(|r| {
            let rc = cfg.replication(r);
            let rep = simulate_with(&sampler, &rc).context(|| format!("replication {r}"))?;
            let series = match cell.proxy {
                Proxy::Realized => rep.realized.expect("price emitted for the realized proxy"),
                Proxy::Measure => rep.measure,
            };
            let outcome = match estimate_series(&series, est)? {
                Estimate::Gmm(f) => RepOutcome {
                    rep: r,
                    hurst: f.hurst,
                    lambda2: Some(f.lambda2),
                    nu2: f.nu2,
                    converged: f.converged,
                },
                Estimate::Scaling(f) => RepOutcome {
                    rep: r,
                    hurst: f.h_hat,
                    lambda2: None,
                    nu2: None,
                    converged: true,
                },
            };
            Ok(outcome)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Moments {
    pub count: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub rmse: Option<f64>,
}

impl Moments {
    pub fn of(xs: &[f64], truth: Option<f64>) -> Self {
        if xs.is_empty() {
            return Self {
                count: 0,
                mean: None,
                sd: None,
                rmse: None,
            };
        }
        Self {
            count: xs.len(),
            mean: Some(stats::mean(xs)),
            sd: stats::sample_sd(xs),
            rmse: truth.map(|t| stats::rms_error(xs, t)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell: Cell,
    pub hurst: Moments,
    pub lambda2: Moments,
    /// Over replications with a finite `nu2` only.
    pub nu2: Moments,
    pub converged: usize,
}

pub fn summarize(cell: &Cell, reps: &[RepOutcome]) -> CellSummary {
    let h: Vec<f64> = reps.iter().map(|r| r.hurst).collect();
    let l: Vec<f64> = reps.iter().filter_map(|r| r.lambda2).collect();
    let n: Vec<f64> = reps.iter().filter_map(|r| r.nu2).collect();
    let nu2_true = (cell.hurst > 0.0).then(|| cell.lambda2 / (cell.hurst * (1.0 - 2.0 * cell.hurst)));
    CellSummary {
        cell: *cell,
        hurst: Moments::of(&h, Some(cell.hurst)),
        lambda2: Moments::of(&l, Some(cell.lambda2)),
        nu2: Moments::of(&n, nu2_true),
        converged: reps.iter().filter(|r| r.converged).count(),
    }
}

fn cell_value(v: Option<f64>) -> String {
    v.map_or_else(|| ABSENT.to_string(), |x| format!("{x:e}"))
}

pub fn summary_csv(method: Method, rows: &[CellSummary]) -> String {
    let mut s = String::from(
        "H,lambda2,method,reps,mean_H,sd_H,rmse_H,mean_lambda2,sd_lambda2,rmse_lambda2,finite_nu2,mean_nu2,sd_nu2,converged\n",
    );
    let name = match method {
        Method::GmmLnm => "gmm_lnM",
        Method::GmmM => "gmm_M",
        Method::Scaling => "scaling",
    };
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{name},{},{},{},{},{},{},{},{},{},{},{}",
            r.cell.hurst,
            r.cell.lambda2,
            r.cell.reps,
            cell_value(r.hurst.mean),
            cell_value(r.hurst.sd),
            cell_value(r.hurst.rmse),
            cell_value(r.lambda2.mean),
            cell_value(r.lambda2.sd),
            cell_value(r.lambda2.rmse),
            r.nu2.count,
            cell_value(r.nu2.mean),
            cell_value(r.nu2.sd),
            r.converged
        );
    }
    s
}

fn fits_csv(cells: &[(Cell, Vec<RepOutcome>)]) -> String {
    let mut s = String::from("H,lambda2,rep,seed,H_hat,lambda2_hat,nu2_hat,converged\n");
    for (cell, reps) in cells {
        for r in reps {
            let _ = writeln!(
                s,
                "{},{},{},{},{:e},{},{},{}",
                cell.hurst,
                cell.lambda2,
                r.rep,
                cell.seed.wrapping_add(r.rep),
                r.hurst,
                cell_value(r.lambda2),
                cell_value(r.nu2),
                r.converged
            );
        }
    }
    s
}

impl MonteCarloArgs {
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &h in &self.hurst {
            for &l in &self.lambda2 {
                let idx = cells.len() as u64;
                cells.push(Cell {
                    hurst: h,
                    lambda2: l,
                    length: self.length,
                    corr_length: self.corr_length,
                    delta: self.delta,
                    subdivisions: self.subdivisions,
                    proxy: self.proxy,
                    seed: self.seed.wrapping_add(idx.wrapping_mul(CELL_SEED_STRIDE)),
                    reps: self.reps,
                });
            }
        }
        cells
    }
}

/// Runs the whole grid; returns the per-cell outcomes in grid order.
pub fn sweep(args: &MonteCarloArgs) -> CliResult<Vec<(Cell, Vec<RepOutcome>)>> {
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let threads = args.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let cells = args.cells();
    let mut peak = 0usize;
    for c in &cells {
        let cfg = c.config()?;
        // sampler eigenvalues are shared, work buffers are per thread
        let m = 2 * cfg.n_fine().next_power_of_two();
        peak = peak.max(m * 8 + pool.current_num_threads() * cfg.memory_estimate_bytes());
    }
    if peak > args.max_memory_mb << 20 {
        return Err(CliError::Usage(format!(
            "grid needs about {} MiB with {} threads, above the cap of {} MiB",
            peak >> 20,
            pool.current_num_threads(),
            args.max_memory_mb
        )));
    }
    pool.install(|| {
        cells
            .iter()
            .map(|c| {
                let t0 = Instant::now();
                let reps = run_cell(c, &args.estimator)?;
                if args.progress {
                    eprintln!(
                        "cell H={} lambda2={}: {} reps in {:.2?}",
                        c.hurst,
                        c.lambda2,
                        c.reps,
                        t0.elapsed()
                    );
                }
                Ok((*c, reps))
            })
            .collect()
    })
}

pub fn run(args: &MonteCarloArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("montecarlo", args, Some(args.seed))?;
    let results = sweep(args)?;
    let rows: Vec<CellSummary> = results.iter().map(|(c, r)| summarize(c, r)).collect();
    ensure_parent(&args.out)?;
    std::fs::write(&args.out, summary_csv(args.estimator.method, &rows)).map_err(io_err(&args.out))?;
    manifest.record(&args.out);
    if let Some(path) = &args.fits {
        ensure_parent(path)?;
        std::fs::write(path, fits_csv(&results)).map_err(io_err(path))?;
        manifest.record(path);
    }
    manifest.finish(&sibling(&args.out, "manifest.json"))
}
