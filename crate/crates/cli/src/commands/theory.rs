use crate::error::{io_err, CliError, CliResult, Context};
use crate::manifest::{ensure_parent, sibling, write_json, RunManifest};
use clap::{Args, ValueEnum};
use lsfbm::kernels::{self, ModelParams, ShapeParams};
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    /// g_H(z) at --z values, or ln g_H(delta/tau) against ln(tau/delta)
    Gh,
    /// ln g_H over every multiple of delta in range, with the fitted slope B_H
    Bias,
    /// Covariance of the measure, C_M(delta, tau)
    Cm,
    /// Covariance of ln M, C_lnM(delta, tau)
    Clnm,
    /// High-frequency ln M correlogram limit for n = 1..n-max
    Dtilde,
    /// Shape of the M correlogram for n = 0..n-max
    Rtilde,
    /// Log-increment moment m(q, H, tau, delta)
    Mq,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TheoryArgs {
    #[arg(long, value_enum)]
    pub curve: Curve,
    #[arg(long = "H")]
    pub hurst: f64,
    #[arg(long, default_value_t = 0.05)]
    pub lambda2: f64,
    #[arg(long = "T", default_value_t = 131072.0)]
    pub corr_length: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau_min: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub tau_max: f64,
    /// Points of the geometric tau grid
    #[arg(long, default_value_t = 64)]
    pub points: usize,
    /// Explicit z values for the gh curve
    #[arg(long, value_delimiter = ',')]
    pub z: Vec<f64>,
    #[arg(long, default_value_t = 64)]
    pub n_max: u32,
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    /// Output CSV
    #[arg(long)]
    pub out: PathBuf,
}

/// Slope of the bias regression and the scaling estimate it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasSummary {
    pub hurst: f64,
    pub delta: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub slope_b: f64,
    pub intercept: f64,
    /// `H + B_H / 2`
    pub implied_hurst: f64,
}

pub struct Table {
    pub header: [&'static str; 2],
    pub rows: Vec<(f64, f64)>,
    pub bias: Option<BiasSummary>,
}

fn geometric_grid(lo: f64, hi: f64, points: usize) -> CliResult<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || points < 2 {
        return Err(CliError::Usage(format!(
            "tau grid needs 0 < tau-min < tau-max and at least 2 points (got {lo}, {hi}, {points})"
        )));
    }
    let r = (hi / lo).ln() / (points - 1) as f64;
    Ok((0..points).map(|i| lo * (r * i as f64).exp()).collect())
}

/// Every multiple of `delta` in `[lo, hi]`.
fn multiples(lo: f64, hi: f64, delta: f64) -> CliResult<Vec<f64>> {
    let first = (lo / delta).ceil() as u64;
    let last = (hi / delta).floor() as u64;
    if !(delta > 0.0) || first == 0 || last <= first {
        return Err(CliError::Usage(format!(
            "need at least two positive multiples of delta = {delta} in [{lo}, {hi}]"
        )));
    }
    Ok((first..=last).map(|k| k as f64 * delta).collect())
}

/// Evaluates the requested curve.
pub fn evaluate(args: &TheoryArgs) -> CliResult<Table> {
    let ctx = || format!("curve {:?}", args.curve);
    let params = || ModelParams::new(args.hurst, args.lambda2, args.corr_length, args.sigma2).context(ctx);
    let shape = || ShapeParams::new(args.hurst, args.lambda2).context(ctx);
    let taus = || geometric_grid(args.tau_min, args.tau_max, args.points);
    let delta = args.delta;
    let mut bias = None;
    let (header, rows) = match args.curve {
        Curve::Gh if !args.z.is_empty() => {
            let rows = args
                .z
                .iter()
                .map(|&z| kernels::g_h(args.hurst, z).map(|g| (z, g)))
                .collect::<lsfbm::Result<Vec<_>>>()
                .context(ctx)?;
            (["z", "g"], rows)
        }
        Curve::Gh => {
            let rows = taus()?
                .into_iter()
                .map(|t| kernels::g_h(args.hurst, delta / t).map(|g| ((t / delta).ln(), g.ln())))
                .collect::<lsfbm::Result<Vec<_>>>()
                .context(ctx)?;
            (["ln_tau_over_delta", "ln_g"], rows)
        }
        Curve::Bias => {
            let grid = multiples(args.tau_min, args.tau_max, delta)?;
            let (b, c) = kernels::scaling_bias(args.hurst, delta, &grid).context(ctx)?;
            bias = Some(BiasSummary {
                hurst: args.hurst,
                delta,
                tau_min: grid[0],
                tau_max: grid[grid.len() - 1],
                slope_b: b,
                intercept: c,
                implied_hurst: args.hurst + b / 2.0,
            });
            let rows = grid
                .into_iter()
                .map(|t| kernels::g_h(args.hurst, delta / t).map(|g| ((t / delta).ln(), g.ln())))
                .collect::<lsfbm::Result<Vec<_>>>()
                .context(ctx)?;
            (["ln_tau_over_delta", "ln_g"], rows)
        }
        Curve::Cm => {
            let p = params()?;
            let rows = taus()?
                .into_iter()
                .map(|t| kernels::corr_m(&p, delta, t).map(|v| (t, v)))
                .collect::<lsfbm::Result<Vec<_>>>()
                .context(ctx)?;
            (["tau", "c_m"], rows)
        }
        Curve::Clnm => {
            let p = params()?;
            let rows = taus()?
                .into_iter()
                .map(|t| kernels::cov_lnm(&p, delta, t).map(|v| (t, v)))
                .collect::<lsfbm::Result<Vec<_>>>()
                .context(ctx)?;
            (["tau", "c_lnm"], rows)
        }
        Curve::Dtilde => {
            let s = shape()?;
            let rows = (1..=args.n_max)
                .map(|n| kernels::dtilde_lnm(&s, n).map(|v| (f64::from(n), v)))
                .collect::<lsfbm::Result<Vec<_>>>()
                .context(ctx)?;
            (["n", "dtilde"], rows)
        }
        Curve::Rtilde => {
            let s = shape()?;
            let rows = (0..=args.n_max)
                .map(|n| kernels::rtilde_m(&s, n).map(|v| (f64::from(n), v)))
                .collect::<lsfbm::Result<Vec<_>>>()
                .context(ctx)?;
            (["n", "rtilde"], rows)
        }
        Curve::Mq => {
            let p = params()?;
            let rows = taus()?
                .into_iter()
                .map(|t| kernels::m_q(&p, args.q, t, delta).map(|v| (t, v)))
                .collect::<lsfbm::Result<Vec<_>>>()
                .context(ctx)?;
            (["tau", "m_q"], rows)
        }
    };
    Ok(Table { header, rows, bias })
}

pub fn run(args: &TheoryArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("theory", args, None)?;
    let table = evaluate(args)?;
    ensure_parent(&args.out)?;
    let mut text = format!("{},{}\n", table.header[0], table.header[1]);
    for (x, y) in &table.rows {
        text.push_str(&format!("{x:e},{y:e}\n"));
    }
    std::fs::File::create(&args.out)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(io_err(&args.out))?;
    manifest.record(&args.out);
    if let Some(b) = &table.bias {
        let side = sibling(&args.out, "json");
        write_json(&side, b)?;
        manifest.record(&side);
    }
    manifest.finish(&sibling(&args.out, "manifest.json"))
}
