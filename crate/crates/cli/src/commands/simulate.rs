use crate::error::{io_err, CliError, CliResult, Context};
use crate::manifest::{write_json, RunManifest};
use clap::Args;
use lsfbm::dataio::write_series_csv;
use lsfbm::kernels::ModelParams;
use lsfbm::simulate::{simulate, SimConfig};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Hurst exponent, 0 <= H < 1/2 (H = 0 simulates the multifractal limit)
    #[arg(long = "H", allow_negative_numbers = true)]
    pub hurst: f64,
    /// Intermittency coefficient lambda^2
    #[arg(long)]
    pub lambda2: f64,
    /// Correlation length T
    #[arg(long = "T")]
    pub corr_length: f64,
    /// Observation length L
    #[arg(long = "L")]
    pub length: f64,
    /// Cell size of the output series
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Fine steps per cell
    #[arg(long, default_value_t = 32)]
    pub subdivisions: usize,
    /// Mean variance per unit time
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write fine log-returns and the realized-variance proxy
    #[arg(long)]
    pub emit_price: bool,
    /// Refuse runs whose projected memory exceeds this many MiB
    #[arg(long, default_value_t = 4096)]
    pub max_memory_mb: usize,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

impl SimulateArgs {
    pub fn config(&self) -> CliResult<SimConfig> {
        let params = ModelParams::new(self.hurst, self.lambda2, self.corr_length, self.sigma2)
            .context(|| "model parameters".into())?;
        SimConfig::new(params, self.length, self.delta, self.subdivisions, self.seed, self.emit_price)
            .context(|| "simulation grid".into())
    }
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("simulate", args, Some(args.seed))?;
    let cfg = args.config()?;
    let need = cfg.memory_estimate_bytes();
    if need > args.max_memory_mb << 20 {
        return Err(CliError::Usage(format!(
            "simulation needs about {} MiB, above the cap of {} MiB",
            need >> 20,
            args.max_memory_mb
        )));
    }
    std::fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let rep = simulate(&cfg).context(|| "simulation".into())?;

    let measure = args.out.join("measure.csv");
    write_series_csv(&measure, &rep.measure.values).context(|| measure.display().to_string())?;
    manifest.record(&measure);
    let meta = args.out.join("measure.json");
    write_json(&meta, &rep.measure.meta)?;
    manifest.record(&meta);

    if let (Some(price), Some(rv)) = (&rep.price, &rep.realized) {
        let returns = args.out.join("log_returns.csv");
        write_series_csv(&returns, &price.log_returns).context(|| returns.display().to_string())?;
        manifest.record(&returns);
        let realized = args.out.join("realized.csv");
        write_series_csv(&realized, &rv.values).context(|| realized.display().to_string())?;
        manifest.record(&realized);
        let meta = args.out.join("realized.json");
        write_json(&meta, &rv.meta)?;
        manifest.record(&meta);
    }
    manifest.finish(&args.out.join("manifest.json"))
}
