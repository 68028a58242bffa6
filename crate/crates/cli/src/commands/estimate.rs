use crate::error::{CliError, CliResult, Context};
use crate::manifest::{ensure_parent, sibling, write_json, RunManifest};
use clap::{Args, ValueEnum};
use lsfbm::dataio::read_series_csv;
use lsfbm::estimators::{scaling_estimate_h, ScalingFit};
use lsfbm::gmm::{self, GmmFit, GmmMethod, GmmConfig};
use lsfbm::simulate::{SeriesMeta, VolSeries};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    GmmLnm,
    GmmM,
    Scaling,
}

/// Estimator settings shared by `estimate` and `montecarlo`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimatorArgs {
    #[arg(long, value_enum, default_value = "gmm-lnm")]
    pub method: Method,
    /// Positive moment lags (default floor(sqrt(2^k)), k = 0..18)
    #[arg(long, value_delimiter = ',')]
    pub lags: Option<Vec<usize>>,
    /// Newey-West truncation lag (default floor(N^{1/3}))
    #[arg(long)]
    pub hac_lag: Option<usize>,
    /// HAC re-weightings after the identity step; 1 is two-step GMM
    #[arg(long, default_value_t = 1)]
    pub weight_updates: usize,
    /// Leave out the lag-0 moment and the white-noise term
    #[arg(long)]
    pub no_lag_zero: bool,
    /// Moment order of the scaling regression
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    /// Lag range, in cells, of the scaling regression
    #[arg(long, default_value_t = 10)]
    pub scaling_min: usize,
    #[arg(long, default_value_t = 500)]
    pub scaling_max: usize,
}

impl EstimatorArgs {
    pub fn gmm_config(&self) -> Option<GmmConfig> {
        let method = match self.method {
            Method::GmmLnm => GmmMethod::GmmLnM,
            Method::GmmM => GmmMethod::GmmM,
            Method::Scaling => return None,
        };
        let mut config = GmmConfig::new(method);
        if let Some(l) = &self.lags {
            config.lags = l.clone();
        }
        config.hac_lag = self.hac_lag;
        config.weight_updates = self.weight_updates;
        if self.no_lag_zero {
            config.include_lag_zero = false;
        }
        config.scaling_range = (self.scaling_min, self.scaling_max);
        Some(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Estimate {
    Gmm(GmmFit),
    Scaling(ScalingFit),
}

impl Estimate {
    pub fn hurst(&self) -> f64 {
        match self {
            Estimate::Gmm(f) => f.hurst,
            Estimate::Scaling(f) => f.h_hat,
        }
    }
}

pub fn estimate_series(series: &VolSeries, est: &EstimatorArgs) -> CliResult<Estimate> {
    match est.gmm_config() {
        Some(config) => gmm::fit(series, &config).context(|| "GMM fit".into()).map(Estimate::Gmm),
        None => {
            let hi = est.scaling_max.min(series.len() / 2);
            if hi <= est.scaling_min {
                return Err(CliError::Usage(format!(
                    "series of {} cells is too short for scaling lags from {}",
                    series.len(),
                    est.scaling_min
                )));
            }
            scaling_estimate_h(series, est.q, (est.scaling_min, hi))
                .context(|| "scaling regression".into())
                .map(Estimate::Scaling)
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    /// Series CSV with header index,value
    #[arg(long)]
    pub input: PathBuf,
    /// Cell size of the series
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Output JSON
    #[arg(long)]
    pub out: PathBuf,
}

/// Seed recorded in the `.json` provenance next to a simulated series, if any.
fn simulation_seed(input: &Path) -> Option<u64> {
    let text = std::fs::read_to_string(sibling(input, "json")).ok()?;
    match serde_json::from_str::<SeriesMeta>(&text).ok()? {
        SeriesMeta::Simulated { config, .. } => Some(config.seed),
        _ => None,
    }
}

pub fn run(args: &EstimateArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("estimate", args, None)?;
    let series = read_series_csv(&args.input, args.delta).context(|| args.input.display().to_string())?;
    let mut fit = estimate_series(&series, &args.estimator)?;
    if let (Estimate::Gmm(f), Some(seed)) = (&mut fit, simulation_seed(&args.input)) {
        f.seed = Some(seed);
    }
    ensure_parent(&args.out)?;
    write_json(&args.out, &fit)?;
    manifest.record(&args.out);
    manifest.finish(&sibling(&args.out, "manifest.json"))
}
