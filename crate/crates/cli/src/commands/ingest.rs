use crate::error::{CliError, CliResult, Context};
use crate::manifest::{ensure_parent, sibling, write_json, RunManifest};
use clap::{Args, ValueEnum};
use lsfbm::dataio::{
    ingest_intraday, ingest_ohlc, read_intraday_csv, read_ohlc_csv, write_series_csv, CleaningPolicy,
    IntradayEstimator,
};
use lsfbm::simulate::SeriesMeta;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyEstimator {
    /// Garman-Klass, from OHLC bars
    Gk,
    /// Realized variance, from intraday returns
    Rv,
    /// Bipower variation, from intraday returns
    Bv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cleaning {
    Drop,
    Floor,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IngestArgs {
    /// OHLC CSV (date,open,high,low,close)
    #[arg(long, conflicts_with = "intraday", required_unless_present = "intraday")]
    pub ohlc: Option<PathBuf>,
    /// Intraday CSV (date,return or date,rv,bv)
    #[arg(long)]
    pub intraday: Option<PathBuf>,
    /// Daily proxy (default gk for OHLC, rv for intraday)
    #[arg(long, value_enum)]
    pub estimator: Option<ProxyEstimator>,
    /// What to do with non-positive or missing days
    #[arg(long, value_enum, default_value = "drop")]
    pub cleaning: Cleaning,
    /// Floor used by --cleaning floor
    #[arg(long, default_value_t = 1e-12)]
    pub floor_epsilon: f64,
    /// Output series CSV; provenance goes to the .json sibling
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &IngestArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("ingest", args, None)?;
    let cleaning = match args.cleaning {
        Cleaning::Drop => CleaningPolicy::Drop,
        Cleaning::Floor => CleaningPolicy::Floor(args.floor_epsilon),
    };
    let series = match (&args.ohlc, &args.intraday) {
        (Some(path), None) => {
            if !matches!(args.estimator, None | Some(ProxyEstimator::Gk)) {
                return Err(CliError::Usage("OHLC input supports only --estimator gk".into()));
            }
            let ctx = || path.display().to_string();
            let file = read_ohlc_csv(path).context(ctx)?;
            ingest_ohlc(&file, &ctx(), cleaning).context(ctx)?
        }
        (None, Some(path)) => {
            let est = match args.estimator {
                None | Some(ProxyEstimator::Rv) => IntradayEstimator::RealizedVariance,
                Some(ProxyEstimator::Bv) => IntradayEstimator::Bipower,
                Some(ProxyEstimator::Gk) => {
                    return Err(CliError::Usage("intraday input supports --estimator rv or bv".into()));
                }
            };
            let ctx = || path.display().to_string();
            let file = read_intraday_csv(path).context(ctx)?;
            ingest_intraday(&file, &ctx(), est, cleaning).context(ctx)?
        }
        _ => return Err(CliError::Usage("give exactly one of --ohlc or --intraday".into())),
    };
    if let SeriesMeta::Ingested(prov) = &series.meta {
        for r in &prov.rejected_rows {
            eprintln!("warning: line {} rejected: {}", r.line, r.reason);
        }
        for w in &prov.warnings {
            eprintln!("warning: {w}");
        }
    }
    ensure_parent(&args.out)?;
    write_series_csv(&args.out, &series.values).context(|| args.out.display().to_string())?;
    manifest.record(&args.out);
    let side = sibling(&args.out, "json");
    write_json(&side, &series.meta)?;
    manifest.record(&side);
    manifest.finish(&sibling(&args.out, "manifest.json"))
}
