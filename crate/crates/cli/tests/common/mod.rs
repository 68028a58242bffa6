#![allow(dead_code)]

use chrono::NaiveDate;
use lsfbm::dataio::{ohlc_from_price_path, write_ohlc, OhlcBar};
use lsfbm::kernels::ModelParams;
use lsfbm::simulate::{simulate_with, LogVolSampler, SimConfig};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lsfbm"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Parameters of the synthetic OHLC fixture: daily bars whose intraday
/// log-price is a Brownian motion run on the log S-fBM clock.
#[derive(Debug, Clone, Copy)]
pub struct OhlcFixture {
    pub hurst: f64,
    pub lambda2: f64,
    pub corr_length: f64,
    pub days: usize,
    pub steps_per_day: usize,
    /// Mean daily variance.
    pub sigma2: f64,
}

impl OhlcFixture {
    pub const BUNDLED: OhlcFixture = OhlcFixture {
        hurst: 0.1,
        lambda2: 0.08,
        corr_length: 65536.0,
        days: 4096,
        steps_per_day: 32,
        sigma2: 1e-4,
    };

    pub fn sampler_config(&self, seed: u64) -> SimConfig {
        let p = ModelParams::new(self.hurst, self.lambda2, self.corr_length, self.sigma2).unwrap();
        SimConfig::new(p, self.days as f64, 1.0, self.steps_per_day, seed, true).unwrap()
    }

    pub fn bars_with(&self, sampler: &LogVolSampler, seed: u64) -> Vec<OhlcBar> {
        let cfg = self.sampler_config(seed);
        let rep = simulate_with(sampler, &cfg).unwrap();
        let start = NaiveDate::from_ymd_opt(1990, 1, 1).unwrap();
        ohlc_from_price_path(rep.price.as_ref().unwrap(), self.steps_per_day, 100.0, start).unwrap()
    }

    pub fn write(&self, sampler: &LogVolSampler, seed: u64, path: &Path) {
        let bars = self.bars_with(sampler, seed);
        write_ohlc(std::fs::File::create(path).unwrap(), &bars).unwrap();
    }
}
