//! Exact simulation of the log-volatility, the measure and the price.
//!
//! The stationary Gaussian log-volatility is sampled on a fine grid by
//! circulant embedding, with a Cholesky fallback for short grids whose
//! embedding is not positive. Cells of the measure are left-point Riemann sums
//! of `exp(omega)`; the price is the Brownian motion time-changed by the
//! measure, and its squared fine returns give the realized-variance proxy.

use crate::dataio::IngestProvenance;
use crate::error::{Error, Result};
use crate::kernels::{cov_omega, cov_omega_mrm, ModelParams};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Relative size of negative circulant eigenvalues that are set to zero.
pub const EIGEN_CLAMP: f64 = 1e-8;
/// Diagonal jitter (relative to the variance) of the Cholesky fallback.
pub const CHOLESKY_JITTER: f64 = 1e-12;
/// Longest grid for which the Cholesky fallback is attempted.
pub const CHOLESKY_MAX_POINTS: usize = 4096;
const MAX_EMBEDDING_DOUBLINGS: u32 = 3;

const OMEGA_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ModelParams,
    /// Observation length `L`.
    pub length: f64,
    /// Coarse cell size.
    pub delta: f64,
    /// Fine steps per cell.
    pub subdivisions: usize,
    pub seed: u64,
    pub emit_price: bool,
}

impl SimConfig {
    pub fn new(
        params: ModelParams,
        length: f64,
        delta: f64,
        subdivisions: usize,
        seed: u64,
        emit_price: bool,
    ) -> Result<Self> {
        let cfg = Self {
            params,
            length,
            delta,
            subdivisions,
            seed,
            emit_price,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::param(format!("delta = {} must be > 0", self.delta)));
        }
        let cells = self.length / self.delta;
        if !(cells >= 2.0) || (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::param(format!(
                "L / delta = {cells} must be an integer >= 2"
            )));
        }
        if self.subdivisions == 0 {
            return Err(Error::param("subdivisions must be >= 1"));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        (self.length / self.delta).round() as usize
    }

    pub fn n_fine(&self) -> usize {
        self.n_cells() * self.subdivisions
    }

    pub fn fine_dt(&self) -> f64 {
        self.delta / self.subdivisions as f64
    }

    /// Rough peak memory of one replication, embedding buffers included.
    pub fn memory_estimate_bytes(&self) -> usize {
        let m = 2 * self.n_fine().next_power_of_two();
        // eigenvalues, one complex work buffer, omega, cells, price
        m * 8 + m * 16 + self.n_fine() * 8 * 2 + self.n_cells() * 8 * 2
    }

    /// Configuration of replication `r`, seeded `seed + r`.
    pub fn replication(&self, r: u64) -> Self {
        Self {
            seed: self.seed.wrapping_add(r),
            ..*self
        }
    }
}

/// Where a [`VolSeries`] came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeriesMeta {
    Simulated { config: SimConfig, proxy: bool },
    Ingested(IngestProvenance),
    External { source: String },
}

/// Equally spaced integrated-variance observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolSeries {
    pub delta: f64,
    pub values: Vec<f64>,
    pub meta: SeriesMeta,
}

impl VolSeries {
    pub fn new(delta: f64, values: Vec<f64>, meta: SeriesMeta) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::param(format!("delta = {delta} must be > 0")));
        }
        if values.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositive { index, value });
        }
        Ok(Self { delta, values, meta })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The same series multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.delta, self.values.iter().map(|v| v * c).collect(), self.meta.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePath {
    pub fine_dt: f64,
    pub log_returns: Vec<f64>,
}

impl PricePath {
    /// Cumulative log price starting from `x0`, one more point than returns.
    pub fn log_prices(&self, x0: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.log_returns.len() + 1);
        let mut x = x0;
        out.push(x);
        for r in &self.log_returns {
            x += r;
            out.push(x);
        }
        out
    }
}

/// Everything one replication produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub measure: VolSeries,
    pub price: Option<PricePath>,
    pub realized: Option<VolSeries>,
}

enum Method {
    Circulant {
        sqrt_eig: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Cholesky(DMatrix<f64>),
    Degenerate,
}

/// Sampler of a zero-mean stationary Gaussian sequence with a given
/// autocovariance, reusable across replications.
pub struct GaussianSampler {
    n: usize,
    method: Method,
}

impl std::fmt::Debug for GaussianSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.method {
            Method::Circulant { ref sqrt_eig, .. } => format!("circulant({})", sqrt_eig.len()),
            Method::Cholesky(_) => "cholesky".to_string(),
            Method::Degenerate => "degenerate".to_string(),
        };
        f.debug_struct("GaussianSampler").field("n", &self.n).field("method", &kind).finish()
    }
}

impl GaussianSampler {
    /// `acov(k)` is the covariance at lag `k` grid steps.
    pub fn new<F: Fn(usize) -> f64>(n: usize, acov: F) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("cannot sample an empty grid"));
        }
        let c0 = acov(0);
        if c0 == 0.0 {
            return Ok(Self {
                n,
                method: Method::Degenerate,
            });
        }
        let mut m = 2 * n.next_power_of_two();
        let mut planner = FftPlanner::new();
        let mut worst = (0.0, 0.0);
        for _ in 0..=MAX_EMBEDDING_DOUBLINGS {
            let half = m / 2;
            let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); m];
            for k in 0..=half {
                let c = acov(k);
                buf[k] = Complex::new(c, 0.0);
                if k > 0 && k < half {
                    buf[m - k] = Complex::new(c, 0.0);
                }
            }
            let fft = planner.plan_fft_forward(m);
            fft.process(&mut buf);
            let eig: Vec<f64> = buf.iter().map(|c| c.re).collect();
            let max = eig.iter().cloned().fold(f64::MIN, f64::max);
            let min = eig.iter().cloned().fold(f64::MAX, f64::min);
            if min >= -EIGEN_CLAMP * max {
                let scale = 1.0 / m as f64;
                let sqrt_eig = eig.iter().map(|&e| (e.max(0.0) * scale).sqrt()).collect();
                return Ok(Self {
                    n,
                    method: Method::Circulant { sqrt_eig, fft },
                });
            }
            worst = (min, max);
            m *= 2;
        }
        if n <= CHOLESKY_MAX_POINTS {
            let cov = DMatrix::from_fn(n, n, |i, j| {
                let v = acov(i.abs_diff(j));
                if i == j {
                    v + CHOLESKY_JITTER * c0
                } else {
                    v
                }
            });
            if let Some(ch) = cov.cholesky() {
                return Ok(Self {
                    n,
                    method: Method::Cholesky(ch.l()),
                });
            }
        }
        Err(Error::Embedding {
            min_eigenvalue: worst.0,
            max_eigenvalue: worst.1,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn uses_cholesky(&self) -> bool {
        matches!(self.method, Method::Cholesky(_))
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match &self.method {
            Method::Degenerate => vec![0.0; self.n],
            Method::Circulant { sqrt_eig, fft } => {
                let mut buf: Vec<Complex<f64>> = sqrt_eig
                    .iter()
                    .map(|&s| {
                        let a: f64 = StandardNormal.sample(rng);
                        let b: f64 = StandardNormal.sample(rng);
                        Complex::new(s * a, s * b)
                    })
                    .collect();
                fft.process(&mut buf);
                buf.truncate(self.n);
                buf.into_iter().map(|c| c.re).collect()
            }
            Method::Cholesky(l) => {
                let z = DVector::from_fn(self.n, |_, _| StandardNormal.sample(rng));
                (l * z).iter().copied().collect()
            }
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sampler of the log-volatility for a configuration; dispatches to the
/// multifractal kernel (regularized at the fine step) when `H = 0`.
#[derive(Debug)]
pub struct LogVolSampler {
    gaussian: GaussianSampler,
    mean: f64,
}

impl LogVolSampler {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let p = cfg.params;
        let dt = cfg.fine_dt();
        let n = cfg.n_fine();
        if p.is_mrm() {
            let t = p.corr_length;
            let var = cov_omega_mrm(p.lambda2, t, dt, 0.0)?;
            let gaussian = GaussianSampler::new(n, |k| {
                cov_omega_mrm(p.lambda2, t, dt, k as f64 * dt).unwrap_or(0.0)
            })?;
            Ok(Self {
                gaussian,
                mean: p.sigma2.ln() - 0.5 * var,
            })
        } else {
            let gaussian = GaussianSampler::new(n, |k| cov_omega(&p, k as f64 * dt).unwrap_or(0.0))?;
            Ok(Self {
                gaussian,
                mean: p.log_mean(),
            })
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Fine-grid log-volatility path for the given seed.
    pub fn sample(&self, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, OMEGA_STREAM);
        let mut path = self.gaussian.sample(&mut rng);
        for v in path.iter_mut() {
            *v += self.mean;
        }
        path
    }

    pub fn gaussian(&self) -> &GaussianSampler {
        &self.gaussian
    }
}

/// Fine-grid log-volatility with the S-fBM covariance and mean
/// `ln sigma^2 - C_omega(0)/2`.
pub fn sample_omega(cfg: &SimConfig) -> Result<Vec<f64>> {
    if cfg.params.is_mrm() {
        return Err(Error::domain("sample_omega", "H = 0 needs sample_omega_mrm"));
    }
    Ok(LogVolSampler::new(cfg)?.sample(cfg.seed))
}

/// `n_points` values spaced `dt` apart of the multifractal log-volatility
/// regularized at `ell`, with mean `-Var/2` so that `E[exp(omega)] = 1`.
pub fn sample_omega_mrm(lambda2: f64, corr_length: f64, ell: f64, n_points: usize, dt: f64, seed: u64) -> Result<Vec<f64>> {
    let var = cov_omega_mrm(lambda2, corr_length, ell, 0.0)?;
    let gaussian = GaussianSampler::new(n_points, |k| {
        cov_omega_mrm(lambda2, corr_length, ell, k as f64 * dt).unwrap_or(0.0)
    })?;
    let mut rng = stream_rng(seed, OMEGA_STREAM);
    Ok(gaussian.sample(&mut rng).into_iter().map(|v| v - 0.5 * var).collect())
}

/// Cell masses `sum_{i in cell} exp(omega_i) dt` (left-point rule).
pub fn build_measure(omega: &[f64], cfg: &SimConfig) -> Result<VolSeries> {
    let n = cfg.subdivisions;
    if omega.is_empty() || omega.len() % n != 0 {
        return Err(Error::param(format!(
            "path length {} is not a multiple of {n} subdivisions",
            omega.len()
        )));
    }
    let dt = cfg.fine_dt();
    let values = omega
        .chunks_exact(n)
        .map(|cell| cell.iter().map(|w| w.exp()).sum::<f64>() * dt)
        .collect();
    VolSeries::new(
        cfg.delta,
        values,
        SeriesMeta::Simulated {
            config: *cfg,
            proxy: false,
        },
    )
}

/// Fine log-returns `sqrt(exp(omega_i) dt) xi_i` and the per-cell sums of
/// their squares. The noise `xi` comes from its own stream of `cfg.seed`.
pub fn build_price_and_rv(omega: &[f64], cfg: &SimConfig) -> Result<(PricePath, VolSeries)> {
    let n = cfg.subdivisions;
    if omega.is_empty() || omega.len() % n != 0 {
        return Err(Error::param(format!(
            "path length {} is not a multiple of {n} subdivisions",
            omega.len()
        )));
    }
    let dt = cfg.fine_dt();
    let mut rng = stream_rng(cfg.seed, NOISE_STREAM);
    let log_returns: Vec<f64> = omega
        .iter()
        .map(|w| {
            let xi: f64 = StandardNormal.sample(&mut rng);
            (w.exp() * dt).sqrt() * xi
        })
        .collect();
    let rv = log_returns
        .chunks_exact(n)
        .map(|cell| cell.iter().map(|r| r * r).sum())
        .collect();
    let series = VolSeries::new(
        cfg.delta,
        rv,
        SeriesMeta::Simulated {
            config: *cfg,
            proxy: true,
        },
    )?;
    Ok((PricePath { fine_dt: dt, log_returns }, series))
}

/// One replication with a prebuilt sampler; the price and realized variance
/// are produced when `cfg.emit_price` is set.
pub fn simulate_with(sampler: &LogVolSampler, cfg: &SimConfig) -> Result<Replication> {
    let omega = sampler.sample(cfg.seed);
    let measure = build_measure(&omega, cfg)?;
    let (price, realized) = if cfg.emit_price {
        let (p, rv) = build_price_and_rv(&omega, cfg)?;
        (Some(p), Some(rv))
    } else {
        (None, None)
    };
    Ok(Replication {
        measure,
        price,
        realized,
    })
}

pub fn simulate(cfg: &SimConfig) -> Result<Replication> {
    simulate_with(&LogVolSampler::new(cfg)?, cfg)
}
