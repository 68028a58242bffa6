//! Log S-fBM stochastic volatility.
//!
//! The log S-fBM measure `M(dt) = exp(omega(t)) dt` is driven by a stationary
//! Gaussian process whose covariance `(nu^2/2)(T^{2H} - |tau|^{2H})` vanishes
//! beyond the correlation length `T`. For `0 < H < 1/2` this is a rough
//! volatility model; as `H -> 0` at fixed intermittency `lambda^2 = H(1-2H) nu^2`
//! it converges to the log-normal multifractal random measure. The crate
//! covers both ends of the family:
//!
//! - [`kernels`]: closed-form covariances, correlation and scaling functions;
//! - [`specfun`]: incomplete gamma and `1F1(1; b; z)` used by the kernels;
//! - [`simulate`]: exact Gaussian sampling, measure cells and price proxies;
//! - [`estimators`]: correlograms, log-increment moments and the scaling fit;
//! - [`gmm`]: the two high-frequency GMM estimators with Newey-West weighting;
//! - [`dataio`]: OHLC / intraday ingestion and daily variance proxies.

pub mod dataio;
pub mod error;
pub mod estimators;
pub mod gmm;
pub mod kernels;
pub mod optim;
pub mod simulate;
pub mod specfun;
pub mod stats;

pub use error::{Error, Result};
pub use kernels::{LagGrid, ModelParams, ShapeParams};
pub use simulate::{SimConfig, VolSeries};
