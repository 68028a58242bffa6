//! GMM estimation of `(H, lambda^2)` from the correlogram of a volatility series.
//!
//! Two moment sets are supported. `GmmLnM` matches the centered `ln M`
//! correlogram to
//!
//! `C(n) = K_1 + lambda^2 d_n(H) + V_1 [n = 0]`
//!
//! where `K_1` absorbs both the unidentifiable level and the `-nu^2/2` term of
//! the high-frequency limit, and `V_1` absorbs cell-level white noise. Writing
//! the model in `lambda^2` rather than `nu^2` keeps it finite down to `H = 0`.
//! `GmmM` matches the raw correlogram of `M / mean(M)` to `K_2 R(n)`, with `R`
//! the shape of the measure correlogram.
//!
//! Estimation is two-step: identity weight first, then the inverse Newey-West
//! long-run covariance of the step-one residual contributions. Each step
//! starts from the scaling estimate of `H`, from the best point of a coarse
//! profile over the nonlinear parameters, and from perturbations of the best
//! point found, then polishes with the box-constrained quasi-Newton solver.

mod hac;

pub use hac::{long_run_covariance, newey_west_weight, symmetric_pinv, PINV_CUTOFF};

use crate::error::{Error, Result};
use crate::estimators::{centered_logs, scaling_estimate_h};
use crate::kernels::{dtilde_lnm_reduced, rtilde_m, ShapeParams, HURST_ZERO};
use crate::optim::{minimize, Bounds, OptimOptions};
use crate::simulate::VolSeries;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GmmMethod {
    #[serde(rename = "gmm_M")]
    GmmM,
    #[serde(rename = "gmm_lnM")]
    GmmLnM,
}

impl GmmMethod {
    pub fn name(self) -> &'static str {
        match self {
            GmmMethod::GmmM => "gmm_M",
            GmmMethod::GmmLnM => "gmm_lnM",
        }
    }
}

/// Lags `floor(sqrt(2^k))` for `k = 0..18`, deduplicated.
pub fn default_lags() -> Vec<usize> {
    let mut lags: Vec<usize> = (0..19).map(|k| (2f64.powi(k)).sqrt().floor() as usize).collect();
    lags.dedup();
    lags
}

/// `floor(n^{1/3})`, the default Newey-West truncation lag.
pub fn default_hac_lag(n: usize) -> usize {
    let c = (n as f64).cbrt();
    // guard against 4096^{1/3} = 15.999...
    (c + 1e-9).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub method: GmmMethod,
    /// Positive lags of the moment vector, strictly increasing.
    pub lags: Vec<usize>,
    /// Adds the lag-0 moment and the `V_1` parameter (`GmmLnM` only).
    pub include_lag_zero: bool,
    /// Newey-West truncation lag; `None` means `floor(N^{1/3})`.
    pub hac_lag: Option<usize>,
    /// Number of HAC re-weightings after the identity-weight step. 1 is
    /// two-step GMM, larger values iterate.
    pub weight_updates: usize,
    pub restarts: usize,
    /// Lag range, in cells, of the scaling regression used for the start.
    pub scaling_range: (usize, usize),
    pub hurst_max: f64,
    pub lambda2_max: f64,
    pub optim: OptimOptions,
}

impl GmmConfig {
    pub fn new(method: GmmMethod) -> Self {
        Self {
            method,
            lags: default_lags(),
            include_lag_zero: method == GmmMethod::GmmLnM,
            hac_lag: None,
            weight_updates: 1,
            restarts: 3,
            scaling_range: (10, 500),
            hurst_max: 0.499,
            lambda2_max: match method {
                GmmMethod::GmmLnM => 5.0,
                // F at H = 0 needs lambda^2 < 1
                GmmMethod::GmmM => 0.99,
            },
            optim: OptimOptions::default(),
        }
    }

    /// Lags of the moment vector, lag 0 first when included.
    pub fn moment_lags(&self) -> Vec<usize> {
        let mut lags = Vec::with_capacity(self.lags.len() + 1);
        if self.include_lag_zero && self.method == GmmMethod::GmmLnM {
            lags.push(0);
        }
        lags.extend(self.lags.iter().copied());
        lags
    }

    fn n_params(&self) -> usize {
        match self.method {
            GmmMethod::GmmLnM => 3 + usize::from(self.include_lag_zero),
            GmmMethod::GmmM => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lags.is_empty() || self.lags[0] == 0 {
            return Err(Error::param("moment lags must be positive"));
        }
        if self.lags.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("moment lags must be strictly increasing"));
        }
        if self.moment_lags().len() < self.n_params() {
            return Err(Error::param(format!(
                "{} moments cannot identify {} parameters",
                self.moment_lags().len(),
                self.n_params()
            )));
        }
        if !(self.hurst_max > 0.0 && self.hurst_max < 0.5) {
            return Err(Error::param(format!("hurst_max = {} must lie in (0, 1/2)", self.hurst_max)));
        }
        if !(self.lambda2_max > 0.0) || (self.method == GmmMethod::GmmM && self.lambda2_max >= 1.0) {
            return Err(Error::param(format!("lambda2_max = {} is out of range", self.lambda2_max)));
        }
        Ok(())
    }

    fn bounds(&self) -> Bounds {
        let inf = f64::INFINITY;
        let (lower, upper) = match self.method {
            GmmMethod::GmmLnM => {
                let v1_max = if self.include_lag_zero { inf } else { 0.0 };
                (
                    vec![0.0, 0.0, -inf, 0.0],
                    vec![self.hurst_max, self.lambda2_max, inf, v1_max],
                )
            }
            GmmMethod::GmmM => (vec![0.0, 0.0, 0.0], vec![self.hurst_max, self.lambda2_max, inf]),
        };
        Bounds { lower, upper }
    }
}

/// Parameters of the `ln M` correlogram model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LnmTheta {
    pub hurst: f64,
    pub lambda2: f64,
    pub k1: f64,
    pub v1: f64,
}

/// `K_1 + lambda^2 d_n(H) + V_1 [n = 0]`.
pub fn model_corr_lnm(theta: &LnmTheta, n: usize) -> f64 {
    let kron = if n == 0 { theta.v1 } else { 0.0 };
    theta.k1 + theta.lambda2 * dtilde_lnm_reduced(theta.hurst, n as u32) + kron
}

/// Parameters of the `M` correlogram model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MTheta {
    pub hurst: f64,
    pub lambda2: f64,
    pub k2: f64,
}

/// `K_2 R(n)` with `R(n) = F(n+1) + F(n-1) - 2 F(n)`.
pub fn model_corr_m(theta: &MTheta, n: usize) -> Result<f64> {
    let shape = ShapeParams::new(theta.hurst, theta.lambda2)?;
    Ok(theta.k2 * rtilde_m(&shape, n as u32)?)
}

fn model_vector(method: GmmMethod, theta: &[f64], lags: &[usize]) -> Result<Vec<f64>> {
    match method {
        GmmMethod::GmmLnM => {
            let t = LnmTheta {
                hurst: theta[0],
                lambda2: theta[1],
                k1: theta[2],
                v1: theta[3],
            };
            Ok(lags.iter().map(|&n| model_corr_lnm(&t, n)).collect())
        }
        GmmMethod::GmmM => {
            let t = MTheta {
                hurst: theta[0],
                lambda2: theta[1],
                k2: theta[2],
            };
            lags.iter().map(|&n| model_corr_m(&t, n)).collect()
        }
    }
}

fn quadratic_form(g: &[f64], w: &DMatrix<f64>) -> f64 {
    let g = DVector::from_column_slice(g);
    (g.transpose() * w * &g)[(0, 0)]
}

/// `g' W g` with `g` the empirical minus the model correlogram; `+inf` where
/// the model cannot be evaluated.
pub fn objective(method: GmmMethod, theta: &[f64], lags: &[usize], empirical: &[f64], weight: &DMatrix<f64>) -> f64 {
    match model_vector(method, theta, lags) {
        Ok(m) => {
            let g: Vec<f64> = empirical.iter().zip(&m).map(|(e, m)| e - m).collect();
            quadratic_form(&g, weight)
        }
        Err(_) => f64::INFINITY,
    }
}

/// Weighted least squares with sign constraints `coef[i] >= 0` where
/// `nonneg[i]`, solved exactly by enumerating the active sets.
fn constrained_wls(a: &DMatrix<f64>, y: &DVector<f64>, w: &DMatrix<f64>, nonneg: &[bool]) -> (DVector<f64>, f64) {
    let p = a.ncols();
    let constrained: Vec<usize> = (0..p).filter(|&i| nonneg[i]).collect();
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0..(1usize << constrained.len()) {
        let fixed: Vec<usize> = constrained
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &i)| i)
            .collect();
        let free: Vec<usize> = (0..p).filter(|i| !fixed.contains(i)).collect();
        let mut coef = DVector::zeros(p);
        if !free.is_empty() {
            let af = a.select_columns(&free);
            let lhs = af.transpose() * w * &af;
            let rhs = af.transpose() * w * y;
            let Ok(sol) = lhs.svd(true, true).solve(&rhs, 1e-14) else {
                continue;
            };
            for (k, &i) in free.iter().enumerate() {
                coef[i] = sol[k];
            }
        }
        if constrained.iter().any(|&i| coef[i] < 0.0) {
            continue;
        }
        let r = y - a * &coef;
        let f = (r.transpose() * w * &r)[(0, 0)];
        if best.as_ref().map_or(true, |(_, bf)| f < *bf) {
            best = Some((coef, f));
        }
    }
    best.unwrap_or_else(|| (DVector::zeros(p), (y.transpose() * w * y)[(0, 0)]))
}

/// Best linear parameters for fixed nonlinear ones, returned as a full point.
fn profile_point(method: GmmMethod, hurst: f64, lambda2: f64, lags: &[usize], emp: &DVector<f64>, w: &DMatrix<f64>, config: &GmmConfig) -> Option<(Vec<f64>, f64)> {
    match method {
        GmmMethod::GmmLnM => {
            let q = lags.len();
            let ncol = if config.include_lag_zero { 3 } else { 2 };
            let a = DMatrix::from_fn(q, ncol, |i, j| match j {
                0 => 1.0,
                1 => dtilde_lnm_reduced(hurst, lags[i] as u32),
                _ => f64::from(lags[i] == 0),
            });
            let nonneg = [false, true, true];
            let (c, f) = constrained_wls(&a, emp, w, &nonneg[..ncol]);
            let lam = c[1].min(config.lambda2_max);
            let v1 = if ncol == 3 { c[2] } else { 0.0 };
            Some((vec![hurst, lam, c[0], v1], f))
        }
        GmmMethod::GmmM => {
            let r = model_vector(method, &[hurst, lambda2, 1.0], lags).ok()?;
            let a = DMatrix::from_column_slice(lags.len(), 1, &r);
            let (c, f) = constrained_wls(&a, emp, w, &[true]);
            Some((vec![hurst, lambda2, c[0]], f))
        }
    }
}

/// Coarse grid over the nonlinear parameters with the linear ones profiled out.
fn profile_grid(method: GmmMethod, lags: &[usize], emp: &DVector<f64>, w: &DMatrix<f64>, config: &GmmConfig) -> Option<(Vec<f64>, f64)> {
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut consider = |cand: Option<(Vec<f64>, f64)>| {
        if let Some((x, f)) = cand {
            if f.is_finite() && best.as_ref().map_or(true, |(_, bf)| f < *bf) {
                best = Some((x, f));
            }
        }
    };
    match method {
        GmmMethod::GmmLnM => {
            let steps = (config.hurst_max / 0.002).floor() as usize;
            for i in 0..=steps {
                consider(profile_point(method, i as f64 * 0.002, 0.0, lags, emp, w, config));
            }
        }
        GmmMethod::GmmM => {
            let h_steps = (config.hurst_max / 0.02).floor() as usize;
            let l_steps = 24;
            for i in 0..=h_steps {
                for j in 0..l_steps {
                    let lam = 0.002 * (config.lambda2_max / 0.002).powf(j as f64 / (l_steps - 1) as f64);
                    consider(profile_point(method, i as f64 * 0.02, lam.min(config.lambda2_max), lags, emp, w, config));
                }
            }
        }
    }
    best
}

/// Outcome of minimizing one GMM objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmEstimate {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn better(a: &GmmEstimate, b: &GmmEstimate) -> bool {
    let tol = 1e-12 * a.objective.abs().max(b.objective.abs());
    if (a.objective - b.objective).abs() <= tol {
        a.theta[0] < b.theta[0]
    } else {
        a.objective < b.objective
    }
}

/// Minimizes the GMM objective for a fixed weight matrix.
///
/// `initial_hurst` (typically the scaling estimate) and `warm` seed the
/// multi-start alongside the profile-grid optimum.
pub fn fit_moments(
    config: &GmmConfig,
    empirical: &[f64],
    weight: &DMatrix<f64>,
    initial_hurst: Option<f64>,
    warm: Option<&[f64]>,
) -> Result<GmmEstimate> {
    config.validate()?;
    let lags = config.moment_lags();
    let q = lags.len();
    if empirical.len() != q || weight.nrows() != q || weight.ncols() != q {
        return Err(Error::param(format!(
            "expected {q} moments and a {q}x{q} weight, got {} and {}x{}",
            empirical.len(),
            weight.nrows(),
            weight.ncols()
        )));
    }
    let method = config.method;
    let bounds = config.bounds();
    let emp = DVector::from_column_slice(empirical);
    let f = |x: &[f64]| objective(method, x, &lags, empirical, weight);

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some((x, _)) = profile_grid(method, &lags, &emp, weight, config) {
        starts.push(x);
    }
    if let Some(h0) = initial_hurst.filter(|h| h.is_finite()) {
        let h0 = h0.clamp(0.0, config.hurst_max);
        let lam0 = starts.first().map_or(0.1, |x| x[1]);
        if let Some((x, _)) = profile_point(method, h0, lam0, &lags, &emp, weight, config) {
            starts.push(x);
        }
    }
    if let Some(x) = warm {
        let mut x = x.to_vec();
        bounds.project(&mut x);
        starts.push(x);
    }
    if starts.is_empty() {
        return Err(Error::Numerical("no admissible starting point for the GMM objective".into()));
    }

    let run = |x0: &[f64]| -> Result<GmmEstimate> {
        let f0 = f(x0);
        if f0 == 0.0 {
            return Ok(GmmEstimate {
                theta: x0.to_vec(),
                objective: 0.0,
                converged: true,
                iterations: 0,
            });
        }
        let scale = if f0.is_finite() && f0 > 0.0 { f0 } else { 1.0 };
        let r = minimize(|x| f(x) / scale, x0, &bounds, &config.optim)?;
        Ok(GmmEstimate {
            objective: f(&r.x),
            theta: r.x,
            converged: r.converged,
            iterations: r.iterations,
        })
    };

    let mut best: Option<GmmEstimate> = None;
    let mut iterations = 0;
    let mut keep = |e: GmmEstimate, best: &mut Option<GmmEstimate>| {
        iterations += e.iterations;
        if e.objective.is_finite() && best.as_ref().map_or(true, |b| better(&e, b)) {
            *best = Some(e);
        }
    };
    for x0 in &starts {
        keep(run(x0)?, &mut best);
    }
    let offsets = [0.05, -0.05, 0.15, -0.1, 0.25];
    for k in 0..config.restarts {
        let Some(b) = best.clone() else { break };
        let h = (b.theta[0] + offsets[k % offsets.len()]).clamp(0.0, config.hurst_max);
        let lam = (b.theta[1] * if k % 2 == 0 { 1.3 } else { 0.7 }).clamp(1e-4, config.lambda2_max);
        if let Some((x0, _)) = profile_point(method, h, lam, &lags, &emp, weight, config) {
            keep(run(&x0)?, &mut best);
        }
    }
    let mut best = best.ok_or_else(|| Error::Numerical("GMM objective is not finite at any start".into()))?;
    best.iterations = iterations;
    Ok(best)
}

/// Fitted constants besides `(H, lambda^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Nuisance {
    /// `k1` is the level of the `ln M` correlogram including `-nu^2/2`.
    LnM { k1: f64, v1: f64 },
    M { k2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFit {
    pub method: GmmMethod,
    #[serde(rename = "H")]
    pub hurst: f64,
    /// `lambda^2 / (H (1 - 2H))`; absent at `H = 0`, where it is infinite.
    pub nu2: Option<f64>,
    pub lambda2: f64,
    pub nuisance: Nuisance,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub lags: Vec<usize>,
    pub hac_lag: usize,
    pub weight_updates: usize,
    pub n_obs: usize,
    /// Scaling estimate used as a start, if it could be computed.
    pub initial_hurst: Option<f64>,
    /// Seed of the simulation that produced the input, when known.
    pub seed: Option<u64>,
}

/// Residual contributions `u_{t,j} - model_j`, with `u_{t,j} = x_t x_{t+j}`
/// and `u = 0` once `t + j` runs past the end.
pub fn moment_contributions(x: &[f64], lags: &[usize], model: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, lags.len(), |t, k| {
        let j = lags[k];
        let u = if t + j < n { x[t] * x[t + j] } else { 0.0 };
        u - model[k]
    })
}

fn transformed(series: &VolSeries, method: GmmMethod) -> Result<Vec<f64>> {
    match method {
        GmmMethod::GmmLnM => centered_logs(series),
        GmmMethod::GmmM => {
            let m = crate::stats::mean(&series.values);
            if !(m > 0.0) {
                return Err(Error::Data("series mean is not positive".into()));
            }
            Ok(series.values.iter().map(|v| v / m).collect())
        }
    }
}

/// Two-step (or iterated) GMM fit of a volatility series.
pub fn fit(series: &VolSeries, config: &GmmConfig) -> Result<GmmFit> {
    config.validate()?;
    let lags = config.moment_lags();
    let max_lag = *lags.last().unwrap_or(&0);
    let n = series.len();
    if n < 2 * max_lag || n < max_lag + 2 {
        return Err(Error::InsufficientData {
            needed: (2 * max_lag).max(max_lag + 2),
            got: n,
        });
    }
    let x = transformed(series, config.method)?;
    let nf = n as f64;
    let empirical: Vec<f64> = lags
        .iter()
        .map(|&j| x.iter().zip(&x[j..]).map(|(a, b)| a * b).sum::<f64>() / nf)
        .collect();
    let hac_lag = config.hac_lag.unwrap_or_else(|| default_hac_lag(n));
    let (lo, hi) = config.scaling_range;
    let hi = hi.min(n / 4);
    let initial_hurst = if hi > lo {
        scaling_estimate_h(series, 2.0, (lo, hi)).ok().map(|s| s.h_hat)
    } else {
        None
    };

    let q = lags.len();
    let mut est = fit_moments(config, &empirical, &DMatrix::identity(q, q), initial_hurst, None)?;
    let mut iterations = est.iterations;
    for _ in 0..config.weight_updates {
        let model = model_vector(config.method, &est.theta, &lags)?;
        let u = moment_contributions(&x, &lags, &model);
        let w = newey_west_weight(&u, hac_lag)?;
        est = fit_moments(config, &empirical, &w, initial_hurst, Some(&est.theta))?;
        iterations += est.iterations;
    }

    let (hurst, lambda2) = (est.theta[0], est.theta[1]);
    let nuisance = match config.method {
        GmmMethod::GmmLnM => Nuisance::LnM {
            k1: est.theta[2],
            v1: est.theta[3],
        },
        GmmMethod::GmmM => Nuisance::M { k2: est.theta[2] },
    };
    Ok(GmmFit {
        method: config.method,
        hurst,
        nu2: (hurst >= HURST_ZERO).then(|| lambda2 / (hurst * (1.0 - 2.0 * hurst))),
        lambda2,
        nuisance,
        objective: est.objective,
        converged: est.converged,
        iterations,
        lags,
        hac_lag,
        weight_updates: config.weight_updates,
        n_obs: n,
        initial_hurst,
        seed: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{dtilde_lnm, f_of_z};

    #[test]
    fn default_lag_set() {
        assert_eq!(
            default_lags(),
            vec![1, 2, 4, 5, 8, 11, 16, 22, 32, 45, 64, 90, 128, 181, 256, 362, 512]
        );
        assert_eq!(default_hac_lag(16384), 25);
        assert_eq!(default_hac_lag(4096), 16);
    }

    #[test]
    fn lnm_model_by_hand() {
        let (h, nu2, k1, v1): (f64, f64, f64, f64) = (0.1, 1.0, 2.0, 0.1);
        let lam = h * (1.0 - 2.0 * h) * nu2;
        let theta = LnmTheta {
            hurst: h,
            lambda2: lam,
            k1: k1 - nu2 / 2.0,
            v1,
        };
        let p = 2.0 * h + 2.0;
        let hand = |n: f64| {
            -nu2 * ((n + 1.0).powf(p) + (n - 1.0).abs().powf(p) - 2.0 * n.powf(p)) / (2.0 * (p - 1.0) * p)
        };
        assert!((model_corr_lnm(&theta, 4) - (k1 + hand(4.0))).abs() < 1e-12);
        assert!((model_corr_lnm(&theta, 0) - (k1 + hand(0.0) + v1)).abs() < 1e-12);
        assert!((hand(0.0) + nu2 / ((2.0 * h + 1.0) * (2.0 * h + 2.0))).abs() < 1e-15);
        let shape = ShapeParams::new(h, lam).unwrap();
        let v0 = LnmTheta { v1: 0.0, ..theta };
        assert!((model_corr_lnm(&v0, 1) - (theta.k1 + nu2 / 2.0 + dtilde_lnm(&shape, 1).unwrap())).abs() < 1e-12);
    }

    #[test]
    fn m_model_by_hand() {
        let shape = ShapeParams::new(0.1, 0.05).unwrap();
        let t = MTheta {
            hurst: 0.1,
            lambda2: 0.05,
            k2: 3.0,
        };
        let f1 = f_of_z(&shape, 1.0).unwrap();
        assert!((model_corr_m(&t, 0).unwrap() - 3.0 * 2.0 * f1).abs() < 1e-12 * f1);
        let one = MTheta { k2: 1.0, ..t };
        assert_eq!(model_corr_m(&one, 7).unwrap(), rtilde_m(&shape, 7).unwrap());
    }

    fn tight(method: GmmMethod) -> GmmConfig {
        let mut config = GmmConfig::new(method);
        config.optim.ftol = 0.0;
        config.optim.pgtol = 1e-12;
        config.optim.max_iter = 2000;
        config
    }

    #[test]
    fn noiseless_lnm_inversion() {
        for &(h, lam, k1, v1) in &[(0.1, 0.08, -0.3, 0.02), (0.03, 0.02, 0.5, 0.0), (0.25, 0.15, 1.0, 0.1)] {
            let config = tight(GmmMethod::GmmLnM);
            let lags = config.moment_lags();
            let t = LnmTheta {
                hurst: h,
                lambda2: lam,
                k1,
                v1,
            };
            let emp: Vec<f64> = lags.iter().map(|&n| model_corr_lnm(&t, n)).collect();
            let q = lags.len();
            let est = fit_moments(&config, &emp, &DMatrix::identity(q, q), Some(0.2), None).unwrap();
            let truth = [h, lam, k1, v1];
            for (i, (a, b)) in est.theta.iter().zip(truth).enumerate() {
                let tol = if b == 0.0 { 1e-6 } else { 1e-4 * b.abs() };
                assert!((a - b).abs() <= tol, "param {i}: {a} vs {b} ({est:?})");
            }
        }
    }

    #[test]
    fn noiseless_m_inversion() {
        let config = tight(GmmMethod::GmmM);
        let lags = config.moment_lags();
        let t = MTheta {
            hurst: 0.12,
            lambda2: 0.06,
            k2: 0.8,
        };
        let emp: Vec<f64> = lags.iter().map(|&n| model_corr_m(&t, n).unwrap()).collect();
        let q = lags.len();
        let est = fit_moments(&config, &emp, &DMatrix::identity(q, q), Some(0.2), None).unwrap();
        assert!((est.theta[2] / 0.8 - 1.0).abs() < 1e-6, "{est:?}");
        assert!((est.theta[0] - 0.12).abs() < 1e-4, "{est:?}");
        assert!((est.theta[1] / 0.06 - 1.0).abs() < 1e-4, "{est:?}");
    }

    #[test]
    fn constrained_wls_respects_signs() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![3.0, 2.0, 1.0]);
        let w = DMatrix::identity(3, 3);
        let (c, _) = constrained_wls(&a, &y, &w, &[false, true]);
        assert_eq!(c[1], 0.0);
        assert!((c[0] - 2.0).abs() < 1e-12);
        let (c, f) = constrained_wls(&a, &y, &w, &[false, false]);
        assert!((c[1] + 1.0).abs() < 1e-12 && f < 1e-20);
    }

    #[test]
    fn spec_validation() {
        let mut s = GmmConfig::new(GmmMethod::GmmLnM);
        assert!(s.validate().is_ok());
        s.lags = vec![1, 1, 2];
        assert!(s.validate().is_err());
        s.lags = vec![1, 2];
        assert!(s.validate().is_err());
        let mut s = GmmConfig::new(GmmMethod::GmmM);
        s.lambda2_max = 1.0;
        assert!(s.validate().is_err());
    }
}
