//! Closed-form kernels of the log S-fBM model.
//!
//! All the H-dependent formulas are written in terms of
//! `(y^{2H} - 1) / H`, which tends to `2 ln y` as `H -> 0`. Evaluated with
//! `expm1` this keeps every kernel accurate for small `H` and makes the switch
//! to the `H = 0` (multifractal random measure) branch at [`HURST_ZERO`]
//! continuous.

use crate::error::{Error, Result};
use crate::specfun::{gauss_abs_moment, ln_kummer_m1, ln_lower_incomplete_gamma, SpecFunResult};
use crate::stats;
use serde::{Deserialize, Serialize};

/// Hurst exponents below this value are treated as exactly zero.
pub const HURST_ZERO: f64 = 1e-10;

/// Largest admissible Hurst exponent (exclusive).
pub const HURST_MAX: f64 = 0.5;

/// Full parameter set of the log S-fBM model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub hurst: f64,
    /// Intermittency coefficient `lambda^2 = H (1 - 2H) nu^2`.
    pub lambda2: f64,
    /// Correlation length `T`, in the same unit as lags.
    pub corr_length: f64,
    /// Unit-time variance `sigma^2`.
    pub sigma2: f64,
}

impl ModelParams {
    pub fn new(hurst: f64, lambda2: f64, corr_length: f64, sigma2: f64) -> Result<Self> {
        let p = Self {
            hurst,
            lambda2,
            corr_length,
            sigma2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_hurst(self.hurst)?;
        if !(self.lambda2 > 0.0) || !self.lambda2.is_finite() {
            return Err(Error::param(format!("lambda2 = {} must be > 0", self.lambda2)));
        }
        if !(self.corr_length > 0.0) || !self.corr_length.is_finite() {
            return Err(Error::param(format!(
                "correlation length T = {} must be > 0",
                self.corr_length
            )));
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(Error::param(format!("sigma2 = {} must be > 0", self.sigma2)));
        }
        Ok(())
    }

    pub fn is_mrm(&self) -> bool {
        self.hurst < HURST_ZERO
    }

    /// `nu^2 = lambda^2 / (H (1 - 2H))`; infinite at `H = 0`.
    pub fn nu2(&self) -> f64 {
        nu2_from(self.hurst, self.lambda2)
    }

    /// `K_2 = nu^2 / 2`.
    pub fn k2(&self) -> f64 {
        0.5 * self.nu2()
    }

    /// Stationary variance of `omega`, `C_omega(0) = nu^2 T^{2H} / 2`.
    pub fn omega_variance(&self) -> f64 {
        if self.is_mrm() {
            return f64::INFINITY;
        }
        self.k2() * self.corr_length.powf(2.0 * self.hurst)
    }

    /// Mean `m` of `omega` such that `E[exp(omega)] = sigma^2`.
    pub fn log_mean(&self) -> f64 {
        self.sigma2.ln() - 0.5 * self.omega_variance()
    }

    pub fn shape(&self) -> ShapeParams {
        ShapeParams {
            hurst: self.hurst,
            lambda2: self.lambda2,
        }
    }
}

/// The two parameters that survive in the high-frequency regime, where `T`
/// and `sigma^2` only enter through multiplicative or additive constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    pub hurst: f64,
    pub lambda2: f64,
}

impl ShapeParams {
    pub fn new(hurst: f64, lambda2: f64) -> Result<Self> {
        check_hurst(hurst)?;
        if !(lambda2 >= 0.0) || !lambda2.is_finite() {
            return Err(Error::param(format!("lambda2 = {lambda2} must be >= 0")));
        }
        Ok(Self { hurst, lambda2 })
    }

    pub fn nu2(&self) -> f64 {
        nu2_from(self.hurst, self.lambda2)
    }
}

/// Ordered lags at observation scale `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagGrid {
    pub lags: Vec<f64>,
    pub delta: f64,
}

impl LagGrid {
    pub fn new(lags: Vec<f64>, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::param(format!("delta = {delta} must be > 0")));
        }
        if lags.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::param("lags must be finite and nonnegative"));
        }
        if lags.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("lags must be strictly increasing"));
        }
        Ok(Self { lags, delta })
    }

    /// Lags `floor(sqrt(2^k))` for `k = 0..count`, deduplicated, in units of `delta`.
    pub fn sqrt_dyadic(count: u32, delta: f64) -> Result<Self> {
        let mut lags: Vec<f64> = (0..count)
            .map(|k| (2f64.powi(k as i32)).sqrt().floor())
            .collect();
        lags.dedup();
        Self::new(lags.into_iter().map(|l| l * delta).collect(), delta)
    }

    /// Lags as integer multiples of `delta`.
    pub fn integer_lags(&self) -> Vec<usize> {
        self.lags.iter().map(|l| (l / self.delta).round() as usize).collect()
    }
}

fn check_hurst(h: f64) -> Result<()> {
    if !(0.0..HURST_MAX).contains(&h) {
        return Err(Error::param(format!("Hurst exponent H = {h} must lie in [0, 1/2)")));
    }
    Ok(())
}

fn nu2_from(h: f64, lambda2: f64) -> f64 {
    if h < HURST_ZERO {
        f64::INFINITY
    } else {
        lambda2 / (h * (1.0 - 2.0 * h))
    }
}

/// `(y^{2H} - 1) / H` for `y >= 0`, equal to `2 ln y` at `H = 0`.
fn pow_m1_over_h(h: f64, y: f64) -> f64 {
    if y == 0.0 {
        return if h < HURST_ZERO { f64::NEG_INFINITY } else { -1.0 / h };
    }
    let ly = y.ln();
    if h < HURST_ZERO {
        2.0 * ly
    } else {
        (2.0 * h * ly).exp_m1() / h
    }
}

/// `y^2 (y^{2H} - 1) / H`, with the `y = 0` term set to its limit 0.
fn weighted_term(h: f64, y: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        y * y * pow_m1_over_h(h, y)
    }
}

/// `sum_{k >= 2} [binom(p, 2k) / H] z^{2k-2}` with `p = 2H + 2`, for `0 <= z <= 1/2`.
///
/// Every coefficient from `k = 2` on carries the factor `p - 2 = 2H`, which is
/// divided out analytically.
fn binomial_tail_over_h(h: f64, z: f64) -> f64 {
    let p = 2.0 * h + 2.0;
    let z2 = z * z;
    let mut coef = p * (p - 1.0) * 2.0 * (p - 3.0) / 24.0;
    let mut zpow = z2;
    let mut sum = coef * zpow;
    for k in 3..400 {
        let kf = k as f64;
        coef *= (p - 2.0 * kf + 2.0) * (p - 2.0 * kf + 1.0) / ((2.0 * kf - 1.0) * (2.0 * kf));
        zpow *= z2;
        let term = coef * zpow;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// `(Q - 1) / H` where
/// `Q = [(tau+delta)^p + |tau-delta|^p - 2 tau^p] / (delta^2 p (p-1))`, `p = 2H + 2`.
///
/// `Q` is `delta^{-2}` times the double integral of `|u - v|^{2H}` over two
/// cells of width `delta` a lag `tau` apart. For `tau >= 2 delta` the binomial
/// expansion in `delta / tau` is used, otherwise the three-term form, which
/// has no cancellation at `tau = delta`.
fn smoothed_power_m1_over_h(h: f64, tau: f64, delta: f64) -> f64 {
    let p = 2.0 * h + 2.0;
    let pp1 = p * (p - 1.0);
    if tau >= 2.0 * delta {
        let z = delta / tau;
        let tau_2h = if h < HURST_ZERO { 1.0 } else { tau.powf(2.0 * h) };
        pow_m1_over_h(h, tau) + tau_2h * 2.0 * binomial_tail_over_h(h, z) / pp1
    } else {
        let s = weighted_term(h, tau + delta) + weighted_term(h, (tau - delta).abs())
            - 2.0 * weighted_term(h, tau);
        (s - delta * delta * (6.0 + 4.0 * h)) / (delta * delta * pp1)
    }
}

/// Covariance of the S-fBM, `(nu^2/2)(T^{2H} - |tau|^{2H})` for `|tau| < T`, else 0.
pub fn cov_omega(p: &ModelParams, tau: f64) -> Result<f64> {
    p.validate()?;
    if p.is_mrm() {
        return Err(Error::domain(
            "cov_omega",
            "H = 0 has no finite-variance S-fBM; use cov_omega_mrm",
        ));
    }
    let tau = tau.abs();
    if tau >= p.corr_length {
        return Ok(0.0);
    }
    let h = p.hurst;
    Ok(p.lambda2 / (2.0 * (1.0 - 2.0 * h)) * (pow_m1_over_h(h, p.corr_length) - pow_m1_over_h(h, tau)))
}

/// Covariance of the log-normal multifractal random measure regularized at scale `ell`.
pub fn cov_omega_mrm(lambda2: f64, corr_length: f64, ell: f64, tau: f64) -> Result<f64> {
    if !(ell > 0.0) {
        return Err(Error::param(format!("regularization scale ell = {ell} must be > 0")));
    }
    if !(ell < corr_length) {
        return Err(Error::param(format!(
            "regularization scale ell = {ell} must be below T = {corr_length}"
        )));
    }
    if !(lambda2 > 0.0) {
        return Err(Error::param(format!("lambda2 = {lambda2} must be > 0")));
    }
    let tau = tau.abs();
    Ok(if tau > corr_length {
        0.0
    } else if tau >= ell {
        lambda2 * (corr_length / tau).ln()
    } else {
        lambda2 * ((corr_length / ell).ln() + 1.0 - tau / ell)
    })
}

/// The scaling correction `g_H(z)` of the log-increment variance,
/// `Var[ln M(t+tau) - ln M(t)] = lambda^2 tau^{2H} g_H(delta/tau)`.
///
/// Tends to `1/(H(1-2H))` as `z -> 0` for `H > 0`.
pub fn g_h(hurst: f64, z: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::domain("g_h", format!("z = {z} must be finite and > 0")));
    }
    let lag = smoothed_power_m1_over_h(hurst, 1.0, z);
    let zero = smoothed_power_m1_over_h(hurst, 0.0, z);
    Ok((lag - zero) / (1.0 - 2.0 * hurst))
}

/// Covariance of `ln M` over cells of width `delta` a lag `tau` apart, to first
/// order in `lambda^2`.
///
/// Only defined while both cells stay within one correlation length,
/// `tau + delta <= T`.
pub fn cov_lnm(p: &ModelParams, delta: f64, tau: f64) -> Result<f64> {
    p.validate()?;
    if !(delta > 0.0) {
        return Err(Error::param(format!("delta = {delta} must be > 0")));
    }
    let tau = tau.abs();
    if tau + delta > p.corr_length {
        return Err(Error::domain(
            "cov_lnm",
            format!("tau + delta = {} exceeds T = {}", tau + delta, p.corr_length),
        ));
    }
    let h = p.hurst;
    Ok(p.lambda2 / (2.0 * (1.0 - 2.0 * h))
        * (pow_m1_over_h(h, p.corr_length) - smoothed_power_m1_over_h(h, tau, delta)))
}

/// First-order moment `E|ln M(t+tau) - ln M(t)|^q = E|N(0,1)|^q lambda^q tau^{qH} g_H(delta/tau)^{q/2}`.
pub fn m_q(p: &ModelParams, q: f64, tau: f64, delta: f64) -> Result<f64> {
    p.validate()?;
    if !(q > 0.0) || !(tau > 0.0) || !(delta > 0.0) {
        return Err(Error::param(format!(
            "m_q needs q, tau, delta > 0 (got {q}, {tau}, {delta})"
        )));
    }
    let g = g_h(p.hurst, delta / tau)?;
    Ok(gauss_abs_moment(q)
        * p.lambda2.powf(0.5 * q)
        * tau.powf(q * p.hurst)
        * g.powf(0.5 * q))
}

/// `K_2 (x^{2H} - 1)`, tending to `lambda^2 ln x` at `H = 0`.
fn k2_shift(shape: &ShapeParams, x: f64) -> f64 {
    shape.lambda2 / (2.0 * (1.0 - 2.0 * shape.hurst)) * pow_m1_over_h(shape.hurst, x)
}

/// The function `F` entering the covariance of the measure, normalized so that
///
/// `C_M(delta, tau) = sigma^4 exp(K_2 (T^{2H} - 1)) [F(tau+delta) + F(tau-delta) - 2 F(tau)]`.
///
/// With `z = K_2 x^{2H}`,
/// `F(x) = x^2 exp(-K_2 (x^{2H} - 1)) [1F1(1; 1 + 1/(2H); z) - 1F1(1; 1 + 1/H; z) / 2]`,
/// which is the second antiderivative of `exp(K_2 - K_2 |x|^{2H})` vanishing
/// at 0. At `H = 0` it reduces to `x^{2-lambda^2} / ((2-lambda^2)(1-lambda^2))`.
/// `F` is even in `x`.
pub fn f_of_z(shape: &ShapeParams, x: f64) -> Result<f64> {
    let x = x.abs();
    if x == 0.0 {
        return Ok(0.0);
    }
    let (h, l2) = (shape.hurst, shape.lambda2);
    if h < HURST_ZERO {
        if !(l2 < 1.0) {
            return Err(Error::domain(
                "f_of_z",
                format!("the H = 0 branch needs lambda2 < 1, got {l2}"),
            ));
        }
        return Ok(x.powf(2.0 - l2) / ((2.0 - l2) * (1.0 - l2)));
    }
    let k2 = l2 / (2.0 * h * (1.0 - 2.0 * h));
    let z = k2 * x.powf(2.0 * h);
    let shift = k2_shift(shape, x);
    let first = (ln_kummer_m1(1.0 + 0.5 / h, z)? - shift).exp();
    let second = (ln_kummer_m1(1.0 + 1.0 / h, z)? - shift).exp();
    Ok(x * x * (first - 0.5 * second))
}

/// [`f_of_z`] evaluated from the two lower incomplete gamma functions
///
/// `e^{K_2}/(2H) [x K_2^{-1/(2H)} gamma(1/(2H), z) - K_2^{-1/H} gamma(1/H, z)]`.
///
/// Independent of the `1F1` series and used to cross-check it; accuracy is
/// flagged when a shape parameter leaves the supported range.
pub fn f_incomplete_gamma(shape: &ShapeParams, x: f64) -> Result<SpecFunResult> {
    let x = x.abs();
    let (h, l2) = (shape.hurst, shape.lambda2);
    if x == 0.0 {
        return Ok(SpecFunResult {
            value: 0.0,
            achieved_rel_error: 0.0,
            accuracy_loss: false,
        });
    }
    if h < HURST_ZERO {
        return Ok(SpecFunResult {
            value: f_of_z(shape, x)?,
            achieved_rel_error: f64::EPSILON,
            accuracy_loss: false,
        });
    }
    if !(l2 > 0.0) {
        return Err(Error::domain("f_incomplete_gamma", "needs lambda2 > 0"));
    }
    let k2 = l2 / (2.0 * h * (1.0 - 2.0 * h));
    let z = k2 * x.powf(2.0 * h);
    let (a1, a2) = (0.5 / h, 1.0 / h);
    let g1 = ln_lower_incomplete_gamma(a1, z)?;
    let g2 = ln_lower_incomplete_gamma(a2, z)?;
    let common = k2 - (2.0 * h).ln();
    let t1 = (x.ln() - a1 * k2.ln() + g1.value + common).exp();
    let t2 = (-a2 * k2.ln() + g2.value + common).exp();
    let value = t1 - t2;
    // log-space sums of large terms lose absolute accuracy in the exponent
    let exp_err = f64::EPSILON * (a2 * k2.ln().abs() + g2.value.abs() + common.abs() + 1.0);
    let rel = ((g1.achieved_rel_error + exp_err) * t1 + (g2.achieved_rel_error + exp_err) * t2)
        / value.abs();
    Ok(SpecFunResult {
        value,
        achieved_rel_error: rel,
        accuracy_loss: g1.accuracy_loss || g2.accuracy_loss || rel > 1e-8,
    })
}

/// Small-`H` approximation of [`f_of_z`] obtained from `1F1(1; b; z) ~ 1 + z/b`:
/// `x^2 exp(-K_2 (x^{2H} - 1)) (1/2 + (3H/2) K_2 x^{2H})`.
pub fn f_small_h_approx(shape: &ShapeParams, x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        return 0.0;
    }
    let h = shape.hurst;
    // H K_2 stays finite (-> lambda^2 / 2) as H -> 0
    let hk2 = shape.lambda2 / (2.0 * (1.0 - 2.0 * h));
    let x2h = if h < HURST_ZERO { 1.0 } else { x.powf(2.0 * h) };
    x * x * (-k2_shift(shape, x)).exp() * (0.5 + 1.5 * hk2 * x2h)
}

/// `sigma^4 exp(K_2 (T^{2H} - 1))`, the prefactor of [`corr_m`]; `sigma^4 T^{lambda^2}` at `H = 0`.
pub fn corr_m_prefactor(p: &ModelParams) -> f64 {
    p.sigma2 * p.sigma2 * k2_shift(&p.shape(), p.corr_length).exp()
}

/// Second moment `E[M(t) M(t+tau)]` of the measure of cells of width `delta`.
///
/// Exact while both cells are within one correlation length; beyond `T` the
/// cells are independent and the value is `sigma^4 delta^2`.
pub fn corr_m(p: &ModelParams, delta: f64, tau: f64) -> Result<f64> {
    p.validate()?;
    if !(delta > 0.0) {
        return Err(Error::param(format!("delta = {delta} must be > 0")));
    }
    let tau = tau.abs();
    if tau > p.corr_length {
        return Ok(p.sigma2 * p.sigma2 * delta * delta);
    }
    let s = p.shape();
    let comb = f_of_z(&s, tau + delta)? + f_of_z(&s, tau - delta)? - 2.0 * f_of_z(&s, tau)?;
    Ok(corr_m_prefactor(p) * comb)
}

/// High-frequency limit of the centered `ln M` correlogram at unit cell size,
///
/// `D(n) = -nu^2 [(n+1)^{2H+2} + |n-1|^{2H+2} - 2 n^{2H+2}] / (2 (2H+1)(2H+2))`.
///
/// The constant `-nu^2/2` diverges at `H = 0`; the GMM works with
/// [`dtilde_lnm_reduced`] instead.
pub fn dtilde_lnm(shape: &ShapeParams, n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::domain("dtilde_lnm", "lag n must be >= 1"));
    }
    if shape.hurst < HURST_ZERO {
        return Err(Error::domain(
            "dtilde_lnm",
            "nu^2 is infinite at H = 0; use dtilde_lnm_reduced",
        ));
    }
    Ok(-0.5 * shape.nu2() + shape.lambda2 * dtilde_lnm_reduced(shape.hurst, n))
}

/// The lag-dependent part `d_n(H)` of [`dtilde_lnm`]:
/// `D(n) = -nu^2/2 + lambda^2 d_n(H)`.
///
/// Finite for all `H` in `[0, 1/2)`, including `n = 0`, where `d_0(0) = 3/2`.
pub fn dtilde_lnm_reduced(hurst: f64, n: u32) -> f64 {
    -smoothed_power_m1_over_h(hurst, n as f64, 1.0) / (2.0 * (1.0 - 2.0 * hurst))
}

/// Shape of the `M` correlogram at unit cell size, `F(n+1) + F(n-1) - 2 F(n)`.
pub fn rtilde_m(shape: &ShapeParams, n: u32) -> Result<f64> {
    let n = n as f64;
    Ok(f_of_z(shape, n + 1.0)? + f_of_z(shape, n - 1.0)? - 2.0 * f_of_z(shape, n)?)
}

/// Regression of `ln g_H(delta/tau)` on `ln(tau/delta)` over `taus`.
///
/// Returns `(B_H, intercept)`. The scaling estimator of `H` is then biased
/// upwards by `B_H / 2`.
pub fn scaling_bias(hurst: f64, delta: f64, taus: &[f64]) -> Result<(f64, f64)> {
    if taus.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: taus.len(),
        });
    }
    if let Some(t) = taus.iter().find(|&&t| !(t > delta)) {
        return Err(Error::param(format!("every tau must exceed delta = {delta}, got {t}")));
    }
    let x: Vec<f64> = taus.iter().map(|t| (t / delta).ln()).collect();
    let y = taus
        .iter()
        .map(|t| g_h(hurst, delta / t).map(f64::ln))
        .collect::<Result<Vec<_>>>()?;
    let fit = stats::ols(&x, &y)?;
    Ok((fit.slope, fit.intercept))
}
