//! Empirical statistics of a [`VolSeries`]: correlograms, log-increment
//! moments and the scaling-regression estimate of `H`.
//!
//! Correlograms divide by the series length `N` at every lag, not `N - k`.

use crate::error::{Error, Result};
use crate::simulate::VolSeries;
use crate::stats;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelogramKind {
    /// Uncentered second moment of `M`.
    RawM,
    /// Autocovariance of `ln M` around its sample mean.
    CenteredLnM,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlogram {
    pub kind: CorrelogramKind,
    pub delta: f64,
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub count: usize,
}

impl Correlogram {
    /// Value at lag `n`, if that lag was computed.
    pub fn at(&self, n: usize) -> Option<f64> {
        self.lags.iter().position(|&l| l == n).map(|i| self.values[i])
    }
}

fn check_lags(n: usize, lags: &[usize]) -> Result<()> {
    let max = lags.iter().copied().max().unwrap_or(0);
    if n < max + 2 {
        return Err(Error::InsufficientData {
            needed: max + 2,
            got: n,
        });
    }
    Ok(())
}

fn lagged_products(x: &[f64], lags: &[usize]) -> Vec<f64> {
    let n = x.len() as f64;
    lags.iter()
        .map(|&k| x.iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / n)
        .collect()
}

/// Logs of the series values, centered on their sample mean.
pub fn centered_logs(series: &VolSeries) -> Result<Vec<f64>> {
    if let Some(i) = series.values.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NonPositive {
            index: i,
            value: series.values[i],
        });
    }
    let logs: Vec<f64> = series.values.iter().map(|v| v.ln()).collect();
    let mu = stats::mean(&logs);
    Ok(logs.into_iter().map(|l| l - mu).collect())
}

/// `N^{-1} sum_j M_j M_{j+k}` at the requested lags.
pub fn correlogram_m_at(series: &VolSeries, lags: &[usize]) -> Result<Correlogram> {
    check_lags(series.len(), lags)?;
    Ok(Correlogram {
        kind: CorrelogramKind::RawM,
        delta: series.delta,
        lags: lags.to_vec(),
        values: lagged_products(&series.values, lags),
        count: series.len(),
    })
}

pub fn correlogram_m(series: &VolSeries, max_lag: usize) -> Result<Correlogram> {
    correlogram_m_at(series, &(0..=max_lag).collect::<Vec<_>>())
}

/// `N^{-1} sum_j (ln M_j - mu)(ln M_{j+k} - mu)` at the requested lags.
pub fn correlogram_lnm_at(series: &VolSeries, lags: &[usize]) -> Result<Correlogram> {
    check_lags(series.len(), lags)?;
    let x = centered_logs(series)?;
    Ok(Correlogram {
        kind: CorrelogramKind::CenteredLnM,
        delta: series.delta,
        lags: lags.to_vec(),
        values: lagged_products(&x, lags),
        count: series.len(),
    })
}

pub fn correlogram_lnm(series: &VolSeries, max_lag: usize) -> Result<Correlogram> {
    correlogram_lnm_at(series, &(0..=max_lag).collect::<Vec<_>>())
}

/// Mean of `|ln M(t + k delta) - ln M(t)|^q` over all valid `t`, for each lag `k`.
pub fn log_increment_moments(series: &VolSeries, q: f64, lags: &[usize]) -> Result<Vec<f64>> {
    if !(q > 0.0) {
        return Err(Error::param(format!("moment order q = {q} must be > 0")));
    }
    if let Some(&k) = lags.iter().find(|&&k| k == 0) {
        return Err(Error::param(format!("lag {k} must be >= 1")));
    }
    check_lags(series.len(), lags)?;
    let x = centered_logs(series)?;
    Ok(lags
        .iter()
        .map(|&k| {
            let s: f64 = x.iter().zip(&x[k..]).map(|(a, b)| (b - a).abs().powf(q)).sum();
            s / (x.len() - k) as f64
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub q: f64,
    pub taus: Vec<f64>,
    pub m_hat: Vec<f64>,
    pub h_hat: f64,
    pub r2: f64,
}

/// Regression of `ln m` on `ln tau`, slope divided by `q`.
pub fn scaling_fit(q: f64, taus: &[f64], m: &[f64]) -> Result<ScalingFit> {
    if taus.len() != m.len() {
        return Err(Error::param("taus and moments differ in length"));
    }
    if let Some(v) = m.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Numerical(format!("moment {v} is not positive; cannot take logs")));
    }
    let x: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = m.iter().map(|v| v.ln()).collect();
    let fit = stats::ols(&x, &y)?;
    Ok(ScalingFit {
        q,
        taus: taus.to_vec(),
        m_hat: m.to_vec(),
        h_hat: fit.slope / q,
        r2: fit.r2,
    })
}

/// About `points` integer lags spread geometrically over `[lo, hi]`, deduplicated.
pub fn geometric_lags(lo: usize, hi: usize, points: usize) -> Result<Vec<usize>> {
    if lo < 1 || hi <= lo || points < 2 {
        return Err(Error::param(format!(
            "need 1 <= lo < hi and at least 2 points, got [{lo}, {hi}] with {points}"
        )));
    }
    let r = (hi as f64 / lo as f64).ln() / (points - 1) as f64;
    let mut lags: Vec<usize> = (0..points)
        .map(|i| (lo as f64 * (r * i as f64).exp()).round() as usize)
        .collect();
    lags.dedup();
    Ok(lags)
}

/// Scaling estimate of `H` over lags `tau_range` (in cells, inclusive).
///
/// The estimate is biased upwards by `B_H / 2` (see
/// [`crate::kernels::scaling_bias`]); it is meant as a starting point.
pub fn scaling_estimate_h(series: &VolSeries, q: f64, tau_range: (usize, usize)) -> Result<ScalingFit> {
    let (lo, hi) = tau_range;
    let lags = geometric_lags(lo, hi, 24)?;
    if lags.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: lags.len(),
        });
    }
    let m = log_increment_moments(series, q, &lags)?;
    let taus: Vec<f64> = lags.iter().map(|&k| k as f64 * series.delta).collect();
    scaling_fit(q, &taus, &m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{m_q, scaling_bias, ModelParams};
    use crate::simulate::SeriesMeta;

    fn series(values: Vec<f64>) -> VolSeries {
        VolSeries::new(
            1.0,
            values,
            SeriesMeta::External {
                source: "test".into(),
            },
        )
        .unwrap()
    }

    #[test]
    fn raw_correlogram_by_hand() {
        let c = correlogram_m(&series(vec![1.0, 2.0, 3.0]), 1).unwrap();
        assert!((c.values[1] - 8.0 / 3.0).abs() < 1e-15);
        assert!((c.values[0] - 14.0 / 3.0).abs() < 1e-15);
        let k = 3;
        let c = correlogram_m(&series(vec![2.5; 10]), k).unwrap();
        assert!((c.values[k] - 6.25 * 7.0 / 10.0).abs() < 1e-14);
        assert!(correlogram_m(&series(vec![1.0, 2.0, 3.0]), 2).is_err());
    }

    #[test]
    fn centered_correlogram_by_hand() {
        let e = std::f64::consts::E;
        let c = correlogram_lnm(&series(vec![e, e * e, e * e * e]), 1).unwrap();
        assert!(c.values[1].abs() < 1e-15);
        assert!((c.values[0] - 2.0 / 3.0).abs() < 1e-15);
        let c = correlogram_lnm(&series(vec![4.0; 8]), 3).unwrap();
        assert!(c.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn scaling_properties() {
        let v: Vec<f64> = (0..200).map(|i| 1.0 + 0.5 * ((i as f64) * 0.37).sin().abs()).collect();
        let s = series(v.clone());
        let scaled = s.scaled(7.5).unwrap();
        let a = correlogram_lnm(&s, 10).unwrap();
        let b = correlogram_lnm(&scaled, 10).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-13);
        }
        let a = correlogram_m(&s, 10).unwrap();
        let b = correlogram_m(&scaled, 10).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((y / x - 56.25).abs() < 1e-12);
        }
        assert_eq!(a.at(4), Some(a.values[4]));
        assert_eq!(a.at(11), None);
    }

    #[test]
    fn increments_of_a_constant_vanish() {
        let m = log_increment_moments(&series(vec![3.0; 50]), 2.0, &[1, 5, 10]).unwrap();
        assert!(m.iter().all(|v| *v == 0.0));
        assert!(log_increment_moments(&series(vec![3.0; 50]), 2.0, &[0]).is_err());
    }

    #[test]
    fn exact_moments_reproduce_the_bias() {
        let p = ModelParams::new(0.1, 0.05, 1e6, 1.0).unwrap();
        let taus: Vec<f64> = geometric_lags(10, 500, 24).unwrap().iter().map(|&k| k as f64).collect();
        let m: Vec<f64> = taus.iter().map(|&t| m_q(&p, 2.0, t, 1.0).unwrap()).collect();
        let fit = scaling_fit(2.0, &taus, &m).unwrap();
        let (b, _) = scaling_bias(0.1, 1.0, &taus).unwrap();
        assert!((fit.h_hat - (0.1 + b / 2.0)).abs() < 1e-6, "{} vs {}", fit.h_hat, 0.1 + b / 2.0);
    }

    #[test]
    fn lag_grid() {
        let l = geometric_lags(10, 500, 24).unwrap();
        assert_eq!(l[0], 10);
        assert_eq!(*l.last().unwrap(), 500);
        assert!(l.windows(2).all(|w| w[1] > w[0]));
        assert!(geometric_lags(5, 5, 10).is_err());
    }
}
