//! Newey-West long-run covariance and the GMM weight matrix built from it.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};

/// Relative eigenvalue cutoff of the pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-10;

/// `S = G_0 + sum_{l=1}^{L} (1 - l/(L+1)) (G_l + G_l^T)` with
/// `G_l = N^{-1} sum_t r_t r_{t-l}^T`, one row of `contributions` per `t`.
///
/// Contributions are used as given, without demeaning.
pub fn long_run_covariance(contributions: &DMatrix<f64>, hac_lag: usize) -> Result<DMatrix<f64>> {
    let n = contributions.nrows();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if contributions.iter().all(|v| *v == 0.0) {
        return Err(Error::Numerical("all moment contributions are zero".into()));
    }
    if contributions.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite moment contribution".into()));
    }
    let nf = n as f64;
    let mut s = contributions.tr_mul(contributions) / nf;
    for l in 1..=hac_lag.min(n - 1) {
        let head = contributions.rows(l, n - l);
        let tail = contributions.rows(0, n - l);
        let g = head.tr_mul(&tail) / nf;
        let w = 1.0 - l as f64 / (hac_lag as f64 + 1.0);
        s += (&g + g.transpose()) * w;
    }
    Ok(s)
}

/// Moore-Penrose inverse of a symmetric matrix, dropping eigenvalues below
/// `PINV_CUTOFF` times the largest.
pub fn symmetric_pinv(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(s.clone());
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(Error::Numerical("covariance has no positive eigenvalue".into()));
    }
    let inv = eig
        .eigenvalues
        .map(|e| if e > PINV_CUTOFF * top { 1.0 / e } else { 0.0 });
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&inv) * v.transpose())
}

/// Inverse long-run covariance of the moment contributions.
pub fn newey_west_weight(contributions: &DMatrix<f64>, hac_lag: usize) -> Result<DMatrix<f64>> {
    symmetric_pinv(&long_run_covariance(contributions, hac_lag)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn scalar_constant_column() {
        let c = 2.5;
        let u = DMatrix::from_element(10, 1, c);
        let w = newey_west_weight(&u, 0).unwrap();
        assert!((w[(0, 0)] - 1.0 / (c * c)).abs() < 1e-14);
    }

    #[test]
    fn zero_lag_is_sample_second_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = DMatrix::from_fn(500, 3, |_, _| StandardNormal.sample(&mut rng));
        let w = newey_west_weight(&u, 0).unwrap();
        let s = u.tr_mul(&u) / 500.0;
        let id = &w * &s;
        assert!((id - DMatrix::identity(3, 3)).abs().max() < 1e-10);
    }

    #[test]
    fn ar1_long_run_variance() {
        let rho: f64 = 0.5;
        let n = 400_000;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut x = 0.0;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let e: f64 = StandardNormal.sample(&mut rng);
            x = rho * x + e;
            data.push(x);
        }
        let u = DMatrix::from_vec(n, 1, data);
        let s = long_run_covariance(&u, 20).unwrap()[(0, 0)];
        let sigma2 = 1.0 / (1.0 - rho * rho);
        let target = (1.0 + rho) / (1.0 - rho) * sigma2;
        assert!((s / target - 1.0).abs() < 0.1, "{s} vs {target}");
    }

    #[test]
    fn degenerate_inputs() {
        assert!(newey_west_weight(&DMatrix::zeros(10, 2), 2).is_err());
        let rank_one = DMatrix::from_fn(20, 2, |i, _| i as f64 + 1.0);
        let w = newey_west_weight(&rank_one, 0).unwrap();
        assert!(w.iter().all(|v| v.is_finite()));
    }
}
