//! Box-constrained quasi-Newton minimization.
//!
//! A projected limited-memory BFGS: the two-loop recursion acts on the
//! variables that are not held at a bound, steps are projected back onto the
//! box, and an Armijo backtracking search runs along the projected path.
//! Gradients are finite differences.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::param("bounds have mismatched dimensions"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::param("every lower bound must not exceed its upper bound"));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((xi, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.clamp(*l, *u);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((xi, l), u)| xi >= l && xi <= u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimOptions {
    pub max_iter: usize,
    /// Number of stored correction pairs.
    pub memory: usize,
    /// Stop when the relative decrease of the objective falls below this.
    pub ftol: f64,
    /// Stop when the sup-norm of the projected gradient falls below this.
    pub pgtol: f64,
    /// Relative finite-difference step.
    pub rel_step: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            memory: 10,
            ftol: 1e7 * f64::EPSILON,
            pgtol: 1e-5,
            rel_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub projected_gradient_norm: f64,
}

/// Finite-difference gradient that never leaves the box: central differences
/// in the interior, one-sided differences against a bound.
pub fn numerical_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], bounds: &Bounds, rel_step: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    let fx = f(x);
    for i in 0..x.len() {
        let h = rel_step * x[i].abs().max(1.0);
        let can_up = x[i] + h <= bounds.upper[i];
        let can_down = x[i] - h >= bounds.lower[i];
        g[i] = match (can_down, can_up) {
            (true, true) => {
                probe[i] = x[i] + h;
                let fp = f(&probe);
                probe[i] = x[i] - h;
                let fm = f(&probe);
                (fp - fm) / (2.0 * h)
            }
            (false, true) => {
                probe[i] = x[i] + h;
                (f(&probe) - fx) / h
            }
            (true, false) => {
                probe[i] = x[i] - h;
                (fx - f(&probe)) / h
            }
            (false, false) => 0.0,
        };
        probe[i] = x[i];
    }
    g
}

fn projected_gradient_norm(x: &[f64], g: &[f64], bounds: &Bounds) -> f64 {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (xi, gi))| ((xi - gi).clamp(bounds.lower[i], bounds.upper[i]) - xi).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize `f` over the box starting from `x0` (projected onto the box first).
///
/// Non-finite objective values are treated as `+inf`, so the line search backs
/// away from them.
pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], bounds: &Bounds, opts: &OptimOptions) -> Result<OptimResult> {
    let n = bounds.dim();
    if x0.len() != n {
        return Err(Error::param("starting point and bounds differ in dimension"));
    }
    let evals = std::cell::Cell::new(0usize);
    let obj = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut fx = obj(&x);
    if !fx.is_finite() {
        return Err(Error::Numerical("objective is not finite at the starting point".into()));
    }
    let mut g = numerical_gradient(&obj, &x, bounds, opts.rel_step);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if projected_gradient_norm(&x, &g, bounds) <= opts.pgtol {
            converged = true;
            break;
        }
        iterations += 1;
        // variables pinned at a bound with the gradient pushing outwards
        let free: Vec<bool> = (0..n)
            .map(|i| {
                let at_lower = x[i] <= bounds.lower[i] && g[i] > 0.0;
                let at_upper = x[i] >= bounds.upper[i] && g[i] < 0.0;
                !(at_lower || at_upper)
            })
            .collect();
        let mask = |v: &[f64]| -> Vec<f64> {
            v.iter().zip(&free).map(|(a, &fr)| if fr { *a } else { 0.0 }).collect()
        };

        let mut d = two_loop(&mask(&g), &s_hist, &y_hist, &mask);
        for v in d.iter_mut() {
            *v = -*v;
        }
        if dot(&d, &g) >= 0.0 {
            s_hist.clear();
            y_hist.clear();
            d = mask(&g).iter().map(|v| -v).collect();
        }

        let mut alpha = if s_hist.is_empty() {
            let gn = dot(&d, &d).sqrt();
            (1.0 / gn).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            bounds.project(&mut trial);
            let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &step);
            if step.iter().all(|s| *s == 0.0) {
                break;
            }
            let ft = obj(&trial);
            if ft <= fx + 1e-4 * decrease {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if s_hist.is_empty() {
                break;
            }
            s_hist.clear();
            y_hist.clear();
            continue;
        };

        let g_new = numerical_gradient(&obj, &x_new, bounds, opts.rel_step);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        let rel_decrease = (fx - f_new) / fx.abs().max(f_new.abs()).max(1.0);
        x = x_new;
        fx = f_new;
        g = g_new;
        if rel_decrease <= opts.ftol {
            converged = true;
            break;
        }
    }

    Ok(OptimResult {
        projected_gradient_norm: projected_gradient_norm(&x, &g, bounds),
        x,
        f: fx,
        iterations,
        evaluations: evals.get(),
        converged,
    })
}

fn two_loop<M: Fn(&[f64]) -> Vec<f64>>(q0: &[f64], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>], mask: &M) -> Vec<f64> {
    let mut q = q0.to_vec();
    let k = s_hist.len();
    let mut alphas = vec![0.0; k];
    let restricted: Vec<(Vec<f64>, Vec<f64>)> = s_hist
        .iter()
        .zip(y_hist)
        .map(|(s, y)| (mask(s), mask(y)))
        .collect();
    let mut rhos = vec![0.0; k];
    for i in (0..k).rev() {
        let (s, y) = &restricted[i];
        let sy = dot(s, y);
        if sy <= 0.0 {
            continue;
        }
        rhos[i] = 1.0 / sy;
        alphas[i] = rhos[i] * dot(s, &q);
        for (qj, yj) in q.iter_mut().zip(y) {
            *qj -= alphas[i] * yj;
        }
    }
    let gamma = restricted
        .last()
        .map(|(s, y)| {
            let yy = dot(y, y);
            if yy > 0.0 && dot(s, y) > 0.0 {
                dot(s, y) / yy
            } else {
                1.0
            }
        })
        .unwrap_or(1.0);
    for v in q.iter_mut() {
        *v *= gamma;
    }
    for i in 0..k {
        if rhos[i] == 0.0 {
            continue;
        }
        let (s, y) = &restricted[i];
        let beta = rhos[i] * dot(y, &q);
        for (qj, sj) in q.iter_mut().zip(s) {
            *qj += (alphas[i] - beta) * sj;
        }
    }
    q
}
