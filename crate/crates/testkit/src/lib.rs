//! Independent numerical oracles for the test suites.
//!
//! Everything here is deliberately naive: adaptive Gauss-Kronrod quadrature,
//! nested 2D quadrature and direct sums. None of it shares code with the
//! closed forms it is used to check.

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
///
/// Global bisection of the subinterval with the largest error estimate, capped
/// at a fixed number of subintervals so that it always terminates.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    const MAX_INTERVALS: usize = 20_000;
    if a == b {
        return 0.0;
    }
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    let mut total_err = e;
    while total_err > tol && parts.len() < MAX_INTERVALS {
        let idx = (0..parts.len())
            .max_by(|&i, &j| parts[i].3.partial_cmp(&parts[j].3).unwrap())
            .unwrap();
        let (lo, hi, _, err) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (l, el) = gk15(&f, lo, mid);
        let (r, er) = gk15(&f, mid, hi);
        total_err += el + er - err;
        parts.push((lo, mid, l, el));
        parts.push((mid, hi, r, er));
        if parts.len() % 64 == 0 {
            let sum: f64 = parts.iter().map(|p| p.2).sum();
            total_err = parts.iter().map(|p| p.3).sum();
            if total_err <= 16.0 * f64::EPSILON * sum.abs() {
                break;
            }
        }
    }
    parts.iter().map(|p| p.2).sum()
}

/// Integral over `[a, b]` split at every interior point of `breaks`.
pub fn integrate_split<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let pieces = (pts.len() - 1) as f64;
    pts.windows(2)
        .map(|w| integrate(&f, w[0], w[1], tol / pieces))
        .sum()
}

/// Nested quadrature of `f(u, v)` over `[u0, u1] x [v0, v1]`.
///
/// The inner integral is split at `v = u` so that kernels of `|u - v|` with a
/// cusp on the diagonal are handled, and the outer one is split at the points
/// where the diagonal enters or leaves the inner range.
pub fn integrate_2d_diag<F: Fn(f64, f64) -> f64>(
    f: F,
    (u0, u1): (f64, f64),
    (v0, v1): (f64, f64),
    tol: f64,
) -> f64 {
    let inner_tol = tol / (10.0 * (u1 - u0).abs().max(1e-300));
    let outer = |u: f64| integrate_split(|v| f(u, v), v0, v1, &[u], inner_tol);
    integrate_split(outer, u0, u1, &[v0, v1], tol)
}

/// Ordinary least-squares slope and intercept of `y` on `x`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
