//! Slow reference implementations used to verify the production code paths.
//!
//! Nothing here calls into `specfun`, `estimation` or `mcmc`; each routine
//! uses a different algorithm (plain series, Stirling with a long shift,
//! grid search, brute-force quadrature) from the code it checks.

use std::f64::consts::PI;

/// ln Γ(x) via a 30-step upward shift and the Stirling series.
pub fn ln_gamma(x: f64) -> f64 {
    let mut shift = 0.0;
    let mut z = x;
    while z < 30.0 {
        shift += z.ln();
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series - shift
}

/// Euler–Mascheroni constant from H_N − ln N with Euler–Maclaurin corrections.
pub fn euler_mascheroni() -> f64 {
    let n = 10_000.0f64;
    let harmonic: f64 = (1..=10_000).rev().map(|k| 1.0 / k as f64).sum();
    harmonic - n.ln() - 1.0 / (2.0 * n) + 1.0 / (12.0 * n * n) - 1.0 / (120.0 * n.powi(4))
}

/// ψ(x) by shifting to x + 40, asymptotic series, then downward recurrence.
pub fn digamma(x: f64) -> f64 {
    let z = x + 40.0;
    let inv2 = 1.0 / (z * z);
    let mut v = z.ln() - 0.5 / z - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0));
    for j in (0..40).rev() {
        v -= 1.0 / (x + j as f64);
    }
    v
}

/// ψ'(x) = Σ_{k≥0} 1/(x+k)², summed to K terms with an Euler–Maclaurin tail.
pub fn trigamma(x: f64) -> f64 {
    const K: usize = 100_000;
    let head: f64 = (0..K).rev().map(|k| 1.0 / (x + k as f64).powi(2)).sum();
    let z = x + K as f64;
    head + 1.0 / z + 0.5 / (z * z) + 1.0 / (6.0 * z * z * z)
}

/// erf by its Maclaurin series; cancellation limits it to about |z| ≤ 3.3.
pub fn erf(z: f64) -> f64 {
    let mut term = z;
    let mut sum = z;
    let z2 = z * z;
    let mut k = 0.0;
    while term.abs() > 1e-18 * sum.abs().max(1e-300) {
        k += 1.0;
        term *= -z2 / k;
        sum += term / (2.0 * k + 1.0);
        if k > 500.0 {
            break;
        }
    }
    2.0 / PI.sqrt() * sum
}

/// Φ(z) through the erf series, |z| ≤ 4.6.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / 2f64.sqrt()))
}

/// Composite Simpson rule on [a, b] with `intervals` (even) sub-intervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let m = intervals + intervals % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Gamma density from the oracle log-gamma.
pub fn gamma_pdf(alpha: f64, beta: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return if y == 0.0 && alpha == 1.0 { beta } else { 0.0 };
    }
    (alpha * beta.ln() - ln_gamma(alpha) + (alpha - 1.0) * y.ln() - beta * y).exp()
}

/// Gamma CDF by Simpson quadrature of the density (α ≥ 1).
pub fn gamma_cdf_quadrature(alpha: f64, beta: f64, y: f64) -> f64 {
    simpson(|t| gamma_pdf(alpha, beta, t), 0.0, y, 20_000)
}

/// Profile log-likelihood of the shape (β profiled out as α/ȳ), up to a constant.
fn profile_loglik(alpha: f64, s: f64) -> f64 {
    alpha * alpha.ln() - alpha - ln_gamma(alpha) - alpha * s
}

/// Gamma MLE by grid search over log α followed by repeated zooming until
/// the bracket is narrower than 1e-9 relative. Returns (α, β).
pub fn gamma_mle_grid(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let mean_log = y.iter().map(|v| v.ln()).sum::<f64>() / n;
    let s = mean.ln() - mean_log;

    let (mut lo, mut hi) = ((1e-4f64).ln(), (1e8f64).ln());
    const POINTS: usize = 400;
    while hi - lo > 1e-10 {
        let step = (hi - lo) / POINTS as f64;
        let best = (0..=POINTS)
            .map(|i| lo + i as f64 * step)
            .map(|t| (t, profile_loglik(t.exp(), s)))
            .fold((lo, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        lo = best.0 - 2.0 * step;
        hi = best.0 + 2.0 * step;
    }
    let alpha = (0.5 * (lo + hi)).exp();
    (alpha, alpha / mean)
}

/// Unnormalized log posterior with one density evaluation per observation.
pub fn log_posterior_naive(
    y: &[f64],
    alpha: f64,
    beta: f64,
    prior_alpha_mean: f64,
    prior_alpha_var: f64,
    prior_beta_shape: f64,
    prior_beta_rate: f64,
) -> f64 {
    let ll: f64 = y
        .iter()
        .map(|&v| alpha * beta.ln() - ln_gamma(alpha) + (alpha - 1.0) * v.ln() - beta * v)
        .sum();
    let lp_alpha = -0.5 * (alpha - prior_alpha_mean).powi(2) / prior_alpha_var;
    let lp_beta = (prior_beta_shape - 1.0) * beta.ln() - prior_beta_rate * beta;
    ll + lp_alpha + lp_beta
}

/// Posterior mean of (α, β) by 2-D trapezoid quadrature on [lo, hi]² with
/// `points` nodes per axis.
pub fn posterior_mean_quadrature(
    y: &[f64],
    prior: (f64, f64, f64, f64),
    lo: f64,
    hi: f64,
    points: usize,
) -> (f64, f64) {
    let h = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| lo + i as f64 * h).collect();
    let logs: Vec<Vec<f64>> = grid
        .iter()
        .map(|&a| {
            grid.iter()
                .map(|&b| log_posterior_naive(y, a, b, prior.0, prior.1, prior.2, prior.3))
                .collect()
        })
        .collect();
    let peak = logs
        .iter()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut za, mut zb) = (0.0, 0.0, 0.0);
    for (i, &a) in grid.iter().enumerate() {
        let wa = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
        for (j, &b) in grid.iter().enumerate() {
            let wb = if j == 0 || j == points - 1 { 0.5 } else { 1.0 };
            let w = wa * wb * (logs[i][j] - peak).exp();
            z += w;
            za += w * a;
            zb += w * b;
        }
    }
    (za / z, zb / z)
}

/// sup_y |F_n(y) − F(y)| · √n by brute force: counts the empirical CDF
/// directly on a `grid_points` grid merged with every data point and its
/// left neighbour in floating point.
pub fn ks_dense_grid<F: Fn(f64) -> f64>(y: &[f64], cdf: F, grid_points: usize) -> f64 {
    let n = y.len() as f64;
    let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut pts: Vec<f64> = (0..grid_points)
        .map(|i| lo * 0.5 + (hi * 1.5 - lo * 0.5) * i as f64 / (grid_points - 1) as f64)
        .collect();
    for &v in y {
        pts.push(v);
        pts.push(f64::from_bits(v.to_bits() - 1));
    }
    pts.sort_by(f64::total_cmp);
    // Counting via binary search over sorted data keeps this O(G log n).
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sup = pts
        .iter()
        .map(|&t| {
            let count = sorted.partition_point(|&v| v <= t) as f64;
            (count / n - cdf(t)).abs()
        })
        .fold(0.0, f64::max);
    n.sqrt() * sup
}
