//! Discrepancy statistics and Kolmogorov–Smirnov helpers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Dataset, GammaParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    ModifiedKs,
    ChiSquared,
    Score,
    PitKs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    /// Only large values indicate discrepancy.
    OneSided,
    /// Values in either tail indicate discrepancy.
    TwoSided,
}

impl StatisticKind {
    pub fn sidedness(&self) -> Sidedness {
        match self {
            StatisticKind::ChiSquared => Sidedness::TwoSided,
            _ => Sidedness::OneSided,
        }
    }

    pub fn requires_covariates(&self) -> bool {
        matches!(self, StatisticKind::Score)
    }

    pub fn label(&self) -> &'static str {
        match self {
            StatisticKind::ModifiedKs => "modified_ks",
            StatisticKind::ChiSquared => "chi_squared",
            StatisticKind::Score => "score",
            StatisticKind::PitKs => "pit_ks",
        }
    }
}

/// Drops below this are treated as rounding noise rather than a decreasing CDF.
const MONOTONE_SLACK: f64 = 1e-12;

/// max_i max(i/n − F_(i), F_(i) − (i−1)/n) over values already in ascending order.
fn sup_gap_sorted(cdf_values: &[f64]) -> f64 {
    let n = cdf_values.len() as f64;
    cdf_values
        .iter()
        .enumerate()
        .fold(0.0f64, |acc, (i, &f)| {
            let upper = (i as f64 + 1.0) / n - f;
            let lower = f - i as f64 / n;
            acc.max(upper.abs()).max(lower.abs())
        })
}

fn check_unit(v: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidCdf(format!("{what} returned {v}, outside [0, 1]")))
    }
}

/// √n sup_y |F_n(y) − F(y)| for a continuous fitted CDF `F`.
///
/// The supremum is attained at the order statistics, so only the n jump
/// points of the empirical CDF are examined.
pub fn modified_ks<F>(d: &Dataset, fitted_cdf: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut y = d.observations().to_vec();
    y.sort_by(f64::total_cmp);
    let mut values = Vec::with_capacity(y.len());
    let mut prev = 0.0;
    for &v in &y {
        let f = fitted_cdf(v)?;
        check_unit(f, "fitted CDF")?;
        if f < prev - MONOTONE_SLACK {
            return Err(Error::InvalidCdf(format!(
                "fitted CDF decreases on the sorted sample at y = {v}: {f} < {prev}"
            )));
        }
        prev = prev.max(f);
        values.push(f);
    }
    Ok((y.len() as f64).sqrt() * sup_gap_sorted(&values))
}

/// √n times the KS distance of uᵢ = Fᵢ(Yᵢ) from Uniform(0, 1).
pub fn pit_ks<F>(d: &Dataset, per_obs_cdf: F) -> Result<f64>
where
    F: Fn(usize, f64) -> Result<f64>,
{
    let mut u = Vec::with_capacity(d.n());
    for (i, &y) in d.observations().iter().enumerate() {
        let v = per_obs_cdf(i, y)?;
        check_unit(v, "per-observation CDF")?;
        u.push(v);
    }
    u.sort_by(f64::total_cmp);
    Ok((u.len() as f64).sqrt() * sup_gap_sorted(&u))
}

/// (1/n) Σ (Yᵢ − α/β)² / (α/β²)
pub fn chi_squared_stat(d: &Dataset, est: &GammaParams) -> Result<f64> {
    est.validate()?;
    let mean = est.mean();
    let var = est.variance();
    let y = d.observations();
    Ok(y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / var / y.len() as f64)
}

/// Score for θ in the gamma GLM at θ = 0: (β²/α) Σ xᵢYᵢ − β Σ xᵢ.
pub fn score_stat(d: &Dataset, x: &[f64], est: &GammaParams) -> Result<f64> {
    est.validate()?;
    let y = d.observations();
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            found: x.len(),
        });
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sx: f64 = x.iter().sum();
    Ok(est.beta * est.beta / est.alpha * sxy - est.beta * sx)
}

/// Unscaled sup-distance between the empirical CDF of `values` and Uniform(0, 1).
pub fn uniformity_ks_distance(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("uniformity distance of an empty sample".into()));
    }
    let mut v = values.to_vec();
    for &p in &v {
        check_unit(p, "uniformity sample")?;
    }
    v.sort_by(f64::total_cmp);
    Ok(sup_gap_sorted(&v))
}

/// sup_t |F_a(t) − F_b(t)| between two empirical distributions.
pub fn two_sample_ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidConfig("two-sample KS needs two nonempty samples".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidConfig("two-sample KS sample contains NaN".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Limiting CDF of √n D_n (Kolmogorov distribution).
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < 1.0 {
        // Jacobi theta form converges fast for small x.
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let s: f64 = (0..50)
            .map(|k| {
                let m = (2 * k + 1) as f64;
                (-(m * m) * c).exp()
            })
            .sum();
        (2.0 * std::f64::consts::PI).sqrt() / x * s
    } else {
        let s: f64 = (1..100)
            .map(|k| {
                let k = k as f64;
                let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * k * k * x * x).exp()
            })
            .sum();
        1.0 - 2.0 * s
    }
}

/// Inverse of [`kolmogorov_cdf`] by bisection.
pub fn kolmogorov_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("kolmogorov_quantile", p, "0 < p < 1"));
    }
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Asymptotic level-`p` quantile of the two-sample KS distance for sizes `n` and `m`
/// drawn from the same continuous law.
pub fn two_sample_ks_quantile(p: f64, n: usize, m: usize) -> Result<f64> {
    let (n, m) = (n as f64, m as f64);
    Ok(kolmogorov_quantile(p)? * ((n + m) / (n * m)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ds(v: &[f64]) -> Dataset {
        Dataset::new(v.to_vec()).unwrap()
    }

    fn exp_cdf(y: f64) -> Result<f64> {
        Ok(-(-y).exp_m1())
    }

    #[test]
    fn ks_enumerated_examples() {
        assert_abs_diff_eq!(modified_ks(&ds(&[2f64.ln()]), exp_cdf).unwrap(), 0.5, epsilon = 1e-15);
        let f = 1.0 - (-0.5f64).exp();
        let expected = 2f64.sqrt() * f;
        assert_abs_diff_eq!(modified_ks(&ds(&[0.5, 1.5]), exp_cdf).unwrap(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(expected, 0.556_45, epsilon = 1e-5);
    }

    #[test]
    fn ks_rejects_bad_cdf() {
        assert!(modified_ks(&ds(&[1.0]), |_| Ok(1.5)).is_err());
        assert!(modified_ks(&ds(&[1.0, 2.0]), |y| Ok(1.0 / y)).is_err());
    }

    #[test]
    fn pit_examples() {
        let d = ds(&[1.0]);
        assert_abs_diff_eq!(pit_ks(&d, |_, _| Ok(0.5)).unwrap(), 0.5, epsilon = 1e-15);
        let d = ds(&[1.0, 2.0]);
        let u = [0.2, 0.9];
        let v = pit_ks(&d, |i, _| Ok(u[i])).unwrap();
        assert_abs_diff_eq!(v, 2f64.sqrt() * 0.4, epsilon = 1e-15);
        assert!(pit_ks(&d, |_, _| Ok(-0.1)).is_err());
    }

    #[test]
    fn chi_squared_and_score_examples() {
        let est = GammaParams::new(2.0, 2.0).unwrap();
        assert_abs_diff_eq!(chi_squared_stat(&ds(&[1.0, 2.0]), &est).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(chi_squared_stat(&ds(&[1.0, 1.0, 1.0]), &est).unwrap(), 0.0);

        let est = GammaParams::new(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(score_stat(&ds(&[1.0, 2.0]), &[1.0, 1.0], &est).unwrap(), 1.0, epsilon = 1e-15);
        let est = GammaParams::new(3.0, 1.5).unwrap();
        let v = score_stat(&ds(&[2.0, 2.0, 2.0]), &[0.4, 1.7, 3.3], &est).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        assert_eq!(
            score_stat(&ds(&[1.0, 2.0]), &[1.0], &est),
            Err(Error::LengthMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn uniformity_distance_examples() {
        assert_eq!(uniformity_ks_distance(&[0.5]).unwrap(), 0.5);
        let lattice: Vec<f64> = (1..=999).map(|k| k as f64 / 1000.0).collect();
        assert!(uniformity_ks_distance(&lattice).unwrap() <= 2.0 / 1000.0);
        assert!(uniformity_ks_distance(&[]).is_err());
        assert!(uniformity_ks_distance(&[1.2]).is_err());
    }

    #[test]
    fn two_sample_distance_basics() {
        assert_eq!(two_sample_ks_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(two_sample_ks_distance(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(
            two_sample_ks_distance(&[1.0, 2.0, 3.0, 4.0], &[2.5]).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn kolmogorov_reference_quantiles() {
        // Classical table values.
        assert_abs_diff_eq!(kolmogorov_quantile(0.95).unwrap(), 1.3581, epsilon = 1e-4);
        assert_abs_diff_eq!(kolmogorov_quantile(0.99).unwrap(), 1.6276, epsilon = 1e-4);
        // Both branches agree at the switch point.
        let left = {
            let c = std::f64::consts::PI.powi(2) / 8.0;
            (2.0 * std::f64::consts::PI).sqrt() * (0..50).map(|k| (-((2 * k + 1) as f64).powi(2) * c).exp()).sum::<f64>()
        };
        assert_abs_diff_eq!(kolmogorov_cdf(1.0), left, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn ks_lower_bound(v in prop::collection::vec(0.001f64..20.0, 1..60)) {
            let d = ds(&v);
            let n = v.len() as f64;
            let t = modified_ks(&d, exp_cdf).unwrap();
            prop_assert!(t >= n.sqrt() / (2.0 * n) - 1e-12);
        }

        #[test]
        fn pit_reduces_to_modified_ks(v in prop::collection::vec(0.001f64..20.0, 1..60), rate in 0.1f64..5.0) {
            let d = ds(&v);
            let f = |y: f64| Ok(-(-rate * y).exp_m1());
            prop_assert_eq!(modified_ks(&d, f).unwrap(), pit_ks(&d, |_, y| f(y)).unwrap());
        }

        #[test]
        fn ks_invariant_under_monotone_transform(v in prop::collection::vec(0.001f64..20.0, 1..60)) {
            // Transform data by y ↦ y³ and the CDF argument by the inverse.
            let d = ds(&v);
            let cubed = ds(&v.iter().map(|y| y.powi(3)).collect::<Vec<_>>());
            let a = modified_ks(&d, exp_cdf).unwrap();
            let b = modified_ks(&cubed, |z| exp_cdf(z.cbrt())).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn score_permutation_invariant_in_pairs(
            pairs in prop::collection::vec((0.01f64..10.0, 0.01f64..10.0), 1..40)
                .prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle()))
        ) {
            let (a, b) = pairs;
            let est = GammaParams::new(1.3, 2.1).unwrap();
            let (ya, xa): (Vec<f64>, Vec<f64>) = a.into_iter().unzip();
            let (yb, xb): (Vec<f64>, Vec<f64>) = b.into_iter().unzip();
            let sa = score_stat(&ds(&ya), &xa, &est).unwrap();
            let sb = score_stat(&ds(&yb), &xb, &est).unwrap();
            prop_assert!((sa - sb).abs() <= 1e-9 * (1.0 + sa.abs()));
            let ca = chi_squared_stat(&ds(&ya), &est).unwrap();
            let cb = chi_squared_stat(&ds(&yb), &est).unwrap();
            prop_assert!((ca - cb).abs() <= 1e-12 * (1.0 + ca.abs()));
        }
    }
}
