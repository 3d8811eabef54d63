use pppks::models::gamma_cdf;
use pppks::rng::stream;
use pppks::statistics::{kolmogorov_quantile, modified_ks, two_sample_ks_quantile};
use pppks::{uniformity_ks_distance, GammaParams, ModelSpec};
use rand::Rng;

#[test]
fn known_cdf_ks_upper_five_percent_point() {
    let p = GammaParams::new(2.0, 5.0).unwrap();
    let model = ModelSpec::gamma(p);
    let reps = 10_000;
    let mut t: Vec<f64> = (0..reps)
        .map(|k| {
            let d = model.sample(1000, &mut pppks::rng::substream(12, k)).unwrap();
            modified_ks(&d, |y| gamma_cdf(&p, y)).unwrap()
        })
        .collect();
    t.sort_by(f64::total_cmp);
    let q95 = t[(0.95 * reps as f64) as usize];
    // Finite-n quantile sits slightly below the asymptotic 1.3581.
    assert!((q95 - 1.358).abs() < 0.05, "empirical 95% point {q95}");
    assert!((kolmogorov_quantile(0.95).unwrap() - 1.3581).abs() < 1e-4);
}

#[test]
fn uniform_draws_fall_inside_dkw_band() {
    let mut rng = stream(3);
    let u: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
    assert!(uniformity_ks_distance(&u).unwrap() < 0.0136);
}

#[test]
fn lattice_is_nearly_uniform() {
    let v: Vec<f64> = (1..=999).map(|k| k as f64 / 1000.0).collect();
    assert!(uniformity_ks_distance(&v).unwrap() <= 2.0 / 1000.0);
}

#[test]
fn two_sample_band_scales_with_sizes() {
    let q = two_sample_ks_quantile(0.99, 5000, 5000).unwrap();
    assert!((q - 1.6276 * (2.0f64 / 5000.0).sqrt()).abs() < 1e-4);
}
