//! Built-in verification suite: production code against the slow oracles.

use rand::Rng;

use crate::estimation::{gamma_mle, posterior_mean};
use crate::mcmc::{run_chain, McmcSettings};
use crate::models::{gamma_cdf, Dataset, GammaParams, ModelSpec, PriorSpec};
use crate::oracle;
use crate::rng::stream;
use crate::specfun;
use crate::statistics::{modified_ks, pit_ks};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// Observed discrepancy (absolute or relative, per check).
    pub error: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.error.is_finite() && self.error <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub group: &'static str,
    pub checks: Vec<Check>,
}

impl GroupReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn worst(&self) -> Option<&Check> {
        self.checks
            .iter()
            .max_by(|a, b| (a.error / a.tolerance).total_cmp(&(b.error / b.tolerance)))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SelftestOptions {
    /// Multiplies every tolerance. Values ≤ 0 make every check fail, which
    /// exercises the failure path.
    pub tolerance_scale: f64,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions { tolerance_scale: 1.0 }
    }
}

struct Collector {
    scale: f64,
    checks: Vec<Check>,
}

impl Collector {
    fn new(scale: f64) -> Self {
        Collector {
            scale,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, name: impl Into<String>, error: f64, tolerance: f64) {
        self.checks.push(Check {
            name: name.into(),
            error,
            tolerance: tolerance * self.scale,
        });
    }

    fn finish(self, group: &'static str) -> GroupReport {
        GroupReport {
            group,
            checks: self.checks,
        }
    }
}

fn or_nan(r: crate::Result<f64>) -> f64 {
    r.unwrap_or(f64::NAN)
}

pub fn special_functions(opts: &SelftestOptions) -> GroupReport {
    let mut c = Collector::new(opts.tolerance_scale);
    let mut x = 1e-3;
    while x <= 1e6 {
        let reference = oracle::ln_gamma(x);
        let err = (or_nan(specfun::log_gamma(x)) - reference).abs() / reference.abs().max(1.0);
        c.check(format!("log_gamma({x:.3e})"), err, 1e-12);
        let err = (or_nan(specfun::digamma(x)) - oracle::digamma(x)).abs();
        c.check(format!("digamma({x:.3e})"), err, 1e-10);
        if x <= 1e4 {
            let err = (or_nan(specfun::trigamma(x)) - oracle::trigamma(x)).abs();
            c.check(format!("trigamma({x:.3e})"), err, 1e-8);
        }
        x *= 3.7;
    }
    let gamma = oracle::euler_mascheroni();
    c.check("digamma(1) = -euler_gamma", (or_nan(specfun::digamma(1.0)) + gamma).abs(), 1e-10);
    for &z in &[0.05, 0.5, 1.0, 1.7, 2.5, 3.3] {
        // P(1/2, z²) = erf(z)
        let err = (or_nan(specfun::reg_lower_incomplete_gamma(0.5, z * z)) - oracle::erf(z)).abs();
        c.check(format!("P(0.5, {:.4}) vs erf", z * z), err, 1e-12);
        let err = (or_nan(specfun::normal_cdf(z)) - oracle::normal_cdf(z)).abs();
        c.check(format!("normal_cdf({z})"), err, 1e-12);
        let err = (or_nan(specfun::normal_cdf(-z)) - oracle::normal_cdf(-z)).abs();
        c.check(format!("normal_cdf(-{z})"), err, 1e-12);
    }
    for &(a, y) in &[(1.0, 0.4), (2.0, 0.4), (3.5, 1.1), (7.0, 0.9)] {
        let beta = 5.0;
        let p = GammaParams { alpha: a, beta };
        let err = (or_nan(gamma_cdf(&p, y)) - oracle::gamma_cdf_quadrature(a, beta, y)).abs();
        c.check(format!("gamma_cdf({a}, {beta}, {y}) vs quadrature"), err, 1e-10);
    }
    c.finish("special functions")
}

pub fn mle(opts: &SelftestOptions) -> GroupReport {
    let mut c = Collector::new(opts.tolerance_scale);
    let mut rng = stream(0x5E1F_7E57);
    for k in 0..100 {
        let n = rng.gen_range(3..=20);
        let shape = rng.gen_range(0.5..5.0);
        let rate = rng.gen_range(0.5..10.0);
        let Ok(d) = ModelSpec::Gamma { alpha: shape, beta: rate }.sample(n, &mut rng) else {
            c.check(format!("dataset {k} generation"), f64::NAN, 0.0);
            continue;
        };
        let (oa, ob) = oracle::gamma_mle_grid(d.observations());
        match gamma_mle(&d) {
            Ok(p) => {
                let err = ((p.alpha - oa) / oa).abs().max(((p.beta - ob) / ob).abs());
                c.check(format!("dataset {k} (n = {n})"), err, 1e-5);
            }
            Err(_) => c.check(format!("dataset {k} (n = {n})"), f64::NAN, 1e-5),
        }
    }
    c.finish("gamma MLE vs grid search")
}

/// The fixed n = 20 dataset used by the quadrature comparison.
pub fn quadrature_dataset() -> Dataset {
    ModelSpec::Gamma { alpha: 2.0, beta: 5.0 }
        .sample(20, &mut stream(20_20))
        .expect("valid model")
}

pub fn mcmc(opts: &SelftestOptions) -> GroupReport {
    let mut c = Collector::new(opts.tolerance_scale);
    let d = quadrature_dataset();
    let pr = PriorSpec::good();
    let (qa, qb) = oracle::posterior_mean_quadrature(
        d.observations(),
        (pr.alpha_mean, pr.alpha_variance, pr.beta_shape, pr.beta_rate),
        0.05,
        15.0,
        500,
    );
    let settings = McmcSettings {
        burn_in: 5_000,
        iterations: 1_000_000,
        thin: 5,
        ..McmcSettings::default()
    };
    match run_chain(&d, &pr, &settings, &mut stream(77)).and_then(|ch| posterior_mean(&ch)) {
        Ok(m) => {
            c.check("posterior mean alpha vs quadrature", (m.alpha - qa).abs(), 0.02);
            c.check("posterior mean beta vs quadrature", (m.beta - qb).abs(), 0.02);
        }
        Err(_) => {
            c.check("posterior mean alpha vs quadrature", f64::NAN, 0.02);
            c.check("posterior mean beta vs quadrature", f64::NAN, 0.02);
        }
    }
    c.finish("MCMC vs quadrature")
}

pub fn statistics(opts: &SelftestOptions) -> GroupReport {
    let mut c = Collector::new(opts.tolerance_scale);
    let exp_cdf = |y: f64| Ok(-(-y).exp_m1());
    let single = Dataset::new(vec![2f64.ln()]).expect("positive");
    c.check("ks single point at median", (or_nan(modified_ks(&single, exp_cdf)) - 0.5).abs(), 1e-14);
    let two = Dataset::new(vec![0.5, 1.5]).expect("positive");
    // Step points: |1/2 − F(0.5)|, |F(0.5) − 0|, |1 − F(1.5)|, |F(1.5) − 1/2|.
    let f1 = 1.0 - (-0.5f64).exp();
    let f2 = 1.0 - (-1.5f64).exp();
    let expected = 2f64.sqrt() * [(0.5 - f1).abs(), f1, 1.0 - f2, (f2 - 0.5).abs()].iter().cloned().fold(0.0, f64::max);
    c.check("ks two points", (or_nan(modified_ks(&two, exp_cdf)) - expected).abs(), 1e-14);
    let u = [0.2, 0.9];
    let pit = or_nan(pit_ks(&two, |i, _| Ok(u[i])));
    c.check("pit two points", (pit - 2f64.sqrt() * 0.4).abs(), 1e-14);

    let mut rng = stream(0xC5);
    for k in 0..50 {
        let n = rng.gen_range(1..=40);
        let shape = rng.gen_range(0.5..4.0);
        let rate = rng.gen_range(0.5..6.0);
        let Ok(d) = ModelSpec::Gamma { alpha: shape, beta: rate }.sample(n, &mut rng) else {
            continue;
        };
        // Fit a slightly wrong exponential so the gap is not trivially small.
        let lambda = rate / shape * rng.gen_range(0.7..1.3);
        let fast = or_nan(modified_ks(&d, |y| Ok(-(-lambda * y).exp_m1())));
        let slow = oracle::ks_dense_grid(d.observations(), |y| -(-lambda * y).exp_m1(), 100_000);
        c.check(format!("ks vs dense grid, dataset {k}"), (fast - slow).abs(), 1e-9);
    }
    c.finish("statistic enumeration")
}

pub fn run_selftest(opts: &SelftestOptions) -> Vec<GroupReport> {
    vec![special_functions(opts), mle(opts), mcmc(opts), statistics(opts)]
}
