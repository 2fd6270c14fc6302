//! Monte-Carlo checks of the sketch properties and compressor contracts,
//! shared by the test suites and the `bench-compress` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::error::Result;

use super::operators::{l1, l2_sq, rlc_delta, rlc_with, srlc_delta, srlc_with, RlcMode};
use super::phi::{Phi, PhiSpec};

/// Running mean and standard error.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n.max(1) as f64
    }

    pub fn se(&self) -> f64 {
        if self.n < 2 {
            return f64::INFINITY;
        }
        let n = self.n as f64;
        let var = (self.sum_sq - self.sum * self.sum / n) / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    /// Estimate must equal the target within the slack.
    Equal,
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub side: Side,
    pub estimate: f64,
    pub target: f64,
    pub se: f64,
    pub slack_se: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, side: Side, m: &Moments, target: f64, slack_se: f64) -> Self {
        Self::from_estimate(name, side, m.mean(), m.se(), target, slack_se)
    }

    fn from_estimate(name: impl Into<String>, side: Side, estimate: f64, se: f64, target: f64, slack_se: f64) -> Self {
        let tol = slack_se * se + 1e-12 * target.abs().max(1.0);
        let passed = match side {
            Side::Equal => (estimate - target).abs() <= tol,
            Side::AtMost => estimate <= target + tol,
            Side::AtLeast => estimate >= target - tol,
        };
        Self {
            name: name.into(),
            side,
            estimate,
            target,
            se,
            slack_se,
            passed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub d: usize,
    pub s: usize,
    pub p_entry: f64,
    pub samples: u32,
    pub seed: u64,
    pub slack_se: f64,
}

impl SuiteConfig {
    pub fn new(d: usize, s: usize, p_entry: f64) -> Self {
        Self {
            d,
            s,
            p_entry,
            samples: 10_000,
            seed: 1,
            slack_se: 3.0,
        }
    }
}

fn random_vector(rng: &mut ChaCha20Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// The three sketch properties (unbiasedness per coordinate on a unit
/// vector, the second-moment bound, the ℓ1 lower bound) followed by the RLC
/// and SRLC contraction inequalities. Every check uses the same fresh
/// matrices, one per sample.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<Check>> {
    let base = PhiSpec::new(cfg.seed, 0, cfg.s, cfg.d, cfg.p_entry)?;
    let (d, alpha, r) = (cfg.d, base.alpha(), base.r());
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let g = random_vector(&mut rng, d);
    let x = random_vector(&mut rng, d);
    let ones = vec![1.0; d];
    let mut unit = vec![0.0; d];
    unit[0] = 1.0;

    let mut coord = vec![Moments::default(); d];
    let mut second = Moments::default();
    let mut l1m = Moments::default();
    let mut rlc = Moments::default();
    let mut srlc_x = Moments::default();
    let mut srlc_ones = Moments::default();

    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
    for t in 0..cfg.samples {
        let phi = Phi::generate(&base.at(t))?;
        let est = rlc_with(&phi, &unit, RlcMode::Unbiased)?.value;
        for (m, v) in coord.iter_mut().zip(&est) {
            m.push(*v);
        }
        second.push(l2_sq(&rlc_with(&phi, &g, RlcMode::Unbiased)?.value));
        l1m.push(l1(&phi.apply(&g)?));
        rlc.push(dist(&rlc_with(&phi, &x, RlcMode::Contract)?.value, &x));
        srlc_x.push(dist(&srlc_with(&phi, &x)?.value, &x));
        srlc_ones.push(dist(&srlc_with(&phi, &ones)?.value, &ones));
    }

    let k = cfg.slack_se;
    // each coordinate is tested at `k` standard errors; across many
    // coordinates the number of misses is itself held to `k` binomial
    // standard errors of its expectation, which at d = 8 allows none
    let misses = coord
        .iter()
        .zip(&unit)
        .filter(|(m, &want)| (m.mean() - want).abs() > k * m.se())
        .count();
    let miss_rate = two_sided_tail(k);
    let expected = miss_rate * d as f64;
    let spread = (expected * (1.0 - miss_rate)).sqrt();
    let allowed = (expected + k * spread).floor();
    let mut checks = vec![Check::from_estimate(
        "unbiased_coords_outside",
        Side::AtMost,
        misses as f64,
        0.0,
        allowed,
        k,
    )];
    checks.push(Check::new(
        "second_moment",
        Side::AtMost,
        &second,
        (r + 1.0 + 1.0 / alpha) * l2_sq(&g),
        k,
    ));
    checks.push(Check::new("l1_lower", Side::AtLeast, &l1m, alpha / (alpha * r + 1.0) * l1(&g), k));
    checks.push(Check::new("rlc_contract", Side::AtMost, &rlc, (1.0 - rlc_delta(&base)) * l2_sq(&x), k));
    checks.push(Check::new(
        "srlc_contract",
        Side::AtMost,
        &srlc_x,
        (1.0 - srlc_delta(&x, &base)) * l2_sq(&x),
        k,
    ));
    checks.push(Check::new(
        "srlc_contract_ones",
        Side::AtMost,
        &srlc_ones,
        (1.0 - srlc_delta(&ones, &base)) * d as f64,
        k,
    ));
    Ok(checks)
}

/// `P(|Z| > z)` for a standard normal, via the Abramowitz-Stegun 7.1.26
/// approximation of erfc (absolute error below 1.5e-7).
fn two_sided_tail(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    poly * (-x * x).exp()
}

/// Per-coordinate means of `(1/α)ΦᵀΦe₀`, for direct inspection.
pub fn unbiased_means(cfg: &SuiteConfig) -> Result<Vec<(f64, f64)>> {
    let base = PhiSpec::new(cfg.seed, 0, cfg.s, cfg.d, cfg.p_entry)?;
    let mut unit = vec![0.0; cfg.d];
    unit[0] = 1.0;
    let mut coord = vec![Moments::default(); cfg.d];
    for t in 0..cfg.samples {
        let phi = Phi::generate(&base.at(t))?;
        for (m, v) in coord.iter_mut().zip(rlc_with(&phi, &unit, RlcMode::Unbiased)?.value) {
            m.push(v);
        }
    }
    Ok(coord.iter().map(|m| (m.mean(), m.se())).collect())
}
