//! Synthetic two-Gaussian classification data and the logistic loss.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::derive_seed;

/// Row-major samples with labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub dim: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.x.chunks_exact(self.dim.max(1)).zip(self.y.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub clients: usize,
    pub samples_per_client: usize,
    pub test_samples: usize,
    pub dim: usize,
    /// `‖μ‖` in units of the noise standard deviation.
    pub separation: f64,
    pub seed: u64,
}

/// `x = y·μ + z` with `z ~ N(0, I)`, labels balanced within every split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub mean: Vec<f64>,
    pub clients: Vec<Samples>,
    pub test: Samples,
}

fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn draw(mean: &[f64], count: usize, rng: &mut ChaCha20Rng) -> Samples {
    let dim = mean.len();
    let mut x = Vec::with_capacity(count * dim);
    let mut y = Vec::with_capacity(count);
    for i in 0..count {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        x.extend(mean.iter().map(|m| label * m + gaussian(rng)));
        y.push(label);
    }
    Samples { dim, x, y }
}

impl Dataset {
    pub fn generate(cfg: &DataConfig) -> Result<Self> {
        if cfg.dim == 0 || cfg.clients == 0 || cfg.samples_per_client == 0 {
            return Err(Error::InvalidParams("dataset needs nonzero dim, clients and samples".into()));
        }
        let mut rng = ChaCha20Rng::from_seed(derive_seed(cfg.seed, "data-mean", 0, 0));
        let raw: Vec<f64> = (0..cfg.dim).map(|_| gaussian(&mut rng)).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mean: Vec<f64> = raw.iter().map(|v| v * cfg.separation / norm).collect();
        let clients = (0..cfg.clients)
            .map(|i| {
                let mut rng = ChaCha20Rng::from_seed(derive_seed(cfg.seed, "data-client", i as u64, 0));
                draw(&mean, cfg.samples_per_client, &mut rng)
            })
            .collect();
        let mut rng = ChaCha20Rng::from_seed(derive_seed(cfg.seed, "data-test", 0, 0));
        let test = draw(&mean, cfg.test_samples, &mut rng);
        Ok(Self { mean, clients, test })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log(1 + e^{-z})` without overflow.
fn softplus_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// `1 / (1 + e^{z})`.
fn sigmoid_neg(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Mean logistic loss `(1/m) Σ log(1 + exp(-y·wᵀx))`.
pub fn logistic_loss(w: &[f64], data: &Samples) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    data.rows().map(|(x, y)| softplus_neg(y * dot(w, x))).sum::<f64>() / data.len() as f64
}

/// Full-batch gradient of [`logistic_loss`].
pub fn local_gradient(w: &[f64], data: &Samples) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::InvalidParams("empty client dataset".into()));
    }
    if w.len() != data.dim {
        return Err(Error::Dimension {
            expected: data.dim,
            got: w.len(),
        });
    }
    let mut g = vec![0.0; data.dim];
    for (x, y) in data.rows() {
        let c = -y * sigmoid_neg(y * dot(w, x));
        for (gj, xj) in g.iter_mut().zip(x) {
            *gj += c * xj;
        }
    }
    let m = data.len() as f64;
    g.iter_mut().for_each(|v| *v /= m);
    Ok(g)
}

/// Fraction of samples with `sign(wᵀx) = y`, ties counted as `+1`.
pub fn accuracy(w: &[f64], data: &Samples) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let hits = data
        .rows()
        .filter(|(x, y)| (if dot(w, x) >= 0.0 { 1.0 } else { -1.0 }) == *y)
        .count();
    hits as f64 / data.len() as f64
}
