//! The sparse random sketching matrix, regenerated on demand from a shared
//! seed instead of being sent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seeds::derive_seed;

/// Which `s × d` matrix to build. Entries are `+1` or `-1` with probability
/// `p_entry` each and `0` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiSpec {
    pub seed: u64,
    pub t: u32,
    pub s: usize,
    pub d: usize,
    pub p_entry: f64,
}

impl PhiSpec {
    pub fn new(seed: u64, t: u32, s: usize, d: usize, p_entry: f64) -> Result<Self> {
        let spec = Self { seed, t, s, d, p_entry };
        spec.check()?;
        Ok(spec)
    }

    /// Pick `p_entry` so that each column has `alpha` nonzeros on average.
    pub fn with_alpha(seed: u64, t: u32, s: usize, d: usize, alpha: f64) -> Result<Self> {
        Self::new(seed, t, s, d, alpha / (2.0 * s as f64))
    }

    pub fn check(&self) -> Result<()> {
        if self.s == 0 || self.d == 0 || self.s > self.d {
            return Err(Error::InvalidParams(format!(
                "sketch needs 0 < s <= d, got s={} d={}",
                self.s, self.d
            )));
        }
        if !(self.p_entry > 0.0 && self.p_entry <= 0.5) {
            return Err(Error::InvalidParams(format!(
                "p_entry must lie in (0, 1/2], got {}",
                self.p_entry
            )));
        }
        Ok(())
    }

    /// Expected nonzeros per column, `2·s·p_entry`.
    pub fn alpha(&self) -> f64 {
        2.0 * self.s as f64 * self.p_entry
    }

    /// Compression ratio `d/s`.
    pub fn r(&self) -> f64 {
        self.d as f64 / self.s as f64
    }

    /// Same matrix family at another iteration.
    pub fn at(&self, t: u32) -> Self {
        Self { t, ..*self }
    }
}

/// A materialized matrix: each row lists its nonzero columns in increasing
/// order with a sign bit (`true` for `-1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Phi {
    spec: PhiSpec,
    rows: Vec<Vec<(u32, bool)>>,
}

fn row_entries(spec: &PhiSpec, key: [u8; 32], row: usize) -> Vec<(u32, bool)> {
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(row as u64);
    let d = spec.d;
    let q = 2.0 * spec.p_entry;
    if q >= 1.0 {
        // dense ±1: one bit per column
        let mut out = Vec::with_capacity(d);
        let mut bits = 0u64;
        for j in 0..d {
            if j % 64 == 0 {
                bits = rng.gen();
            }
            out.push((j as u32, bits >> (j % 64) & 1 == 1));
        }
        return out;
    }
    // geometric gaps between nonzeros
    let log_keep = (1.0 - q).ln();
    let mut out = Vec::with_capacity((q * d as f64 * 1.2) as usize + 4);
    let mut j = 0usize;
    while j < d {
        let u = 1.0 - rng.gen::<f64>();
        let gap = (u.ln() / log_keep).floor();
        if gap >= (d - j) as f64 {
            break;
        }
        j += gap as usize;
        out.push((j as u32, rng.gen::<bool>()));
        j += 1;
    }
    out
}

impl Phi {
    pub fn generate(spec: &PhiSpec) -> Result<Self> {
        spec.check()?;
        let key = derive_seed(spec.seed, "phi", spec.t as u64, 0);
        let rows = (0..spec.s).map(|i| row_entries(spec, key, i)).collect();
        Ok(Self { spec: *spec, rows })
    }

    pub fn spec(&self) -> &PhiSpec {
        &self.spec
    }

    pub fn rows(&self) -> &[Vec<(u32, bool)>] {
        &self.rows
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Dense row-major copy, for tests and small dimensions.
    pub fn to_dense(&self) -> Vec<Vec<i8>> {
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0i8; self.spec.d];
                for &(j, neg) in row {
                    dense[j as usize] = if neg { -1 } else { 1 };
                }
                dense
            })
            .collect()
    }

    /// SHA-256 over every `(row, column, sign)` triple.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for (i, row) in self.rows.iter().enumerate() {
            h.update((i as u32).to_le_bytes());
            h.update((row.len() as u32).to_le_bytes());
            for &(j, neg) in row {
                h.update(j.to_le_bytes());
                h.update([neg as u8]);
            }
        }
        h.finalize().into()
    }

    /// `Φg`.
    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_len(self.spec.d, g.len())?;
        Ok(self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&(j, neg)| if neg { -g[j as usize] } else { g[j as usize] })
                    .sum()
            })
            .collect())
    }

    /// `Φᵀu`.
    pub fn transpose_apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.spec.s, u.len())?;
        let mut out = vec![0.0; self.spec.d];
        for (row, &ui) in self.rows.iter().zip(u) {
            for &(j, neg) in row {
                out[j as usize] += if neg { -ui } else { ui };
            }
        }
        Ok(out)
    }

    /// `Φg` over the integers; exact, so sums of sketches equal sketches of sums.
    pub fn apply_int(&self, g: &[i64]) -> Result<Vec<i64>> {
        check_len(self.spec.d, g.len())?;
        Ok(self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&(j, neg)| if neg { -g[j as usize] } else { g[j as usize] })
                    .sum()
            })
            .collect())
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}

/// Regenerate `Φ` from `spec` and return `Φg`.
pub fn phi_apply(spec: &PhiSpec, g: &[f64]) -> Result<Vec<f64>> {
    Phi::generate(spec)?.apply(g)
}

/// Regenerate `Φ` from `spec` and return `Φᵀu`. Any `1/α` scaling is left to
/// the caller.
pub fn phi_transpose_apply(spec: &PhiSpec, u: &[f64]) -> Result<Vec<f64>> {
    Phi::generate(spec)?.transpose_apply(u)
}
