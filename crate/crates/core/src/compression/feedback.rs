//! Error feedback: the residual a compressor drops is carried into the next
//! step's input.

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::phi::check_len;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorFeedbackState {
    pub e: Vec<f64>,
    pub gamma: f64,
}

/// What one step hands to the transmitter, plus the compensated input.
#[derive(Debug, Clone, PartialEq)]
pub struct EfOutput<T> {
    pub p: Vec<f64>,
    pub emitted: Vec<f64>,
    pub extra: T,
}

impl ErrorFeedbackState {
    pub fn new(d: usize, gamma: f64) -> Self {
        Self { e: vec![0.0; d], gamma }
    }

    pub fn dim(&self) -> usize {
        self.e.len()
    }

    /// `p = γg + e`.
    pub fn compensate(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_len(self.e.len(), g.len())?;
        Ok(g.iter().zip(&self.e).map(|(g, e)| self.gamma * g + e).collect())
    }

    /// `e ← p − F(p)`.
    pub fn absorb(&mut self, p: &[f64], emitted: &[f64]) -> Result<()> {
        check_len(self.e.len(), p.len())?;
        check_len(self.e.len(), emitted.len())?;
        for ((e, p), f) in self.e.iter_mut().zip(p).zip(emitted) {
            *e = p - f;
        }
        Ok(())
    }
}

/// One step with compressor `f`, which returns `F(p)` and anything else the
/// caller wants to keep (a sketch, say).
pub fn ef_step<T, F>(state: &mut ErrorFeedbackState, g: &[f64], f: F) -> Result<EfOutput<T>>
where
    F: FnOnce(&[f64]) -> Result<(Vec<f64>, T)>,
{
    let p = state.compensate(g)?;
    let (emitted, extra) = f(&p)?;
    state.absorb(&p, &emitted)?;
    Ok(EfOutput { p, emitted, extra })
}
