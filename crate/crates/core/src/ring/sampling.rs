use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution as _, Normal};

use super::{RingContext, RingElement};
use crate::error::{Error, Result};

/// Coefficient distributions used by the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    /// i.i.d. uniform on {-1, 0, 1}; secret keys and encryption randomness.
    Ternary,
    /// Rounded Gaussian with std-dev `sigma`, rejected outside `[-B, B]`.
    Error,
    /// i.i.d. uniform on `Z_q`.
    Uniform,
    /// i.i.d. uniform on `[-B_smg, B_smg]`.
    Smudging,
}

impl RingElement {
    pub fn sample<R: Rng + ?Sized>(
        ctx: &Arc<RingContext>,
        kind: Distribution,
        rng: &mut R,
    ) -> Result<Self> {
        let params = ctx.params();
        let n = params.n;
        let coeffs: Vec<i64> = match kind {
            Distribution::Ternary => (0..n).map(|_| rng.gen_range(-1..=1)).collect(),
            Distribution::Error => {
                let bound = params.error_bound as i64;
                if bound == 0 || params.sigma == 0.0 {
                    vec![0; n]
                } else {
                    let normal = Normal::new(0.0, params.sigma)
                        .map_err(|e| Error::InvalidParams(e.to_string()))?;
                    (0..n)
                        .map(|_| loop {
                            let x = normal.sample(rng).round() as i64;
                            if x.abs() <= bound {
                                break x;
                            }
                        })
                        .collect()
                }
            }
            Distribution::Uniform => {
                let q = params.q;
                (0..n)
                    .map(|_| super::modular::center(rng.gen_range(0..q), q))
                    .collect()
            }
            Distribution::Smudging => {
                let b = params.smudging_bound;
                if b >= params.q / 2 {
                    return Err(Error::SmudgingTooLarge { bound: b });
                }
                let b = b as i64;
                (0..n).map(|_| rng.gen_range(-b..=b)).collect()
            }
        };
        Ok(Self::from_centered_unchecked(ctx, coeffs))
    }
}
