//! Per-round translation between a client's real vector and the integers
//! that get encrypted, and back from an (aggregated) integer message.

use serde::{Deserialize, Serialize};

use crate::compression::{sign, srlc_beta, Phi, PhiSpec, Quantizer, RlcMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Compressor {
    /// No sketch: the quantized vector itself is aggregated.
    Identity,
    /// Quantized `Φp`; the server applies `βΦᵀ`.
    Rlc(RlcMode),
    /// Quantized `β(p)·G_S(Φp)`; `β(p)` is private, so it is folded in before
    /// quantization and the server applies `Φᵀ`.
    Srlc,
}

impl Compressor {
    pub fn uses_sketch(self) -> bool {
        self != Compressor::Identity
    }
}

pub struct RoundCodec {
    compressor: Compressor,
    phi: Option<Phi>,
    quantizer: Quantizer,
    dim: usize,
}

impl RoundCodec {
    /// `spec` is required for the sketching compressors and ignored otherwise.
    pub fn new(compressor: Compressor, spec: Option<&PhiSpec>, dim: usize, quantizer: Quantizer) -> Result<Self> {
        let phi = match (compressor.uses_sketch(), spec) {
            (false, _) => None,
            (true, Some(spec)) => {
                if spec.d != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        got: spec.d,
                    });
                }
                Some(Phi::generate(spec)?)
            }
            (true, None) => return Err(Error::InvalidParams("sketching compressor needs a PhiSpec".into())),
        };
        Ok(Self {
            compressor,
            phi,
            quantizer,
            dim,
        })
    }

    /// Length of the integer message, `s` or `d`.
    pub fn message_len(&self) -> usize {
        self.phi.as_ref().map_or(self.dim, |p| p.spec().s)
    }

    pub fn phi(&self) -> Option<&Phi> {
        self.phi.as_ref()
    }

    pub fn encode(&self, p: &[f64]) -> Result<Vec<i64>> {
        let msg = match (self.compressor, &self.phi) {
            (Compressor::Identity, _) => {
                if p.len() != self.dim {
                    return Err(Error::Dimension {
                        expected: self.dim,
                        got: p.len(),
                    });
                }
                p.to_vec()
            }
            (Compressor::Rlc(_), Some(phi)) => phi.apply(p)?,
            (Compressor::Srlc, Some(phi)) => {
                let beta = srlc_beta(p, phi.spec());
                phi.apply(p)?.into_iter().map(|u| beta * sign(u)).collect()
            }
            _ => unreachable!("constructor guarantees a matrix for sketching modes"),
        };
        Ok(self.quantizer.quantize(&msg))
    }

    /// The real vector an integer message stands for. Linear in `q`, so it
    /// maps an aggregate to the sum of the individual reconstructions.
    pub fn expand(&self, q: &[i64]) -> Result<Vec<f64>> {
        if q.len() != self.message_len() {
            return Err(Error::Dimension {
                expected: self.message_len(),
                got: q.len(),
            });
        }
        let u = self.quantizer.dequantize(q);
        match (self.compressor, &self.phi) {
            (Compressor::Identity, _) => Ok(u),
            (Compressor::Rlc(mode), Some(phi)) => {
                let beta = mode.beta(phi.spec());
                let mut out = phi.transpose_apply(&u)?;
                out.iter_mut().for_each(|v| *v *= beta);
                Ok(out)
            }
            (Compressor::Srlc, Some(phi)) => phi.transpose_apply(&u),
            _ => unreachable!("constructor guarantees a matrix for sketching modes"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compression::{rlc_operator, srlc_operator};

    #[test]
    fn matches_operators_up_to_quantization() {
        let spec = PhiSpec::with_alpha(3, 1, 10, 40, 2.0).unwrap();
        let quant = Quantizer::new(1e9, 1e3).unwrap();
        let p: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 / 5.0 - 1.0).collect();
        for (c, want) in [
            (
                Compressor::Rlc(RlcMode::Contract),
                rlc_operator(&p, &spec, RlcMode::Contract).unwrap().value,
            ),
            (
                Compressor::Rlc(RlcMode::Unbiased),
                rlc_operator(&p, &spec, RlcMode::Unbiased).unwrap().value,
            ),
            (Compressor::Srlc, srlc_operator(&p, &spec).unwrap().value),
            (Compressor::Identity, p.clone()),
        ] {
            let codec = RoundCodec::new(c, Some(&spec), 40, quant).unwrap();
            let got = codec.expand(&codec.encode(&p).unwrap()).unwrap();
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-6, "{c:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn sums_expand_to_sums() {
        let spec = PhiSpec::with_alpha(3, 2, 8, 32, 1.0).unwrap();
        let codec = RoundCodec::new(Compressor::Rlc(RlcMode::Contract), Some(&spec), 32, Quantizer::new(1e3, 1e3).unwrap()).unwrap();
        let a = codec.encode(&[0.3; 32]).unwrap();
        let b = codec.encode(&[-0.7; 32]).unwrap();
        let sum: Vec<i64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let whole = codec.expand(&sum).unwrap();
        let parts: Vec<f64> = codec.expand(&a).unwrap().iter().zip(codec.expand(&b).unwrap()).map(|(x, y)| x + y).collect();
        for (x, y) in whole.iter().zip(&parts) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(codec.message_len(), 8);
        assert!(codec.expand(&[0; 9]).is_err());
    }

    #[test]
    fn sketch_modes_need_a_spec() {
        let q = Quantizer::new(1.0, 1.0).unwrap();
        assert!(RoundCodec::new(Compressor::Srlc, None, 4, q).is_err());
        assert_eq!(RoundCodec::new(Compressor::Identity, None, 4, q).unwrap().message_len(), 4);
    }
}
