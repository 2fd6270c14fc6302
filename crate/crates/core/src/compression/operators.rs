//! Random linear compression and its one-bit sign variant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transport::{Reader, Writer};

use super::phi::{check_len, Phi, PhiSpec};

/// Scaling used by the linear compressor `F(x) = βΦᵀΦx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RlcMode {
    /// `β = 1/α`, the unbiased estimator.
    Unbiased,
    /// `β = 1/(α(r+1+1/α))`, which makes `F` a contraction.
    Contract,
}

impl RlcMode {
    pub fn beta(self, spec: &PhiSpec) -> f64 {
        let alpha = spec.alpha();
        match self {
            RlcMode::Unbiased => 1.0 / alpha,
            RlcMode::Contract => 1.0 / (alpha * (spec.r() + 1.0 + 1.0 / alpha)),
        }
    }
}

/// Contraction coefficient `δ = 1/(r+1+1/α)`.
pub fn rlc_delta(spec: &PhiSpec) -> f64 {
    1.0 / (spec.r() + 1.0 + 1.0 / spec.alpha())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlcOutput {
    pub value: Vec<f64>,
    pub beta: f64,
    /// Only reported in contract mode.
    pub delta: Option<f64>,
}

/// `βΦᵀΦp` against an already generated matrix.
pub fn rlc_with(phi: &Phi, p: &[f64], mode: RlcMode) -> Result<RlcOutput> {
    let spec = phi.spec();
    let beta = mode.beta(spec);
    let mut value = phi.transpose_apply(&phi.apply(p)?)?;
    value.iter_mut().for_each(|v| *v *= beta);
    Ok(RlcOutput {
        value,
        beta,
        delta: (mode == RlcMode::Contract).then(|| rlc_delta(spec)),
    })
}

pub fn rlc_operator(p: &[f64], spec: &PhiSpec, mode: RlcMode) -> Result<RlcOutput> {
    rlc_with(&Phi::generate(spec)?, p, mode)
}

/// `G_S`: `+1` for `x >= 0`, else `-1`.
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn l2_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// `β(x) = ‖x‖₁ / (d(1+α)(1+αr))`.
pub fn srlc_beta(x: &[f64], spec: &PhiSpec) -> f64 {
    let alpha = spec.alpha();
    l1(x) / (spec.d as f64 * (1.0 + alpha) * (1.0 + alpha * spec.r()))
}

/// `ρ(x) = ‖x‖₁² / (d‖x‖₂²)`, zero for the zero vector.
pub fn srlc_rho(x: &[f64]) -> f64 {
    let sq = l2_sq(x);
    if sq == 0.0 {
        return 0.0;
    }
    l1(x).powi(2) / (x.len() as f64 * sq)
}

/// `δ(x) = αρ(x) / ((1+α)(1+rα)²)`.
pub fn srlc_delta(x: &[f64], spec: &PhiSpec) -> f64 {
    let alpha = spec.alpha();
    alpha * srlc_rho(x) / ((1.0 + alpha) * (1.0 + spec.r() * alpha).powi(2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrlcOutput {
    pub value: Vec<f64>,
    /// `G_S(Φx)` as `true` for `-1`.
    pub negative: Vec<bool>,
    pub beta: f64,
    pub rho: f64,
    pub delta: f64,
}

/// `β(x)Φᵀ G_S(Φx)` against an already generated matrix.
pub fn srlc_with(phi: &Phi, x: &[f64]) -> Result<SrlcOutput> {
    let spec = phi.spec();
    check_len(spec.d, x.len())?;
    let negative: Vec<bool> = phi.apply(x)?.into_iter().map(|u| sign(u) < 0.0).collect();
    let beta = srlc_beta(x, spec);
    let scaled: Vec<f64> = negative.iter().map(|&n| if n { -beta } else { beta }).collect();
    Ok(SrlcOutput {
        value: phi.transpose_apply(&scaled)?,
        negative,
        beta,
        rho: srlc_rho(x),
        delta: srlc_delta(x, spec),
    })
}

pub fn srlc_operator(x: &[f64], spec: &PhiSpec) -> Result<SrlcOutput> {
    srlc_with(&Phi::generate(spec)?, x)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Quantized sketch, one integer per row of `Φ`.
    Rlc(Vec<i64>),
    /// One sign per row (`true` for `-1`) and `‖x‖₁` of the compensated vector.
    Srlc { negative: Vec<bool>, l1: f64 },
}

/// What a client produces for one round before encryption.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedUpdate {
    pub phi: PhiSpec,
    pub payload: Payload,
}

const TAG_RLC: u8 = 0;
const TAG_SRLC: u8 = 1;

impl CompressedUpdate {
    pub fn from_srlc(phi: PhiSpec, x: &[f64], out: &SrlcOutput) -> Self {
        Self {
            phi,
            payload: Payload::Srlc {
                negative: out.negative.clone(),
                l1: l1(x),
            },
        }
    }

    /// Compact encoding: the matrix spec, then either `s` little-endian `i64`s
    /// or `⌈s/8⌉` packed sign bytes followed by an `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u64(self.phi.seed)
            .u32(self.phi.t)
            .u32(self.phi.s as u32)
            .u32(self.phi.d as u32)
            .f64(self.phi.p_entry);
        match &self.payload {
            Payload::Rlc(v) => {
                w.u8(TAG_RLC).u32(v.len() as u32);
                for &x in v {
                    w.i64(x);
                }
            }
            Payload::Srlc { negative, l1 } => {
                let mut packed = vec![0u8; negative.len().div_ceil(8)];
                for (i, &n) in negative.iter().enumerate() {
                    packed[i / 8] |= (n as u8) << (i % 8);
                }
                w.u8(TAG_SRLC).u32(negative.len() as u32).raw(&packed).f64(*l1);
            }
        }
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let phi = PhiSpec {
            seed: r.u64()?,
            t: r.u32()?,
            s: r.u32()? as usize,
            d: r.u32()? as usize,
            p_entry: r.f64()?,
        };
        phi.check()?;
        let payload = match r.u8()? {
            TAG_RLC => {
                let n = r.count(8)?;
                Payload::Rlc((0..n).map(|_| r.i64()).collect::<Result<_>>()?)
            }
            TAG_SRLC => {
                let n = r.u32()? as usize;
                let packed = r.raw(n.div_ceil(8))?;
                let negative = (0..n).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
                let l1 = r.f64()?;
                if !(l1 >= 0.0 && l1.is_finite()) {
                    return Err(Error::Decode(format!("bad l1 scalar {l1}")));
                }
                Payload::Srlc { negative, l1 }
            }
            tag => return Err(Error::Decode(format!("unknown compression tag {tag}"))),
        };
        r.finish()?;
        let len = match &payload {
            Payload::Rlc(v) => v.len(),
            Payload::Srlc { negative, .. } => negative.len(),
        };
        check_len(phi.s, len)?;
        Ok(Self { phi, payload })
    }

    /// Server-side reconstruction of `F(x)` from this update alone.
    pub fn reconstruct(&self, rlc_beta: f64, scale: f64) -> Result<Vec<f64>> {
        let phi = Phi::generate(&self.phi)?;
        match &self.payload {
            Payload::Rlc(v) => {
                let u: Vec<f64> = v.iter().map(|&x| x as f64 * rlc_beta / scale).collect();
                phi.transpose_apply(&u)
            }
            Payload::Srlc { negative, l1 } => {
                let a = self.phi.alpha();
                let beta = l1 / (self.phi.d as f64 * (1.0 + a) * (1.0 + a * self.phi.r()));
                let u: Vec<f64> = negative.iter().map(|&n| if n { -beta } else { beta }).collect();
                phi.transpose_apply(&u)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(t: u32) -> PhiSpec {
        PhiSpec::new(11, t, 4, 8, 0.25).unwrap()
    }

    #[test]
    fn rlc_spot_values() {
        let sp = spec(0);
        assert!((rlc_delta(&sp) - 2.0 / 7.0).abs() < 1e-15);
        assert!((RlcMode::Contract.beta(&sp) - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(RlcMode::Unbiased.beta(&sp), 0.5);
        let out = rlc_operator(&[0.0; 8], &sp, RlcMode::Contract).unwrap();
        assert_eq!(out.value, vec![0.0; 8]);
        assert_eq!(out.delta, Some(rlc_delta(&sp)));
        assert_eq!(rlc_operator(&[0.0; 8], &sp, RlcMode::Unbiased).unwrap().delta, None);
    }

    #[test]
    fn srlc_spot_values() {
        let sp = spec(0);
        let ones = [1.0; 8];
        assert!((srlc_beta(&ones, &sp) - 1.0 / 15.0).abs() < 1e-15);
        assert!((srlc_rho(&ones) - 1.0).abs() < 1e-15);
        assert!((srlc_delta(&ones, &sp) - 2.0 / 75.0).abs() < 1e-15);
    }

    #[test]
    fn srlc_of_zero_is_zero() {
        let out = srlc_operator(&[0.0; 8], &spec(3)).unwrap();
        assert_eq!(out.beta, 0.0);
        assert!(out.value.iter().all(|&v| v == 0.0));
        // Φ·0 = 0 maps to +1 everywhere
        assert!(out.negative.iter().all(|&n| !n));
    }

    #[test]
    fn sign_of_zero_is_plus_one() {
        assert_eq!(sign(0.0), 1.0);
        assert_eq!(sign(-0.0), 1.0);
        assert_eq!(sign(-1e-300), -1.0);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(rlc_operator(&[1.0; 7], &spec(0), RlcMode::Contract).is_err());
        assert!(srlc_operator(&[1.0; 9], &spec(0)).is_err());
    }

    #[test]
    fn wire_round_trip() {
        let sp = PhiSpec::new(5, 2, 13, 40, 0.1).unwrap();
        let x: Vec<f64> = (0..40).map(|i| (i as f64 - 17.5) / 3.0).collect();
        let out = srlc_operator(&x, &sp).unwrap();
        let up = CompressedUpdate::from_srlc(sp, &x, &out);
        let bytes = up.to_bytes();
        // 28 spec bytes, tag, count, 2 sign bytes, l1
        assert_eq!(bytes.len(), 28 + 1 + 4 + 2 + 8);
        let back = CompressedUpdate::from_bytes(&bytes).unwrap();
        assert_eq!(back, up);
        let rec = back.reconstruct(0.0, 1.0).unwrap();
        for (a, b) in rec.iter().zip(&out.value) {
            assert!((a - b).abs() < 1e-12);
        }

        let rlc = CompressedUpdate {
            phi: sp,
            payload: Payload::Rlc((0..13).map(|i| i * 1000 - 6000).collect()),
        };
        assert_eq!(CompressedUpdate::from_bytes(&rlc.to_bytes()).unwrap(), rlc);
        let mut bad = rlc.to_bytes();
        bad.push(0);
        assert!(CompressedUpdate::from_bytes(&bad).is_err());
        assert!(CompressedUpdate::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
