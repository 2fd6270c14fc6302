//! Fixed-point bridge between real-valued sketches and plaintext integers.

use serde::{Deserialize, Serialize};

use crate::bfv::aggregate_capacity;
use crate::error::{Error, Result};
use crate::ring::RingParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    pub scale: f64,
    pub clip: f64,
}

impl Quantizer {
    pub fn new(scale: f64, clip: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && clip > 0.0 && clip.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "quantizer needs positive finite scale and clip, got {scale} and {clip}"
            )));
        }
        Ok(Self { scale, clip })
    }

    /// Largest magnitude a single quantized entry can take.
    pub fn max_level(&self) -> i64 {
        (self.clip * self.scale).round() as i64
    }

    /// `N · clip · scale < p/2`, so a sum over `clients` never wraps.
    pub fn check_capacity(&self, params: &RingParams, clients: usize) -> Result<()> {
        let cap = aggregate_capacity(params, clients);
        if self.max_level() > cap {
            return Err(Error::Capacity(format!(
                "{clients} clients × clip {} × scale {} exceeds p/2 = {}",
                self.clip,
                self.scale,
                params.p / 2
            )));
        }
        Ok(())
    }

    pub fn quantize(&self, v: &[f64]) -> Vec<i64> {
        quantize(v, self.scale, self.clip)
    }

    pub fn dequantize(&self, q: &[i64]) -> Vec<f64> {
        dequantize(q, self.scale)
    }
}

/// `round(clamp(v, -clip, clip) · scale)`, halves away from zero. NaN maps to 0.
pub fn quantize(v: &[f64], scale: f64, clip: f64) -> Vec<i64> {
    v.iter()
        .map(|&x| {
            if x.is_nan() {
                0
            } else {
                (x.clamp(-clip, clip) * scale).round() as i64
            }
        })
        .collect()
}

pub fn dequantize(q: &[i64], scale: f64) -> Vec<f64> {
    q.iter().map(|&x| x as f64 / scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::Q60;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(quantize(&[0.12345], 1e3, 1e3), vec![123]);
        assert_eq!(quantize(&[1500.2], 1e3, 1e3), vec![1_000_000]);
        assert_eq!(quantize(&[-1500.2], 1e3, 1e3), vec![-1_000_000]);
        assert_eq!(quantize(&[0.0005, -0.0005, 0.0015], 1e3, 1e3), vec![1, -1, 2]);
        assert_eq!(quantize(&[f64::NAN, f64::INFINITY], 10.0, 2.0), vec![0, 20]);
        assert_eq!(dequantize(&[123, -7], 1e3), vec![0.123, -0.007]);
    }

    #[test]
    fn capacity_rule() {
        let params = RingParams::new(64, Q60, 1 << 24).unwrap();
        let q = Quantizer::new(1e3, 1e3).unwrap();
        // 2^23 = 8,388,608 > 8 · 10^6
        assert!(q.check_capacity(&params, 8).is_ok());
        assert!(matches!(q.check_capacity(&params, 9), Err(Error::Capacity(_))));
        assert!(Quantizer::new(0.0, 1.0).is_err());
        assert!(Quantizer::new(1.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_within_half_step(v in prop::collection::vec(-999.0f64..999.0, 1..50)) {
            let q = Quantizer::new(1e3, 1e3).unwrap();
            for (a, b) in v.iter().zip(q.dequantize(&q.quantize(&v))) {
                prop_assert!((a - b).abs() <= 0.5 / 1e3 + 1e-12);
            }
        }
    }
}
