//! Sketch compressors: sparse random projections, the linear and sign
//! compressors built on them, error feedback and fixed-point quantization.

pub mod checks;
mod feedback;
mod operators;
mod phi;
mod quantize;

pub use checks::{run_suite, unbiased_means, Check, Moments, Side, SuiteConfig};
pub use feedback::{ef_step, EfOutput, ErrorFeedbackState};
pub use operators::{
    l1, l2_sq, rlc_delta, rlc_operator, rlc_with, sign, srlc_beta, srlc_delta, srlc_operator, srlc_rho, srlc_with,
    CompressedUpdate, Payload, RlcMode, RlcOutput, SrlcOutput,
};
pub use phi::{phi_apply, phi_transpose_apply, Phi, PhiSpec};
pub use quantize::{dequantize, quantize, Quantizer};
