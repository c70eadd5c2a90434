//! Traveling fronts of the Amari neural field, the adjoint geometry around them,
//! and the small-noise phase expansion of the stochastic field.
//!
//! Everything lives on a truncated uniform grid ([`model::GridSpec`]) with fields
//! continued by their boundary values.

// NaN must fail validation, so guards are written as !(x > 0.0).
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod model;
pub mod noise;
pub mod phase;
pub mod sim;
pub mod spectral;
pub mod wave;

pub use error::{Error, Result};

/// The dense kernels can return with the upper halves of the vector registers
/// dirty; every later SSE instruction (libm's `exp` among them) then pays a
/// state-transition penalty of tens of cycles. Call after dense linear algebra.
pub(crate) fn reset_vector_state() {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx") {
        // SAFETY: the feature was just detected.
        unsafe { zero_upper() }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
fn zero_upper() {
    std::arch::x86_64::_mm256_zeroupper();
}
