//! Floating-point scalar abstraction shared by the float parts of the chain.

use std::fmt::{Debug, Display};

/// Real scalar usable for chirp synthesis and slow-time analysis: `f32` or
/// `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssign
    + rustfft::FftNum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; every `Real` can represent (a rounding
    /// of) any finite `f64`.
    fn of(v: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(v).expect("finite f64 converts")
    }

    fn of_usize(v: usize) -> Self {
        <Self as num_traits::FromPrimitive>::from_usize(v).expect("usize converts")
    }

    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
