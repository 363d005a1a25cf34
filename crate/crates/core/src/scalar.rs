//! Scalar abstraction for the numerical core.
//!
//! Every module downstream is generic over the floating-point type through
//! [`Real`]. `f64` is what the CLI and the verification suites run on; `f32`
//! builds of the same code are available for quick smoke tests.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, Signed, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Floating-point scalar the crate is generic over.
///
/// The bound set is what the spectral transforms (`rustfft::FftNum`) and the
/// hand-rolled eigensolvers need. Implemented by `f32` and `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Signed
    + Sum
    + Send
    + Sync
    + Debug
    + Display
    + LowerExp
    + Default
    + rustfft::FftNum
    + 'static
{
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Signed
        + Sum
        + Send
        + Sync
        + Debug
        + Display
        + LowerExp
        + Default
        + rustfft::FftNum
        + 'static
{
}

/// Complex number over the crate scalar.
pub type C<T> = Complex<T>;

/// Convert an `f64` constant into the generic scalar.
#[inline]
pub fn rl<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant must be representable in the scalar type")
}

/// Complex constant from `f64` parts.
#[inline]
pub fn cx<T: Real>(re: f64, im: f64) -> C<T> {
    Complex::new(rl(re), rl(im))
}

/// `i` as a complex scalar.
#[inline]
pub fn ci<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::one())
}
