//! Scalar abstraction: every numerical routine in this crate is generic over
//! the floating-point type through [`Real`].
//!
//! The crate root exposes `f64` aliases for the common case; `f32` is mainly
//! useful for memory-bound grid sweeps.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, Signed, ToPrimitive};

/// Floating-point scalar usable for states, operators and propagators.
///
/// The supertrait list is exactly what `rustfft::FftNum` needs plus the
/// conveniences used throughout the crate, so `Complex<R>` grids can be
/// Fourier-transformed for any `R: Real`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Signed
    + NumAssign
    + Sum<Self>
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal or random draw.
    fn of(x: f64) -> Self;

    /// Widening conversion for reporting and error messages.
    fn as_f64(self) -> f64;

    /// Tolerance for structural validation of finite-dimensional objects
    /// (norms, Hermiticity, traces).
    fn strict_tol() -> Self;

    /// Tolerance for grid-state normalization, where quadrature weights
    /// accumulate more rounding than plain vector sums.
    fn grid_tol() -> Self;
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }

    #[inline]
    fn strict_tol() -> Self {
        1e-12
    }

    #[inline]
    fn grid_tol() -> Self {
        1e-9
    }
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        f64::from(self)
    }

    #[inline]
    fn strict_tol() -> Self {
        1e-5
    }

    #[inline]
    fn grid_tol() -> Self {
        1e-4
    }
}
