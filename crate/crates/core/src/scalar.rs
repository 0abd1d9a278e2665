//! Scalar abstraction shared by every numerical module.
//!
//! All geometry, layer-potential and tensor code is written against [`Real`],
//! so the same pipeline runs in `f64` (the default, see the aliases at the
//! crate root) or in `f32` for quick low-precision experiments.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable by the solvers.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Converts a count or index into the scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lossy conversion to `f64`, used for I/O and reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the scalar type.
    fn epsilon() -> Self;
}

impl Real for f32 {
    fn epsilon() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn epsilon() -> Self {
        f64::EPSILON
    }
}

/// Complex number over a [`Real`] scalar.
pub type Cplx<T> = Complex<T>;

#[inline]
pub(crate) fn cplx<T: Real>(re: T, im: T) -> Cplx<T> {
    Complex::new(re, im)
}

/// `e^{iθ}`.
#[inline]
pub(crate) fn cis<T: Real>(theta: T) -> Cplx<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// `|z|`, without requiring `num_traits::Float` on the scalar.
#[inline]
pub(crate) fn cabs<T: Real>(z: Cplx<T>) -> T {
    z.re.hypot(z.im)
}

/// `arg z` in `(−π, π]`.
#[inline]
pub(crate) fn carg<T: Real>(z: Cplx<T>) -> T {
    z.im.atan2(z.re)
}

/// Integer power of a complex number by repeated multiplication; exact for
/// the small exponents that occur in tensor transforms (and `z^0 = 1` even
/// for `z = 0`).
pub(crate) fn cpowi<T: Real>(z: Cplx<T>, n: usize) -> Cplx<T> {
    let mut acc = Complex::new(T::one(), T::zero());
    for _ in 0..n {
        acc *= z;
    }
    acc
}

/// Binomial coefficient as a scalar.
pub(crate) fn binomial<T: Real>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    T::lit(acc.round())
}
