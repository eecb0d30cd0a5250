//! Scalar abstraction shared by the generic numerical modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar usable by the generic geometry code: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + rustfft::FftNum
    + 'static
{
    /// Converts an `f64` literal. Panics only for values unrepresentable in `Self`,
    /// which never happens for the constants used in this crate.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Relative tolerance floor: `base` for f64, widened to a multiple of machine
    /// epsilon for lower precision types.
    #[inline]
    fn rel_tol(base: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(64.0);
        Self::lit(base).max(floor)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub(crate) fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Angle between two nonzero vectors, computed with `atan2` for accuracy near 0 and π.
pub(crate) fn angle_between<T: Real>(a: &[T], b: &[T]) -> T {
    let d = dot(a, b);
    // |a x b| generalised: sqrt(|a|^2|b|^2 - (a.b)^2) via Lagrange identity
    let mut cross2 = T::zero();
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let c = a[i] * b[j] - a[j] * b[i];
            cross2 += c * c;
        }
    }
    cross2.sqrt().atan2(d)
}
