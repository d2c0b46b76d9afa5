//! Scalar abstraction shared by the DSP, network and loss code.
//!
//! Everything numeric in this crate is written against [`Real`], so the same
//! code runs in `f64` (gradient checks, metrics, data synthesis) and `f32`
//! (training and streaming inference).

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// floating point: f32 or f64
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + rustfft::FftNum
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Never fails for finite input.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn cast<U: Real>(self) -> U {
        U::lit(self.as_f64())
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Dot product with eight independent accumulators so the inner loop vectorises.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn energy<T: Real>(x: &[T]) -> T {
    dot(x, x)
}

pub fn cast_slice<T: Real, U: Real>(x: &[T]) -> Vec<U> {
    x.iter().map(|&v| v.cast()).collect()
}
