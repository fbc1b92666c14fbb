//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating point type the crate computes in: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only for values the type cannot
    /// represent at all, which never happens for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn from_isize_lossy(n: isize) -> Self {
        Self::from_isize(n).expect("isize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Natural log of the largest finite value; `exp` overflows above this.
    #[inline]
    fn max_exp_arg() -> Self {
        Self::max_value().ln()
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Cplx<T> = Complex<T>;

#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

/// `exp(z)` for complex `z` without going through polar form twice.
#[inline]
pub(crate) fn cexp<T: Real>(z: Complex<T>) -> Complex<T> {
    let m = z.re.exp();
    Complex::new(m * z.im.cos(), m * z.im.sin())
}

/// Unit phase `exp(i theta)`.
#[inline]
pub(crate) fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Ordinary least squares fit `y ~ c0 + c1 * x`; returns `(c0, c1, sse)`.
pub(crate) fn linear_fit<T: Real>(x: &[T], y: &[T]) -> (T, T, T) {
    let n = T::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        sxx = sxx + (a - mx) * (a - mx);
        sxy = sxy + (a - mx) * (b - my);
    }
    let slope = if sxx > T::zero() { sxy / sxx } else { T::zero() };
    let icpt = my - slope * mx;
    let sse = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let r = b - icpt - slope * a;
            r * r
        })
        .sum();
    (icpt, slope, sse)
}

/// Composite Simpson rule on uniformly spaced samples. Falls back to a 3/8
/// panel at the end when the number of intervals is odd, and to the
/// trapezoid rule for fewer than three samples.
pub(crate) fn simpson<T: Real>(values: &[Complex<T>], dx: T) -> Complex<T> {
    let n = values.len();
    let zero = Complex::new(T::zero(), T::zero());
    match n {
        0 | 1 => zero,
        2 => (values[0] + values[1]) * (dx / lit(2.0)),
        3 => (values[0] + values[1] * lit::<T>(4.0) + values[2]) * (dx / lit(3.0)),
        _ => {
            let intervals = n - 1;
            let (even_end, tail) = if intervals.is_multiple_of(2) {
                (n - 1, false)
            } else {
                (n - 4, true)
            };
            let mut acc = zero;
            let mut i = 0;
            while i + 2 <= even_end {
                acc = acc + (values[i] + values[i + 1] * lit::<T>(4.0) + values[i + 2]);
                i += 2;
            }
            acc = acc * (dx / lit(3.0));
            if tail {
                let k = n - 4;
                acc = acc
                    + (values[k]
                        + values[k + 1] * lit::<T>(3.0)
                        + values[k + 2] * lit::<T>(3.0)
                        + values[k + 3])
                        * (dx * lit(3.0) / lit(8.0));
            }
            acc
        }
    }
}
