//! Scalar abstraction shared by every numerical kernel in the crate.
//!
//! All field arithmetic is written against [`Real`], which is implemented for
//! `f32` and `f64`. The FFT and trigonometric-transform back ends require
//! `rustdct::DctNum`, so that bound is folded in here once.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, NumAssign};
use rustdct::DctNum;

/// Floating point type usable by the solvers.
pub trait Real:
    Float + FloatConst + NumAssign + DctNum + Sum + Default + Debug + Display + LowerExp
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("f64 literal representable")
    }

    /// Conversion from a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as num_traits::NumCast>::from(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// `|x|` without the `Float`/`Signed` method ambiguity.
    #[inline]
    fn magnitude(self) -> Self {
        Float::abs(self)
    }
}

impl<T> Real for T where
    T: Float + FloatConst + NumAssign + DctNum + Sum + Default + Debug + Display + LowerExp
{
}

/// Pairwise (cascade) summation.
///
/// On a slice whose length is a power of two and whose entries are all equal,
/// every partial sum is exact, so lattice averages of constants come out exact.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        if xs.is_empty() {
            return T::zero();
        }
        // fold in pairs so that equal leaves stay exact as well
        let mut buf = [T::zero(); LEAF];
        buf[..xs.len()].copy_from_slice(xs);
        let mut len = xs.len();
        while len > 1 {
            let half = len / 2;
            for i in 0..half {
                buf[i] = buf[2 * i] + buf[2 * i + 1];
            }
            if len % 2 == 1 {
                buf[half] = buf[len - 1];
                len = half + 1;
            } else {
                len = half;
            }
        }
        return buf[0];
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Lattice average with pairwise summation.
pub fn mean<T: Real>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    pairwise_sum(xs) / T::from_count(xs.len())
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    // chunked accumulation keeps the rounding error well below naive summation
    let mut total = T::zero();
    for (ca, cb) in a.chunks(256).zip(b.chunks(256)) {
        let mut s = T::zero();
        for (x, y) in ca.iter().zip(cb) {
            s += *x * *y;
        }
        total += s;
    }
    total
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn max_abs<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, x| m.max(x.magnitude()))
}

/// `y += alpha * x`
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_of_equal_entries_is_exact() {
        for &n in &[1usize, 4, 64, 4096, 65536] {
            let xs = vec![0.7f64; n];
            assert_eq!(mean(&xs), 0.7);
        }
        let xs = vec![0.1f32; 1024];
        assert_eq!(mean(&xs), 0.1f32);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_odd_lengths() {
        for n in [0usize, 1, 3, 33, 65, 100, 1023] {
            let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let expect = (n * n.saturating_sub(1) / 2) as f64;
            assert_eq!(pairwise_sum(&xs), expect);
        }
    }
}
