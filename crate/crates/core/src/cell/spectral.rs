//! Fourier collocation on the periodic cell lattice.
//!
//! Fields are stored row-major as `f[p1 * n + p2]`. Wavenumbers are `2 pi m`
//! with the Nyquist mode's derivative set to zero, so spectral differentiation
//! is a real skew-symmetric operator.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

pub struct Spectral<T: Real> {
    n: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    wavenumbers: Vec<T>,
}

impl<T: Real> Clone for Spectral<T> {
    fn clone(&self) -> Self {
        Spectral {
            n: self.n,
            forward: Arc::clone(&self.forward),
            inverse: Arc::clone(&self.inverse),
            wavenumbers: self.wavenumbers.clone(),
        }
    }
}

impl<T: Real> Spectral<T> {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let wavenumbers = (0..n)
            .map(|m| {
                let signed = if 2 * m < n {
                    m as f64
                } else if 2 * m == n {
                    0.0
                } else {
                    m as f64 - n as f64
                };
                T::lit(std::f64::consts::TAU * signed)
            })
            .collect();
        Spectral { n, forward, inverse, wavenumbers }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Wavevector of the mode at `(m1, m2)`.
    #[inline]
    pub fn wavevector(&self, m1: usize, m2: usize) -> (T, T) {
        (self.wavenumbers[m1], self.wavenumbers[m2])
    }

    fn transform_2d(&self, buf: &mut [Complex<T>], plan: &Arc<dyn Fft<T>>) {
        let n = self.n;
        for row in buf.chunks_exact_mut(n) {
            plan.process(row);
        }
        let mut col = vec![Complex::new(T::zero(), T::zero()); n];
        for p2 in 0..n {
            for p1 in 0..n {
                col[p1] = buf[p1 * n + p2];
            }
            plan.process(&mut col);
            for p1 in 0..n {
                buf[p1 * n + p2] = col[p1];
            }
        }
    }

    /// Unnormalized forward transform of a real field.
    pub fn forward(&self, f: &[T]) -> Vec<Complex<T>> {
        debug_assert_eq!(f.len(), self.len());
        let mut buf: Vec<Complex<T>> = f.iter().map(|&x| Complex::new(x, T::zero())).collect();
        self.transform_2d(&mut buf, &self.forward);
        buf
    }

    /// Inverse transform, normalized, keeping the real part.
    pub fn inverse_real(&self, mut buf: Vec<Complex<T>>) -> Vec<T> {
        self.transform_2d(&mut buf, &self.inverse);
        let scale = T::one() / T::from_count(self.len());
        buf.into_iter().map(|c| c.re * scale).collect()
    }

    /// Spectral derivative along `dir` (0 for `y1`, 1 for `y2`).
    pub fn derivative(&self, f: &[T], dir: usize) -> Vec<T> {
        let mut hat = self.forward(f);
        self.derivative_hat(&mut hat, dir);
        self.inverse_real(hat)
    }

    /// Multiplies a spectrum by `i kappa_dir` in place.
    pub fn derivative_hat(&self, hat: &mut [Complex<T>], dir: usize) {
        let n = self.n;
        for m1 in 0..n {
            for m2 in 0..n {
                let (k1, k2) = self.wavevector(m1, m2);
                let k = if dir == 0 { k1 } else { k2 };
                let c = hat[m1 * n + m2];
                hat[m1 * n + m2] = Complex::new(-k * c.im, k * c.re);
            }
        }
    }

    pub fn gradient(&self, f: &[T]) -> [Vec<T>; 2] {
        let hat = self.forward(f);
        let mut h1 = hat.clone();
        let mut h2 = hat;
        self.derivative_hat(&mut h1, 0);
        self.derivative_hat(&mut h2, 1);
        [self.inverse_real(h1), self.inverse_real(h2)]
    }

    pub fn divergence(&self, v: [&[T]; 2]) -> Vec<T> {
        let mut h1 = self.forward(v[0]);
        let mut h2 = self.forward(v[1]);
        self.derivative_hat(&mut h1, 0);
        self.derivative_hat(&mut h2, 1);
        for (a, b) in h1.iter_mut().zip(&h2) {
            *a += *b;
        }
        self.inverse_real(h1)
    }

    /// Applies a per-mode 2x2 real symmetric multiplier to a vector field.
    /// `m(k1, k2)` returns `[m11, m12, m22]`.
    pub fn vector_multiplier<F>(&self, v: [&[T]; 2], m: F) -> [Vec<T>; 2]
    where
        F: Fn(T, T) -> [T; 3],
    {
        let n = self.n;
        let mut h1 = self.forward(v[0]);
        let mut h2 = self.forward(v[1]);
        for m1 in 0..n {
            for m2 in 0..n {
                let idx = m1 * n + m2;
                let (k1, k2) = self.wavevector(m1, m2);
                let [a, b, c] = m(k1, k2);
                let (x, y) = (h1[idx], h2[idx]);
                h1[idx] = x * a + y * b;
                h2[idx] = x * b + y * c;
            }
        }
        [self.inverse_real(h1), self.inverse_real(h2)]
    }

    /// Orthogonal projection onto discretely divergence-free fields with no
    /// content in the null modes of the spectral gradient (the mean and the
    /// Nyquist corner modes).
    pub fn leray_project(&self, v: [&[T]; 2]) -> [Vec<T>; 2] {
        self.vector_multiplier(v, leray_symbol)
    }
}

/// Fourier symbol of the Leray projector, `I - k k^T / |k|^2`, and zero on
/// modes with vanishing wavevector.
#[inline]
pub fn leray_symbol<T: Real>(k1: T, k2: T) -> [T; 3] {
    let k_sq = k1 * k1 + k2 * k2;
    if k_sq == T::zero() {
        return [T::zero(); 3];
    }
    [T::one() - k1 * k1 / k_sq, -k1 * k2 / k_sq, T::one() - k2 * k2 / k_sq]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice(n: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(n * n);
        for p1 in 0..n {
            for p2 in 0..n {
                out.push(f(-0.5 + p1 as f64 / n as f64, -0.5 + p2 as f64 / n as f64));
            }
        }
        out
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn derivative_of_trig_polynomial_is_exact() {
        let n = 16;
        let s = Spectral::<f64>::new(n);
        let tau = std::f64::consts::TAU;
        let f = lattice(n, |y1, y2| (tau * y1).sin() * (2.0 * tau * y2).cos());
        let d1 = s.derivative(&f, 0);
        let d2 = s.derivative(&f, 1);
        let e1 = lattice(n, |y1, y2| tau * (tau * y1).cos() * (2.0 * tau * y2).cos());
        let e2 = lattice(n, |y1, y2| -2.0 * tau * (tau * y1).sin() * (2.0 * tau * y2).sin());
        assert!(max_diff(&d1, &e1) < 1e-12);
        assert!(max_diff(&d2, &e2) < 1e-12);
    }

    #[test]
    fn nyquist_mode_has_zero_derivative() {
        let n = 8;
        let s = Spectral::<f64>::new(n);
        let f: Vec<f64> = (0..n * n).map(|idx| if (idx / n) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(s.derivative(&f, 0).iter().all(|v| v.abs() < 1e-13));
    }
}
