//! Staggered (MAC) grid on the unit square.
//!
//! * `u` lives on vertical faces `(f h, (j + 1/2) h)`, interior faces
//!   `f = 1..n-1`, stored at `(f - 1) * n + j`.
//! * `v` lives on horizontal faces `((i + 1/2) h, g h)`, interior faces
//!   `g = 1..n-1`, stored at `i * (n - 1) + g - 1`.
//! * `p` lives at cell centres `((i + 1/2) h, (j + 1/2) h)`, stored at
//!   `i * n + j`.
//!
//! Boundary normal velocities are identically zero and not stored. The
//! tangential no-slip condition enters through odd ghost reflection.
//!
//! Velocity gradients are split by location: `d_1 u` and `d_2 v` at cell
//! centres, `d_2 u` and `d_1 v` at the `(n+1)^2` cell corners. Corners on the
//! boundary carry quadrature weight 1/2 (1/4 at the four domain corners).

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MacGrid {
    n: usize,
}

impl MacGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 {
            return Err(Error::InvalidArgument(format!("grid needs n >= 8 cells per edge, got {n}")));
        }
        Ok(MacGrid { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h<T: Real>(&self) -> T {
        T::one() / T::from_count(self.n)
    }

    pub fn nu(&self) -> usize {
        (self.n - 1) * self.n
    }

    pub fn nv(&self) -> usize {
        self.n * (self.n - 1)
    }

    pub fn np(&self) -> usize {
        self.n * self.n
    }

    pub fn ncorner(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    /// Position of `u` entry `idx`.
    pub fn u_node<T: Real>(&self, idx: usize) -> [T; 2] {
        let n = self.n;
        let (f, j) = (idx / n + 1, idx % n);
        let h = self.h::<T>();
        [T::from_count(f) * h, (T::from_count(j) + T::lit(0.5)) * h]
    }

    pub fn v_node<T: Real>(&self, idx: usize) -> [T; 2] {
        let m = self.n - 1;
        let (i, g) = (idx / m, idx % m + 1);
        let h = self.h::<T>();
        [(T::from_count(i) + T::lit(0.5)) * h, T::from_count(g) * h]
    }

    pub fn center<T: Real>(&self, idx: usize) -> [T; 2] {
        let n = self.n;
        let h = self.h::<T>();
        [
            (T::from_count(idx / n) + T::lit(0.5)) * h,
            (T::from_count(idx % n) + T::lit(0.5)) * h,
        ]
    }

    pub fn corner<T: Real>(&self, idx: usize) -> [T; 2] {
        let m = self.n + 1;
        let h = self.h::<T>();
        [T::from_count(idx / m) * h, T::from_count(idx % m) * h]
    }

    /// Quadrature weight of corner `idx`.
    pub fn corner_weight<T: Real>(&self, idx: usize) -> T {
        let m = self.n + 1;
        let (f, g) = (idx / m, idx % m);
        let half = T::lit(0.5);
        let wf = if f == 0 || f == self.n { half } else { T::one() };
        let wg = if g == 0 || g == self.n { half } else { T::one() };
        wf * wg
    }

    /// Samples a vector function at the velocity nodes.
    pub fn sample_velocity<T: Real>(&self, f: impl Fn([T; 2]) -> [T; 2]) -> (Vec<T>, Vec<T>) {
        let u = (0..self.nu()).map(|idx| f(self.u_node(idx))[0]).collect();
        let v = (0..self.nv()).map(|idx| f(self.v_node(idx))[1]).collect();
        (u, v)
    }

    /// Discrete divergence at cell centres.
    pub fn divergence<T: Real>(&self, u: &[T], v: &[T], out: &mut [T]) {
        let n = self.n;
        let inv_h = T::from_count(n);
        for i in 0..n {
            for j in 0..n {
                let ur = if i + 1 < n { u[i * n + j] } else { T::zero() };
                let ul = if i >= 1 { u[(i - 1) * n + j] } else { T::zero() };
                let vt = if j + 1 < n { v[i * (n - 1) + j] } else { T::zero() };
                let vb = if j >= 1 { v[i * (n - 1) + j - 1] } else { T::zero() };
                out[i * n + j] = (ur - ul + vt - vb) * inv_h;
            }
        }
    }

    /// Discrete gradient of a cell-centred field onto interior faces; equals
    /// minus the transpose of [`MacGrid::divergence`].
    pub fn gradient<T: Real>(&self, p: &[T], out_u: &mut [T], out_v: &mut [T]) {
        let n = self.n;
        let inv_h = T::from_count(n);
        for f in 1..n {
            for j in 0..n {
                out_u[(f - 1) * n + j] = (p[f * n + j] - p[(f - 1) * n + j]) * inv_h;
            }
        }
        for i in 0..n {
            for g in 1..n {
                out_v[i * (n - 1) + g - 1] = (p[i * n + g] - p[i * n + g - 1]) * inv_h;
            }
        }
    }

    /// Velocity gradients split by location.
    pub fn gradients_into<T: Real>(&self, u: &[T], v: &[T], g: &mut MacGradients<T>) {
        let n = self.n;
        let m = n + 1;
        let inv_h = T::from_count(n);
        let two = T::lit(2.0);
        g.resize(self);
        for i in 0..n {
            for j in 0..n {
                let ur = if i + 1 < n { u[i * n + j] } else { T::zero() };
                let ul = if i >= 1 { u[(i - 1) * n + j] } else { T::zero() };
                let vt = if j + 1 < n { v[i * (n - 1) + j] } else { T::zero() };
                let vb = if j >= 1 { v[i * (n - 1) + j - 1] } else { T::zero() };
                g.d1u[i * n + j] = (ur - ul) * inv_h;
                g.d2v[i * n + j] = (vt - vb) * inv_h;
            }
        }
        // d_2 u at corners: zero on the vertical walls, ghost reflection on the
        // horizontal ones
        for f in 0..=n {
            for gg in 0..=n {
                let val = if f == 0 || f == n {
                    T::zero()
                } else {
                    let row = (f - 1) * n;
                    if gg == 0 {
                        two * u[row]
                    } else if gg == n {
                        -two * u[row + n - 1]
                    } else {
                        u[row + gg] - u[row + gg - 1]
                    }
                };
                g.d2u[f * m + gg] = val * inv_h;
            }
        }
        for f in 0..=n {
            for gg in 0..=n {
                let val = if gg == 0 || gg == n {
                    T::zero()
                } else if f == 0 {
                    two * v[gg - 1]
                } else if f == n {
                    -two * v[(n - 1) * (n - 1) + gg - 1]
                } else {
                    v[f * (n - 1) + gg - 1] - v[(f - 1) * (n - 1) + gg - 1]
                };
                g.d1v[f * m + gg] = val * inv_h;
            }
        }
    }

    /// Adjoint of [`MacGrid::gradients_into`]: accumulates `G^T s` into the
    /// velocity arrays (which are overwritten).
    pub fn gradients_transpose<T: Real>(&self, s: &MacGradients<T>, out_u: &mut [T], out_v: &mut [T]) {
        let n = self.n;
        let m = n + 1;
        let inv_h = T::from_count(n);
        let two = T::lit(2.0);
        for f in 1..n {
            for j in 0..n {
                let centre = s.d1u[(f - 1) * n + j] - s.d1u[f * n + j];
                let below = if j == 0 { two * s.d2u[f * m] } else { s.d2u[f * m + j] };
                let above = if j + 1 == n { two * s.d2u[f * m + n] } else { s.d2u[f * m + j + 1] };
                out_u[(f - 1) * n + j] = (centre + below - above) * inv_h;
            }
        }
        for i in 0..n {
            for gg in 1..n {
                let centre = s.d2v[i * n + gg - 1] - s.d2v[i * n + gg];
                let left = if i == 0 { two * s.d1v[gg] } else { s.d1v[i * m + gg] };
                let right = if i + 1 == n { two * s.d1v[n * m + gg] } else { s.d1v[(i + 1) * m + gg] };
                out_v[i * (n - 1) + gg - 1] = (centre + left - right) * inv_h;
            }
        }
    }

    /// `h^2 sum (u^2 + v^2)`
    pub fn velocity_norm_sq<T: Real>(&self, u: &[T], v: &[T]) -> T {
        let h = self.h::<T>();
        (crate::scalar::dot(u, u) + crate::scalar::dot(v, v)) * h * h
    }

    pub fn velocity_inner<T: Real>(&self, a: (&[T], &[T]), b: (&[T], &[T])) -> T {
        let h = self.h::<T>();
        (crate::scalar::dot(a.0, b.0) + crate::scalar::dot(a.1, b.1)) * h * h
    }

    /// `||grad u||^2` with the corner quadrature weights.
    pub fn gradient_norm_sq<T: Real>(&self, u: &[T], v: &[T], scratch: &mut MacGradients<T>) -> T {
        self.gradients_into(u, v, scratch);
        let h = self.h::<T>();
        let centres = crate::scalar::dot(&scratch.d1u, &scratch.d1u) + crate::scalar::dot(&scratch.d2v, &scratch.d2v);
        let mut corners = T::zero();
        for idx in 0..self.ncorner() {
            let w = self.corner_weight::<T>(idx);
            corners += w * (scratch.d2u[idx] * scratch.d2u[idx] + scratch.d1v[idx] * scratch.d1v[idx]);
        }
        (centres + corners) * h * h
    }
}

/// Velocity gradients (or dual fluxes) in the split layout.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MacGradients<T> {
    pub d1u: Vec<T>,
    pub d2v: Vec<T>,
    pub d2u: Vec<T>,
    pub d1v: Vec<T>,
}

impl<T: Real> MacGradients<T> {
    pub fn zeros(grid: &MacGrid) -> Self {
        let mut g = MacGradients { d1u: vec![], d2v: vec![], d2u: vec![], d1v: vec![] };
        g.resize(grid);
        g
    }

    fn resize(&mut self, grid: &MacGrid) {
        self.d1u.resize(grid.np(), T::zero());
        self.d2v.resize(grid.np(), T::zero());
        self.d2u.resize(grid.ncorner(), T::zero());
        self.d1v.resize(grid.ncorner(), T::zero());
    }
}
