//! Fast diagonal solvers for the constant-coefficient parts of the staggered
//! operators, used as preconditioners.
//!
//! Each velocity component couples a Dirichlet direction on face nodes
//! (DST-I) with a direction on cell-centred nodes reflected oddly at the wall
//! (DST-II). The pressure Laplacian is Neumann in both directions (DCT-II).
//! In all three cases the 1D second difference has eigenvalues
//! `(2 - 2 cos theta_m) / h^2`.

use std::sync::Arc;

use rustdct::{DctPlanner, Dst1, TransformType2And3};

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum AxisKind {
    /// Homogeneous Dirichlet on nodes `1..n-1`.
    Faces,
    /// Odd reflection about walls half a cell away.
    CentresDirichlet,
    /// Even reflection (Neumann).
    CentresNeumann,
}

#[derive(Clone)]
enum Plan<T: Real> {
    Sine1(Arc<dyn Dst1<T>>),
    Sine2(Arc<dyn TransformType2And3<T>>),
    Cosine2(Arc<dyn TransformType2And3<T>>),
}

impl<T: Real> Plan<T> {
    fn scratch_len(&self) -> usize {
        match self {
            Plan::Sine1(p) => p.get_scratch_len(),
            Plan::Sine2(p) | Plan::Cosine2(p) => p.get_scratch_len(),
        }
    }

    // the DST-I kernel reads scratch it has not written, so it is cleared on
    // every call
    fn forward(&self, buf: &mut [T], scratch: &mut [T]) {
        match self {
            Plan::Sine1(p) => {
                scratch.iter_mut().for_each(|s| *s = T::zero());
                p.process_dst1_with_scratch(buf, scratch)
            }
            Plan::Sine2(p) => p.process_dst2_with_scratch(buf, scratch),
            Plan::Cosine2(p) => p.process_dct2_with_scratch(buf, scratch),
        }
    }

    fn inverse(&self, buf: &mut [T], scratch: &mut [T]) {
        match self {
            Plan::Sine1(p) => {
                scratch.iter_mut().for_each(|s| *s = T::zero());
                p.process_dst1_with_scratch(buf, scratch)
            }
            Plan::Sine2(p) => p.process_dst3_with_scratch(buf, scratch),
            Plan::Cosine2(p) => p.process_dct3_with_scratch(buf, scratch),
        }
    }
}

#[derive(Clone)]
struct Axis<T: Real> {
    len: usize,
    plan: Plan<T>,
    /// Eigenvalues of the 1D negative second difference, `h^2` included.
    eig: Vec<T>,
}

impl<T: Real> Axis<T> {
    fn new(planner: &mut DctPlanner<T>, kind: AxisKind, n: usize) -> Self {
        let (len, plan, first_mode) = match kind {
            AxisKind::Faces => (n - 1, Plan::Sine1(planner.plan_dst1(n - 1)), 1),
            AxisKind::CentresDirichlet => (n, Plan::Sine2(planner.plan_dst2(n)), 1),
            AxisKind::CentresNeumann => (n, Plan::Cosine2(planner.plan_dct2(n)), 0),
        };
        let inv_h2 = (n * n) as f64;
        let eig = (0..len)
            .map(|k| {
                let theta = std::f64::consts::PI * (k + first_mode) as f64 / n as f64;
                T::lit((2.0 - 2.0 * theta.cos()) * inv_h2)
            })
            .collect();
        Axis { len, plan, eig }
    }

    /// `inverse(forward(x)) = c x`; returns `c`, measured rather than assumed.
    fn round_trip_scale(&self) -> T {
        let mut buf = vec![T::zero(); self.len];
        buf[0] = T::one();
        let mut scratch = vec![T::zero(); self.plan.scratch_len()];
        self.plan.forward(&mut buf, &mut scratch);
        self.plan.inverse(&mut buf, &mut scratch);
        buf[0]
    }
}

/// Diagonalized solver on a `rows x cols` tensor-product lattice, storage
/// `r * cols + c`, with `r` the `x1` direction.
#[derive(Clone)]
pub struct FastSolver<T: Real> {
    x: Axis<T>,
    y: Axis<T>,
    norm: T,
    /// Mode multipliers in transposed order, normalization folded in.
    symbol: Vec<T>,
    /// `(sigma, cx, cy)` the symbol was built for by [`Self::solve_shifted`].
    shift: Option<[T; 3]>,
    work: Vec<T>,
    work_t: Vec<T>,
    // rustdct expects scratch of exactly the planned length
    scratch_x: Vec<T>,
    scratch_y: Vec<T>,
}

impl<T: Real> FastSolver<T> {
    fn new(n: usize, kx: AxisKind, ky: AxisKind) -> Self {
        let mut planner = DctPlanner::new();
        let x = Axis::new(&mut planner, kx, n);
        let y = Axis::new(&mut planner, ky, n);
        let norm = T::one() / (x.round_trip_scale() * y.round_trip_scale());
        let len = x.len * y.len;
        FastSolver {
            symbol: vec![T::zero(); len],
            shift: None,
            work: vec![T::zero(); len],
            work_t: vec![T::zero(); len],
            scratch_x: vec![T::zero(); x.plan.scratch_len()],
            scratch_y: vec![T::zero(); y.plan.scratch_len()],
            x,
            y,
            norm,
        }
    }

    /// Solver layout for the `u` component of a [`super::MacGrid`] of size `n`.
    pub fn velocity_u(n: usize) -> Self {
        Self::new(n, AxisKind::Faces, AxisKind::CentresDirichlet)
    }

    pub fn velocity_v(n: usize) -> Self {
        Self::new(n, AxisKind::CentresDirichlet, AxisKind::Faces)
    }

    pub fn pressure(n: usize) -> Self {
        Self::new(n, AxisKind::CentresNeumann, AxisKind::CentresNeumann)
    }

    pub fn len(&self) -> usize {
        self.x.len * self.y.len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stores the multiplier `m(lambda_x, lambda_y)` for later [`Self::apply`].
    pub fn set_symbol(&mut self, m: impl Fn(T, T) -> T) {
        let rows = self.x.len;
        for (c, line) in self.symbol.chunks_exact_mut(rows).enumerate() {
            let ly = self.y.eig[c];
            for (value, &lx) in line.iter_mut().zip(&self.x.eig) {
                *value = m(lx, ly) * self.norm;
            }
        }
        self.shift = None;
    }

    /// Applies the stored symbol mode by mode.
    pub fn apply(&mut self, rhs: &[T], out: &mut [T]) {
        debug_assert_eq!(rhs.len(), self.len());
        let (rows, cols) = (self.x.len, self.y.len);
        self.work.copy_from_slice(rhs);
        for row in self.work.chunks_exact_mut(cols) {
            self.y.plan.forward(row, &mut self.scratch_y);
        }
        transpose(&self.work, &mut self.work_t, rows, cols);
        // work_t is cols x rows: row c holds the x-lines of mode c along y
        for (line, sym) in self.work_t.chunks_exact_mut(rows).zip(self.symbol.chunks_exact(rows)) {
            self.x.plan.forward(line, &mut self.scratch_x);
            for (value, &m) in line.iter_mut().zip(sym) {
                *value *= m;
            }
            self.x.plan.inverse(line, &mut self.scratch_x);
        }
        transpose(&self.work_t, &mut self.work, cols, rows);
        for (row, dst) in self.work.chunks_exact_mut(cols).zip(out.chunks_exact_mut(cols)) {
            self.y.plan.inverse(row, &mut self.scratch_y);
            dst.copy_from_slice(row);
        }
    }

    /// `out = m(lambda_x, lambda_y)` applied mode by mode to `rhs`.
    pub fn apply_symbol(&mut self, rhs: &[T], out: &mut [T], m: impl Fn(T, T) -> T) {
        self.set_symbol(m);
        self.apply(rhs, out);
    }

    /// Solves `(sigma + cx L_x + cy L_y) out = rhs`.
    pub fn solve_shifted(&mut self, rhs: &[T], out: &mut [T], sigma: T, cx: T, cy: T) {
        if self.shift != Some([sigma, cx, cy]) {
            self.set_symbol(|lx, ly| {
                let d = sigma + cx * lx + cy * ly;
                if d > T::zero() {
                    T::one() / d
                } else {
                    T::zero()
                }
            });
            self.shift = Some([sigma, cx, cy]);
        }
        self.apply(rhs, out);
    }
}

/// Blocked out-of-place transpose of a `rows x cols` row-major array.
fn transpose<T: Copy>(src: &[T], dst: &mut [T], rows: usize, cols: usize) {
    const B: usize = 8;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}
