//! Viscous operators on the staggered grid.
//!
//! Both the oscillating operator `-sum_ij d_i(a_ij(x/eps) d_j u^k)` and the
//! homogenized `-(sum q_ijkh d_i d_j u^h)_k` are written as
//!
//! ```text
//! P = Grad^T W Q Grad
//! ```
//!
//! where `Grad` is the split velocity gradient of [`MacGrid`], `W` the
//! quadrature weights and `Q` a pointwise tensor acting on
//! `(d_i u^k)_{ik}`. For the fine operator `Q_(ik)(jh) = a_ij(x/eps)
//! delta_kh`; for the homogenized one `Q_(ik)(jh) = q_ijkh` (symmetrized in
//! `(ik) <-> (jh)`, which leaves the energy unchanged). `P` is therefore
//! symmetric and positive semidefinite whenever `Q` is.
//!
//! Gradient entries live at two locations. The "diagonal" pair
//! `(d_1 u, d_2 v)` sits at cell centres, the "off" pair `(d_2 u, d_1 v)` at
//! cell corners. Couplings inside each pair are exact; couplings across the
//! pairs use the average of the four corners of a centre.

use crate::coeff::CoefficientField;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::EffectiveTensor;

use super::grid::{MacGradients, MacGrid};

/// Which viscous operator a solve uses.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorSpec<T> {
    Fine { a: CoefficientField<T>, eps: T },
    Homog { q: EffectiveTensor<T> },
}

impl<T: Real> OperatorSpec<T> {
    pub fn label(&self) -> String {
        match self {
            OperatorSpec::Fine { a, eps } => format!("fine({a}, eps={eps})"),
            OperatorSpec::Homog { q } => format!("homog(alpha0={:.6})", q.alpha0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OperatorSpec::Fine { eps, .. } => {
                if !(*eps > T::zero()) {
                    return Err(Error::InvalidArgument(format!("epsilon = {eps} must be positive")));
                }
            }
            OperatorSpec::Homog { q } => {
                if !(q.alpha0 > T::zero()) {
                    return Err(Error::TensorNotElliptic { alpha0: q.alpha0.as_f64() });
                }
            }
        }
        Ok(())
    }
}

/// Cross-location coupling coefficients at centres:
/// `[d1u-d2u, d1u-d1v, d2v-d2u, d2v-d1v]`.
type Cross<T> = [Vec<T>; 4];

/// Assembled operator with per-node coefficients.
#[derive(Clone, Debug)]
pub struct TensorOperator<T> {
    grid: MacGrid,
    /// `[Q(d1u,d1u), Q(d1u,d2v), Q(d2v,d2v)]` at centres.
    centre: [Vec<T>; 3],
    /// `[Q(d2u,d2u), Q(d2u,d1v), Q(d1v,d1v)]` at corners, times the corner
    /// weight.
    corner: [Vec<T>; 3],
    cross: Option<Cross<T>>,
    grads: MacGradients<T>,
    fluxes: MacGradients<T>,
}

/// The 4x4 matrix `Q` in the order `(d1u, d2v, d2u, d1v)`, i.e. `(i, k)`
/// zero-based pairs `(0,0), (1,1), (1,0), (0,1)`.
fn local_matrix<T: Real>(q: impl Fn(usize, usize, usize, usize) -> T) -> [[T; 4]; 4] {
    const IK: [(usize, usize); 4] = [(0, 0), (1, 1), (1, 0), (0, 1)];
    let half = T::lit(0.5);
    let mut m = [[T::zero(); 4]; 4];
    for (r, &(i, k)) in IK.iter().enumerate() {
        for (c, &(j, h)) in IK.iter().enumerate() {
            m[r][c] = (q(i, j, k, h) + q(j, i, h, k)) * half;
        }
    }
    m
}

impl<T: Real> TensorOperator<T> {
    pub fn new(grid: MacGrid, spec: &OperatorSpec<T>) -> Result<Self> {
        spec.validate()?;
        match spec {
            OperatorSpec::Fine { a, eps } => {
                let at = |x: [T; 2]| {
                    let s = a.sample_at([x[0] / *eps, x[1] / *eps]);
                    move |i: usize, j: usize, k: usize, h: usize| {
                        if k == h {
                            s.get(i, j)
                        } else {
                            T::zero()
                        }
                    }
                };
                Ok(Self::assemble(grid, |x| local_matrix(at(x)), |x| local_matrix(at(x))))
            }
            OperatorSpec::Homog { q } => {
                let m = local_matrix(|i, j, k, h| q.get0(i, j, k, h));
                Ok(Self::assemble(grid, |_| m, |_| m))
            }
        }
    }

    fn assemble(
        grid: MacGrid,
        at_centre: impl Fn([T; 2]) -> [[T; 4]; 4],
        at_corner: impl Fn([T; 2]) -> [[T; 4]; 4],
    ) -> Self {
        let np = grid.np();
        let nc = grid.ncorner();
        let mut centre = [vec![T::zero(); np], vec![T::zero(); np], vec![T::zero(); np]];
        let mut cross: Cross<T> = [vec![T::zero(); np], vec![T::zero(); np], vec![T::zero(); np], vec![T::zero(); np]];
        let mut any_cross = false;
        for idx in 0..np {
            let m = at_centre(grid.center(idx));
            centre[0][idx] = m[0][0];
            centre[1][idx] = m[0][1];
            centre[2][idx] = m[1][1];
            let c = [m[0][2], m[0][3], m[1][2], m[1][3]];
            for (slot, value) in c.into_iter().enumerate() {
                cross[slot][idx] = value;
                any_cross |= value != T::zero();
            }
        }
        let mut corner = [vec![T::zero(); nc], vec![T::zero(); nc], vec![T::zero(); nc]];
        for idx in 0..nc {
            let m = at_corner(grid.corner(idx));
            let w = grid.corner_weight::<T>(idx);
            corner[0][idx] = m[2][2] * w;
            corner[1][idx] = m[2][3] * w;
            corner[2][idx] = m[3][3] * w;
        }
        TensorOperator {
            grid,
            centre,
            corner,
            cross: any_cross.then_some(cross),
            grads: MacGradients::zeros(&grid),
            fluxes: MacGradients::zeros(&grid),
        }
    }

    pub fn grid(&self) -> &MacGrid {
        &self.grid
    }

    /// Mean of the diagonal centre and corner coefficients, per velocity
    /// component and direction: `[[c_x(u), c_y(u)], [c_x(v), c_y(v)]]`.
    /// Used to build the constant-coefficient preconditioners.
    pub fn mean_coefficients(&self) -> [[T; 2]; 2] {
        let mean_c = |v: &[T]| crate::scalar::mean(v);
        let mut weights = T::zero();
        let mut acc = [T::zero(); 3];
        for idx in 0..self.grid.ncorner() {
            let w = self.grid.corner_weight::<T>(idx);
            weights += w;
            for (a, c) in acc.iter_mut().zip(&self.corner) {
                *a += c[idx];
            }
        }
        let corner_mean = |slot: usize| acc[slot] / weights;
        [[mean_c(&self.centre[0]), corner_mean(0)], [corner_mean(2), mean_c(&self.centre[2])]]
    }

    /// `out = P (u, v)`.
    pub fn apply(&mut self, u: &[T], v: &[T], out_u: &mut [T], out_v: &mut [T]) {
        let grid = self.grid;
        let n = grid.n();
        let m = n + 1;
        grid.gradients_into(u, v, &mut self.grads);
        let g = &self.grads;
        let s = &mut self.fluxes;
        let [c00, c01, c11] = &self.centre;
        for idx in 0..grid.np() {
            let (a, b) = (g.d1u[idx], g.d2v[idx]);
            s.d1u[idx] = c00[idx] * a + c01[idx] * b;
            s.d2v[idx] = c01[idx] * a + c11[idx] * b;
        }
        let [o00, o01, o11] = &self.corner;
        for idx in 0..grid.ncorner() {
            let (a, b) = (g.d2u[idx], g.d1v[idx]);
            s.d2u[idx] = o00[idx] * a + o01[idx] * b;
            s.d1v[idx] = o01[idx] * a + o11[idx] * b;
        }
        if let Some(cross) = &self.cross {
            let quarter = T::lit(0.25);
            for i in 0..n {
                for j in 0..n {
                    let idx = i * n + j;
                    let corners = [i * m + j, i * m + j + 1, (i + 1) * m + j, (i + 1) * m + j + 1];
                    let avg = |f: &[T]| corners.iter().map(|&c| f[c]).fold(T::zero(), |x, y| x + y) * quarter;
                    let (o0, o1) = (avg(&g.d2u), avg(&g.d1v));
                    s.d1u[idx] += cross[0][idx] * o0 + cross[1][idx] * o1;
                    s.d2v[idx] += cross[2][idx] * o0 + cross[3][idx] * o1;
                    let (a, b) = (g.d1u[idx], g.d2v[idx]);
                    let to_o0 = (cross[0][idx] * a + cross[2][idx] * b) * quarter;
                    let to_o1 = (cross[1][idx] * a + cross[3][idx] * b) * quarter;
                    for &c in &corners {
                        s.d2u[c] += to_o0;
                        s.d1v[c] += to_o1;
                    }
                }
            }
        }
        grid.gradients_transpose(s, out_u, out_v);
    }

    /// `a_h(u, u) = h^2 (u, P u)`, the discrete energy.
    pub fn energy(&mut self, u: &[T], v: &[T]) -> T {
        let mut pu = vec![T::zero(); u.len()];
        let mut pv = vec![T::zero(); v.len()];
        self.apply(u, v, &mut pu, &mut pv);
        self.grid.velocity_inner((u, v), (&pu, &pv))
    }
}

/// `P^eps u` for the oscillating coefficient `a(x / eps)`.
pub fn apply_fine_operator<T: Real>(
    grid: MacGrid,
    a: &CoefficientField<T>,
    eps: T,
    u: &[T],
    v: &[T],
) -> Result<(Vec<T>, Vec<T>)> {
    let mut op = TensorOperator::new(grid, &OperatorSpec::Fine { a: *a, eps })?;
    let mut out = (vec![T::zero(); grid.nu()], vec![T::zero(); grid.nv()]);
    op.apply(u, v, &mut out.0, &mut out.1);
    Ok(out)
}

/// `Q u` for a constant effective tensor.
pub fn apply_homog_operator<T: Real>(
    grid: MacGrid,
    q: &EffectiveTensor<T>,
    u: &[T],
    v: &[T],
) -> Result<(Vec<T>, Vec<T>)> {
    let mut op = TensorOperator::new(grid, &OperatorSpec::Homog { q: q.clone() })?;
    let mut out = (vec![T::zero(); grid.nu()], vec![T::zero(); grid.nv()]);
    op.apply(u, v, &mut out.0, &mut out.1);
    Ok(out)
}
