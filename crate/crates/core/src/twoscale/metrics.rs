//! Error norms and pairing functionals over computed trajectories.
//!
//! Space integrals use the MAC lattice quadrature (`h^2` per node, corner
//! weights for corner gradients), time integrals the right-endpoint rule over
//! `t_1 .. t_M`, matching implicit Euler.

use crate::cell::{CorrectorSet, PAIRS};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stokes::{MacGradients, MacGrid, State, Trajectory};

use super::test_function::{SpacePreset, TestFunction};

/// Fails unless both trajectories use the same time lattice.
pub fn check_time_grids<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>) -> Result<()> {
    if a.steps() != b.steps() {
        return Err(Error::IncompatibleTrajectories(format!("{} vs {} time steps", a.steps(), b.steps())));
    }
    let gap = (a.dt - b.dt).magnitude();
    if gap > T::lit(1e-12) * a.dt.magnitude().max(b.dt.magnitude()) {
        return Err(Error::IncompatibleTrajectories(format!("time steps {} vs {}", a.dt, b.dt)));
    }
    Ok(())
}

fn check_same_grid<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>) -> Result<()> {
    check_time_grids(a, b)?;
    if a.grid != b.grid {
        return Err(Error::IncompatibleTrajectories(format!("grids n = {} vs n = {}", a.grid.n(), b.grid.n())));
    }
    Ok(())
}

/// `u` at an arbitrary point by bilinear interpolation, with the wall values
/// of the no-slip ghost reflection.
fn sample_u<T: Real>(grid: &MacGrid, u: &[T], x: [T; 2]) -> T {
    let n = grid.n();
    let value = |f: usize, j: isize| -> T {
        if f == 0 || f == n {
            return T::zero();
        }
        match j {
            -1 => -u[(f - 1) * n],
            j if j as usize == n => -u[(f - 1) * n + n - 1],
            j => u[(f - 1) * n + j as usize],
        }
    };
    let nn = T::from_count(n);
    let sx = (x[0] * nn).max(T::zero()).min(nn);
    let f0 = sx.floor().as_f64().min((n - 1) as f64) as usize;
    let a = sx - T::from_count(f0);
    let sy = (x[1] * nn - T::lit(0.5)).max(T::lit(-0.5)).min(nn - T::lit(0.5));
    let j0 = (sy.floor().as_f64() as isize).clamp(-1, n as isize - 1);
    let b = sy - T::lit(j0 as f64);
    let (one_a, one_b) = (T::one() - a, T::one() - b);
    one_a * one_b * value(f0, j0) + a * one_b * value(f0 + 1, j0) + one_a * b * value(f0, j0 + 1) + a * b * value(f0 + 1, j0 + 1)
}

fn sample_v<T: Real>(grid: &MacGrid, v: &[T], x: [T; 2]) -> T {
    let n = grid.n();
    let value = |i: isize, g: usize| -> T {
        if g == 0 || g == n {
            return T::zero();
        }
        match i {
            -1 => -v[g - 1],
            i if i as usize == n => -v[(n - 1) * (n - 1) + g - 1],
            i => v[i as usize * (n - 1) + g - 1],
        }
    };
    let nn = T::from_count(n);
    let sy = (x[1] * nn).max(T::zero()).min(nn);
    let g0 = sy.floor().as_f64().min((n - 1) as f64) as usize;
    let b = sy - T::from_count(g0);
    let sx = (x[0] * nn - T::lit(0.5)).max(T::lit(-0.5)).min(nn - T::lit(0.5));
    let i0 = (sx.floor().as_f64() as isize).clamp(-1, n as isize - 1);
    let a = sx - T::lit(i0 as f64);
    let (one_a, one_b) = (T::one() - a, T::one() - b);
    one_a * one_b * value(i0, g0) + a * one_b * value(i0 + 1, g0) + one_a * b * value(i0, g0 + 1) + a * b * value(i0 + 1, g0 + 1)
}

/// Bilinear transfer of a staggered velocity from `from` to the nodes of `to`.
pub fn interpolate_velocity<T: Real>(from: &MacGrid, u: &[T], v: &[T], to: &MacGrid) -> (Vec<T>, Vec<T>) {
    if from == to {
        return (u.to_vec(), v.to_vec());
    }
    let iu = (0..to.nu()).map(|idx| sample_u(from, u, to.u_node(idx))).collect();
    let iv = (0..to.nv()).map(|idx| sample_v(from, v, to.v_node(idx))).collect();
    (iu, iv)
}

/// `||u_fine - u_homog||_{L^2(Q)}`. A homogenized trajectory on a coarser
/// grid is interpolated bilinearly onto the fine velocity nodes.
pub fn l2q_error<T: Real>(fine: &Trajectory<T>, homog: &Trajectory<T>) -> Result<T> {
    check_time_grids(fine, homog)?;
    let (gf, gh) = (fine.grid, homog.grid);
    if gf.n() % gh.n() != 0 {
        return Err(Error::IncompatibleTrajectories(format!(
            "fine grid n = {} is not a refinement of n = {}",
            gf.n(),
            gh.n()
        )));
    }
    let mut total = T::zero();
    let (mut du, mut dv) = (vec![T::zero(); gf.nu()], vec![T::zero(); gf.nv()]);
    for (a, b) in fine.states.iter().zip(&homog.states).skip(1) {
        let (bu, bv) = interpolate_velocity(&gh, &b.u, &b.v, &gf);
        for (d, (x, y)) in du.iter_mut().zip(a.u.iter().zip(&bu)) {
            *d = *x - *y;
        }
        for (d, (x, y)) in dv.iter_mut().zip(a.v.iter().zip(&bv)) {
            *d = *x - *y;
        }
        total += fine.dt * gf.velocity_norm_sq(&du, &dv);
    }
    Ok(total.sqrt())
}

/// Per-component `int_Q u_k(x, t) w(x) c(t) dx dt` for a spatial weight
/// sampled at the two velocity layouts and a temporal weight.
fn weighted_pairing<T: Real>(
    traj: &Trajectory<T>,
    weight_u: &[T],
    weight_v: &[T],
    time_weight: impl Fn(T) -> T,
) -> [T; 2] {
    let h = traj.grid.h::<T>();
    let mut acc = [T::zero(); 2];
    for s in traj.states.iter().skip(1) {
        let c = time_weight(s.t) * traj.dt * h * h;
        if c == T::zero() {
            continue;
        }
        acc[0] += c * crate::scalar::dot(&s.u, weight_u);
        acc[1] += c * crate::scalar::dot(&s.v, weight_v);
    }
    acc
}

/// `int_Q u(x, t) psi(x, t, x / eps, t / eps) dx dt`, per velocity component.
pub fn two_scale_pairing<T: Real>(traj: &Trajectory<T>, psi: &TestFunction<T>, eps: T) -> Result<[T; 2]> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidArgument(format!("epsilon = {eps} must be positive")));
    }
    let grid = traj.grid;
    let spatial = |x: [T; 2]| psi.space.eval_space(x) * psi.cell.eval([x[0] / eps, x[1] / eps]);
    let wu: Vec<T> = (0..grid.nu()).map(|idx| spatial(grid.u_node(idx))).collect();
    let wv: Vec<T> = (0..grid.nv()).map(|idx| spatial(grid.v_node(idx))).collect();
    Ok(weighted_pairing(traj, &wu, &wv, |t| psi.space.eval_time(t, psi.t_final) * psi.time.eval(t / eps)))
}

/// The two-scale limit `int_Q int_Y int_Z u_0 psi`, using the exact fast means
/// of the presets (`u_0` depends on neither `y` nor `tau`).
pub fn limit_pairing<T: Real>(homog: &Trajectory<T>, psi: &TestFunction<T>) -> [T; 2] {
    let grid = homog.grid;
    let wu: Vec<T> = (0..grid.nu()).map(|idx| psi.space.eval_space(grid.u_node(idx))).collect();
    let wv: Vec<T> = (0..grid.nv()).map(|idx| psi.space.eval_space(grid.v_node(idx))).collect();
    let plain = weighted_pairing(homog, &wu, &wv, |t| psi.space.eval_time(t, psi.t_final));
    let m = psi.fast_mean();
    [plain[0] * m, plain[1] * m]
}

/// `(int p_fine phi, int p_homog phi)` over `Q`, with the time window of
/// `phi` set to the trajectory length.
pub fn pressure_pairing<T: Real>(fine: &Trajectory<T>, homog: &Trajectory<T>, phi: SpacePreset) -> Result<(T, T)> {
    check_time_grids(fine, homog)?;
    let one = |traj: &Trajectory<T>| -> T {
        let grid = traj.grid;
        let h = grid.h::<T>();
        let t_final = traj.final_time();
        let w: Vec<T> = (0..grid.np()).map(|idx| phi.eval_space(grid.center(idx))).collect();
        let mut acc = T::zero();
        for s in traj.states.iter().skip(1) {
            acc += phi.eval_time(s.t, t_final) * traj.dt * h * h * crate::scalar::dot(&s.p, &w);
        }
        acc
    };
    Ok((one(fine), one(homog)))
}

/// Periodic Catmull-Rom bicubic interpolation of a lattice field given at
/// `y_p = -1/2 + p / n`, row-major in `(p1, p2)`.
pub struct PeriodicBicubic<'a, T> {
    n: usize,
    values: &'a [T],
}

impl<'a, T: Real> PeriodicBicubic<'a, T> {
    pub fn new(n: usize, values: &'a [T]) -> Result<Self> {
        if n < 4 || values.len() != n * n {
            return Err(Error::LatticeMismatch { expected: n * n, found: values.len() });
        }
        Ok(PeriodicBicubic { n, values })
    }

    fn stencil(&self, y: T) -> (isize, [T; 4]) {
        let t = (y + T::lit(0.5)) * T::from_count(self.n);
        let base = t.floor();
        let s = t - base;
        let (s2, s3) = (s * s, s * s * s);
        let half = T::lit(0.5);
        let w = [
            half * (-s3 + T::lit(2.0) * s2 - s),
            half * (T::lit(3.0) * s3 - T::lit(5.0) * s2 + T::lit(2.0)),
            half * (T::lit(-3.0) * s3 + T::lit(4.0) * s2 + s),
            half * (s3 - s2),
        ];
        (base.as_f64() as isize, w)
    }

    pub fn eval(&self, y: [T; 2]) -> T {
        let n = self.n as isize;
        let (b1, w1) = self.stencil(y[0]);
        let (b2, w2) = self.stencil(y[1]);
        let mut acc = T::zero();
        for (a, &wa) in w1.iter().enumerate() {
            let p1 = (b1 + a as isize - 1).rem_euclid(n) as usize;
            let row = &self.values[p1 * self.n..(p1 + 1) * self.n];
            let mut inner = T::zero();
            for (b, &wb) in w2.iter().enumerate() {
                inner += wb * row[(b2 + b as isize - 1).rem_euclid(n) as usize];
            }
            acc += wa * inner;
        }
        acc
    }
}

/// Gradient errors of a fine trajectory against the homogenized one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientErrors<T> {
    /// `||grad u_eps - grad u_0 - grad_y u_1(x, t, x / eps)||_{L^2(Q)}`
    pub corrector: T,
    /// `||grad u_eps - grad u_0||_{L^2(Q)}`
    pub plain: T,
}

/// Full velocity gradient of `u_0` at cell centres and corners:
/// `g[m][i]` is `d u^m / d x_i`.
struct FullGradients<T> {
    centre: [[Vec<T>; 2]; 2],
    corner: [[Vec<T>; 2]; 2],
}

fn full_gradients<T: Real>(grid: &MacGrid, g: &MacGradients<T>) -> FullGradients<T> {
    let n = grid.n();
    let m = n + 1;
    let quarter = T::lit(0.25);
    // corner to centre: average of the four cell corners
    let to_centre = |c: &[T]| -> Vec<T> {
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = quarter * (c[i * m + j] + c[(i + 1) * m + j] + c[i * m + j + 1] + c[(i + 1) * m + j + 1]);
            }
        }
        out
    };
    // centre to corner: average of the adjacent cells inside the domain
    let to_corner = |c: &[T]| -> Vec<T> {
        let mut out = vec![T::zero(); m * m];
        for f in 0..m {
            for gg in 0..m {
                let (mut s, mut k) = (T::zero(), 0usize);
                for i in f.saturating_sub(1)..f.min(n - 1) + 1 {
                    for j in gg.saturating_sub(1)..gg.min(n - 1) + 1 {
                        s += c[i * n + j];
                        k += 1;
                    }
                }
                out[f * m + gg] = s / T::from_count(k);
            }
        }
        out
    };
    FullGradients {
        centre: [[g.d1u.clone(), to_centre(&g.d2u)], [to_centre(&g.d1v), g.d2v.clone()]],
        corner: [[to_corner(&g.d1u), g.d2u.clone()], [g.d1v.clone(), to_corner(&g.d2v)]],
    }
}

/// Corrector gradients `d chi_im^k / d y_j` sampled at `y = x / eps` on the
/// locations where `d u^k / d x_j` lives: `(k, j) = (1, 1), (2, 2)` at centres
/// and `(1, 2), (2, 1)` at corners. Indexed `[entry][pair]` in [`PAIRS`] order.
struct CorrectorSamples<T> {
    centre: [[Vec<T>; 4]; 2],
    corner: [[Vec<T>; 4]; 2],
}

fn sample_correctors<T: Real>(grid: &MacGrid, chi: &CorrectorSet<T>, eps: T) -> Result<CorrectorSamples<T>> {
    let grads: Vec<[Vec<T>; 4]> = PAIRS.iter().map(|&(i, m)| chi.get(i, m).map(|f| f.gradients())).collect::<Result<_>>()?;
    let sample = |k: usize, j: usize, points: &dyn Fn(usize) -> [T; 2], count: usize| -> Result<[Vec<T>; 4]> {
        let mut out: [Vec<T>; 4] = Default::default();
        for (slot, g) in grads.iter().enumerate() {
            let interp = PeriodicBicubic::new(chi.n, &g[2 * (k - 1) + (j - 1)])?;
            out[slot] = (0..count)
                .map(|idx| {
                    let x = points(idx);
                    interp.eval([x[0] / eps, x[1] / eps])
                })
                .collect();
        }
        Ok(out)
    };
    let centre = |idx: usize| grid.center::<T>(idx);
    let corner = |idx: usize| grid.corner::<T>(idx);
    Ok(CorrectorSamples {
        centre: [sample(1, 1, &centre, grid.np())?, sample(2, 2, &centre, grid.np())?],
        corner: [sample(1, 2, &corner, grid.ncorner())?, sample(2, 1, &corner, grid.ncorner())?],
    })
}

/// `(grad_y u_1)^k_j = -sum_{i,m} d u_0^m / d x_i * d chi_im^k / d y_j` at one
/// location, from the full gradient of `u_0` there.
#[inline]
fn first_order_gradient<T: Real>(du0: [[T; 2]; 2], chi_grad: [T; 4]) -> T {
    let mut s = T::zero();
    for (slot, &(i, m)) in PAIRS.iter().enumerate() {
        s += du0[m - 1][i - 1] * chi_grad[slot];
    }
    -s
}

/// Corrector-improved and plain gradient errors; both trajectories must
/// share the grid.
pub fn corrector_error<T: Real>(fine: &Trajectory<T>, homog: &Trajectory<T>, chi: &CorrectorSet<T>, eps: T) -> Result<GradientErrors<T>> {
    check_same_grid(fine, homog)?;
    if !(eps > T::zero()) {
        return Err(Error::InvalidArgument(format!("epsilon = {eps} must be positive")));
    }
    if !chi.is_complete() {
        return Err(Error::MissingCorrector { i: 1, k: 1 });
    }
    let grid = fine.grid;
    let samples = sample_correctors(&grid, chi, eps)?;
    let mut gf = MacGradients::zeros(&grid);
    let mut gh = MacGradients::zeros(&grid);
    let h2 = grid.h::<T>() * grid.h::<T>();
    let (mut corrected, mut plain) = (T::zero(), T::zero());
    let at = |s: &[Vec<T>; 4], idx: usize| [s[0][idx], s[1][idx], s[2][idx], s[3][idx]];
    for (a, b) in fine.states.iter().zip(&homog.states).skip(1) {
        grid.gradients_into(&a.u, &a.v, &mut gf);
        grid.gradients_into(&b.u, &b.v, &mut gh);
        let full = full_gradients(&grid, &gh);
        let (mut c_sum, mut p_sum) = (T::zero(), T::zero());
        for idx in 0..grid.np() {
            let du0 = [
                [full.centre[0][0][idx], full.centre[0][1][idx]],
                [full.centre[1][0][idx], full.centre[1][1][idx]],
            ];
            let d11 = gf.d1u[idx] - gh.d1u[idx];
            let d22 = gf.d2v[idx] - gh.d2v[idx];
            let e11 = d11 - first_order_gradient(du0, at(&samples.centre[0], idx));
            let e22 = d22 - first_order_gradient(du0, at(&samples.centre[1], idx));
            c_sum += e11 * e11 + e22 * e22;
            p_sum += d11 * d11 + d22 * d22;
        }
        for idx in 0..grid.ncorner() {
            let w = grid.corner_weight::<T>(idx);
            let du0 = [
                [full.corner[0][0][idx], full.corner[0][1][idx]],
                [full.corner[1][0][idx], full.corner[1][1][idx]],
            ];
            let d12 = gf.d2u[idx] - gh.d2u[idx];
            let d21 = gf.d1v[idx] - gh.d1v[idx];
            let e12 = d12 - first_order_gradient(du0, at(&samples.corner[0], idx));
            let e21 = d21 - first_order_gradient(du0, at(&samples.corner[1], idx));
            c_sum += w * (e12 * e12 + e21 * e21);
            p_sum += w * (d12 * d12 + d21 * d21);
        }
        corrected += fine.dt * h2 * c_sum;
        plain += fine.dt * h2 * p_sum;
    }
    Ok(GradientErrors { corrector: corrected.sqrt(), plain: plain.sqrt() })
}

/// Least-squares slope of `log err` against `log eps`.
pub fn fit_rate<T: Real>(eps: &[T], err: &[T]) -> Result<T> {
    if eps.len() != err.len() {
        return Err(Error::InvalidArgument(format!("{} epsilons but {} errors", eps.len(), err.len())));
    }
    if eps.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 points to fit a rate, got {}", eps.len())));
    }
    if let Some(bad) = eps.iter().chain(err).find(|v| !(**v > T::zero()) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("rate fit needs positive finite entries, got {bad}")));
    }
    let xs: Vec<T> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<T> = err.iter().map(|e| e.ln()).collect();
    let len = T::from_count(xs.len());
    let mx = xs.iter().copied().sum::<T>() / len;
    let my = ys.iter().copied().sum::<T>() / len;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == T::zero() {
        return Err(Error::InvalidArgument("rate fit needs distinct epsilons".into()));
    }
    Ok(sxy / sxx)
}

/// A trajectory sharing `like`'s grid and time lattice whose velocity is
/// `g(x, t)` sampled at the staggered nodes; pressure zero.
pub fn synthetic_trajectory<T: Real>(like: (MacGrid, T, usize), g: impl Fn([T; 2], T) -> [T; 2]) -> Trajectory<T> {
    let (grid, dt, steps) = like;
    let states = (0..=steps)
        .map(|n| {
            let t = dt * T::from_count(n);
            let u = (0..grid.nu()).map(|idx| g(grid.u_node(idx), t)[0]).collect();
            let v = (0..grid.nv()).map(|idx| g(grid.v_node(idx), t)[1]).collect();
            State { t, u, v, p: vec![T::zero(); grid.np()] }
        })
        .collect();
    Trajectory {
        grid,
        dt,
        label: "synthetic".into(),
        forcing: crate::stokes::Forcing::Zero,
        states,
        stats: Vec::new(),
    }
}
