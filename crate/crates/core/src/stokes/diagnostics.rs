//! Energy and a-priori diagnostics of computed trajectories.
//!
//! Inner products carry the `h^2` cell weight, time sums the step `dt`
//! (right-endpoint rule, matching implicit Euler).

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::forcing::Forcing;
use super::grid::MacGradients;
use super::operator::{OperatorSpec, TensorOperator};
use super::solver::Trajectory;

/// Terms of the discrete energy identity
/// `|u^M|^2/2 + sum |u^{n+1} - u^n|^2/2 + sum dt a_h(u^{n+1}, u^{n+1})
///  = sum dt (f^{n+1}, u^{n+1})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBalance<T> {
    pub kinetic: T,
    pub numerical_dissipation: T,
    pub viscous_dissipation: T,
    pub work: T,
    /// `|lhs - rhs| / max(|lhs|, |rhs|)`, zero when both sides vanish.
    pub defect: T,
}

fn relative_defect<T: Real>(lhs: T, rhs: T) -> T {
    let scale = lhs.magnitude().max(rhs.magnitude());
    if scale == T::zero() {
        T::zero()
    } else {
        (lhs - rhs).magnitude() / scale
    }
}

pub fn energy_balance<T: Real>(traj: &Trajectory<T>, spec: &OperatorSpec<T>, forcing: Forcing) -> Result<EnergyBalance<T>> {
    if traj.states.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let grid = traj.grid;
    let mut op = TensorOperator::new(grid, spec)?;
    let half = T::lit(0.5);
    let dt = traj.dt;
    let last = traj.states.last().expect("non-empty");
    let kinetic = half * grid.velocity_norm_sq(&last.u, &last.v);
    let (mut numerical, mut viscous, mut work) = (T::zero(), T::zero(), T::zero());
    let mut du = vec![T::zero(); grid.nu()];
    let mut dv = vec![T::zero(); grid.nv()];
    for pair in traj.states.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        for (d, (x, y)) in du.iter_mut().zip(b.u.iter().zip(&a.u)) {
            *d = *x - *y;
        }
        for (d, (x, y)) in dv.iter_mut().zip(b.v.iter().zip(&a.v)) {
            *d = *x - *y;
        }
        numerical += half * grid.velocity_norm_sq(&du, &dv);
        viscous += dt * op.energy(&b.u, &b.v);
        let (fu, fv) = forcing.sample(&grid, b.t);
        work += dt * grid.velocity_inner((&fu, &fv), (&b.u, &b.v));
    }
    let lhs = kinetic + numerical + viscous;
    Ok(EnergyBalance {
        kinetic,
        numerical_dissipation: numerical,
        viscous_dissipation: viscous,
        work,
        defect: relative_defect(lhs, work),
    })
}

/// The computable surrogate of the uniform velocity bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AprioriReport<T> {
    /// `alpha sum dt ||grad u^{n+1}||^2`
    pub lhs: T,
    /// `(1 / alpha) C_P^2 sum dt ||f^{n+1}||^2` with `C_P = 1 / (pi sqrt 2)`
    pub rhs: T,
    pub holds: bool,
}

/// Poincare constant of the unit square, `1 / (pi sqrt 2)`.
pub fn poincare_constant<T: Real>() -> T {
    T::one() / (T::PI() * T::SQRT_2())
}

pub fn apriori_bound_check<T: Real>(traj: &Trajectory<T>, forcing: Forcing, alpha: T) -> Result<AprioriReport<T>> {
    if !(alpha > T::zero()) {
        return Err(Error::NotElliptic { alpha: alpha.as_f64() });
    }
    let grid = traj.grid;
    let mut scratch = MacGradients::zeros(&grid);
    let (mut grad, mut force) = (T::zero(), T::zero());
    for s in traj.states.iter().skip(1) {
        grad += traj.dt * grid.gradient_norm_sq(&s.u, &s.v, &mut scratch);
        let (fu, fv) = forcing.sample(&grid, s.t);
        force += traj.dt * grid.velocity_norm_sq(&fu, &fv);
    }
    let cp = poincare_constant::<T>();
    let lhs = alpha * grad;
    let rhs = cp * cp * force / alpha;
    Ok(AprioriReport { lhs, rhs, holds: lhs <= rhs })
}

/// The three quantities bounded uniformly in epsilon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonitoredNorms<T> {
    /// `(sum dt ||grad u^{n+1}||^2)^{1/2}`
    pub velocity_h1: T,
    /// `(sum dt ||p^{n+1}||^2)^{1/2}`
    pub pressure_l2q: T,
    /// `(sum dt ||(u^{n+1} - u^n) / dt||^2)^{1/2}`
    pub acceleration: T,
}

pub fn monitored_norms<T: Real>(traj: &Trajectory<T>) -> MonitoredNorms<T> {
    let grid = traj.grid;
    let dt = traj.dt;
    let h = grid.h::<T>();
    let mut scratch = MacGradients::zeros(&grid);
    let (mut h1, mut pr, mut acc) = (T::zero(), T::zero(), T::zero());
    let mut du = vec![T::zero(); grid.nu()];
    let mut dv = vec![T::zero(); grid.nv()];
    for pair in traj.states.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        h1 += dt * grid.gradient_norm_sq(&b.u, &b.v, &mut scratch);
        pr += dt * crate::scalar::dot(&b.p, &b.p) * h * h;
        for (d, (x, y)) in du.iter_mut().zip(b.u.iter().zip(&a.u)) {
            *d = (*x - *y) / dt;
        }
        for (d, (x, y)) in dv.iter_mut().zip(b.v.iter().zip(&a.v)) {
            *d = (*x - *y) / dt;
        }
        acc += dt * grid.velocity_norm_sq(&du, &dv);
    }
    MonitoredNorms { velocity_h1: h1.sqrt(), pressure_l2q: pr.sqrt(), acceleration: acc.sqrt() }
}
