//! Implicit Euler time stepping for the staggered Stokes system.
//!
//! Each step solves the symmetric saddle-point system
//!
//! ```text
//! [ sigma I + P   G ] [u]   [ sigma u_prev + f ]
//! [ G^T           0 ] [p] = [ 0                ]
//! ```
//!
//! with `sigma = 1 / dt` and `G^T = -D`. Two solvers are available: MINRES
//! on the whole system with a block-diagonal preconditioner, and Uzawa
//! (conjugate gradients on the pressure Schur complement with inner CG
//! velocity solves). Both use fast transform solves of the mean-coefficient
//! operator for the velocity blocks and the Cahouet-Chabard approximation
//! `nu I + sigma L_p^{-1}` for the Schur complement.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::krylov::{minres, pcg, KrylovStats};
use crate::scalar::{max_abs, mean, Real};

use super::fast::FastSolver;
use super::forcing::Forcing;
use super::grid::MacGrid;
use super::operator::{OperatorSpec, TensorOperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SaddleSolver {
    Minres,
    Uzawa,
}

impl SaddleSolver {
    pub fn name(&self) -> &'static str {
        match self {
            SaddleSolver::Minres => "minres",
            SaddleSolver::Uzawa => "uzawa",
        }
    }
}

impl fmt::Display for SaddleSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SaddleSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minres" => Ok(SaddleSolver::Minres),
            "uzawa" => Ok(SaddleSolver::Uzawa),
            other => Err(Error::InvalidArgument(format!("unknown saddle solver `{other}` (expected minres or uzawa)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub method: SaddleSolver,
    /// Relative residual tolerance of the saddle-point solve.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { method: SaddleSolver::Minres, tol: 1e-9, max_iter: 5000 }
    }
}

impl SolverConfig {
    pub fn with_tol(self, tol: f64) -> Self {
        SolverConfig { tol, ..self }
    }

    pub fn with_method(self, method: SaddleSolver) -> Self {
        SolverConfig { method, ..self }
    }
}

/// Velocity and pressure at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct State<T> {
    pub t: T,
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub p: Vec<T>,
}

impl<T: Real> State<T> {
    pub fn zero(grid: &MacGrid) -> Self {
        State { t: T::zero(), u: vec![T::zero(); grid.nu()], v: vec![T::zero(); grid.nv()], p: vec![T::zero(); grid.np()] }
    }

    /// Max norm of the discrete divergence.
    pub fn divergence_max(&self, grid: &MacGrid) -> T {
        let mut d = vec![T::zero(); grid.np()];
        grid.divergence(&self.u, &self.v, &mut d);
        max_abs(&d)
    }

    pub fn pressure_mean(&self) -> T {
        mean(&self.p)
    }
}

/// Solver statistics of one step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepStats {
    pub iterations: usize,
    pub residual: f64,
    pub divergence: f64,
}

/// States at `t_n = n dt`, `n = 0..=M`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub grid: MacGrid,
    pub dt: T,
    pub label: String,
    pub forcing: Forcing,
    pub states: Vec<State<T>>,
    pub stats: Vec<StepStats>,
}

impl<T: Real> Trajectory<T> {
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn final_time(&self) -> T {
        self.dt * T::from_count(self.steps())
    }
}

/// Reusable per-operator solver state.
pub struct StokesStepper<T: Real> {
    grid: MacGrid,
    op: TensorOperator<T>,
    pre_u: FastSolver<T>,
    pre_v: FastSolver<T>,
    pre_p: FastSolver<T>,
    /// `[[c_x(u), c_y(u)], [c_x(v), c_y(v)]]`
    coeffs: [[T; 2]; 2],
    sigma: T,
    dt: T,
    cfg: SolverConfig,
}

impl<T: Real> StokesStepper<T> {
    pub fn new(grid: MacGrid, spec: &OperatorSpec<T>, dt: T, cfg: SolverConfig) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step {dt} must be positive")));
        }
        if !(cfg.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("solver tolerance {} must be positive", cfg.tol)));
        }
        let op = TensorOperator::new(grid, spec)?;
        let coeffs = op.mean_coefficients();
        let sigma = T::one() / dt;
        let nu = (coeffs[0][0] + coeffs[0][1] + coeffs[1][0] + coeffs[1][1]) * T::lit(0.25);
        let mut pre_p = FastSolver::pressure(grid.n());
        pre_p.set_symbol(|lx, ly| {
            let l = lx + ly;
            if l > T::zero() {
                nu + sigma / l
            } else {
                T::zero()
            }
        });
        let n = grid.n();
        Ok(StokesStepper {
            grid,
            op,
            pre_u: FastSolver::velocity_u(n),
            pre_v: FastSolver::velocity_v(n),
            pre_p,
            coeffs,
            sigma,
            dt,
            cfg,
        })
    }

    pub fn grid(&self) -> &MacGrid {
        &self.grid
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn operator_mut(&mut self) -> &mut TensorOperator<T> {
        &mut self.op
    }

    /// Advances `prev` by one step with forcing sampled at `prev.t + dt`.
    pub fn step(&mut self, prev: &State<T>, forcing: Forcing) -> Result<(State<T>, StepStats)> {
        self.step_from(prev, prev, forcing)
    }

    /// As [`Self::step`], starting the iteration from `guess` instead of `prev`.
    pub fn step_from(&mut self, prev: &State<T>, guess: &State<T>, forcing: Forcing) -> Result<(State<T>, StepStats)> {
        let t = prev.t + self.dt;
        let (fu, fv) = forcing.sample(&self.grid, t);
        let sigma = self.sigma;
        let rhs_u: Vec<T> = prev.u.iter().zip(&fu).map(|(&u, &f)| sigma * u + f).collect();
        let rhs_v: Vec<T> = prev.v.iter().zip(&fv).map(|(&v, &f)| sigma * v + f).collect();
        let mut next = State { t, u: guess.u.clone(), v: guess.v.clone(), p: guess.p.clone() };
        let krylov = match self.cfg.method {
            SaddleSolver::Minres => self.solve_minres(&rhs_u, &rhs_v, &mut next)?,
            SaddleSolver::Uzawa => self.solve_uzawa(&rhs_u, &rhs_v, &mut next)?,
        };
        let pm = mean(&next.p);
        next.p.iter_mut().for_each(|p| *p -= pm);
        let stats = StepStats {
            iterations: krylov.iterations,
            residual: krylov.residual,
            divergence: next.divergence_max(&self.grid).as_f64(),
        };
        Ok((next, stats))
    }

    fn precondition_velocity(&mut self, ru: &[T], rv: &[T], zu: &mut [T], zv: &mut [T]) {
        let [[ux, uy], [vx, vy]] = self.coeffs;
        self.pre_u.solve_shifted(ru, zu, self.sigma, ux, uy);
        self.pre_v.solve_shifted(rv, zv, self.sigma, vx, vy);
    }

    fn precondition_pressure(&mut self, rp: &[T], zp: &mut [T]) {
        self.pre_p.apply(rp, zp);
    }

    fn solve_minres(&mut self, rhs_u: &[T], rhs_v: &[T], state: &mut State<T>) -> Result<KrylovStats> {
        let grid = self.grid;
        let (nu, nv, np) = (grid.nu(), grid.nv(), grid.np());
        let mut b = Vec::with_capacity(nu + nv + np);
        b.extend_from_slice(rhs_u);
        b.extend_from_slice(rhs_v);
        b.resize(nu + nv + np, T::zero());
        let mut x = Vec::with_capacity(b.len());
        x.extend_from_slice(&state.u);
        x.extend_from_slice(&state.v);
        x.extend_from_slice(&state.p);

        let sigma = self.sigma;
        let (tol, max_iter) = (T::lit(self.cfg.tol), self.cfg.max_iter);
        let this = std::cell::RefCell::new(self);
        let mut gu = vec![T::zero(); nu];
        let mut gv = vec![T::zero(); nv];
        let apply = |x: &[T], y: &mut [T]| {
            let (xu, rest) = x.split_at(nu);
            let (xv, xp) = rest.split_at(nv);
            let (yu, rest) = y.split_at_mut(nu);
            let (yv, yp) = rest.split_at_mut(nv);
            this.borrow_mut().op.apply(xu, xv, yu, yv);
            grid.gradient(xp, &mut gu, &mut gv);
            for i in 0..nu {
                yu[i] += sigma * xu[i] + gu[i];
            }
            for i in 0..nv {
                yv[i] += sigma * xv[i] + gv[i];
            }
            grid.divergence(xu, xv, yp);
            yp.iter_mut().for_each(|d| *d = -*d);
        };
        let precond = |r: &[T], z: &mut [T]| {
            let (ru, rest) = r.split_at(nu);
            let (rv, rp) = rest.split_at(nv);
            let (zu, rest) = z.split_at_mut(nu);
            let (zv, zp) = rest.split_at_mut(nv);
            let mut s = this.borrow_mut();
            s.precondition_velocity(ru, rv, zu, zv);
            s.precondition_pressure(rp, zp);
        };
        let stats = minres("stokes minres", apply, precond, &b, &mut x, tol, max_iter)?;
        state.u.copy_from_slice(&x[..nu]);
        state.v.copy_from_slice(&x[nu..nu + nv]);
        state.p.copy_from_slice(&x[nu + nv..]);
        Ok(stats)
    }

    /// Solves `(sigma + P) w = r` by preconditioned CG; `w` holds the guess.
    fn velocity_solve(&mut self, r: &[T], w: &mut [T], tol: T) -> Result<KrylovStats> {
        let nu = self.grid.nu();
        let sigma = self.sigma;
        let this = std::cell::RefCell::new(self);
        let apply = |x: &[T], y: &mut [T]| {
            let (xu, xv) = x.split_at(nu);
            let (yu, yv) = y.split_at_mut(nu);
            this.borrow_mut().op.apply(xu, xv, yu, yv);
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi += sigma * *xi;
            }
        };
        let precond = |r: &[T], z: &mut [T]| {
            let (ru, rv) = r.split_at(nu);
            let (zu, zv) = z.split_at_mut(nu);
            this.borrow_mut().precondition_velocity(ru, rv, zu, zv);
        };
        let max_iter = this.borrow().cfg.max_iter;
        pcg("stokes velocity cg", apply, precond, r, w, tol, max_iter)
    }

    fn solve_uzawa(&mut self, rhs_u: &[T], rhs_v: &[T], state: &mut State<T>) -> Result<KrylovStats> {
        let grid = self.grid;
        let (nu, nv, np) = (grid.nu(), grid.nv(), grid.np());
        let tol = T::lit(self.cfg.tol);
        let inner_tol = tol * T::lit(1e-2);
        let mut rhs = rhs_u.to_vec();
        rhs.extend_from_slice(rhs_v);

        // Schur right-hand side G^T A^{-1} rhs
        let mut w = [state.u.as_slice(), state.v.as_slice()].concat();
        let mut inner = self.velocity_solve(&rhs, &mut w, inner_tol)?.iterations;
        let mut schur_rhs = vec![T::zero(); np];
        grid.divergence(&w[..nu], &w[nu..], &mut schur_rhs);
        schur_rhs.iter_mut().for_each(|d| *d = -*d);

        let this = std::cell::RefCell::new(&mut *self);
        let mut gp = vec![T::zero(); nu + nv];
        let mut aw = vec![T::zero(); nu + nv];
        let mut inner_failure = None;
        let inner_count = std::cell::Cell::new(0usize);
        let apply = |p: &[T], y: &mut [T]| {
            let (gu, gv) = gp.split_at_mut(nu);
            grid.gradient(p, gu, gv);
            aw.iter_mut().for_each(|x| *x = T::zero());
            match this.borrow_mut().velocity_solve(&gp, &mut aw, inner_tol) {
                Ok(s) => inner_count.set(inner_count.get() + s.iterations),
                Err(e) => inner_failure = Some(e),
            }
            grid.divergence(&aw[..nu], &aw[nu..], y);
            y.iter_mut().for_each(|d| *d = -*d);
        };
        let precond = |r: &[T], z: &mut [T]| this.borrow_mut().precondition_pressure(r, z);
        let mut p = state.p.clone();
        let outer = pcg("stokes uzawa", apply, precond, &schur_rhs, &mut p, tol, np);
        if let Some(e) = inner_failure {
            return Err(e);
        }
        let outer = outer?;
        inner += inner_count.get();

        // velocity from the pressure
        let (gu, gv) = (&mut vec![T::zero(); nu], &mut vec![T::zero(); nv]);
        grid.gradient(&p, gu, gv);
        for i in 0..nu {
            rhs[i] -= gu[i];
        }
        for i in 0..nv {
            rhs[nu + i] -= gv[i];
        }
        inner += self.velocity_solve(&rhs, &mut w, inner_tol)?.iterations;
        state.u.copy_from_slice(&w[..nu]);
        state.v.copy_from_slice(&w[nu..]);
        state.p = p;
        Ok(KrylovStats { iterations: outer.iterations + inner, residual: outer.residual, history: outer.history })
    }
}

/// One implicit Euler step from `state` with a freshly built stepper.
pub fn step_implicit<T: Real>(
    grid: MacGrid,
    state: &State<T>,
    dt: T,
    spec: &OperatorSpec<T>,
    forcing: Forcing,
    cfg: SolverConfig,
) -> Result<State<T>> {
    let mut stepper = StokesStepper::new(grid, spec, dt, cfg)?;
    Ok(stepper.step(state, forcing)?.0)
}

/// Integrates from zero initial data to `t_final` in `steps` steps.
fn extrapolate<T: Real>(older: &State<T>, last: &State<T>) -> State<T> {
    let two = T::lit(2.0);
    let lin = |a: &[T], b: &[T]| -> Vec<T> { a.iter().zip(b).map(|(&a, &b)| two * b - a).collect() };
    State { t: last.t, u: lin(&older.u, &last.u), v: lin(&older.v, &last.v), p: lin(&older.p, &last.p) }
}

pub fn solve_unsteady<T: Real>(
    grid: MacGrid,
    spec: &OperatorSpec<T>,
    forcing: Forcing,
    t_final: T,
    steps: usize,
    cfg: SolverConfig,
) -> Result<Trajectory<T>> {
    if steps < 8 {
        return Err(Error::InvalidArgument(format!("need at least 8 time steps, got {steps}")));
    }
    if !(t_final > T::zero()) || !t_final.is_finite() {
        return Err(Error::InvalidArgument(format!("final time {t_final} must be positive")));
    }
    let dt = t_final / T::from_count(steps);
    let mut stepper = StokesStepper::new(grid, spec, dt, cfg)?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut stats = Vec::with_capacity(steps);
    states.push(State::zero(&grid));
    for n in 0..steps {
        // linear extrapolation in time is a much closer start than the last state
        let (mut next, s) = match n {
            0 => stepper.step(&states[0], forcing)?,
            _ => {
                let guess = extrapolate(&states[n - 1], &states[n]);
                stepper.step_from(&states[n], &guess, forcing)?
            }
        };
        // exact time levels, free of accumulated rounding
        next.t = dt * T::from_count(n + 1);
        states.push(next);
        stats.push(s);
    }
    Ok(Trajectory { grid, dt, label: spec.label(), forcing, states, stats })
}
