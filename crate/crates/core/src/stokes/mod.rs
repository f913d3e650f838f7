//! Unsteady Stokes-type problems on the unit square with no-slip walls,
//! discretized on a staggered grid and integrated by implicit Euler.

mod diagnostics;
mod fast;
mod forcing;
mod grid;
mod operator;
mod solver;

pub use diagnostics::{
    apriori_bound_check, energy_balance, monitored_norms, poincare_constant, AprioriReport, EnergyBalance,
    MonitoredNorms,
};
pub use fast::FastSolver;
pub use forcing::Forcing;
pub use grid::{MacGradients, MacGrid};
pub use operator::{apply_fine_operator, apply_homog_operator, OperatorSpec, TensorOperator};
pub use solver::{
    solve_unsteady, step_implicit, SaddleSolver, SolverConfig, State, StepStats, StokesStepper, Trajectory,
};
