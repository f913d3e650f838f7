//! Convergence harness: fine versus homogenized trajectories over a sequence
//! of epsilons, two-scale pairings, corrector-improved gradient errors.
//!
//! [`epsilon_sweep`] keeps at most the homogenized trajectory plus one fine
//! trajectory per worker in memory; every metric of a fine run is computed
//! before its trajectory is dropped.

mod metrics;
mod test_function;

use rayon::prelude::*;

use crate::cell::{solve_all_correctors, CellSolveConfig, CorrectorSet};
use crate::coeff::{ellipticity_estimate, CellSampling, CoefficientField};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stokes::{
    apriori_bound_check, energy_balance, monitored_norms, solve_unsteady, AprioriReport, Forcing, MacGrid,
    MonitoredNorms, OperatorSpec, SolverConfig, Trajectory,
};
use crate::tensor::{assemble_tensor, tensor_ellipticity, EffectiveTensor};

pub use metrics::{
    check_time_grids, corrector_error, fit_rate, interpolate_velocity, l2q_error, limit_pairing, pressure_pairing,
    synthetic_trajectory, two_scale_pairing, GradientErrors, PeriodicBicubic,
};
pub use test_function::{CellPreset, SpacePreset, TestFunction, TimePreset};

/// Errors below this make a sweep degenerate: no rates are fitted.
pub const DEGENERATE_ERROR: f64 = 1e-9;

/// The pairings every sweep reports, in column order: the `y`-independent
/// dipole, the zero-mean `cos(2 pi y1)` weight, its square, and a `tau`
/// oscillation. The dipole rather than the plain bump carries them because
/// the standard forcing drives a velocity the bump pairs to zero by symmetry.
pub fn standard_test_functions<T: Real>(t_final: T) -> Result<Vec<TestFunction<T>>> {
    Ok(vec![
        TestFunction::dipole(CellPreset::One, t_final)?,
        TestFunction::dipole(CellPreset::Cos1, t_final)?,
        TestFunction::dipole(CellPreset::Cos1Sq, t_final)?,
        TestFunction::new(SpacePreset::Dipole, CellPreset::One, TimePreset::CosSq, t_final)?,
    ])
}

/// Index of the `y`-independent preset in [`standard_test_functions`].
pub const PAIRING_PLAIN: usize = 0;
/// Index of the zero-`Y`-mean preset.
pub const PAIRING_ZERO_MEAN: usize = 1;

/// Pressure test function of the sweep.
pub const PRESSURE_PHI: SpacePreset = SpacePreset::Cosine;

#[derive(Clone, Debug)]
pub struct SweepConfig<T> {
    pub coefficients: CoefficientField<T>,
    pub cell: CellSolveConfig,
    /// Cells per edge of the macroscopic grid, shared by all runs.
    pub n: usize,
    pub t_final: T,
    pub steps: usize,
    /// Strictly decreasing.
    pub eps: Vec<T>,
    pub forcing: Forcing,
    pub solver: SolverConfig,
    /// Fine runs in flight at once; each holds one trajectory in memory.
    pub threads: usize,
}

impl<T: Real> SweepConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.cell.validate()?;
        MacGrid::new(self.n)?;
        if self.eps.is_empty() {
            return Err(Error::InvalidArgument("empty epsilon list".into()));
        }
        for w in self.eps.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::InvalidArgument(format!("epsilons must strictly decrease: {} then {}", w[0], w[1])));
            }
        }
        for &e in &self.eps {
            if !(e > T::zero() && e < T::one()) {
                return Err(Error::InvalidArgument(format!("epsilon = {e} must lie in (0, 1)")));
            }
            if e * T::from_count(self.n) < T::lit(16.0 - 1e-9) {
                return Err(Error::InvalidArgument(format!(
                    "epsilon = {e} is under-resolved on n = {}: need at least 16 cells per period",
                    self.n
                )));
            }
        }
        if self.threads == 0 {
            return Err(Error::InvalidArgument("threads must be positive".into()));
        }
        Ok(())
    }
}

/// Diagnostics shared by fine and homogenized runs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary<T> {
    pub energy_defect: T,
    pub apriori: AprioriReport<T>,
    pub norms: MonitoredNorms<T>,
    pub max_divergence: f64,
    pub max_pressure_mean: T,
    pub iterations: usize,
}

/// Energy, a-priori and norm diagnostics of one trajectory; `alpha` is the
/// ellipticity constant of its operator.
pub fn run_summary<T: Real>(traj: &Trajectory<T>, spec: &OperatorSpec<T>, alpha: T) -> Result<RunSummary<T>> {
    let balance = energy_balance(traj, spec, traj.forcing)?;
    Ok(RunSummary {
        energy_defect: balance.defect,
        apriori: apriori_bound_check(traj, traj.forcing, alpha)?,
        norms: monitored_norms(traj),
        max_divergence: traj.stats.iter().map(|s| s.divergence).fold(0.0, f64::max),
        max_pressure_mean: traj.states.iter().map(|s| s.pressure_mean().magnitude()).fold(T::zero(), T::max),
        iterations: traj.stats.iter().map(|s| s.iterations).sum(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow<T> {
    pub eps: T,
    pub run: RunSummary<T>,
    pub l2q_error: T,
    pub gradient: GradientErrors<T>,
    /// Per test function, per velocity component.
    pub pairings: Vec<[T; 2]>,
    /// `(int p_eps phi, int p_0 phi)`
    pub pressure: (T, T),
}

impl<T: Real> SweepRow<T> {
    pub fn pressure_gap(&self) -> T {
        (self.pressure.0 - self.pressure.1).magnitude()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport<T> {
    pub coefficients: String,
    pub n: usize,
    pub n_cell: usize,
    pub steps: usize,
    pub t_final: T,
    pub forcing: Forcing,
    pub tensor: EffectiveTensor<T>,
    /// Smallest eigenvalue of the effective tensor.
    pub alpha0: T,
    /// Ellipticity constant of the coefficient field.
    pub alpha: T,
    pub homog: RunSummary<T>,
    pub test_functions: Vec<TestFunction<T>>,
    /// Limit pairing per test function.
    pub limits: Vec<[T; 2]>,
    pub rows: Vec<SweepRow<T>>,
    pub l2q_rate: Option<T>,
    pub corrector_rate: Option<T>,
    /// Fine and homogenized runs coincide; rates are meaningless.
    pub degenerate: bool,
    /// Reason the sweep stopped early, if it did.
    pub incomplete: Option<String>,
}

impl<T: Real> SweepReport<T> {
    pub fn eps(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.eps).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.incomplete.is_none()
    }
}

fn component_norm<T: Real>(p: [T; 2]) -> T {
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

/// `|pairing - limit|` for one test function of one row, Euclidean over the
/// two velocity components.
pub fn pairing_gap<T: Real>(report: &SweepReport<T>, row: usize, test: usize) -> T {
    let p = report.rows[row].pairings[test];
    let l = report.limits[test];
    component_norm([p[0] - l[0], p[1] - l[1]])
}

/// `|pairing|` for one test function of one row.
pub fn pairing_magnitude<T: Real>(report: &SweepReport<T>, row: usize, test: usize) -> T {
    component_norm(report.rows[row].pairings[test])
}

/// Data computed once and shared by every fine run.
struct Shared<T: Real> {
    correctors: CorrectorSet<T>,
    homog: Trajectory<T>,
    tests: Vec<TestFunction<T>>,
    alpha: T,
}

fn fine_row<T: Real>(cfg: &SweepConfig<T>, shared: &Shared<T>, eps: T) -> Result<SweepRow<T>> {
    let grid = MacGrid::new(cfg.n)?;
    let spec = OperatorSpec::Fine { a: cfg.coefficients, eps };
    let traj = solve_unsteady(grid, &spec, cfg.forcing, cfg.t_final, cfg.steps, cfg.solver)?;
    let run = run_summary(&traj, &spec, shared.alpha)?;
    let pairings = shared.tests.iter().map(|psi| two_scale_pairing(&traj, psi, eps)).collect::<Result<_>>()?;
    Ok(SweepRow {
        eps,
        run,
        l2q_error: l2q_error(&traj, &shared.homog)?,
        gradient: corrector_error(&traj, &shared.homog, &shared.correctors, eps)?,
        pairings,
        pressure: pressure_pairing(&traj, &shared.homog, PRESSURE_PHI)?,
    })
}

pub fn epsilon_sweep<T: Real>(cfg: &SweepConfig<T>) -> Result<SweepReport<T>> {
    epsilon_sweep_logged(cfg, &|_| {})
}

/// [`epsilon_sweep`] reporting progress lines through `log`.
///
/// Failures before the fine runs (cell problems, tensor, homogenized solve)
/// are returned as errors. A failing fine run ends the sweep with the rows
/// completed before it and the report flagged incomplete.
pub fn epsilon_sweep_logged<T: Real>(cfg: &SweepConfig<T>, log: &(dyn Fn(&str) + Sync)) -> Result<SweepReport<T>> {
    cfg.validate()?;
    let grid = MacGrid::new(cfg.n)?;
    let alpha = ellipticity_estimate(&cfg.coefficients, &CellSampling::new(cfg.cell.n_cell)?)?;

    log(&format!("cell problems on {0}x{0}", cfg.cell.n_cell));
    let correctors = solve_all_correctors(&cfg.coefficients, &cfg.cell)?;
    let (tensor, _) = assemble_tensor(&cfg.coefficients, &correctors)?;
    let alpha0 = tensor_ellipticity(&tensor)?;

    log(&format!("homogenized solve, n = {}, {} steps", cfg.n, cfg.steps));
    let homog_spec = OperatorSpec::Homog { q: tensor.clone() };
    let homog = solve_unsteady(grid, &homog_spec, cfg.forcing, cfg.t_final, cfg.steps, cfg.solver)?;
    let homog_summary = run_summary(&homog, &homog_spec, alpha0)?;
    let tests = standard_test_functions(cfg.t_final)?;
    let limits = tests.iter().map(|psi| limit_pairing(&homog, psi)).collect();
    let shared = Shared { correctors, homog, tests, alpha };

    let run = |&eps: &T| -> Result<SweepRow<T>> {
        log(&format!("fine solve, eps = {eps}"));
        let row = fine_row(cfg, &shared, eps);
        if let Ok(r) = &row {
            log(&format!("eps = {eps}: L2(Q) error {:.6e}, corrector error {:.6e}", r.l2q_error, r.gradient.corrector));
        }
        row
    };
    let results: Vec<Result<SweepRow<T>>> = if cfg.threads == 1 {
        cfg.eps.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| cfg.eps.par_iter().map(run).collect())
    };

    let mut rows = Vec::with_capacity(results.len());
    let mut incomplete = None;
    for (r, &eps) in results.into_iter().zip(&cfg.eps) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                incomplete = Some(format!("fine solve at eps = {eps} failed: {e}"));
                break;
            }
        }
    }

    let l2q: Vec<T> = rows.iter().map(|r| r.l2q_error).collect();
    let degenerate = cfg.coefficients.preset().is_constant() || l2q.iter().all(|e| e.as_f64() <= DEGENERATE_ERROR);
    let eps: Vec<T> = rows.iter().map(|r| r.eps).collect();
    let rate = |errs: Vec<T>| if degenerate { None } else { fit_rate(&eps, &errs).ok() };
    let l2q_rate = rate(l2q);
    let corrector_rate = rate(rows.iter().map(|r| r.gradient.corrector).collect());

    Ok(SweepReport {
        coefficients: cfg.coefficients.to_string(),
        n: cfg.n,
        n_cell: cfg.cell.n_cell,
        steps: cfg.steps,
        t_final: cfg.t_final,
        forcing: cfg.forcing,
        tensor,
        alpha0,
        alpha,
        homog: homog_summary,
        test_functions: shared.tests,
        limits,
        rows,
        l2q_rate,
        corrector_rate,
        degenerate,
        incomplete,
    })
}
