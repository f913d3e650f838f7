//! `stokes-homog`: cell problems, effective tensor, fine and homogenized
//! solves and epsilon sweeps from a flat key=value configuration.
//!
//! Exit codes: 0 success, 1 invalid input, 2 solver failure or incomplete
//! sweep. Numeric results go to CSV files under the output directory; stdout
//! carries a short human-readable summary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stokes_homog::cell::{solve_all_correctors, CorrectorSet};
use stokes_homog::coeff::{ellipticity_estimate, CellSampling};
use stokes_homog::io::config::{format_number, parse_config, ConfigError, RunConfig};
use stokes_homog::io::field_dump::{dump_correctors, dump_field, load_correctors, state_dumps, DumpError};
use stokes_homog::io::report::{
    cell_stats_csv, plot_script, run_summary_csv, sweep_csv, sweep_summary_csv, tensor_csv, trajectory_csv,
    write_report, SidecarLog,
};
use stokes_homog::stokes::{solve_unsteady, MacGrid, OperatorSpec, Trajectory};
use stokes_homog::tensor::{assemble_tensor, tensor_ellipticity, tensor_symmetry_report, EffectiveTensor};
use stokes_homog::twoscale::{epsilon_sweep_logged, run_summary, RunSummary, SweepReport};
use stokes_homog::Error;

const THREADS_VAR: &str = "STOKES_HOMOG_THREADS";

#[derive(Parser)]
#[command(name = "stokes-homog", version, about = "Periodic homogenization of unsteady Stokes-type problems")]
struct Cli {
    /// Run configuration (key = value lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `out` from the configuration
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the four cell problems and dump the correctors
    CellSolve,
    /// Assemble the effective tensor, loading dumped correctors when present
    Tensor,
    /// Integrate the fine-scale problem at one epsilon
    SolveFine {
        #[arg(long)]
        eps: String,
    },
    /// Integrate the homogenized problem
    SolveHomog,
    /// Run the full epsilon sweep from the configuration
    Sweep,
    /// Print the results of a finished sweep
    Report,
}

enum Failure {
    Invalid(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Solver(_) => 2,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_solver_failure() {
            Failure::Solver(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<DumpError> for Failure {
    fn from(e: DumpError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Invalid(m) => eprintln!("error: {m}"),
                Failure::Solver(m) => eprintln!("solver failure: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

struct Context {
    cfg: RunConfig,
    out: PathBuf,
}

impl Context {
    fn load(cli: &Cli) -> Result<Self, Failure> {
        let path = cli.config.as_ref().ok_or_else(|| Failure::Invalid("--config is required".into()))?;
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", path.display())))?;
        let cfg = parse_config(&text)?;
        let out = cli.out.clone().unwrap_or_else(|| cfg.out.clone());
        fs::create_dir_all(&out)?;
        Ok(Context { cfg, out })
    }

    fn log(&self) -> Result<SidecarLog, Failure> {
        Ok(SidecarLog::open(&self.out.join("run.log"))?)
    }

    fn corrector_dir(&self) -> PathBuf {
        self.out.join("correctors")
    }
}

fn run(cli: Cli) -> Outcome {
    if let Command::Report = cli.command {
        let out = match (&cli.out, &cli.config) {
            (Some(o), _) => o.clone(),
            (None, Some(_)) => Context::load(&cli)?.out,
            (None, None) => return Err(Failure::Invalid("report needs --out or --config".into())),
        };
        return report(&out);
    }
    let ctx = Context::load(&cli)?;
    match &cli.command {
        Command::CellSolve => cell_solve(&ctx),
        Command::Tensor => tensor(&ctx).map(|_| ()),
        Command::SolveFine { eps } => solve_fine(&ctx, eps),
        Command::SolveHomog => solve_homog(&ctx),
        Command::Sweep => sweep(&ctx),
        Command::Report => unreachable!(),
    }
}

fn threads() -> Result<usize, Failure> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Failure::Invalid(format!("{THREADS_VAR} = `{v}` is not a positive integer"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn cell_solve(ctx: &Context) -> Outcome {
    let log = ctx.log()?;
    let a = ctx.cfg.coefficients()?;
    log.log(&format!("cell-solve {a} on {0}x{0}", ctx.cfg.n_cell));
    let chi = solve_all_correctors(&a, &ctx.cfg.cell_config()?)?;
    dump_correctors(&ctx.corrector_dir(), &chi, &a.to_string())?;
    write_report(&ctx.out, "cell_stats.csv", &cell_stats_csv(&chi))?;
    log.log("cell-solve done");
    println!("cell problems for {a} on a {0}x{0} lattice", ctx.cfg.n_cell);
    for (f, st) in chi.fields.iter().zip(&chi.stats) {
        println!(
            "  chi_{}{}: {:>5} iterations, residual {:.2e}, max norm {:.3e}",
            f.i,
            f.k,
            st.iterations,
            st.residual,
            f.max_norm()
        );
    }
    println!("correctors written to {}", ctx.corrector_dir().display());
    Ok(())
}

/// Dumped correctors when they match the configuration, a fresh solve
/// otherwise.
fn correctors(ctx: &Context, log: &SidecarLog) -> Result<CorrectorSet<f64>, Failure> {
    let a = ctx.cfg.coefficients()?;
    match load_correctors::<f64>(&ctx.corrector_dir(), &a.to_string(), ctx.cfg.n_cell) {
        Ok(chi) => {
            log.log(&format!("loaded correctors from {}", ctx.corrector_dir().display()));
            Ok(chi)
        }
        Err(e) => {
            log.log(&format!("no usable corrector dumps ({e}); solving in-process"));
            Ok(solve_all_correctors(&a, &ctx.cfg.cell_config()?)?)
        }
    }
}

fn tensor(ctx: &Context) -> Result<EffectiveTensor<f64>, Failure> {
    let log = ctx.log()?;
    let a = ctx.cfg.coefficients()?;
    let chi = correctors(ctx, &log).map_err(|f| match f {
        Failure::Solver(m) => Failure::Invalid(format!(
            "no corrector dumps in {} and the in-process cell solve failed: {m}",
            ctx.corrector_dir().display()
        )),
        other => other,
    })?;
    let (direct, energy) = assemble_tensor(&a, &chi)?;
    let alpha0 = tensor_ellipticity(&direct)?;
    let sym = tensor_symmetry_report(&direct);
    let gap = direct.consistency_gap.unwrap_or_else(|| direct.max_abs_diff(&energy));
    write_report(&ctx.out, "tensor.csv", &tensor_csv(&direct))?;
    write_report(&ctx.out, "tensor_energy.csv", &tensor_csv(&energy))?;
    let summary = [
        ("coefficients", a.to_string()),
        ("n_cell", ctx.cfg.n_cell.to_string()),
        ("alpha0", format!("{alpha0:e}")),
        ("consistency_gap", format!("{gap:e}")),
        ("major_symmetry_violation", format!("{:e}", sym.major_violation)),
        ("minor_symmetry_violation", format!("{:e}", sym.minor_violation)),
    ];
    let rows = summary.iter().map(|(k, v)| vec![k.to_string(), v.clone()]);
    write_report(&ctx.out, "tensor_summary.csv", &stokes_homog::io::report::render_csv(&["key", "value"], rows))?;
    log.log("tensor done");

    println!("effective tensor for {a} (n_cell = {})", ctx.cfg.n_cell);
    for (i, j, k, h, q) in direct.entries() {
        println!("  q_{i}{j}{k}{h} = {q:+.10e}");
    }
    println!("alpha0 = {alpha0:.6e}, direct/energy gap = {gap:.2e}, symmetry violation = {:.2e}", sym.major_violation);
    Ok(direct)
}

fn write_run(dir: &Path, traj: &Trajectory<f64>, summary: &RunSummary<f64>, stride: usize) -> Outcome {
    write_report(dir, "trajectory.csv", &trajectory_csv(traj))?;
    write_report(dir, "summary.csv", &run_summary_csv(&traj.label, summary))?;
    let snaps = dir.join("snapshots");
    fs::create_dir_all(&snaps)?;
    let last = traj.steps();
    for (n, state) in traj.states.iter().enumerate() {
        if n == last || (stride > 0 && n % stride == 0) {
            for (part, dump) in ["u", "v", "p"].iter().zip(state_dumps(&traj.grid, state, &traj.label)) {
                dump_field(&snaps.join(format!("{part}_{n:05}.field")), &dump)?;
            }
        }
    }
    Ok(())
}

fn print_run(title: &str, traj: &Trajectory<f64>, s: &RunSummary<f64>, dir: &Path) {
    println!("{title}: {} steps to t = {}", traj.steps(), traj.final_time());
    println!("  energy defect      {:.3e}", s.energy_defect);
    println!("  max divergence     {:.3e}", s.max_divergence);
    println!("  velocity H1        {:.6e}", s.norms.velocity_h1);
    println!("  pressure L2(Q)     {:.6e}", s.norms.pressure_l2q);
    println!("  acceleration       {:.6e}", s.norms.acceleration);
    println!("  a-priori bound     {:.3e} <= {:.3e}: {}", s.apriori.lhs, s.apriori.rhs, s.apriori.holds);
    println!("  solver iterations  {}", s.iterations);
    println!("results in {}", dir.display());
}

fn solve_fine(ctx: &Context, eps: &str) -> Outcome {
    let eps = stokes_homog::io::config::parse_number(eps)
        .ok_or_else(|| Failure::Invalid(format!("cannot parse --eps `{eps}`")))?;
    ctx.cfg.check_eps(eps)?;
    let log = ctx.log()?;
    let a = ctx.cfg.coefficients()?;
    let alpha = ellipticity_estimate(&a, &CellSampling::new(ctx.cfg.n_cell)?)?;
    let grid = MacGrid::new(ctx.cfg.n)?;
    let spec = OperatorSpec::Fine { a, eps };
    log.log(&format!("solve-fine eps = {}", format_number(eps)));
    let traj = solve_unsteady(grid, &spec, ctx.cfg.forcing, ctx.cfg.t_final, ctx.cfg.steps, ctx.cfg.solver_config())?;
    let summary = run_summary(&traj, &spec, alpha)?;
    let dir = ctx.out.join(format!("fine_eps_{eps}"));
    write_run(&dir, &traj, &summary, ctx.cfg.stride)?;
    log.log("solve-fine done");
    print_run(&format!("fine problem, eps = {}", format_number(eps)), &traj, &summary, &dir);
    Ok(())
}

fn solve_homog(ctx: &Context) -> Outcome {
    let log = ctx.log()?;
    let a = ctx.cfg.coefficients()?;
    let chi = correctors(ctx, &log)?;
    let (q, _) = assemble_tensor(&a, &chi)?;
    let alpha0 = tensor_ellipticity(&q)?;
    let grid = MacGrid::new(ctx.cfg.n)?;
    let spec = OperatorSpec::Homog { q };
    log.log("solve-homog");
    let traj = solve_unsteady(grid, &spec, ctx.cfg.forcing, ctx.cfg.t_final, ctx.cfg.steps, ctx.cfg.solver_config())?;
    let summary = run_summary(&traj, &spec, alpha0)?;
    let dir = ctx.out.join("homog");
    write_run(&dir, &traj, &summary, ctx.cfg.stride)?;
    log.log("solve-homog done");
    print_run("homogenized problem", &traj, &summary, &dir);
    Ok(())
}

fn sweep(ctx: &Context) -> Outcome {
    let log = ctx.log()?;
    let cfg = ctx.cfg.sweep_config(threads()?)?;
    log.log(&format!("sweep {} over {} scales, {} worker(s)", cfg.coefficients, cfg.eps.len(), cfg.threads));
    let report = epsilon_sweep_logged(&cfg, &|m: &str| {
        log.log(m);
        eprintln!("{m}");
    })?;
    write_report(&ctx.out, "sweep.csv", &sweep_csv(&report))?;
    write_report(&ctx.out, "summary.csv", &sweep_summary_csv(&report))?;
    write_report(&ctx.out, "tensor.csv", &tensor_csv(&report.tensor))?;
    write_report(&ctx.out, "sweep.gp", &plot_script("sweep.csv"))?;
    log.log("sweep done");
    print_sweep(&report);
    println!("results in {}", ctx.out.display());
    match &report.incomplete {
        Some(reason) => Err(Failure::Solver(format!("sweep incomplete: {reason}"))),
        None => Ok(()),
    }
}

fn print_sweep(r: &SweepReport<f64>) {
    println!("sweep for {} on n = {}, M = {}, T = {}", r.coefficients, r.n, r.steps, r.t_final);
    println!("alpha0 = {:.6e}", r.alpha0);
    println!("{:>10} {:>12} {:>12} {:>12} {:>12} {:>10}", "eps", "L2(Q) err", "corrector", "plain grad", "p gap", "defect");
    for row in &r.rows {
        println!(
            "{:>10} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>10.2e}",
            format_number(row.eps),
            row.l2q_error,
            row.gradient.corrector,
            row.gradient.plain,
            row.pressure_gap(),
            row.run.energy_defect
        );
    }
    if r.degenerate {
        println!("degenerate sweep: errors vanish, no rate fitted");
    } else {
        let show = |x: Option<f64>| x.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into());
        println!("fitted rates: L2(Q) {}, corrector {}", show(r.l2q_rate), show(r.corrector_rate));
    }
    if let Some(reason) = &r.incomplete {
        println!("INCOMPLETE: {reason}");
    }
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), Failure> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    let header = rd
        .headers()
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?
        .iter()
        .map(String::from)
        .collect();
    let rows = rd
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    Ok((header, rows))
}

fn report(out: &Path) -> Outcome {
    let (_, summary) = read_csv(&out.join("summary.csv"))?;
    let get = |key: &str| summary.iter().find(|r| r[0] == key).map(|r| r[1].clone()).unwrap_or_default();
    let (header, rows) = read_csv(&out.join("sweep.csv"))?;
    let col = |name: &str| header.iter().position(|h| h == name);
    println!("sweep for {} on n = {}, M = {}", get("coefficients"), get("n"), get("steps"));
    let shown = ["eps", "l2q_error", "corrector_error", "gradient_error", "pressure_gap", "energy_defect"];
    println!("{}", shown.map(|s| format!("{s:>16}")).join(" "));
    for row in &rows {
        let cells = shown.map(|s| {
            let raw = col(s).and_then(|c| row.get(c)).cloned().unwrap_or_default();
            match raw.parse::<f64>() {
                Ok(x) if s == "eps" => format_number(x),
                Ok(x) => format!("{x:.4e}"),
                Err(_) => raw,
            }
        });
        println!("{}", cells.map(|s| format!("{s:>16}")).join(" "));
    }
    println!("l2q_rate = {}, corrector_rate = {}, degenerate = {}", get("l2q_rate"), get("corrector_rate"), get("degenerate"));
    if get("complete") != "true" {
        println!("INCOMPLETE: {}", get("incomplete_reason"));
        return Err(Failure::Solver("the recorded sweep is incomplete".into()));
    }
    Ok(())
}
