//! CSV reports, plot scripts and the timestamped sidecar log.
//!
//! CSV bodies carry no timestamps or host details, so identical
//! configurations give identical bytes. Floats use the shortest exponent form
//! that parses back to the same value.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::cell::CorrectorSet;
use crate::stokes::Trajectory;
use crate::tensor::EffectiveTensor;
use crate::twoscale::{RunSummary, SweepReport};
use crate::Real;

/// Renders a header and rows as CSV.
pub fn render_csv<S: AsRef<str>>(header: &[S], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    // Writing into memory cannot fail.
    w.write_record(header.iter().map(|h| h.as_ref())).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 fields")
}

pub fn num<T: Real>(x: T) -> String {
    format!("{:e}", x.as_f64())
}

fn opt<T: Real>(x: Option<T>) -> String {
    x.map(num).unwrap_or_default()
}

/// `i,j,k,h,q` with 1-based indices.
pub fn tensor_csv<T: Real>(q: &EffectiveTensor<T>) -> String {
    let rows = q.entries().into_iter().map(|(i, j, k, h, v)| {
        vec![i.to_string(), j.to_string(), k.to_string(), h.to_string(), num(v)]
    });
    render_csv(&["i", "j", "k", "h", "q"], rows)
}

pub fn cell_stats_csv<T: Real>(chi: &CorrectorSet<T>) -> String {
    let rows = chi.fields.iter().enumerate().map(|(idx, f)| {
        let (it, res) = chi.stats.get(idx).map(|st| (st.iterations.to_string(), num(st.residual))).unwrap_or_default();
        vec![f.i.to_string(), f.k.to_string(), it, res, num(f.max_norm()), num(f.l2_norm()), num(f.divergence_max())]
    });
    render_csv(&["i", "k", "iterations", "residual", "max_norm", "l2_norm", "divergence_max"], rows)
}

/// One row per time step.
pub fn trajectory_csv<T: Real>(traj: &Trajectory<T>) -> String {
    let rows = traj.states[1..].iter().zip(&traj.stats).enumerate().map(|(n, (state, st))| {
        let kinetic = traj.grid.velocity_norm_sq(&state.u, &state.v) * T::lit(0.5);
        vec![
            (n + 1).to_string(),
            num(state.t),
            st.iterations.to_string(),
            num(st.residual),
            num(st.divergence),
            num(kinetic),
            num(state.pressure_mean()),
        ]
    });
    render_csv(&["step", "t", "iterations", "residual", "divergence", "kinetic_energy", "pressure_mean"], rows)
}

fn summary_rows<T: Real>(prefix: &str, r: &RunSummary<T>) -> Vec<(String, String)> {
    [
        ("energy_defect", num(r.energy_defect)),
        ("apriori_lhs", num(r.apriori.lhs)),
        ("apriori_rhs", num(r.apriori.rhs)),
        ("apriori_holds", r.apriori.holds.to_string()),
        ("velocity_h1", num(r.norms.velocity_h1)),
        ("pressure_l2q", num(r.norms.pressure_l2q)),
        ("acceleration", num(r.norms.acceleration)),
        ("max_divergence", num(r.max_divergence)),
        ("max_pressure_mean", num(r.max_pressure_mean)),
        ("iterations", r.iterations.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (format!("{prefix}{k}"), v))
    .collect()
}

fn key_value(rows: &[(String, String)]) -> String {
    render_csv(&["key", "value"], rows.iter().map(|(k, v)| vec![k.clone(), v.clone()]))
}

/// `key,value` summary of a single run.
pub fn run_summary_csv<T: Real>(label: &str, r: &RunSummary<T>) -> String {
    let mut rows = vec![("run".to_string(), label.to_string())];
    rows.extend(summary_rows("", r));
    key_value(&rows)
}

/// Columns of [`sweep_csv`] before the per-test-function pairings.
pub const SWEEP_COLUMNS: [&str; 17] = [
    "eps",
    "l2q_error",
    "corrector_error",
    "gradient_error",
    "pressure_fine",
    "pressure_homog",
    "pressure_gap",
    "velocity_h1",
    "pressure_l2q",
    "acceleration",
    "apriori_lhs",
    "apriori_rhs",
    "apriori_holds",
    "energy_defect",
    "max_divergence",
    "max_pressure_mean",
    "iterations",
];

/// One row per epsilon. After [`SWEEP_COLUMNS`] come, per test function,
/// `pair_<name>_1,pair_<name>_2,limit_<name>_1,limit_<name>_2`.
pub fn sweep_csv<T: Real>(report: &SweepReport<T>) -> String {
    let mut header: Vec<String> = SWEEP_COLUMNS.iter().map(|c| c.to_string()).collect();
    for psi in &report.test_functions {
        let name = psi.name();
        for c in ["pair", "limit"] {
            header.push(format!("{c}_{name}_1"));
            header.push(format!("{c}_{name}_2"));
        }
    }
    let rows = report.rows.iter().map(|row| {
        let r = &row.run;
        let mut cells = vec![
            num(row.eps),
            num(row.l2q_error),
            num(row.gradient.corrector),
            num(row.gradient.plain),
            num(row.pressure.0),
            num(row.pressure.1),
            num(row.pressure_gap()),
            num(r.norms.velocity_h1),
            num(r.norms.pressure_l2q),
            num(r.norms.acceleration),
            num(r.apriori.lhs),
            num(r.apriori.rhs),
            r.apriori.holds.to_string(),
            num(r.energy_defect),
            num(r.max_divergence),
            num(r.max_pressure_mean),
            r.iterations.to_string(),
        ];
        for (p, l) in row.pairings.iter().zip(&report.limits) {
            cells.extend([num(p[0]), num(p[1]), num(l[0]), num(l[1])]);
        }
        cells
    });
    render_csv(&header, rows)
}

/// `key,value` description of the sweep as a whole.
pub fn sweep_summary_csv<T: Real>(report: &SweepReport<T>) -> String {
    let mut rows: Vec<(String, String)> = vec![
        ("coefficients".into(), report.coefficients.clone()),
        ("n".into(), report.n.to_string()),
        ("n_cell".into(), report.n_cell.to_string()),
        ("steps".into(), report.steps.to_string()),
        ("t_final".into(), num(report.t_final)),
        ("forcing".into(), report.forcing.name().into()),
        ("alpha".into(), num(report.alpha)),
        ("alpha0".into(), num(report.alpha0)),
        ("eps_completed".into(), report.rows.len().to_string()),
        ("l2q_rate".into(), opt(report.l2q_rate)),
        ("corrector_rate".into(), opt(report.corrector_rate)),
        ("degenerate".into(), report.degenerate.to_string()),
        ("complete".into(), report.is_complete().to_string()),
        ("incomplete_reason".into(), report.incomplete.clone().unwrap_or_default()),
    ];
    rows.extend(summary_rows("homog_", &report.homog));
    key_value(&rows)
}

/// Gnuplot script for the error curves in `sweep.csv`.
pub fn plot_script(csv_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set logscale xy\n\
         set key top left\n\
         set xlabel 'eps'\n\
         set ylabel 'error'\n\
         set terminal pngcairo size 800,600\n\
         set output 'sweep.png'\n\
         plot '{csv_name}' using 1:2 skip 1 with linespoints title 'L2(Q) velocity error', \\\n\
         \x20    '' using 1:3 skip 1 with linespoints title 'corrector gradient error', \\\n\
         \x20    '' using 1:4 skip 1 with linespoints title 'plain gradient error', \\\n\
         \x20    '' using 1:(abs($7)) skip 1 with linespoints title 'pressure gap'\n"
    )
}

/// Appends timestamped progress lines to a file next to the reports.
pub struct SidecarLog {
    file: Mutex<File>,
    path: PathBuf,
}

impl SidecarLog {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(SidecarLog { file: Mutex::new(file), path: path.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn log(&self, message: &str) {
        let t = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
        let line = format!("{}.{:03} {message}\n", t.as_secs(), t.subsec_millis());
        if let Ok(mut f) = self.file.lock() {
            // Logging must never abort a run.
            let _ = f.write_all(line.as_bytes());
        }
    }
}

/// Writes `text` to `dir/name`, creating `dir` first.
pub fn write_report(dir: &Path, name: &str, text: &str) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}
