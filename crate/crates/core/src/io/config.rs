//! Flat `key = value` run configuration.
//!
//! ```text
//! # layered medium, four scales
//! preset = layered
//! kappa = 4
//! n = 512
//! eps = 1/4, 1/8, 1/16, 1/32
//! ```
//!
//! Blank lines and `#` comments are ignored. Every key maps to one
//! [`RunConfig`] field; all problems in a file are reported together.

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::cell::CellSolveConfig;
use crate::coeff::{make_preset, CoefficientField};
use crate::stokes::{Forcing, SaddleSolver, SolverConfig};
use crate::twoscale::SweepConfig;
use crate::{Error, Result};

/// Cells of the fine grid per period of the coefficients must be a multiple
/// of this, so the microstructure is sampled identically at every scale.
pub const RESONANCE: usize = 16;

const PARAM_KEYS: [&str; 4] = ["c", "kappa", "beta", "s"];

const KEYS: [&str; 16] = [
    "preset", "c", "kappa", "beta", "s", "n_cell", "cell_tol", "n", "T", "M", "eps", "forcing", "out", "stride",
    "solver", "solver_tol",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: String,
    /// Preset parameters in the order `make_preset` expects.
    pub params: Vec<f64>,
    pub n_cell: usize,
    pub cell_tol: f64,
    /// Fine grid cells per side of the unit square.
    pub n: usize,
    pub t_final: f64,
    pub steps: usize,
    pub eps: Vec<f64>,
    pub forcing: Forcing,
    pub out: PathBuf,
    /// Snapshot every `stride` steps; 0 keeps only the final state.
    pub stride: usize,
    pub solver: SaddleSolver,
    pub solver_tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// Every problem found in a configuration.
#[derive(Clone, Debug, PartialEq, Error)]
#[error("invalid configuration:{}", render(.issues))]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

fn render(issues: &[ConfigIssue]) -> String {
    issues.iter().map(|i| format!("\n  {i}")).collect()
}

impl ConfigError {
    pub fn single(message: impl Into<String>) -> Self {
        ConfigError { issues: vec![ConfigIssue { line: None, message: message.into() }] }
    }

    /// True if some issue mentions `needle`.
    pub fn mentions(&self, needle: &str) -> bool {
        self.issues.iter().any(|i| i.message.contains(needle))
    }
}

/// Parses a number or a fraction `a/b`.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            (b != 0.0).then(|| a / b)
        }
        None => s.parse().ok(),
    }
}

/// `1/k` when that is exactly `x`, the shortest round-trip decimal otherwise.
pub fn format_number(x: f64) -> String {
    if x > 0.0 && x < 1.0 {
        let k = (1.0 / x).round();
        if k < 1e15 && 1.0 / k == x {
            return format!("1/{k}");
        }
    }
    format!("{x}")
}

/// `eps * n` is a positive multiple of [`RESONANCE`].
pub fn resonance_ok(eps: f64, n: usize) -> bool {
    let cells = eps * n as f64 / RESONANCE as f64;
    let k = cells.round();
    k >= 1.0 && (cells - k).abs() <= 1e-9 * k
}

fn preset_keys(preset: &str) -> Option<&'static [&'static str]> {
    match preset {
        "constant" => Some(&["c"]),
        "layered" => Some(&["kappa"]),
        "trig" => Some(&["beta"]),
        "checkerboard_smooth" => Some(&["kappa", "s"]),
        _ => None,
    }
}

struct Entry {
    line: usize,
    value: String,
}

struct Parser {
    entries: Vec<(String, Entry)>,
    issues: Vec<ConfigIssue>,
}

impl Parser {
    fn issue(&mut self, line: Option<usize>, message: String) {
        self.issues.push(ConfigIssue { line, message });
    }

    fn raw(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, e)| e)
    }

    fn get<V>(&mut self, key: &str, default: Option<V>, parse: impl Fn(&str) -> Option<V>) -> Option<V> {
        match self.raw(key) {
            None => {
                if default.is_none() {
                    self.issue(None, format!("missing required key `{key}`"));
                }
                default
            }
            Some(e) => {
                let (line, value) = (e.line, e.value.clone());
                let parsed = parse(&value);
                if parsed.is_none() {
                    self.issue(Some(line), format!("cannot parse `{key}` value `{value}`"));
                }
                parsed
            }
        }
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.raw(key).map(|e| e.line)
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut p = Parser { entries: Vec::new(), issues: Vec::new() };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            p.issue(Some(line), format!("expected `key = value`, found `{content}`"));
            continue;
        };
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        if !KEYS.contains(&key.as_str()) {
            p.issue(Some(line), format!("unknown key `{key}`"));
            continue;
        }
        if let Some(first) = p.line_of(&key) {
            p.issue(Some(line), format!("duplicate key `{key}` on lines {first} and {line}"));
            continue;
        }
        p.entries.push((key, Entry { line, value }));
    }

    let defaults = RunConfig::defaults();
    let preset = p.get("preset", None, |s| Some(s.to_string()));
    let n_cell = p.get("n_cell", Some(defaults.n_cell), |s| s.parse().ok());
    let cell_tol = p.get("cell_tol", Some(defaults.cell_tol), parse_number);
    let n = p.get("n", None, |s| s.parse::<usize>().ok());
    let t_final = p.get("T", Some(defaults.t_final), parse_number);
    let steps = p.get("M", Some(defaults.steps), |s| s.parse().ok());
    let eps = p.get("eps", None, |s| s.split(',').map(parse_number).collect::<Option<Vec<f64>>>());
    let forcing = p.get("forcing", Some(defaults.forcing), |s| Forcing::from_name(s).ok());
    let out = p.get("out", Some(defaults.out.clone()), |s| (!s.is_empty()).then(|| PathBuf::from(s)));
    let stride = p.get("stride", Some(defaults.stride), |s| s.parse().ok());
    let solver = p.get("solver", Some(defaults.solver), |s| s.parse().ok());
    let solver_tol = p.get("solver_tol", Some(defaults.solver_tol), parse_number);

    let mut params = Vec::new();
    if let Some(name) = &preset {
        match preset_keys(name) {
            None => {
                let line = p.line_of("preset");
                p.issue(line, format!("unknown preset `{name}`"));
            }
            Some(keys) => {
                for key in PARAM_KEYS {
                    if !keys.contains(&key) {
                        if let Some(line) = p.line_of(key) {
                            p.issue(Some(line), format!("key `{key}` does not apply to preset `{name}`"));
                        }
                    }
                }
                for key in keys {
                    if let Some(v) = p.get(key, None, parse_number) {
                        params.push(v);
                    }
                }
                if params.len() == keys.len() {
                    if let Err(e) = make_preset::<f64>(name, &params) {
                        let line = p.line_of(keys[0]);
                        p.issue(line, e.to_string());
                    }
                }
            }
        }
    }

    if let Some(nc) = n_cell {
        if !nc.is_power_of_two() || nc < 4 {
            let line = p.line_of("n_cell");
            p.issue(line, format!("n_cell = {nc} must be a power of two, at least 4"));
        }
    }
    for (key, v) in [("cell_tol", cell_tol), ("solver_tol", solver_tol)] {
        if let Some(v) = v {
            if !(v > 0.0 && v < 1.0) {
                let line = p.line_of(key);
                p.issue(line, format!("{key} = {v} must lie in (0, 1)"));
            }
        }
    }
    if let Some(n) = n {
        if n < 16 || n % RESONANCE != 0 {
            let line = p.line_of("n");
            p.issue(line, format!("n = {n} must be a positive multiple of {RESONANCE}"));
        }
    }
    if let Some(t) = t_final {
        if !(t > 0.0 && t.is_finite()) {
            let line = p.line_of("T");
            p.issue(line, format!("T = {t} must be positive"));
        }
    }
    if let Some(m) = steps {
        if m < 8 {
            let line = p.line_of("M");
            p.issue(line, format!("M = {m} must be at least 8"));
        }
    }
    if let Some(list) = &eps {
        let line = p.line_of("eps");
        for &e in list {
            if !(e > 0.0 && e < 1.0) {
                p.issue(line, format!("eps = {} must lie in (0, 1)", format_number(e)));
            } else if let Some(n) = n {
                if !resonance_ok(e, n) {
                    p.issue(
                        line,
                        format!("eps = {} violates the resonance guard: eps * n = {} is not a multiple of {RESONANCE}", format_number(e), e * n as f64),
                    );
                }
            }
        }
        if list.windows(2).any(|w| !(w[1] < w[0])) {
            p.issue(line, "eps values must strictly decrease".to_string());
        }
    }

    if !p.issues.is_empty() {
        p.issues.sort_by_key(|i| i.line.unwrap_or(usize::MAX));
        return Err(ConfigError { issues: p.issues });
    }
    Ok(RunConfig {
        preset: preset.unwrap(),
        params,
        n_cell: n_cell.unwrap(),
        cell_tol: cell_tol.unwrap(),
        n: n.unwrap(),
        t_final: t_final.unwrap(),
        steps: steps.unwrap(),
        eps: eps.unwrap(),
        forcing: forcing.unwrap(),
        out: out.unwrap(),
        stride: stride.unwrap(),
        solver: solver.unwrap(),
        solver_tol: solver_tol.unwrap(),
    })
}

/// Renders a configuration that [`parse_config`] maps back to `cfg`.
pub fn format_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let mut put = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
    put("preset", cfg.preset.clone());
    for (key, v) in preset_keys(&cfg.preset).unwrap_or(&[]).iter().zip(&cfg.params) {
        put(key, format!("{v}"));
    }
    put("n_cell", cfg.n_cell.to_string());
    put("cell_tol", format!("{}", cfg.cell_tol));
    put("n", cfg.n.to_string());
    put("T", format!("{}", cfg.t_final));
    put("M", cfg.steps.to_string());
    put("eps", cfg.eps.iter().map(|&e| format_number(e)).collect::<Vec<_>>().join(", "));
    put("forcing", cfg.forcing.name().to_string());
    put("out", cfg.out.display().to_string());
    put("stride", cfg.stride.to_string());
    put("solver", cfg.solver.name().to_string());
    put("solver_tol", format!("{}", cfg.solver_tol));
    s
}

impl RunConfig {
    fn defaults() -> Self {
        RunConfig {
            preset: String::new(),
            params: Vec::new(),
            n_cell: 64,
            cell_tol: 1e-10,
            n: 0,
            t_final: 1.0,
            steps: 64,
            eps: Vec::new(),
            forcing: Forcing::Standard,
            out: PathBuf::from("out"),
            stride: 0,
            solver: SolverConfig::default().method,
            solver_tol: SolverConfig::default().tol,
        }
    }

    pub fn coefficients(&self) -> Result<CoefficientField<f64>> {
        make_preset(&self.preset, &self.params)
    }

    pub fn cell_config(&self) -> Result<CellSolveConfig> {
        CellSolveConfig::new(self.n_cell)?.with_tol(self.cell_tol)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig::default().with_method(self.solver).with_tol(self.solver_tol)
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    /// Checks a single scale against the resonance guard.
    pub fn check_eps(&self, eps: f64) -> Result<()> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(ConfigError::single(format!("eps = {eps} must lie in (0, 1)")).into());
        }
        if !resonance_ok(eps, self.n) {
            return Err(ConfigError::single(format!(
                "eps = {} violates the resonance guard on n = {}: eps * n must be a multiple of {RESONANCE}",
                format_number(eps),
                self.n
            ))
            .into());
        }
        Ok(())
    }

    pub fn sweep_config(&self, threads: usize) -> Result<SweepConfig<f64>> {
        let cfg = SweepConfig {
            coefficients: self.coefficients()?,
            cell: self.cell_config()?,
            n: self.n,
            t_final: self.t_final,
            steps: self.steps,
            eps: self.eps.clone(),
            forcing: self.forcing,
            solver: self.solver_config(),
            threads: threads.clamp(1, self.eps.len().max(1)),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(c) => c,
            other => ConfigError::single(other.to_string()),
        }
    }
}
