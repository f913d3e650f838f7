use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_stokes-homog");

fn run(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.current_dir(dir).args(args).env_remove("STOKES_HOMOG_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_cfg(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

const SMALL: &str = "preset = trig\nbeta = 0.5\nn_cell = 16\nn = 64\nM = 8\neps = 1/2, 1/4\nout = out\n";
const CONSTANT: &str = "preset = constant\nc = 2\nn_cell = 8\nn = 64\nM = 8\neps = 1/2, 1/4\nout = out\n";

#[test]
fn constant_sweep_is_degenerate_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(dir.path(), "c.cfg", CONSTANT);
    let o = run(dir.path(), &["sweep", "--config", "c.cfg"], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    assert!(summary.contains("degenerate,true"), "{summary}");
    assert!(summary.contains("complete,true"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("degenerate"));
    assert_eq!(code(&run(dir.path(), &["report", "--out", "out"], &[])), 0);
}

#[test]
fn validation_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write_cfg(p, "ok.cfg", SMALL);
    write_cfg(p, "bad.cfg", "preset = trig\nbeta = 0.5\nbogus = 1\nn = 64\neps = 1/3\n");

    // n = 64 and eps = 1/8 give 8 cells per period.
    let o = run(p, &["solve-fine", "--config", "ok.cfg", "--eps", "0.125"], &[]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("resonance"));

    let o = run(p, &["sweep", "--config", "bad.cfg"], &[]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bogus") && err.contains("resonance"), "{err}");

    assert_eq!(code(&run(p, &["sweep", "--config", "missing.cfg"], &[])), 1);
    assert_eq!(code(&run(p, &["tensor"], &[])), 1);
    assert_eq!(code(&run(p, &["sweep", "--config", "ok.cfg"], &[("STOKES_HOMOG_THREADS", "0")])), 1);
    assert_eq!(code(&run(p, &["report", "--out", "nowhere"], &[])), 1);
    // clap usage errors also exit nonzero
    assert_ne!(code(&run(p, &["solve-fine", "--config", "ok.cfg"], &[])), 0);
}

#[test]
fn solver_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write_cfg(p, "tight.cfg", &format!("{SMALL}cell_tol = 1e-300\n"));
    let o = run(p, &["cell-solve", "--config", "tight.cfg"], &[]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));

    // The same failure while looking for correctors is reported as missing input.
    let o = run(p, &["tensor", "--config", "tight.cfg"], &[]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no corrector dumps"));

    fs::create_dir_all(p.join("partial")).unwrap();
    fs::write(p.join("partial/summary.csv"), "key,value\ncoefficients,trig(0.5)\ncomplete,false\nincomplete_reason,boom\n")
        .unwrap();
    fs::write(p.join("partial/sweep.csv"), "eps,l2q_error\n5e-1,1e-3\n").unwrap();
    let o = run(p, &["report", "--out", "partial"], &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("INCOMPLETE: boom"));
}

#[test]
fn pipeline_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write_cfg(p, "c.cfg", &format!("{SMALL}stride = 4\n"));

    // tensor without cell-solve artifacts solves in-process
    assert_eq!(code(&run(p, &["tensor", "--config", "c.cfg", "--out", "fresh"], &[])), 0);
    let fresh = fs::read_to_string(p.join("fresh/tensor.csv")).unwrap();

    assert_eq!(code(&run(p, &["cell-solve", "--config", "c.cfg"], &[])), 0);
    for f in ["chi_11", "chi_12", "chi_21", "chi_22"] {
        assert!(p.join(format!("out/correctors/{f}.field")).exists());
    }
    assert_eq!(code(&run(p, &["tensor", "--config", "c.cfg"], &[])), 0);
    let loaded = fs::read_to_string(p.join("out/tensor.csv")).unwrap();
    assert_eq!(loaded, fresh, "loading dumps reproduces the in-process tensor");
    assert_eq!(loaded.lines().next(), Some("i,j,k,h,q"));
    assert_eq!(loaded.lines().count(), 17);

    let o = run(p, &["solve-fine", "--config", "c.cfg", "--eps", "1/4"], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let snaps = p.join("out/fine_eps_0.25/snapshots");
    for step in [0, 4, 8] {
        assert!(snaps.join(format!("u_{step:05}.field")).exists());
    }
    let traj = fs::read_to_string(p.join("out/fine_eps_0.25/trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 9);

    assert_eq!(code(&run(p, &["solve-homog", "--config", "c.cfg"], &[])), 0);
    assert!(p.join("out/homog/summary.csv").exists());
    let log = fs::read_to_string(p.join("out/run.log")).unwrap();
    assert!(log.contains("loaded correctors"));
}

#[test]
fn sweep_csv_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write_cfg(p, "c.cfg", SMALL);
    let first = run(p, &["sweep", "--config", "c.cfg", "--out", "a"], &[("STOKES_HOMOG_THREADS", "2")]);
    assert_eq!(code(&first), 0);
    let second = run(p, &["sweep", "--config", "c.cfg", "--out", "b"], &[("STOKES_HOMOG_THREADS", "1")]);
    assert_eq!(code(&second), 0);
    for f in ["sweep.csv", "summary.csv", "tensor.csv", "sweep.gp"] {
        assert_eq!(fs::read(p.join("a").join(f)).unwrap(), fs::read(p.join("b").join(f)).unwrap(), "{f} differs");
    }
}
