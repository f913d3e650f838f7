use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stokes_homog::coeff::{make_preset, CoefficientField};
use stokes_homog::stokes::{
    apply_fine_operator, apply_homog_operator, apriori_bound_check, energy_balance, monitored_norms, solve_unsteady,
    step_implicit, Forcing, MacGrid, OperatorSpec, SaddleSolver, SolverConfig, State,
};
use stokes_homog::tensor::{EffectiveTensor, Provenance};

fn random(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn layered() -> CoefficientField<f64> {
    make_preset("layered", &[4.0]).unwrap()
}

/// A major-symmetric elliptic tensor with every coupling present.
fn coupled_tensor() -> EffectiveTensor<f64> {
    EffectiveTensor::from_fn(Provenance::Explicit, |i, j, k, h| {
        let base = if i == j && k == h { 1.5 } else { 0.0 };
        base + 0.1 * ((i + 2 * j + 3 * k + 5 * h) as f64).sin() + 0.1 * ((j + 2 * i + 3 * h + 5 * k) as f64).sin()
    })
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn operators_are_symmetric_and_positive() {
    let grid = MacGrid::new(32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let presets = [layered(), make_preset("trig", &[0.5]).unwrap(), make_preset("checkerboard_smooth", &[3.0, 0.05]).unwrap()];
    for trial in 0..4 {
        let (u1, v1) = (random(grid.nu(), &mut rng), random(grid.nv(), &mut rng));
        let (u2, v2) = (random(grid.nu(), &mut rng), random(grid.nv(), &mut rng));
        type Op = Box<dyn Fn(&[f64], &[f64]) -> (Vec<f64>, Vec<f64>)>;
        let mut apply: Vec<Op> = Vec::new();
        for a in presets {
            apply.push(Box::new(move |u, v| apply_fine_operator(grid, &a, 0.5, u, v).unwrap()));
        }
        apply.push(Box::new(move |u, v| apply_homog_operator(grid, &coupled_tensor(), u, v).unwrap()));
        for (which, op) in apply.iter().enumerate() {
            let (pu, pv) = op(&u1, &v1);
            let (qu, qv) = op(&u2, &v2);
            let lhs = grid.velocity_inner((&pu, &pv), (&u2, &v2));
            let rhs = grid.velocity_inner((&u1, &v1), (&qu, &qv));
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "trial {trial} op {which}: {lhs} vs {rhs}");
            assert!(grid.velocity_inner((&pu, &pv), (&u1, &v1)) >= 0.0);
        }
    }
    let zero = (vec![0.0; grid.nu()], vec![0.0; grid.nv()]);
    let out = apply_fine_operator(grid, &layered(), 0.25, &zero.0, &zero.1).unwrap();
    assert!(out.0.iter().chain(&out.1).all(|&x| x == 0.0));
}

/// Interior max-norm error of `op` applied to `(s1 s2, s1 s2 cos(pi x1))`
/// against the exact `-sum q_ijkh d_i d_j u^h`.
fn manufactured_error(n: usize, q: &EffectiveTensor<f64>, fine: bool) -> f64 {
    use std::f64::consts::PI;
    let grid = MacGrid::new(n).unwrap();
    // u^1 = sin(pi x1) sin(pi x2), u^2 = sin(pi x1) sin(pi x2) cos(pi x1)
    let field = |x: [f64; 2]| {
        let (s1, s2, c1) = ((PI * x[0]).sin(), (PI * x[1]).sin(), (PI * x[0]).cos());
        [s1 * s2, s1 * s2 * c1]
    };
    // Hessians of both components: hess[h][i][j]
    let hess = |x: [f64; 2]| -> [[[f64; 2]; 2]; 2] {
        let (s1, s2, c1, c2) = ((PI * x[0]).sin(), (PI * x[1]).sin(), (PI * x[0]).cos(), (PI * x[1]).cos());
        let p2 = PI * PI;
        let h1 = [[-p2 * s1 * s2, p2 * c1 * c2], [p2 * c1 * c2, -p2 * s1 * s2]];
        // g = s1 c1 s2 = sin(2 pi x1) s2 / 2
        let (s21, c21) = ((2.0 * PI * x[0]).sin(), (2.0 * PI * x[0]).cos());
        let h2 = [[-2.0 * p2 * s21 * s2, p2 * c21 * c2], [p2 * c21 * c2, -0.5 * p2 * s21 * s2]];
        [h1, h2]
    };
    let (u, v) = grid.sample_velocity(field);
    let (pu, pv) = if fine {
        let a = make_preset::<f64>("constant", &[1.0]).unwrap();
        apply_fine_operator(grid, &a, 0.5, &u, &v).unwrap()
    } else {
        apply_homog_operator(grid, q, &u, &v).unwrap()
    };
    let exact = |x: [f64; 2], k: usize| {
        let hs = hess(x);
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for h in 0..2 {
                    s -= q.get(i + 1, j + 1, k + 1, h + 1) * hs[h][i][j];
                }
            }
        }
        s
    };
    let interior = |x: [f64; 2]| x.iter().all(|&c| c > 0.15 && c < 0.85);
    let mut err: f64 = 0.0;
    for idx in 0..grid.nu() {
        let x = grid.u_node(idx);
        if interior(x) {
            err = err.max((pu[idx] - exact(x, 0)).abs());
        }
    }
    for idx in 0..grid.nv() {
        let x = grid.v_node(idx);
        if interior(x) {
            err = err.max((pv[idx] - exact(x, 1)).abs());
        }
    }
    err
}

#[test]
fn manufactured_solutions_converge_at_second_order() {
    let identity = EffectiveTensor::scaled_identity(1.0);
    for (q, fine) in [(identity.clone(), true), (identity, false), (coupled_tensor(), false)] {
        let errs: Vec<f64> = [16, 32, 64].iter().map(|&n| manufactured_error(n, &q, fine)).collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.5, "errors {errs:?}");
        }
    }
}

#[test]
fn identity_paths_coincide() {
    let one = make_preset::<f64>("constant", &[1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [16, 32] {
        let grid = MacGrid::new(n).unwrap();
        let (u, v) = (random(grid.nu(), &mut rng), random(grid.nv(), &mut rng));
        let a = apply_fine_operator(grid, &one, 0.25, &u, &v).unwrap();
        let b = apply_homog_operator(grid, &EffectiveTensor::scaled_identity(1.0), &u, &v).unwrap();
        assert!(max_diff(&a.0, &b.0) <= 1e-12 && max_diff(&a.1, &b.1) <= 1e-12);

        let fine = solve_unsteady(grid, &OperatorSpec::Fine { a: one, eps: 0.5 }, Forcing::Standard, 1.0, 8, SolverConfig::default()).unwrap();
        let homog = solve_unsteady(
            grid,
            &OperatorSpec::Homog { q: EffectiveTensor::scaled_identity(1.0) },
            Forcing::Standard,
            1.0,
            8,
            SolverConfig::default(),
        )
        .unwrap();
        for (s, t) in fine.states.iter().zip(&homog.states) {
            assert!(max_diff(&s.u, &t.u) <= 1e-10 && max_diff(&s.v, &t.v) <= 1e-10);
        }
    }
}

#[test]
fn zero_data_gives_zero_dynamics() {
    let grid = MacGrid::new(16).unwrap();
    let spec = OperatorSpec::Fine { a: layered(), eps: 0.5 };
    let next = step_implicit(grid, &State::zero(&grid), 0.1, &spec, Forcing::Zero, SolverConfig::default()).unwrap();
    assert!(next.u.iter().chain(&next.v).chain(&next.p).all(|&x| x == 0.0));
    let traj = solve_unsteady(grid, &spec, Forcing::Zero, 1.0, 8, SolverConfig::default()).unwrap();
    assert!(traj.states.iter().all(|s| s.u.iter().chain(&s.v).all(|&x| x == 0.0)));
    assert_eq!(energy_balance(&traj, &spec, Forcing::Zero).unwrap().defect, 0.0);
    let bound = apriori_bound_check(&traj, Forcing::Zero, 1.0).unwrap();
    assert!(bound.holds && bound.lhs == 0.0 && bound.rhs == 0.0);
}

#[test]
fn invalid_stepping_rejected() {
    let grid = MacGrid::new(16).unwrap();
    let spec = OperatorSpec::Fine { a: layered(), eps: 0.5 };
    assert!(step_implicit(grid, &State::zero(&grid), 0.0, &spec, Forcing::Standard, SolverConfig::default()).is_err());
    assert!(solve_unsteady(grid, &spec, Forcing::Standard, 1.0, 4, SolverConfig::default()).is_err());
    assert!(MacGrid::new(4).is_err());
}

#[test]
fn energy_identity_and_state_invariants() {
    let grid = MacGrid::new(64).unwrap();
    let a = layered();
    let spec = OperatorSpec::Fine { a, eps: 0.25 };
    let traj = solve_unsteady(grid, &spec, Forcing::Standard, 1.0, 16, SolverConfig::default()).unwrap();
    assert!(traj.states[0].u.iter().chain(&traj.states[0].v).all(|&x| x == 0.0));
    for s in &traj.states {
        assert!(s.divergence_max(&grid) <= 1e-9);
        assert!(s.pressure_mean().abs() <= 1e-12);
    }

    // independent accumulation of both sides
    let dt = traj.dt;
    let last = traj.states.last().unwrap();
    let mut lhs = 0.5 * grid.velocity_norm_sq(&last.u, &last.v);
    let mut rhs = 0.0;
    for pair in traj.states.windows(2) {
        let (old, new) = (&pair[0], &pair[1]);
        let du: Vec<f64> = new.u.iter().zip(&old.u).map(|(x, y)| x - y).collect();
        let dv: Vec<f64> = new.v.iter().zip(&old.v).map(|(x, y)| x - y).collect();
        lhs += 0.5 * grid.velocity_norm_sq(&du, &dv);
        let (pu, pv) = apply_fine_operator(grid, &a, 0.25, &new.u, &new.v).unwrap();
        lhs += dt * grid.velocity_inner((&pu, &pv), (&new.u, &new.v));
        let (fu, fv) = Forcing::Standard.sample(&grid, new.t);
        rhs += dt * grid.velocity_inner((&fu, &fv), (&new.u, &new.v));
    }
    let defect = (lhs - rhs).abs() / rhs.abs();
    assert!(defect <= 1e-8, "{defect:e}");
    let reported = energy_balance(&traj, &spec, Forcing::Standard).unwrap();
    assert!(reported.defect <= 1e-8);
    assert!((reported.work - rhs).abs() <= 1e-12 * rhs.abs());

    // A loose solve must show up in the diagnostic. The extrapolated initial
    // guess keeps the damage small on this grid, so compare against the tight run.
    let loose = solve_unsteady(grid, &spec, Forcing::Standard, 1.0, 16, SolverConfig::default().with_tol(1e-4)).unwrap();
    let degraded = energy_balance(&loose, &spec, Forcing::Standard).unwrap().defect;
    assert!(degraded > 1e4 * reported.defect.max(1e-16), "{degraded:e} vs {:e}", reported.defect);

    let coarse = MacGrid::new(32).unwrap();
    let spec = OperatorSpec::Fine { a, eps: 0.5 };
    let loose = solve_unsteady(coarse, &spec, Forcing::Standard, 1.0, 8, SolverConfig::default().with_tol(1e-4)).unwrap();
    let degraded = energy_balance(&loose, &spec, Forcing::Standard).unwrap().defect;
    assert!(degraded > 1e-8, "loosened solve still balances to {degraded:e}");
}

#[test]
fn time_refinement_converges() {
    let grid = MacGrid::new(32).unwrap();
    let spec = OperatorSpec::Fine { a: layered(), eps: 0.5 };
    let terminal = |m| {
        let t = solve_unsteady(grid, &spec, Forcing::Standard, 1.0, m, SolverConfig::default()).unwrap();
        t.states.last().unwrap().clone()
    };
    let (s8, s16, s32, s64) = (terminal(8), terminal(16), terminal(32), terminal(64));
    let d = |a: &State<f64>, b: &State<f64>| {
        let du: Vec<f64> = a.u.iter().zip(&b.u).map(|(x, y)| x - y).collect();
        let dv: Vec<f64> = a.v.iter().zip(&b.v).map(|(x, y)| x - y).collect();
        grid.velocity_norm_sq(&du, &dv).sqrt()
    };
    let diffs = [d(&s8, &s16), d(&s16, &s32), d(&s32, &s64)];
    assert!(diffs[1] < diffs[0] && diffs[2] < diffs[1], "{diffs:?}");
    // first order: successive differences roughly halve
    assert!(diffs[1] / diffs[2] > 1.6 && diffs[1] / diffs[2] < 2.4, "{diffs:?}");
}

#[test]
fn saddle_solvers_agree() {
    let grid = MacGrid::new(32).unwrap();
    let spec = OperatorSpec::Fine { a: layered(), eps: 0.5 };
    let cfg = SolverConfig::default().with_tol(1e-11);
    let minres = solve_unsteady(grid, &spec, Forcing::Standard, 1.0, 8, cfg.with_method(SaddleSolver::Minres)).unwrap();
    let uzawa = solve_unsteady(grid, &spec, Forcing::Standard, 1.0, 8, cfg.with_method(SaddleSolver::Uzawa)).unwrap();
    let (a, b) = (minres.states.last().unwrap(), uzawa.states.last().unwrap());
    let scale = a.u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(max_diff(&a.u, &b.u) <= 1e-8 * scale && max_diff(&a.v, &b.v) <= 1e-8 * scale);
    let pscale = a.p.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(max_diff(&a.p, &b.p) <= 1e-7 * pscale);
}

#[test]
fn single_precision_path_runs() {
    let grid = MacGrid::new(16).unwrap();
    let a = make_preset::<f32>("layered", &[4.0]).unwrap();
    let spec = OperatorSpec::Fine { a, eps: 1.0 };
    let traj = solve_unsteady(grid, &spec, Forcing::Standard, 1.0f32, 8, SolverConfig::default().with_tol(1e-5)).unwrap();
    let d = energy_balance(&traj, &spec, Forcing::Standard).unwrap().defect;
    assert!(d < 1e-3, "{d}");
}

#[test]
fn apriori_bound_is_uniform_in_eps() {
    let grid = MacGrid::new(256).unwrap();
    let a = layered();
    let mut rhs = Vec::new();
    let mut pressure = Vec::new();
    for eps in [0.25, 0.125, 0.0625] {
        let traj = solve_unsteady(grid, &OperatorSpec::Fine { a, eps }, Forcing::Standard, 1.0, 8, SolverConfig::default()).unwrap();
        let report = apriori_bound_check(&traj, Forcing::Standard, 1.0).unwrap();
        assert!(report.holds, "eps = {eps}: {report:?}");
        rhs.push(report.rhs);
        pressure.push(monitored_norms(&traj).pressure_l2q);
    }
    assert!(rhs.iter().all(|&r| r == rhs[0]));
    let (lo, hi) = pressure.iter().fold((f64::MAX, 0.0f64), |(l, h), &p| (l.min(p), h.max(p)));
    assert!(hi <= 1.5 * lo, "{pressure:?}");
}
