//! Matrix-free Krylov solvers over flat `Vec<T>` storage.
//!
//! Operators and preconditioners are passed as closures writing into an
//! output slice. Both solvers report relative residual histories and verify
//! the true residual before declaring convergence.

use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, norm2, Real};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    /// Final relative residual `||b - A x|| / ||b||` (absolute when `b = 0`).
    pub residual: f64,
    pub history: Vec<f64>,
}

/// Preconditioned conjugate gradients for a symmetric positive (semi)definite
/// operator. `x` holds the initial guess on entry.
///
/// A semidefinite operator is fine as long as `b` and the preconditioner
/// output stay in its range; callers project for that.
pub fn pcg<T, A, M>(
    name: &'static str,
    mut apply: A,
    mut precond: M,
    b: &[T],
    x: &mut [T],
    tol: T,
    max_iter: usize,
) -> Result<KrylovStats>
where
    T: Real,
    A: FnMut(&[T], &mut [T]),
    M: FnMut(&[T], &mut [T]),
{
    let n = b.len();
    let b_norm = norm2(b);
    let mut stats = KrylovStats::default();
    if b_norm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(stats);
    }

    let mut r = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];

    let true_residual = |apply: &mut A, x: &[T], r: &mut [T], q: &mut [T]| -> T {
        apply(x, q);
        for i in 0..r.len() {
            r[i] = b[i] - q[i];
        }
        norm2(r) / b_norm
    };

    let mut rel = true_residual(&mut apply, x, &mut r, &mut q);
    stats.history.push(rel.as_f64());
    // restarts guard against the recurrence residual drifting from the true one
    let mut restarts = 0;
    while rel > tol && stats.iterations < max_iter {
        precond(&r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        loop {
            apply(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > T::zero()) {
                break;
            }
            let alpha = rz / pq;
            axpy(alpha, &p, x);
            axpy(-alpha, &q, &mut r);
            stats.iterations += 1;
            rel = norm2(&r) / b_norm;
            stats.history.push(rel.as_f64());
            if rel <= tol || stats.iterations >= max_iter {
                break;
            }
            precond(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        rel = true_residual(&mut apply, x, &mut r, &mut q);
        restarts += 1;
        if restarts > 8 {
            break;
        }
    }
    stats.residual = rel.as_f64();
    if rel > tol {
        return Err(Error::NotConverged {
            solver: name,
            iterations: stats.iterations,
            residual: stats.residual,
            history: stats.history,
        });
    }
    Ok(stats)
}

/// Preconditioned MINRES for symmetric (possibly indefinite, possibly
/// singular but consistent) systems. The preconditioner must be symmetric
/// positive definite on the relevant subspace.
///
/// Convergence is declared on the true residual `||b - A x|| <= tol ||b||`;
/// the solver restarts from the current iterate if the preconditioned
/// estimate is satisfied first.
pub fn minres<T, A, M>(
    name: &'static str,
    mut apply: A,
    mut precond: M,
    b: &[T],
    x: &mut [T],
    tol: T,
    max_iter: usize,
) -> Result<KrylovStats>
where
    T: Real,
    A: FnMut(&[T], &mut [T]),
    M: FnMut(&[T], &mut [T]),
{
    let n = b.len();
    let b_norm = norm2(b);
    let mut stats = KrylovStats::default();
    if b_norm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(stats);
    }

    let mut tmp = vec![T::zero(); n];
    let mut residual = |apply: &mut A, x: &[T], out: &mut [T]| -> T {
        apply(x, &mut tmp);
        for i in 0..n {
            out[i] = b[i] - tmp[i];
        }
        norm2(out) / b_norm
    };

    let mut r1 = vec![T::zero(); n];
    let mut r2 = vec![T::zero(); n];
    let mut y = vec![T::zero(); n];
    let mut v = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let mut w1 = vec![T::zero(); n];
    let mut w2 = vec![T::zero(); n];

    let mut rel = residual(&mut apply, x, &mut r1);
    stats.history.push(rel.as_f64());
    let mut inner_tol = tol;
    let mut restarts = 0;
    while rel > tol && stats.iterations < max_iter {
        precond(&r1, &mut y);
        let beta1_sq = dot(&r1, &y);
        if !(beta1_sq > T::zero()) {
            break;
        }
        let beta1 = beta1_sq.sqrt();
        r2.copy_from_slice(&r1);
        w.iter_mut().for_each(|e| *e = T::zero());
        w2.iter_mut().for_each(|e| *e = T::zero());

        let mut oldb = T::zero();
        let mut beta = beta1;
        let mut dbar = T::zero();
        let mut epsln = T::zero();
        let mut phibar = beta1;
        let mut cs = -T::one();
        let mut sn = T::zero();
        let mut local = 0usize;

        loop {
            let s = T::one() / beta;
            for i in 0..n {
                v[i] = s * y[i];
            }
            apply(&v, &mut y);
            if local >= 1 {
                axpy(-(beta / oldb), &r1, &mut y);
            }
            let alfa = dot(&v, &y);
            axpy(-(alfa / beta), &r2, &mut y);
            std::mem::swap(&mut r1, &mut r2);
            r2.copy_from_slice(&y);
            precond(&r2, &mut y);
            oldb = beta;
            let beta_sq = dot(&r2, &y);
            beta = if beta_sq > T::zero() { beta_sq.sqrt() } else { T::zero() };

            let oldeps = epsln;
            let delta = cs * dbar + sn * alfa;
            let gbar = sn * dbar - cs * alfa;
            epsln = sn * beta;
            dbar = -cs * beta;
            let gamma = gbar.hypot(beta).max(T::epsilon());
            cs = gbar / gamma;
            sn = beta / gamma;
            let phi = cs * phibar;
            phibar = sn * phibar;

            let denom = T::one() / gamma;
            std::mem::swap(&mut w1, &mut w2);
            std::mem::swap(&mut w2, &mut w);
            for i in 0..n {
                w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
            }
            axpy(phi, &w, x);

            local += 1;
            stats.iterations += 1;
            let est = phibar / beta1;
            stats.history.push((est * beta1 / b_norm).as_f64());
            if est <= inner_tol || beta == T::zero() || stats.iterations >= max_iter {
                break;
            }
        }
        let prev = rel;
        rel = residual(&mut apply, x, &mut r1);
        restarts += 1;
        if rel > tol {
            // the preconditioned-norm estimate was optimistic; tighten it
            inner_tol *= (tol / rel).max(T::lit(1e-3));
        }
        if restarts > 12 || (rel >= prev && restarts > 2) {
            break;
        }
    }
    stats.residual = rel.as_f64();
    if rel > tol {
        return Err(Error::NotConverged {
            solver: name,
            iterations: stats.iterations,
            residual: stats.residual,
            history: stats.history,
        });
    }
    Ok(stats)
}
