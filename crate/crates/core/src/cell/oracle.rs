//! Dense direct solve of the discrete cell problem, used to validate the
//! matrix-free spectral path.
//!
//! The full saddle-point system
//!
//! ```text
//! [ A   0   D1   C^T  0  ] [u1]   [b1]
//! [ 0   A   D2        0  ] [u2]   [b2]
//! [ D1' D2' 0    0    E^T] [pi] = [0 ]
//! [ C       0    0    0  ] [l ]   [0 ]
//! [ 0   0   E    0    0  ] [mu]   [0 ]
//! ```
//!
//! is assembled from explicit differentiation matrices (built by direct
//! trigonometric summation, not by FFT). `C` pins each velocity component
//! orthogonal to the null modes of the spectral gradient and `E` does the
//! same for the pressure.

use nalgebra::{DMatrix, DVector};

use crate::coeff::{CellSampling, CoefficientField};
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{check_pair, CorrectorField};

/// Largest lattice the dense oracle accepts.
pub const MAX_DENSE_N: usize = 16;

/// 1D spectral differentiation matrix on `n` periodic points, Nyquist
/// derivative zero: `D[p][q] = -(1/n) sum_m k_m sin(2 pi m (p - q) / n)`.
fn derivative_matrix(n: usize) -> Vec<Vec<f64>> {
    let tau = std::f64::consts::TAU;
    let mut d = vec![vec![0.0; n]; n];
    for (p, row) in d.iter_mut().enumerate() {
        for (q, entry) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for m in 0..n {
                if 2 * m == n {
                    continue;
                }
                let signed = if 2 * m < n { m as f64 } else { m as f64 - n as f64 };
                s -= tau * signed * (tau * signed * (p as f64 - q as f64) / n as f64).sin();
            }
            *entry = s / n as f64;
        }
    }
    d
}

/// Null modes of the 2D spectral gradient: the constant and the three
/// Nyquist-corner checkerboards.
fn null_modes(n: usize) -> Vec<Vec<f64>> {
    let sign = |p: usize| if p.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut modes = Vec::new();
    for (s1, s2) in [(false, false), (true, false), (false, true), (true, true)] {
        let mut v = Vec::with_capacity(n * n);
        for p1 in 0..n {
            for p2 in 0..n {
                let a = if s1 { sign(p1) } else { 1.0 };
                let b = if s2 { sign(p2) } else { 1.0 };
                v.push(a * b);
            }
        }
        modes.push(v);
    }
    modes
}

/// Solves the `(i, k)` cell problem by dense LU factorization.
pub fn dense_cell_oracle<T: Real>(
    a: &CoefficientField<T>,
    n_small: usize,
    i: usize,
    k: usize,
) -> Result<CorrectorField<T>> {
    check_pair(i, k)?;
    if n_small > MAX_DENSE_N {
        return Err(Error::InvalidArgument(format!(
            "dense oracle limited to n <= {MAX_DENSE_N}, got {n_small}"
        )));
    }
    let sampling = CellSampling::new(n_small)?;
    let n = n_small;
    let n2 = n * n;
    let coeffs: Vec<[[f64; 2]; 2]> = a
        .sample_lattice(&sampling)
        .iter()
        .map(|c| {
            let m = c.to_array();
            [[m[0][0].as_f64(), m[0][1].as_f64()], [m[1][0].as_f64(), m[1][1].as_f64()]]
        })
        .collect();

    let d1d = derivative_matrix(n);
    // D_dir as dense n2 x n2 matrices on the row-major lattice
    let mut dmat = [DMatrix::<f64>::zeros(n2, n2), DMatrix::<f64>::zeros(n2, n2)];
    for p1 in 0..n {
        for p2 in 0..n {
            let row = p1 * n + p2;
            for q in 0..n {
                dmat[0][(row, q * n + p2)] = d1d[p1][q];
                dmat[1][(row, p1 * n + q)] = d1d[p2][q];
            }
        }
    }

    // scalar block A = sum_ab D_a^T diag(a_ab) D_b
    let mut a_block = DMatrix::<f64>::zeros(n2, n2);
    for ia in 0..2 {
        for ib in 0..2 {
            let mut scaled = dmat[ib].clone();
            for r in 0..n2 {
                let c = coeffs[r][ia][ib];
                for col in 0..n2 {
                    scaled[(r, col)] *= c;
                }
            }
            a_block += dmat[ia].transpose() * scaled;
        }
    }

    let modes = null_modes(n);
    let nm = modes.len();
    let size = 3 * n2 + 2 * nm + nm;
    let mut sys = DMatrix::<f64>::zeros(size, size);
    let (u1, u2, pi, lam, mu) = (0, n2, 2 * n2, 3 * n2, 3 * n2 + 2 * nm);
    sys.view_mut((u1, u1), (n2, n2)).copy_from(&a_block);
    sys.view_mut((u2, u2), (n2, n2)).copy_from(&a_block);
    // gradient of pi in the momentum rows, its transpose as the constraint
    sys.view_mut((u1, pi), (n2, n2)).copy_from(&dmat[0]);
    sys.view_mut((u2, pi), (n2, n2)).copy_from(&dmat[1]);
    sys.view_mut((pi, u1), (n2, n2)).copy_from(&dmat[0].transpose());
    sys.view_mut((pi, u2), (n2, n2)).copy_from(&dmat[1].transpose());
    for (m, mode) in modes.iter().enumerate() {
        for (idx, &v) in mode.iter().enumerate() {
            sys[(lam + m, u1 + idx)] = v;
            sys[(u1 + idx, lam + m)] = v;
            sys[(lam + nm + m, u2 + idx)] = v;
            sys[(u2 + idx, lam + nm + m)] = v;
            sys[(mu + m, pi + idx)] = v;
            sys[(pi + idx, mu + m)] = v;
        }
    }

    // right-hand side sum_l D_l^T a_li in component k
    let mut rhs = DVector::<f64>::zeros(size);
    for l in 0..2 {
        let col = DVector::from_iterator(n2, coeffs.iter().map(|c| c[l][i - 1]));
        let contrib = dmat[l].transpose() * col;
        let off = if k == 1 { u1 } else { u2 };
        for r in 0..n2 {
            rhs[off + r] += contrib[r];
        }
    }

    let lu = sys.clone().lu();
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem(format!("dense cell system n = {n}, ({i}, {k})")))?;
    let check = &sys * &sol - &rhs;
    let scale = rhs.norm().max(1.0);
    if !(check.norm() <= 1e-8 * scale) {
        return Err(Error::SingularSystem(format!(
            "dense cell system n = {n}, ({i}, {k}): residual {:e}",
            check.norm()
        )));
    }

    let take = |off: usize| -> Vec<T> { (0..n2).map(|r| T::lit(sol[off + r])).collect() };
    Ok(CorrectorField { i, k, n, velocity: [take(u1), take(u2)], pressure: take(pi) })
}
