//! Periodic cell problems with an incompressibility constraint.
//!
//! For each index pair `(i, k)` the corrector `chi_ik` is the zero-mean,
//! divergence-free periodic field satisfying
//!
//! ```text
//! sum_{a,b,m} <a_ab d_b chi^m, d_a w^m> = sum_l <a_li, d_l w^k>
//! ```
//!
//! for every divergence-free lattice field `w`. The operator is applied
//! matrix-free with spectral differentiation; the constraint is enforced by
//! projected conjugate gradients with the exact Fourier-space Leray
//! projector, preconditioned by the inverse of the mean-coefficient
//! Laplacian.
//!
//! Coefficients do not depend on the fast time variable, so the correctors
//! are pure functions of `y`.

mod oracle;
pub mod spectral;

pub use oracle::dense_cell_oracle;
pub use spectral::Spectral;

use rayon::prelude::*;
use rustfft::num_complex::Complex;

use crate::coeff::{ellipticity_estimate, CellSampling, CoefficientField, Sym2};
use crate::error::{Error, Result};
use crate::krylov::{pcg, KrylovStats};
use crate::scalar::{max_abs, mean, norm2, Real};

/// Index pairs `(i, k)` in storage order.
pub const PAIRS: [(usize, usize); 4] = [(1, 1), (1, 2), (2, 1), (2, 2)];

#[inline]
pub(crate) fn pair_slot(i: usize, k: usize) -> usize {
    (i - 1) * 2 + (k - 1)
}

fn check_pair(i: usize, k: usize) -> Result<()> {
    if !(1..=2).contains(&i) || !(1..=2).contains(&k) {
        return Err(Error::InvalidArgument(format!("index pair ({i}, {k}) outside 1..=2")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellSolveConfig {
    pub n_cell: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl CellSolveConfig {
    pub fn new(n_cell: usize) -> Result<Self> {
        CellSampling::new(n_cell)?;
        Ok(CellSolveConfig { n_cell, tol: 1e-10, max_iter: 10 * n_cell * n_cell })
    }

    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("cell tolerance {tol} must be positive")));
        }
        self.tol = tol;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        CellSampling::new(self.n_cell)?;
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("cell tolerance {} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// One corrector `chi_ik` on the cell lattice with its cell pressure.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectorField<T> {
    pub i: usize,
    pub k: usize,
    pub n: usize,
    pub velocity: [Vec<T>; 2],
    pub pressure: Vec<T>,
}

impl<T: Real> CorrectorField<T> {
    pub fn zeros(i: usize, k: usize, n: usize) -> Self {
        CorrectorField {
            i,
            k,
            n,
            velocity: [vec![T::zero(); n * n], vec![T::zero(); n * n]],
            pressure: vec![T::zero(); n * n],
        }
    }

    pub fn max_norm(&self) -> T {
        max_abs(&self.velocity[0]).max(max_abs(&self.velocity[1]))
    }

    /// Lattice L2 norm of the velocity (root of the mean square).
    pub fn l2_norm(&self) -> T {
        let s = crate::scalar::dot(&self.velocity[0], &self.velocity[0])
            + crate::scalar::dot(&self.velocity[1], &self.velocity[1]);
        (s / T::from_count(self.n * self.n)).sqrt()
    }

    pub fn component_means(&self) -> [T; 2] {
        [mean(&self.velocity[0]), mean(&self.velocity[1])]
    }

    /// Max norm of the spectral divergence.
    pub fn divergence_max(&self) -> T {
        let s = Spectral::new(self.n);
        max_abs(&s.divergence([&self.velocity[0], &self.velocity[1]]))
    }

    /// Spectral gradients `[d_1 chi^1, d_2 chi^1, d_1 chi^2, d_2 chi^2]`,
    /// i.e. index `2 * (m - 1) + (j - 1)` holds `d chi^m / d y_j`.
    pub fn gradients(&self) -> [Vec<T>; 4] {
        let s = Spectral::new(self.n);
        let [a, b] = s.gradient(&self.velocity[0]);
        let [c, d] = s.gradient(&self.velocity[1]);
        [a, b, c, d]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectorSet<T> {
    pub n: usize,
    /// Indexed by [`PAIRS`] order.
    pub fields: Vec<CorrectorField<T>>,
    pub stats: Vec<KrylovStats>,
}

impl<T: Real> CorrectorSet<T> {
    pub fn get(&self, i: usize, k: usize) -> Result<&CorrectorField<T>> {
        check_pair(i, k)?;
        self.fields
            .iter()
            .find(|f| f.i == i && f.k == k)
            .ok_or(Error::MissingCorrector { i, k })
    }

    /// Assembles a set from individually solved or loaded fields.
    pub fn from_fields(fields: Vec<CorrectorField<T>>, stats: Vec<KrylovStats>) -> Result<Self> {
        let n = fields.first().map(|f| f.n).ok_or(Error::MissingCorrector { i: 1, k: 1 })?;
        let mut ordered = Vec::with_capacity(4);
        for &(i, k) in &PAIRS {
            let f = fields
                .iter()
                .find(|f| f.i == i && f.k == k)
                .ok_or(Error::MissingCorrector { i, k })?;
            if f.n != n {
                return Err(Error::LatticeMismatch { expected: n, found: f.n });
            }
            ordered.push(f.clone());
        }
        Ok(CorrectorSet { n, fields: ordered, stats })
    }

    pub fn is_complete(&self) -> bool {
        PAIRS.iter().all(|&(i, k)| self.get(i, k).is_ok())
    }
}

/// The discrete cell operator `A u = sum_ab D_a^T (a_ab D_b u)` applied to
/// each velocity component, its right-hand sides and preconditioner.
pub(crate) struct CellOperator<T: Real> {
    spectral: Spectral<T>,
    coeffs: Vec<Sym2<T>>,
    precond_scale: [T; 3],
}

impl<T: Real> CellOperator<T> {
    pub fn new(a: &CoefficientField<T>, n: usize) -> Result<Self> {
        let sampling = CellSampling::new(n)?;
        let coeffs = a.sample_lattice(&sampling);
        let precond_scale = [
            mean(&coeffs.iter().map(|c| c.a11).collect::<Vec<_>>()),
            mean(&coeffs.iter().map(|c| c.a12).collect::<Vec<_>>()),
            mean(&coeffs.iter().map(|c| c.a22).collect::<Vec<_>>()),
        ];
        Ok(CellOperator { spectral: Spectral::new(n), coeffs, precond_scale })
    }

    /// Scalar operator on one component.
    fn apply_scalar(&self, u: &[T]) -> Vec<T> {
        let s = &self.spectral;
        let [g1, g2] = s.gradient(u);
        let mut f1 = vec![T::zero(); u.len()];
        let mut f2 = vec![T::zero(); u.len()];
        for (idx, c) in self.coeffs.iter().enumerate() {
            f1[idx] = c.a11 * g1[idx] + c.a12 * g2[idx];
            f2[idx] = c.a12 * g1[idx] + c.a22 * g2[idx];
        }
        // D^T = -D
        let div = s.divergence([&f1, &f2]);
        div.into_iter().map(|x| -x).collect()
    }

    pub fn apply(&self, u: [&[T]; 2]) -> [Vec<T>; 2] {
        [self.apply_scalar(u[0]), self.apply_scalar(u[1])]
    }

    /// Right-hand side of the `(i, k)` problem: component `k` carries
    /// `sum_l D_l^T a_li`, the other component is zero.
    pub fn rhs(&self, i: usize, k: usize) -> [Vec<T>; 2] {
        let n2 = self.coeffs.len();
        let col = |l: usize| -> Vec<T> {
            // derivatives are shift invariant; subtracting the first sample
            // makes the right-hand side of a constant field exactly zero
            let base = self.coeffs[0].get(l, i - 1);
            self.coeffs.iter().map(|c| c.get(l, i - 1) - base).collect()
        };
        let (c1, c2) = (col(0), col(1));
        let div = self.spectral.divergence([&c1, &c2]);
        let source: Vec<T> = div.into_iter().map(|x| -x).collect();
        let zero = vec![T::zero(); n2];
        if k == 1 {
            [source, zero]
        } else {
            [zero, source]
        }
    }

    pub fn project(&self, v: [&[T]; 2]) -> [Vec<T>; 2] {
        self.spectral.leray_project(v)
    }

    /// Projected inverse of the mean-coefficient operator.
    pub fn precondition(&self, v: [&[T]; 2]) -> [Vec<T>; 2] {
        let [m11, m12, m22] = self.precond_scale;
        self.spectral.vector_multiplier(v, |k1, k2| {
            let q = m11 * k1 * k1 + T::lit(2.0) * m12 * k1 * k2 + m22 * k2 * k2;
            if q == T::zero() {
                return [T::zero(); 3];
            }
            let [p11, p12, p22] = spectral::leray_symbol(k1, k2);
            let inv = T::one() / q;
            [p11 * inv, p12 * inv, p22 * inv]
        })
    }

    /// Cell pressure from the unprojected residual `r = b - A chi = grad pi`.
    pub fn recover_pressure(&self, residual: [&[T]; 2]) -> Vec<T> {
        let s = &self.spectral;
        let n = s.n();
        let h1 = s.forward(residual[0]);
        let h2 = s.forward(residual[1]);
        let mut out = vec![Complex::new(T::zero(), T::zero()); n * n];
        for m1 in 0..n {
            for m2 in 0..n {
                let idx = m1 * n + m2;
                let (k1, k2) = s.wavevector(m1, m2);
                let k_sq = k1 * k1 + k2 * k2;
                if k_sq == T::zero() {
                    continue;
                }
                // pi_hat = -i (k . r_hat) / |k|^2
                let dot = h1[idx] * k1 + h2[idx] * k2;
                out[idx] = Complex::new(dot.im / k_sq, -dot.re / k_sq);
            }
        }
        s.inverse_real(out)
    }
}

fn split<T>(v: &[T], n2: usize) -> [&[T]; 2] {
    [&v[..n2], &v[n2..]]
}

fn concat<T: Copy>(v: [Vec<T>; 2]) -> Vec<T> {
    let [mut a, b] = v;
    a.extend_from_slice(&b);
    a
}

/// Solves one cell problem.
pub fn solve_cell_problem<T: Real>(
    a: &CoefficientField<T>,
    cfg: &CellSolveConfig,
    i: usize,
    k: usize,
) -> Result<(CorrectorField<T>, KrylovStats)> {
    cfg.validate()?;
    check_pair(i, k)?;
    let sampling = CellSampling::new(cfg.n_cell)?;
    ellipticity_estimate(a, &sampling)?;
    let op = CellOperator::new(a, cfg.n_cell)?;
    let n2 = cfg.n_cell * cfg.n_cell;

    let rhs = op.rhs(i, k);
    let b = concat(op.project([&rhs[0], &rhs[1]]));
    let mut x = vec![T::zero(); 2 * n2];
    let stats = pcg(
        "cell projected CG",
        |p: &[T], out: &mut [T]| {
            let [p1, p2] = split(p, n2);
            let ap = op.apply([p1, p2]);
            let pap = op.project([&ap[0], &ap[1]]);
            out[..n2].copy_from_slice(&pap[0]);
            out[n2..].copy_from_slice(&pap[1]);
        },
        |r: &[T], out: &mut [T]| {
            let [r1, r2] = split(r, n2);
            let z = op.precondition([r1, r2]);
            out[..n2].copy_from_slice(&z[0]);
            out[n2..].copy_from_slice(&z[1]);
        },
        &b,
        &mut x,
        T::lit(cfg.tol),
        cfg.max_iter,
    )?;

    // keep the iterate exactly in the constrained space
    let [x1, x2] = split(&x, n2);
    let [v1, v2] = op.project([x1, x2]);
    let av = op.apply([&v1, &v2]);
    let residual = [
        rhs[0].iter().zip(&av[0]).map(|(b, a)| *b - *a).collect::<Vec<_>>(),
        rhs[1].iter().zip(&av[1]).map(|(b, a)| *b - *a).collect::<Vec<_>>(),
    ];
    let pressure = op.recover_pressure([&residual[0], &residual[1]]);
    Ok((CorrectorField { i, k, n: cfg.n_cell, velocity: [v1, v2], pressure }, stats))
}

/// Solves all four cell problems; the solves are independent and run on the
/// rayon pool.
pub fn solve_all_correctors<T: Real>(a: &CoefficientField<T>, cfg: &CellSolveConfig) -> Result<CorrectorSet<T>> {
    let solved: Vec<_> = PAIRS.par_iter().map(|&(i, k)| solve_cell_problem(a, cfg, i, k)).collect();
    let mut fields = Vec::with_capacity(4);
    let mut stats = Vec::with_capacity(4);
    for r in solved {
        let (f, s) = r?;
        fields.push(f);
        stats.push(s);
    }
    Ok(CorrectorSet { n: cfg.n_cell, fields, stats })
}

/// Independent recomputation of the projected relative residual
/// `||P(b - A chi)|| / ||P b||`; absolute when `P b = 0`.
pub fn cell_residual<T: Real>(a: &CoefficientField<T>, chi: &CorrectorField<T>, i: usize, k: usize) -> Result<T> {
    check_pair(i, k)?;
    let op = CellOperator::new(a, chi.n)?;
    let rhs = op.rhs(i, k);
    let av = op.apply([&chi.velocity[0], &chi.velocity[1]]);
    let r: [Vec<T>; 2] = [
        rhs[0].iter().zip(&av[0]).map(|(b, a)| *b - *a).collect(),
        rhs[1].iter().zip(&av[1]).map(|(b, a)| *b - *a).collect(),
    ];
    let pr = concat(op.project([&r[0], &r[1]]));
    let pb = concat(op.project([&rhs[0], &rhs[1]]));
    let num = norm2(&pr);
    let den = norm2(&pb);
    Ok(if den == T::zero() { num } else { num / den })
}

/// Orthogonal projection onto divergence-free, zero-mean cell fields.
pub fn leray_project<T: Real>(v: [&[T]; 2], n: usize) -> Result<[Vec<T>; 2]> {
    if v[0].len() != n * n || v[1].len() != n * n {
        return Err(Error::LatticeMismatch { expected: n * n, found: v[0].len().max(v[1].len()) });
    }
    Ok(Spectral::new(n).leray_project(v))
}
