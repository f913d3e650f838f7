//! Homogenized tensor `q_ijkh`, assembled two independent ways.
//!
//! * direct: `q_ijkh = delta_kh <a_ij> - sum_l <a_il d_l chi_jh^k>`
//! * energy: `q_ijkh = a_hat(chi_ik - pi_ik, chi_jh - pi_jh)` with
//!   `pi_ik^r(y) = y_i delta_kr`
//!
//! Only the constant gradient `d_l pi_ik^r = delta_il delta_kr` of the affine
//! fields enters the energy form, so `pi` is never sampled on the lattice.
//! Indices in the public API are one-based like the formulas; storage is
//! zero-based.

use std::fmt;

use nalgebra::Matrix4;

use crate::cell::{CorrectorSet, PAIRS};
use crate::coeff::{CellSampling, CoefficientField, Sym2};
use crate::error::{Error, Result};
use crate::scalar::{mean, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Direct,
    Energy,
    /// Built from explicit entries (loaded from disk or constructed in code).
    Explicit,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Direct => "direct",
            Provenance::Energy => "energy",
            Provenance::Explicit => "explicit",
        })
    }
}

#[inline]
fn slot(i: usize, j: usize, k: usize, h: usize) -> usize {
    ((i * 2 + j) * 2 + k) * 2 + h
}

/// Rank-4 tensor on `{1,2}^4` with ellipticity metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveTensor<T> {
    q: [T; 16],
    /// Smallest eigenvalue of the symmetrized `(i,k) x (j,h)` matrix.
    pub alpha0: T,
    pub provenance: Provenance,
    /// `max |q_direct - q_energy|` when both formulas were evaluated.
    pub consistency_gap: Option<T>,
}

impl<T: Real> EffectiveTensor<T> {
    /// Builds a tensor from a closure over one-based indices.
    pub fn from_fn(provenance: Provenance, f: impl Fn(usize, usize, usize, usize) -> T) -> Self {
        let mut q = [T::zero(); 16];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for h in 0..2 {
                        q[slot(i, j, k, h)] = f(i + 1, j + 1, k + 1, h + 1);
                    }
                }
            }
        }
        let mut t = EffectiveTensor { q, alpha0: T::zero(), provenance, consistency_gap: None };
        t.alpha0 = t.symmetric_part_min_eigenvalue();
        t
    }

    /// `c delta_ij delta_kh`.
    pub fn scaled_identity(c: T) -> Self {
        Self::from_fn(Provenance::Explicit, |i, j, k, h| if i == j && k == h { c } else { T::zero() })
    }

    /// Entry `q_ijkh`, one-based indices.
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, h: usize) -> T {
        self.q[slot(i - 1, j - 1, k - 1, h - 1)]
    }

    /// Zero-based access used by the discretizations.
    #[inline]
    pub(crate) fn get0(&self, i: usize, j: usize, k: usize, h: usize) -> T {
        self.q[slot(i, j, k, h)]
    }

    /// All 16 entries as `(i, j, k, h, q)` with one-based indices, in
    /// lexicographic order.
    pub fn entries(&self) -> Vec<(usize, usize, usize, usize, T)> {
        let mut out = Vec::with_capacity(16);
        for i in 1..=2 {
            for j in 1..=2 {
                for k in 1..=2 {
                    for h in 1..=2 {
                        out.push((i, j, k, h, self.get(i, j, k, h)));
                    }
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.q
            .iter()
            .zip(&other.q)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).magnitude()))
    }

    /// `q(c a) = c q(a)` helper for tests and reports.
    pub fn scaled(&self, c: T) -> Self {
        let mut t = self.clone();
        t.q.iter_mut().for_each(|x| *x *= c);
        t.alpha0 = t.symmetric_part_min_eigenvalue();
        t.consistency_gap = self.consistency_gap.map(|g| g * c.magnitude());
        t
    }

    /// `M[(i,k),(j,h)] = q_ijkh` as an f64 matrix; row index `2 i + k`.
    fn quadratic_form_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for h in 0..2 {
                        m[(2 * i + k, 2 * j + h)] = self.get0(i, j, k, h).as_f64();
                    }
                }
            }
        }
        m
    }

    fn symmetric_part_min_eigenvalue(&self) -> T {
        let m = self.quadratic_form_matrix();
        let sym = (m + m.transpose()) * 0.5;
        T::lit(sym.symmetric_eigen().eigenvalues.min())
    }

    /// `sum q_ijkh xi_ik xi_jh` for a real 2x2 matrix `xi` (zero-based).
    pub fn quadratic_form(&self, xi: &ProbeMatrix<T>) -> T {
        let mut s = T::zero();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for h in 0..2 {
                        s += self.get0(i, j, k, h) * xi.0[i][k] * xi.0[j][h];
                    }
                }
            }
        }
        s
    }
}

/// A real 2x2 matrix `xi` used to probe ellipticity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeMatrix<T>(pub [[T; 2]; 2]);

impl<T: Real> ProbeMatrix<T> {
    pub fn frobenius_sq(&self) -> T {
        self.0.iter().flatten().map(|x| *x * *x).sum()
    }
}

/// Gradients of all four correctors plus the coefficient samples on the same
/// lattice.
struct CellData<T> {
    coeffs: Vec<Sym2<T>>,
    /// `grads[slot(i,k)][2*(m-1) + (l-1)] = d chi_ik^m / d y_l`
    grads: Vec<[Vec<T>; 4]>,
}

fn cell_data<T: Real>(a: &CoefficientField<T>, chi: &CorrectorSet<T>) -> Result<CellData<T>> {
    let n = chi.n;
    for f in &chi.fields {
        if f.n != n {
            return Err(Error::LatticeMismatch { expected: n, found: f.n });
        }
        if f.velocity[0].len() != n * n || f.velocity[1].len() != n * n {
            return Err(Error::LatticeMismatch { expected: n * n, found: f.velocity[0].len() });
        }
    }
    let sampling = CellSampling::new(n)?;
    let coeffs = a.sample_lattice(&sampling);
    let mut grads = Vec::with_capacity(4);
    for &(i, k) in &PAIRS {
        grads.push(chi.get(i, k)?.gradients());
    }
    Ok(CellData { coeffs, grads })
}

/// `q_ijkh = delta_kh <a_ij> - sum_l <a_il d_l chi_jh^k>`.
pub fn effective_tensor_direct<T: Real>(a: &CoefficientField<T>, chi: &CorrectorSet<T>) -> Result<EffectiveTensor<T>> {
    let data = cell_data(a, chi)?;
    let len = data.coeffs.len();
    let q = EffectiveTensor::from_fn(Provenance::Direct, |i, j, k, h| {
        let (i0, j0, k0, h0) = (i - 1, j - 1, k - 1, h - 1);
        let mut value = T::zero();
        if k0 == h0 {
            let entries: Vec<T> = data.coeffs.iter().map(|c| c.get(i0, j0)).collect();
            value += mean(&entries);
        }
        let g = &data.grads[crate::cell::pair_slot(j, h)];
        let mut b = vec![T::zero(); len];
        for (idx, c) in data.coeffs.iter().enumerate() {
            b[idx] = c.get(i0, 0) * g[2 * k0][idx] + c.get(i0, 1) * g[2 * k0 + 1][idx];
        }
        value - mean(&b)
    });
    Ok(q)
}

/// `q_ijkh = a_hat(chi_ik - pi_ik, chi_jh - pi_jh)`.
pub fn effective_tensor_energy<T: Real>(a: &CoefficientField<T>, chi: &CorrectorSet<T>) -> Result<EffectiveTensor<T>> {
    let data = cell_data(a, chi)?;
    let len = data.coeffs.len();
    // gradient of chi_ik - pi_ik, component m, direction l, at lattice index idx
    let shifted = |i: usize, k: usize, m: usize, l: usize, idx: usize| -> T {
        let g = data.grads[crate::cell::pair_slot(i, k)][2 * m + l][idx];
        if l == i - 1 && m == k - 1 {
            g - T::one()
        } else {
            g
        }
    };
    let q = EffectiveTensor::from_fn(Provenance::Energy, |i, j, k, h| {
        let mut integrand = vec![T::zero(); len];
        for (idx, c) in data.coeffs.iter().enumerate() {
            let mut s = T::zero();
            for ia in 0..2 {
                for ib in 0..2 {
                    let cab = c.get(ia, ib);
                    if cab == T::zero() {
                        continue;
                    }
                    for m in 0..2 {
                        s += cab * shifted(i, k, m, ib, idx) * shifted(j, h, m, ia, idx);
                    }
                }
            }
            integrand[idx] = s;
        }
        mean(&integrand)
    });
    Ok(q)
}

/// Evaluates both formulas and returns the direct tensor annotated with the
/// cross-formula gap.
pub fn assemble_tensor<T: Real>(a: &CoefficientField<T>, chi: &CorrectorSet<T>) -> Result<(EffectiveTensor<T>, EffectiveTensor<T>)> {
    let mut direct = effective_tensor_direct(a, chi)?;
    let mut energy = effective_tensor_energy(a, chi)?;
    let gap = direct.max_abs_diff(&energy);
    direct.consistency_gap = Some(gap);
    energy.consistency_gap = Some(gap);
    Ok((direct, energy))
}

/// Symmetry threshold below which [`tensor_ellipticity`] accepts a tensor.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Smallest eigenvalue of `M[(i,k),(j,h)] = q_ijkh` over all real 2x2
/// matrices `xi`. Fails when `q` is not major-symmetric or not elliptic.
pub fn tensor_ellipticity<T: Real>(q: &EffectiveTensor<T>) -> Result<T> {
    let report = tensor_symmetry_report(q);
    if report.major_violation.as_f64() > SYMMETRY_TOLERANCE {
        return Err(Error::TensorNotSymmetric { violation: report.major_violation.as_f64() });
    }
    let alpha0 = q.symmetric_part_min_eigenvalue();
    if !(alpha0 > T::zero()) {
        return Err(Error::TensorNotElliptic { alpha0: alpha0.as_f64() });
    }
    Ok(alpha0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryReport<T> {
    /// `max |q_ijkh - q_jihk|`, the symmetry of the energy form under
    /// exchanging the pairs `(i, k)` and `(j, h)`.
    pub major_violation: T,
    /// `max |q_ijkh - q_jikh|`; reported only, no symmetry of this kind is
    /// asserted anywhere.
    pub minor_violation: T,
    pub entries: Vec<(usize, usize, usize, usize, T)>,
}

pub fn tensor_symmetry_report<T: Real>(q: &EffectiveTensor<T>) -> SymmetryReport<T> {
    let mut major = T::zero();
    let mut minor = T::zero();
    for i in 1..=2 {
        for j in 1..=2 {
            for k in 1..=2 {
                for h in 1..=2 {
                    major = major.max((q.get(i, j, k, h) - q.get(j, i, h, k)).magnitude());
                    minor = minor.max((q.get(i, j, k, h) - q.get(j, i, k, h)).magnitude());
                }
            }
        }
    }
    SymmetryReport { major_violation: major, minor_violation: minor, entries: q.entries() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{solve_all_correctors, CellSolveConfig};
    use crate::coeff::make_preset;

    #[test]
    fn constant_coefficients_give_scaled_identity() {
        let a = make_preset::<f64>("constant", &[0.7]).unwrap();
        let chi = solve_all_correctors(&a, &CellSolveConfig::new(16).unwrap()).unwrap();
        let (direct, energy) = assemble_tensor(&a, &chi).unwrap();
        let expect = EffectiveTensor::scaled_identity(0.7);
        assert_eq!(direct.max_abs_diff(&expect), 0.0);
        assert!(energy.max_abs_diff(&expect) <= 1e-12);
        assert_eq!(tensor_ellipticity(&direct).unwrap(), 0.7);
    }

    #[test]
    fn symmetry_report_of_identity() {
        let r = tensor_symmetry_report(&EffectiveTensor::<f64>::scaled_identity(1.0));
        assert_eq!(r.major_violation, 0.0);
        assert_eq!(r.entries.len(), 16);
    }

    #[test]
    fn rejects_asymmetric_and_indefinite_tensors() {
        let asym = EffectiveTensor::from_fn(Provenance::Explicit, |i, j, k, h| {
            if (i, j, k, h) == (1, 2, 1, 1) {
                0.3
            } else if i == j && k == h {
                1.0
            } else {
                0.0
            }
        });
        assert!(matches!(tensor_ellipticity(&asym), Err(Error::TensorNotSymmetric { .. })));
        let neg = EffectiveTensor::<f64>::scaled_identity(-1.0);
        assert!(matches!(tensor_ellipticity(&neg), Err(Error::TensorNotElliptic { .. })));
    }

    #[test]
    fn quadratic_form_matches_eigenvalue_bound() {
        let a = make_preset::<f64>("trig", &[0.5]).unwrap();
        let chi = solve_all_correctors(&a, &CellSolveConfig::new(16).unwrap()).unwrap();
        let q = effective_tensor_energy(&a, &chi).unwrap();
        let alpha0 = tensor_ellipticity(&q).unwrap();
        let probes = [
            [[1.0, 0.0], [0.0, 0.0]],
            [[0.3, -1.2], [0.4, 0.9]],
            [[0.0, 1.0], [-1.0, 0.0]],
        ];
        for p in probes {
            let xi = ProbeMatrix(p);
            assert!(q.quadratic_form(&xi) >= alpha0 * xi.frobenius_sq() - 1e-12);
        }
    }
}
