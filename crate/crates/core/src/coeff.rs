//! Y-periodic coefficient fields `a_ij(y)` and their rescalings `a_ij(x/ε)`.
//!
//! Fields are closed-form presets on the unit cell `Y = (-1/2, 1/2)^2`. Every
//! preset is evaluated at the wrapped coordinate, so periodicity holds
//! whenever the shifted point is itself representable.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Symmetric 2x2 matrix. Only one off-diagonal entry is stored, so
/// `a12 == a21` holds by construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sym2<T> {
    pub a11: T,
    pub a12: T,
    pub a22: T,
}

impl<T: Real> Sym2<T> {
    pub fn scalar(c: T) -> Self {
        Sym2 { a11: c, a12: T::zero(), a22: c }
    }

    /// Entry `(i, j)` with zero-based indices.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        match (i, j) {
            (0, 0) => self.a11,
            (1, 1) => self.a22,
            _ => self.a12,
        }
    }

    pub fn to_array(&self) -> [[T; 2]; 2] {
        [[self.a11, self.a12], [self.a12, self.a22]]
    }

    pub fn min_eigenvalue(&self) -> T {
        let half = T::lit(0.5);
        let m = (self.a11 + self.a22) * half;
        let d = (self.a11 - self.a22) * half;
        m - (d * d + self.a12 * self.a12).sqrt()
    }

    pub fn max_norm_diff(&self, other: &Self) -> T {
        (self.a11 - other.a11)
            .magnitude()
            .max((self.a12 - other.a12).magnitude())
            .max((self.a22 - other.a22).magnitude())
    }
}

/// Closed-form coefficient presets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Preset<T> {
    /// `a = c I`
    Constant { c: T },
    /// `a = alpha(y1) I`, `alpha = 1 + (kappa - 1)(1 + sin 2 pi y1)/2`
    Layered { kappa: T },
    /// `a = (1 + beta cos 2 pi y1 cos 2 pi y2) I`, `|beta| < 1`
    Trig { beta: T },
    /// Two-phase checkerboard (phases 1 and `kappa`) smoothed by a tanh
    /// transition of width `s`.
    CheckerboardSmooth { kappa: T, s: T },
}

impl<T: Real> Preset<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Constant { .. } => "constant",
            Preset::Layered { .. } => "layered",
            Preset::Trig { .. } => "trig",
            Preset::CheckerboardSmooth { .. } => "checkerboard_smooth",
        }
    }

    pub fn params(&self) -> Vec<T> {
        match *self {
            Preset::Constant { c } => vec![c],
            Preset::Layered { kappa } => vec![kappa],
            Preset::Trig { beta } => vec![beta],
            Preset::CheckerboardSmooth { kappa, s } => vec![kappa, s],
        }
    }

    /// True when the preset has no dependence on `y`.
    pub fn is_constant(&self) -> bool {
        matches!(self, Preset::Constant { .. })
    }
}

/// A Y-periodic symmetric, uniformly elliptic coefficient field in two
/// dimensions, optionally multiplied by a positive constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientField<T> {
    preset: Preset<T>,
    scale: T,
}

pub const DIM: usize = 2;

fn invalid<T>(preset: &'static str, reason: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter { preset, reason: reason.into() })
}

/// Builds a preset field by name.
pub fn make_preset<T: Real>(name: &str, params: &[T]) -> Result<CoefficientField<T>> {
    let expect = |preset: &'static str, n: usize| -> Result<()> {
        if params.len() != n {
            return invalid(preset, format!("expected {n} parameter(s), got {}", params.len()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return invalid(preset, "parameters must be finite");
        }
        Ok(())
    };
    let preset = match name {
        "constant" => {
            expect("constant", 1)?;
            if params[0] <= T::zero() {
                return invalid("constant", format!("c = {} must be positive", params[0]));
            }
            Preset::Constant { c: params[0] }
        }
        "layered" => {
            expect("layered", 1)?;
            if params[0] <= T::zero() {
                return invalid("layered", format!("contrast kappa = {} must be positive", params[0]));
            }
            Preset::Layered { kappa: params[0] }
        }
        "trig" => {
            expect("trig", 1)?;
            if params[0].magnitude() >= T::one() {
                return invalid("trig", format!("|beta| = {} must be below 1", params[0].magnitude()));
            }
            Preset::Trig { beta: params[0] }
        }
        "checkerboard_smooth" => {
            expect("checkerboard_smooth", 2)?;
            if params[0] <= T::zero() {
                return invalid(
                    "checkerboard_smooth",
                    format!("contrast kappa = {} must be positive", params[0]),
                );
            }
            if params[1] <= T::zero() {
                return invalid(
                    "checkerboard_smooth",
                    format!("transition width s = {} must be positive", params[1]),
                );
            }
            Preset::CheckerboardSmooth { kappa: params[0], s: params[1] }
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(CoefficientField { preset, scale: T::one() })
}

/// Maps `t` into `[-1/2, 1/2)`.
#[inline]
pub fn wrap<T: Real>(t: T) -> T {
    t - (t + T::lit(0.5)).floor()
}

impl<T: Real> CoefficientField<T> {
    pub fn constant(c: T) -> Result<Self> {
        make_preset("constant", &[c])
    }

    pub fn preset(&self) -> &Preset<T> {
        &self.preset
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn dimension(&self) -> usize {
        DIM
    }

    /// The field `c * a`.
    pub fn scaled(&self, c: T) -> Result<Self> {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("scale factor {c} must be positive")));
        }
        Ok(CoefficientField { preset: self.preset, scale: self.scale * c })
    }

    /// Scalar multiplier `alpha(y)` of the identity. Every preset is isotropic.
    fn isotropic_value(&self, y: [T; 2]) -> T {
        let two_pi = T::TAU();
        let half = T::lit(0.5);
        match self.preset {
            Preset::Constant { c } => c,
            Preset::Layered { kappa } => {
                T::one() + (kappa - T::one()) * half * (T::one() + (two_pi * y[0]).sin())
            }
            Preset::Trig { beta } => T::one() + beta * (two_pi * y[0]).cos() * (two_pi * y[1]).cos(),
            Preset::CheckerboardSmooth { kappa, s } => {
                let phase = (two_pi * y[0]).sin() * (two_pi * y[1]).sin();
                let theta = half * (T::one() + (phase / s).tanh());
                T::one() + (kappa - T::one()) * theta
            }
        }
    }

    /// `a(y)` at an arbitrary point; periodic wrap is applied first.
    pub fn sample_at(&self, y: [T; 2]) -> Sym2<T> {
        let w = [wrap(y[0]), wrap(y[1])];
        Sym2::scalar(self.isotropic_value(w) * self.scale)
    }

    /// `a(x / ε)`.
    pub fn epsilon_sample(&self, eps: T, x: [T; 2]) -> Result<Sym2<T>> {
        if !(eps > T::zero()) {
            return Err(Error::InvalidArgument(format!("epsilon = {eps} must be positive")));
        }
        Ok(self.sample_at([x[0] / eps, x[1] / eps]))
    }

    /// Samples the field on the cell lattice, row-major in `(p1, p2)`.
    pub fn sample_lattice(&self, sampling: &CellSampling) -> Vec<Sym2<T>> {
        let n = sampling.n_cell();
        let mut out = Vec::with_capacity(n * n);
        for p1 in 0..n {
            let y1 = sampling.node::<T>(p1);
            for p2 in 0..n {
                out.push(self.sample_at([y1, sampling.node::<T>(p2)]));
            }
        }
        out
    }
}

impl<T: Real> fmt::Display for CoefficientField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.preset.name())?;
        for (i, p) in self.preset.params().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")?;
        if self.scale != T::one() {
            write!(f, " x {}", self.scale)?;
        }
        Ok(())
    }
}

/// Uniform lattice `y_p = -1/2 + p / n_cell`, `p = 0..n_cell`, covering the
/// half-open cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellSampling {
    n_cell: usize,
}

impl CellSampling {
    pub fn new(n_cell: usize) -> Result<Self> {
        if n_cell < 4 || !n_cell.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "n_cell = {n_cell} must be a power of two >= 4"
            )));
        }
        Ok(CellSampling { n_cell })
    }

    pub fn n_cell(&self) -> usize {
        self.n_cell
    }

    #[inline]
    pub fn node<T: Real>(&self, p: usize) -> T {
        -T::lit(0.5) + T::from_count(p) / T::from_count(self.n_cell)
    }
}

/// Minimum over the lattice of the smallest eigenvalue of `a(y_p)`.
/// Fails when that minimum is not positive.
pub fn ellipticity_estimate<T: Real>(field: &CoefficientField<T>, sampling: &CellSampling) -> Result<T> {
    let alpha = field
        .sample_lattice(sampling)
        .iter()
        .map(Sym2::min_eigenvalue)
        .fold(T::infinity(), T::min);
    if !(alpha > T::zero()) {
        return Err(Error::NotElliptic { alpha: alpha.as_f64() });
    }
    Ok(alpha)
}
