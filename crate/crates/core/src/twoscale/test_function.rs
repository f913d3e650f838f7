//! Separable two-scale test functions `psi(x, t, y, tau) = phi(x, t) w(y) chi(tau)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Smooth macroscopic factor `phi(x, t)`; `t_final` fixes the time window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpacePreset {
    /// `sin^2(pi x1) sin^2(pi x2) sin^2(pi t / T)`, compactly supported in `Q`.
    Bump,
    /// The bump times `sin(2 pi x1) + sin(2 pi x2)`. Odd about the midlines,
    /// so it does not annihilate velocities with that symmetry.
    Dipole,
    /// `cos(pi x1) cos(pi x2)`, constant in time.
    Cosine,
    One,
}

/// Y-periodic factor `w(y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellPreset {
    One,
    /// `cos(2 pi y1)`
    Cos1,
    /// `cos^2(2 pi y1)`
    Cos1Sq,
    /// `cos(2 pi y1) cos(2 pi y2)`
    Cos1Cos2,
}

/// Z-periodic factor `chi(tau)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimePreset {
    One,
    /// `cos(2 pi tau)`
    Cos,
    /// `cos^2(2 pi tau)`
    CosSq,
}

impl SpacePreset {
    pub fn name(self) -> &'static str {
        match self {
            SpacePreset::Bump => "bump",
            SpacePreset::Dipole => "dipole",
            SpacePreset::Cosine => "cos",
            SpacePreset::One => "one",
        }
    }

    pub fn eval<T: Real>(self, x: [T; 2], t: T, t_final: T) -> T {
        self.eval_space(x) * self.eval_time(t, t_final)
    }

    /// Spatial factor; every preset is a product of a spatial and a temporal
    /// factor.
    pub fn eval_space<T: Real>(self, x: [T; 2]) -> T {
        let pi = T::PI();
        match self {
            SpacePreset::Bump => {
                let s = (pi * x[0]).sin() * (pi * x[1]).sin();
                s * s
            }
            SpacePreset::Dipole => {
                let s = (pi * x[0]).sin() * (pi * x[1]).sin();
                s * s * ((T::TAU() * x[0]).sin() + (T::TAU() * x[1]).sin())
            }
            SpacePreset::Cosine => (pi * x[0]).cos() * (pi * x[1]).cos(),
            SpacePreset::One => T::one(),
        }
    }

    pub fn eval_time<T: Real>(self, t: T, t_final: T) -> T {
        match self {
            SpacePreset::Bump | SpacePreset::Dipole => {
                let s = (T::PI() * t / t_final).sin();
                s * s
            }
            SpacePreset::Cosine | SpacePreset::One => T::one(),
        }
    }
}

impl CellPreset {
    pub fn name(self) -> &'static str {
        match self {
            CellPreset::One => "one",
            CellPreset::Cos1 => "cos1",
            CellPreset::Cos1Sq => "cos1_sq",
            CellPreset::Cos1Cos2 => "cos1cos2",
        }
    }

    pub fn eval<T: Real>(self, y: [T; 2]) -> T {
        let c1 = (T::TAU() * y[0]).cos();
        match self {
            CellPreset::One => T::one(),
            CellPreset::Cos1 => c1,
            CellPreset::Cos1Sq => c1 * c1,
            CellPreset::Cos1Cos2 => c1 * (T::TAU() * y[1]).cos(),
        }
    }

    /// Exact mean over `Y`.
    pub fn mean<T: Real>(self) -> T {
        match self {
            CellPreset::One => T::one(),
            CellPreset::Cos1Sq => T::lit(0.5),
            CellPreset::Cos1 | CellPreset::Cos1Cos2 => T::zero(),
        }
    }
}

impl TimePreset {
    pub fn name(self) -> &'static str {
        match self {
            TimePreset::One => "one",
            TimePreset::Cos => "cos",
            TimePreset::CosSq => "cos_sq",
        }
    }

    pub fn eval<T: Real>(self, tau: T) -> T {
        let c = (T::TAU() * tau).cos();
        match self {
            TimePreset::One => T::one(),
            TimePreset::Cos => c,
            TimePreset::CosSq => c * c,
        }
    }

    /// Exact mean over `Z`.
    pub fn mean<T: Real>(self) -> T {
        match self {
            TimePreset::One => T::one(),
            TimePreset::Cos => T::zero(),
            TimePreset::CosSq => T::lit(0.5),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestFunction<T> {
    pub space: SpacePreset,
    pub cell: CellPreset,
    pub time: TimePreset,
    pub t_final: T,
}

impl<T: Real> TestFunction<T> {
    pub fn new(space: SpacePreset, cell: CellPreset, time: TimePreset, t_final: T) -> Result<Self> {
        if !(t_final > T::zero()) || !t_final.is_finite() {
            return Err(Error::InvalidArgument(format!("test function window {t_final} must be positive")));
        }
        Ok(TestFunction { space, cell, time, t_final })
    }

    /// Bump times `w`, constant in `tau`.
    pub fn bump(cell: CellPreset, t_final: T) -> Result<Self> {
        Self::new(SpacePreset::Bump, cell, TimePreset::One, t_final)
    }

    /// Dipole times `w`, constant in `tau`.
    pub fn dipole(cell: CellPreset, t_final: T) -> Result<Self> {
        Self::new(SpacePreset::Dipole, cell, TimePreset::One, t_final)
    }

    /// `psi(x, t, y, tau)`
    pub fn eval(&self, x: [T; 2], t: T, y: [T; 2], tau: T) -> T {
        self.space.eval(x, t, self.t_final) * self.cell.eval(y) * self.time.eval(tau)
    }

    /// `psi^eps(x, t) = psi(x, t, x / eps, t / eps)`
    pub fn eval_eps(&self, x: [T; 2], t: T, eps: T) -> T {
        self.eval(x, t, [x[0] / eps, x[1] / eps], t / eps)
    }

    /// Mean of `psi` over `Y x Z` divided by `phi`: the factor the limit
    /// pairing carries.
    pub fn fast_mean(&self) -> T {
        self.cell.mean::<T>() * self.time.mean::<T>()
    }

    pub fn name(&self) -> String {
        format!("{}-{}-{}", self.space.name(), self.cell.name(), self.time.name())
    }
}

impl<T: Real> fmt::Display for TestFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}
