//! Body-force presets `f(x, t)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::grid::MacGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Forcing {
    /// `(1 - e^{-t}) (sin^2(pi x1) sin(2 pi x2), -sin(2 pi x1) sin^2(pi x2))`:
    /// divergence free, zero on the boundary and at `t = 0`.
    Standard,
    Zero,
}

impl Forcing {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "standard" => Ok(Forcing::Standard),
            "zero" => Ok(Forcing::Zero),
            other => Err(Error::InvalidArgument(format!("unknown forcing `{other}` (expected standard or zero)"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Forcing::Standard => "standard",
            Forcing::Zero => "zero",
        }
    }

    pub fn eval<T: Real>(&self, x: [T; 2], t: T) -> [T; 2] {
        match self {
            Forcing::Zero => [T::zero(); 2],
            Forcing::Standard => {
                let pi = T::PI();
                let ramp = T::one() - (-t).exp();
                let (s1, s2) = ((pi * x[0]).sin(), (pi * x[1]).sin());
                [
                    ramp * s1 * s1 * (pi * x[1] * T::lit(2.0)).sin(),
                    -ramp * (pi * x[0] * T::lit(2.0)).sin() * s2 * s2,
                ]
            }
        }
    }

    /// Samples at the velocity nodes of `grid`.
    pub fn sample<T: Real>(&self, grid: &MacGrid, t: T) -> (Vec<T>, Vec<T>) {
        grid.sample_velocity(|x| self.eval(x, t))
    }
}

impl fmt::Display for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
