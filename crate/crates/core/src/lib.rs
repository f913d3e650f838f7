//! Periodic homogenization of unsteady Stokes-type problems in two
//! dimensions.
//!
//! The pipeline: sample a Y-periodic coefficient field ([`coeff`]), solve the
//! divergence-constrained cell problems ([`cell`]), assemble the effective
//! tensor ([`tensor`]), integrate the fine-scale and homogenized problems on a
//! staggered grid ([`stokes`]) and compare them ([`twoscale`]). [`io`] holds
//! configuration, dumps and CSV reports.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to one of the two.

pub mod cell;
pub mod coeff;
pub mod error;
pub mod io;
pub mod krylov;
pub mod scalar;
pub mod stokes;
pub mod tensor;
pub mod twoscale;

pub use error::{Error, Result};
pub use scalar::Real;

pub type CoefficientFieldF64 = coeff::CoefficientField<f64>;
pub type CorrectorSetF64 = cell::CorrectorSet<f64>;
pub type EffectiveTensorF64 = tensor::EffectiveTensor<f64>;
pub type TrajectoryF64 = stokes::Trajectory<f64>;
pub type SweepReportF64 = twoscale::SweepReport<f64>;

pub type CoefficientFieldF32 = coeff::CoefficientField<f32>;
pub type CorrectorSetF32 = cell::CorrectorSet<f32>;
pub type EffectiveTensorF32 = tensor::EffectiveTensor<f32>;
pub type TrajectoryF32 = stokes::Trajectory<f32>;
