//! Choquet integrals with respect to distorted Lebesgue measures on `[0, 1]`
//! and the nonlinear Volterra operator `V(f)(x) = (C)∫_0^x f dmu`.

pub mod capacities;
pub mod choquet;
pub mod cli;
pub mod error;
pub mod functions;
pub mod intervals;
pub mod quadrature;
pub mod spaces;
pub mod verify;
pub mod volterra;

pub use capacities::{Capacity, DistortionFunction};
pub use choquet::{choquet_integral, IntegralResult, QuadratureConfig};
pub use error::{Error, Result};
pub use functions::{Function, PiecewiseLinear, StepFunction};
pub use intervals::IntervalUnion;
