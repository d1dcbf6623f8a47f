//! Isogeometric Poisson stiffness matrices assembled by full Gauss quadrature or
//! by the surrogate method: quadrature on a sparse set of sample elements,
//! tensor-product spline interpolation of the interior stencils.

pub mod assembly;
pub mod error;
pub mod geometry;
pub mod interpolation;
pub mod quadrature;
pub mod run;
pub mod solve;
pub mod sparse;
pub mod splines;
pub mod surrogate;

pub use error::{Error, Result};
