//! First eigenvalue of the regional fractional p-Laplacian on a bounded
//! domain with an exterior Dirichlet condition on a set of prescribed
//! measure, plus shape optimization of that set and local (s -> 1)
//! reference problems.

pub mod asympt;
pub mod error;
pub mod eigensolve;
pub mod geometry;
pub mod kernel;
pub mod shapeopt;

mod gamma;
mod quad;

pub use error::{Error, Result};
