//! Entire spacelike graphs of prescribed scalar curvature (`σ₂`) in Minkowski space.
//!
//! Pointwise curvature algebra lives in [`geometry`], barriers and auxiliary
//! functions in [`barriers`], the discrete Dirichlet solver in [`dirichlet`],
//! the expanding-domain driver in [`entire`] and numerical checks of the
//! supporting inequalities in [`verify`].

pub mod barriers;
pub mod curvature;
pub mod dirichlet;
pub mod entire;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod linsolve;
pub mod verify;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
