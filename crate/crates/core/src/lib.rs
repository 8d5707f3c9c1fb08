//! Constrained mountain-pass machinery on mass spheres of a finite-dimensional
//! Hilbert pair: explicit geodesics and parallel transport, second-order descent
//! deformations, and a monotonicity-trick min-max driver.

pub mod cli;
pub mod deformation;
pub mod error;
pub mod functional;
pub mod geometry;
pub mod linalg;
pub mod minmax;
pub mod pair;
pub mod problems;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
pub use functional::ConstrainedFunctional;
pub use linalg::{Matrix, Vector};
pub use pair::{HilbertPair, SpherePoint};
