//! Spectral element solver for incompressible Navier-Stokes flows on moving
//! domains in the arbitrary Lagrangian-Eulerian frame.
//!
//! Velocity uses degree-N Lagrange polynomials on Gauss-Lobatto-Legendre
//! nodes, pressure degree N-2 on Gauss-Legendre nodes. Operators are
//! matrix-free and element-parallel; see [`exec::Exec`].

pub mod ale;
pub mod basis;
pub mod cases;
pub mod config;
pub mod error;
pub mod exec;
pub mod field;
pub mod linsolve;
pub mod mesh;
pub mod motion;
pub mod ops;
pub mod run;
pub mod tensor;

pub use error::{Result, SemError};
