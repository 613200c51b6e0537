//! The validation scenarios: steady Stokes accuracy, a cylinder moving in a
//! cavity, a sloshing tank, and a Taylor-Green vortex for temporal studies.

pub mod cylinder;
pub mod damping;
pub mod norms;
pub mod sloshing;
pub mod stokes;
pub mod taylor_green;
