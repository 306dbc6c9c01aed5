//! Symbolic and numeric machinery for first integrals of ordinary
//! differential equations and of their invariant difference schemes.

pub mod adjoint_solver;
pub mod continuous;
pub mod discrete;
pub mod expr;
pub mod independence;
mod linalg;
pub mod scheme_runtime;
