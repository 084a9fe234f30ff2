//! Symbolic-numeric toolkit for matrix pencils, Nijenhuis operators,
//! Veronese and Kronecker webs, their associated nonlinear PDEs and linear
//! Poisson structures.

pub mod calculus;
pub mod error;
pub mod expr;
pub mod liealg;
pub mod linalg;
pub mod nijenhuis;
pub mod pde;
pub mod pencil;
pub mod poisson;
pub mod rat;
pub mod webs;
