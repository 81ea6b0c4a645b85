//! Numerical laboratory for the spectral theory of polynomially bounded
//! functions on the half line and for decay of mild solutions of
//! `D^alpha u = A u + f` with a matrix `A`.

pub mod cauchy_solver;
pub mod dd_resolvent;
pub mod error;
pub mod frac_calculus;
pub mod operator_spectrum;
pub mod signal;
pub mod special_fn;
pub mod stability_lab;
pub mod weighted_space;

pub use error::{Error, Result};
pub use signal::SampledSignal;
pub use special_fn::FractionalOrder;
