//! Pseudo-spectral Galerkin simulation of the 2D stochastic Navier-Stokes
//! equation with fractional dissipation `nu (-Δ)^{alpha/2}` on the torus.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod fft;

pub mod cli;
pub mod diagnostics;
pub mod noise;
pub mod ops;
pub mod solver;
pub mod spectral_field;
pub mod stream;
