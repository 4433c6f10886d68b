//! Spectral theory of the one-dimensional zigzag process.
//!
//! The generator `L f = theta f' + lambda (F f - f)` of the zigzag process
//! with unimodal potential `U` has pure point spectrum given by the zeros of
//! a holomorphic characteristic function `Z`. This crate evaluates `Z`,
//! locates its zeros, builds eigenfunctions, resolvents and rank-one
//! projections, computes first-order refreshment perturbations and simulates
//! the process for empirical checks.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// `!(x < y)` rejects NaN; quadrature nodes are tabulated to full published precision
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

extern crate alloc;

pub mod charfn;
pub mod error;
pub mod operator;
pub mod perturbation;
pub mod potential;
pub mod quadrature;
pub mod rootfinder;
pub mod simulator;
pub mod specialfn;
pub mod spectrum;

pub use error::{Error, Result};
pub use num_complex::Complex64;
