//! Equivariant Witten deformation on surfaces of revolution.
//!
//! The crate assembles the S¹-equivariant (Cartan) complex of invariant forms
//! on a discretised surface of revolution, deforms it by an invariant Morse
//! function, and extracts low-lying spectra to test the equivariant Morse
//! inequalities numerically.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backend;
pub mod cartan;
pub mod catalog;
pub mod error;
pub mod linalg;
pub mod local;
pub mod pipeline;
pub mod spectral;

pub use error::{Error, Result};
