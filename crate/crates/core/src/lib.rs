//! Exact symbolic engine for Lie point symmetry analysis of polynomial PDE
//! systems: determining equations and their rational nullspace, commutator
//! and adjoint tables, one-parameter flows, classification of
//! one-dimensional subalgebras, similarity reductions, and numeric
//! verification of reduced solutions.
//!
//! All symbolic computation is over exact rationals; floating point enters
//! only in [`numverify`] and in explicitly flagged numeric fallbacks.
//!
//! The crate is `no_std`-compatible (`alloc` required); the `std` feature
//! (default) only adds `std::error::Error` impls.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod detsolve;
pub mod exprcore;
pub mod fmath;
pub mod jet;
pub mod liealg;
pub mod linalg;
pub mod optsys;
pub mod prolong;
pub mod reduce;
pub mod rng;

#[cfg(test)]
pub(crate) mod testsys;
