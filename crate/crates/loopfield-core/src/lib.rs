//! Lattice Yang-Mills loop algebra, Wilson-action harmonic analysis and exact
//! checks of the single-location master loop equation.
//!
//! The crate is `no_std` with `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod action;
pub mod driver;
pub mod equation;
pub mod group;
pub mod loops;
pub mod sweeps;
