//! Dispersive cavity-QED and trapped-ion simulator for generating entangled
//! states of many multi-level atoms without individual addressing.
//!
//! The crate is layered bottom-up: [`algebra`] builds the composite space,
//! [`hamiltonians`] constructs every frame of the driven Tavis-Cummings and
//! ion Hamiltonians, [`dynamics`] propagates states, [`protocols`] runs the
//! staged entangling schedules, and [`analysis`] scores the results.

pub mod algebra;
pub mod analysis;
pub mod dynamics;
mod error;
pub mod hamiltonians;
pub mod protocols;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
