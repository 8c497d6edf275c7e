//! Digital twin of a free-induction-decay atomic magnetometer: field and
//! signal simulation, Hilbert phase reconstruction, and dc/ac field estimation.

// `!(x > 0.0)` guards are written to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dsp;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod fieldmodel;
pub mod physics;
pub mod reconstruct;
pub mod record;
pub mod rng;
pub mod signalsim;
pub mod species;

pub use error::{Error, Result};
