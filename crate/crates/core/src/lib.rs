//! Echo-modulation-curve T2 mapping for multi-echo spin-echo MRI.
//!
//! [`emc_sim`] simulates echo trains with the extended phase graph,
//! [`dictionary`] tabulates them over a (T2, B1) grid, [`fitter`] matches
//! measured stacks against it, [`phantom`] builds synthetic ground truth and
//! [`eval`] scores parameter maps. [`io`] holds the file formats.

pub mod dictionary;
pub mod emc_sim;
mod error;
pub mod eval;
pub mod fitter;
pub mod io;
pub mod phantom;
pub mod range;

pub use error::{Error, Result, EXIT_IO, EXIT_NUMERIC, EXIT_OK, EXIT_VALIDATION};
