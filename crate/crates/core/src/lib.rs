//! Sparse coding of natural images with an over-complete log-Gabor pyramid.
//!
//! The crate is organized around the stages of the pipeline:
//!
//! * [`imagecore`] — image ingestion, spectral whitening, circular masking and
//!   synthetic stimuli,
//! * [`loggabor`] — the log-Gabor filter bank and the linear transform to a
//!   complex coefficient pyramid,
//! * [`pursuit`] — greedy matching pursuit over the pyramid, reconstruction and
//!   residual-energy accounting,
//! * [`shl`] — sparse Hebbian learning of patch dictionaries with homeostasis,
//! * [`priors`] — first-order orientation statistics and second-order edge
//!   co-occurrence ("chevron") statistics, plus co-occurrence-guided pursuit,
//! * [`bench`] — efficiency experiments and parameter sweeps,
//! * [`config`] — run configuration shared by the command-line tool.

pub mod bench;
pub mod config;
mod error;
pub mod fft;
pub mod imagecore;
pub mod loggabor;
pub mod priors;
pub mod pursuit;
pub mod shl;

pub use error::{Error, Result};
