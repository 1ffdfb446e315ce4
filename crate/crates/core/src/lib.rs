//! Nonparametric density estimation when every sample is reduced to a
//! `b`-bit message.
//!
//! The crate is organised bottom-up:
//!
//! - [`wavelet`]: compactly supported wavelet tables (Haar, Daubechies),
//!   point evaluation, coefficient analysis and synthesis on `[0, 1]`.
//! - [`besov`]: density fixtures, sampling, Besov norms and the sign-vector
//!   bump families used for lower-bound style experiments.
//! - [`quantize`]: dyadic binning, per-bin index sets and the unbiased
//!   ℓ1-polytope vertex quantizer.
//! - [`distsim`]: the `b`-bit channel, transcripts and the referee-side
//!   simulation of i.i.d. symbols from player messages.
//! - [`estimators`]: centralized linear/thresholded baselines and the
//!   single-level and multi-level communication-constrained estimators.
//! - [`harness`]: `L_r` risk measurement, sweeps and rate fitting.

pub mod besov;
pub mod distsim;
pub mod error;
pub mod estimators;
pub mod grid;
pub mod harness;
pub mod quantize;
pub mod rng;
pub mod wavelet;

pub use error::{Error, Result};
pub use grid::DensityGrid;
