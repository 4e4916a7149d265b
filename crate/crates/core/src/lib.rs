//! Ranking noisy response surfaces with neural classifiers.
//!
//! The crate treats "which of `L` noisy surfaces is smallest at `x`" as a
//! segmentation problem: points of the input space are pixels, the index of
//! the minimal surface is the pixel's class. Modules:
//!
//! - [`surfaces`]: synthetic surfaces, noisy samplers, ground-truth labels, loss.
//! - [`nn`]: a small neural-network engine (dense, conv, pool, upsample, concat)
//!   with manual backprop, Adam and gradient checking.
//! - [`ranking`]: designs, labeling and the train/evaluate experiment pipeline.
//! - [`bermudan`]: Bermudan max-call pricing with learned stop/continue maps.
//! - [`lattice`]: a two-asset binomial lattice used as the pricing oracle.

pub mod bermudan;
pub mod config;
pub mod error;
pub mod lattice;
pub mod nn;
pub mod ranking;
pub mod rng;
pub mod surfaces;

pub use error::{Error, Result};
pub use surfaces::{Domain, EvalGrid, Label, SurfaceSet};
