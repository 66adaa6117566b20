//! Robust regression losses, balanced multi-task loss weighting and
//! geodesic-point-similarity metrics for dense human pose estimation.
//!
//! The crate is organised by capability:
//!
//! - [`loss`]: the Dense Points loss and Smooth-L1 with exact gradients.
//! - [`weighting`]: static loss composition and the balanced weighting
//!   strategy (per-group softmin weights).
//! - [`gps`]: GPS, masked GPS, mask IoU and COCO-style AP over GPS thresholds.
//! - [`sim`]: a deterministic synthetic training simulator used to compare
//!   training stability across losses and weighting modes.
//! - [`harness`]: the command implementations behind the `dense-points` binary.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gps;
pub mod gradcheck;
pub mod harness;
pub mod loss;
pub mod sim;
pub mod weighting;

pub use error::{Error, Result};
