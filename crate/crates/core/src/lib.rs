//! Closed-form geometry, loss, pseudo-labeling, evaluation and planning
//! procedures for a feed-forward 4D driving-scene model, operating on
//! file-based tensors.
//!
//! Modules:
//! - [`geometry`]: SE(3) poses, point maps, rotation distance, normalization
//! - [`metrics`]: depth, trajectory and segmentation evaluation
//! - [`loss`]: training losses with analytic gradients and their composition
//! - [`motion`]: motion-mask pseudo ground truth from instance tracks
//! - [`planning`]: anchor clustering, plan decoding, planning losses, PDMS
//! - [`io`]: tensor container, sequence manifests, configuration
//! - [`cli`]: the `lfg` command-line front end

pub mod cli;
pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod grid;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod motion;
pub mod planning;

pub use error::{Error, Result};
