//! Plane-sweep multi-view stereo with view-count- and scale-agnostic
//! aggregation, cascaded log-depth refinement, depth/mesh evaluation and
//! TSDF fusion.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod costvolume;
pub mod depth;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod fusion;
pub mod geometry;
pub mod pipeline;

pub use error::{MvsError, Result};
