//! Compact medial axis transforms from quasi-medial distance fields.
//!
//! The pipeline pairs a signed distance field with a medial field, takes
//! their difference (the Q-MDF), extracts a thin ε-level set around the
//! medial axis, and collapses it to a zero-volume membrane whose vertices
//! carry inscribed-sphere radii.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod extract;
pub mod features;
pub mod fields;
pub mod geom;
pub mod io;
pub mod metrics;
pub mod neural;
pub mod pipeline;
pub mod shrink;

pub use error::{Error, Result};
