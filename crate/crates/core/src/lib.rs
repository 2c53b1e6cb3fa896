//! Sound output certification for piecewise-linear networks whose input
//! ranges over a line segment or a weighted polygonal chain.
//!
//! The abstract state is a weighted union of regions of two kinds:
//!
//! - chains of segments, propagated exactly (affine layers move the chain
//!   nodes, ReLU splits each segment at its sign crossings),
//! - interval boxes, produced by a relaxation heuristic that trades exactness
//!   for region count, propagated with interval arithmetic.
//!
//! In probabilistic mode region weights form a distribution over the input
//! segment, and the certifier returns sound lower/upper bounds on the
//! probability that the output satisfies a property. Independent sampling and
//! dense-grid oracles live in [`oracle`] for cross-checking the analysis.

pub mod certify;
pub mod domain;
mod error;
pub mod golden;
pub mod network;
pub mod oracle;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
