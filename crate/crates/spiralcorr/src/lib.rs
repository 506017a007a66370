//! Resampling-free serialization of triangle-mesh vertex neighborhoods and
//! the correspondence networks built on it.
//!
//! A vertex's neighborhood is enumerated by walking its rings in a fixed
//! rotational direction, producing a spiral sequence (center first, then
//! the ordered 1-ring, 2-ring, …). Per-vertex descriptors gathered along
//! that sequence — unblended and unresampled — feed either a recurrent
//! network (`LSTM-NET`) or a fully-connected one over fixed-length
//! sequences (`FCS-NET`) that classifies every vertex against a template,
//! yielding dense point-to-point shape correspondences. Geodesic-radius
//! error curves score the predictions.
//!
//! The crate is organized along the pipeline:
//!
//! - [`mesh`]: half-edge triangle meshes, OBJ/PLY loading, manifold
//!   validation, oriented one-ring traversal
//! - [`spiral`]: ring decomposition and the spiral operator
//! - [`features`]: descriptor ingestion, metric augmentation, batch
//!   serialization
//! - [`nn`]: the dense-tensor learning core (FC, LSTM, Adam, gradient
//!   checks)
//! - [`model`]: the two network architectures, training, checkpoints
//! - [`eval`]: geodesic-error curves and robustness sweeps
//!
//! See the `examples/` directory for one runnable walkthrough per
//! capability.

// index-based loops are the clearer form for the hand-rolled linear
// algebra in this crate
#![allow(clippy::needless_range_loop)]

pub mod eval;
pub mod features;
pub mod mesh;
pub mod model;
pub mod nn;
pub mod rng;
pub mod spiral;

pub use mesh::{HalfEdgeMesh, MeshError, VertexId};
pub use spiral::{RingDecomposition, SpiralSequence, PAD_VERTEX};
