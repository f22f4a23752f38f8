//! Qu-Net: a from-scratch U-Net whose bottleneck can be replaced by QuFeX,
//! a quantum feature-extraction layer evaluated on an exact statevector
//! simulator.
//!
//! Modules, bottom-up:
//!
//! * [`qsim`]: dense statevector simulation, exact Pauli-Z expectations and
//!   parameter-shift gradients.
//! * [`nn`]: the classical kernels a U-Net needs (conv, pooling, transposed
//!   conv, activations, BCE, Adam) with hand-written backward passes.
//! * [`qufex`]: the quantum layer, its circuit templates and feature grouping.
//! * [`models`]: U-Net / Qu-Net builders, parameter accounting, checkpoints.
//! * [`data`]: image/mask ingestion, bilinear resizing, partitions and a
//!   synthetic segmentation set.
//! * [`harness`]: IoU, training, the multi-partition protocol and summary
//!   statistics.

pub mod data;
pub mod error;
pub mod harness;
pub mod models;
pub mod nn;
pub mod qsim;
pub mod qufex;

pub use error::{Error, Result};
pub use nn::Tensor;
