//! Multi-dimensional quality assessment for text-to-3D generation.
//!
//! The evaluator scores a generated sample along several perceptual
//! dimensions (by default: alignment, geometry, texture, overall) from
//! precomputed multi-view patch features and text-token features. Each
//! dimension owns a learned condition feature; conditions steer both a
//! patch-weighting fusion stage and a hypernetwork that emits the weights
//! of a per-dimension mapping head.
//!
//! The crate is split into:
//!
//! * [`feature`]: the feature data model and a deterministic toy generator
//!   that stands in for frozen encoders at desk scale,
//! * [`condition`]: learnable prompt tokens and the frozen text-encoder
//!   abstraction producing condition features,
//! * [`fusion`]: condition-dependent patch weighting and the quality
//!   feature MLP,
//! * [`hypernet`]: generation of mapping-head weights from a condition
//!   feature, and the mapping head itself,
//! * [`model`]: the assembled parameter set with forward and analytic
//!   backward passes,
//! * [`loss`], [`adam`], [`train`]: losses, the optimizer, and the
//!   prompt-disjoint cross-validation harness,
//! * [`gradcheck`]: finite-difference verification of every gradient,
//! * [`stats`]: correlation metrics, subjective-score screening, MOS,
//!   report tables, and the view-averaged cosine baseline.
//!
//! Everything is `no_std` + `alloc`; file formats and the CLI live in the
//! companion `hyperscore-cli` crate. All randomness is counter-based and
//! seeded, so every result is bit-reproducible.

#![no_std]
// Index loops mirror the written-out math; iterator chains would obscure it.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod adam;
pub mod condition;
pub mod error;
pub mod feature;
pub mod fusion;
pub mod gradcheck;
pub mod hypernet;
pub mod loss;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;
