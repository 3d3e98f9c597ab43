//! Rank-based consensus fusion of uncalibrated, tone-mapped images of a
//! static scene.
//!
//! Every input image contributes only the *ordering* of its pixel values.
//! A [`ConsensusState`] keeps a strict rank permutation over a fixed canvas
//! plus a per-pixel vote vector, and folds observations in one at a time with
//! an `O(n log n)` positional update. Display values are attached only at
//! render time, by histogram matching.
//!
//! Modules:
//!
//! - [`rankcore`]: argsort, tied ranks, exact and sampled Kendall tau.
//! - [`consensus`]: state, update, merge, freeze test, rendering, persistence.
//! - [`register`]: star detection, similarity-invariant quad hashes, a small
//!   plate solver and nearest-neighbour resampling onto the canvas.
//! - [`synth`]: synthetic sky truth and tone-mapped, noisy observations.
//! - [`pipeline`]: image I/O, run configuration, batch combine and metrics.
//!
//! Pixel values, ranks, votes and scores are generic over [`Scalar`] (`f32`
//! or `f64`). Star geometry is always `f64`. The aliases at the crate root
//! fix the scalar to `f64`, which is what the pipeline and CLI use.

pub mod consensus;
pub mod error;
pub mod grid;
pub mod pipeline;
pub mod rankcore;
pub mod register;
pub mod scalar;
pub mod synth;

pub use consensus::{Canvas, HistogramSource};
pub use error::{Error, Result};
pub use grid::Grid;
pub use rankcore::{Permutation, RankVector};
pub use register::{QuadHash, QuadIndex, SimilarityTransform, Star, StarList};
pub use scalar::Scalar;

/// Consensus state with `f64` votes.
pub type ConsensusState = consensus::ConsensusState<f64>;
/// Registered observation with `f64` values and weights.
pub type ObservedImage = consensus::ObservedImage<f64>;
/// Row-major 2-D grid of `f64` values.
pub type GridF64 = grid::Grid<f64>;

/// Single-precision consensus state.
pub type ConsensusStateF32 = consensus::ConsensusState<f32>;
/// Single-precision observation.
pub type ObservedImageF32 = consensus::ObservedImage<f32>;
