//! Allocation-only building blocks for training multi-relation graph
//! embeddings out of core.
//!
//! Everything here is pure computation over borrowed slices: score
//! functions and their gradients, the Adagrad rule, negative sampling,
//! edge-bucket orderings with their swap accounting, and link-prediction
//! metrics. File formats, threads and the partition buffer live in the
//! `graphvec` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod eval;
pub mod model;
pub mod ordering;
pub mod partition;
pub mod real;
pub mod rng;

pub use error::{Error, Result};
pub use eval::{aggregate, rank_edge, rank_from_scores, CorruptionSide, EvalReport};
pub use model::{
    adagrad_step, init_uniform, loss_and_grad, sample_negatives, score, BatchGrad, BatchInput, GradientDelta,
    LocalEdge, ModelKind, NegativePool, NegativeSampleSpec, ParameterSlice,
};
pub use ordering::{
    elimination_order, elimination_swaps, hilbert_order, hilbert_symmetric_order, lower_bound_swaps, random_order,
    simulate_io, Bucket, IoReport, OrderingKind, OrderingPlan, SwapBound,
};
pub use partition::PartitionAssignment;
pub use real::Real;
