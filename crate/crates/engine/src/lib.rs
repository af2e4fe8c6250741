//! Out-of-core training of multi-relation graph embeddings.
//!
//! Node embeddings are split into `p` partitions stored on disk. Training
//! visits the `p^2` edge buckets in an order chosen to limit partition
//! swaps, keeps at most `c` partitions in a buffer, and runs each bucket
//! through a bounded-staleness pipeline.

pub mod block;
pub mod buffer;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod pipeline;
pub mod run;
pub mod store;
pub mod synthetic;

pub use error::{EngineError, Result};
