//! Preprocessed graph storage: ingest, partition layout and binary files.

mod dataset;
mod format;
mod ingest;
mod layout;
mod meta;

pub use dataset::{export_embeddings, Dataset, LayoutOptions, ParamFiles, Split};
pub use format::{read_edges, read_f32s, read_u64s, write_edges, write_f32s, write_u64s, Edge};
pub use ingest::{ingest_file, ingest_presplit, split_counts, IngestOptions, Interner, RawGraph, UNTYPED_RELATION};
pub use layout::{partition_nodes, relabel_edges, EdgeBuckets};
pub use meta::{GraphMeta, FORMAT_VERSION};
