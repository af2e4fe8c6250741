use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two vectors or matrices that must agree in length do not.
    DimensionMismatch { expected: usize, found: usize },
    /// ComplEx stores real and imaginary halves, so `d` must be even.
    OddComplexDim(usize),
    /// A batch with no positive edges.
    EmptyBatch,
    /// A score or loss term became NaN or infinite.
    NonFiniteScore { batch: u64 },
    /// Negative sampling was asked to draw from an empty node range.
    EmptyPool,
    /// Invalid partition count / buffer capacity combination.
    InvalidBuffer { partitions: u32, capacity: u32 },
    /// More partitions requested than there are nodes.
    TooManyPartitions { partitions: u32, nodes: u64 },
    /// A negative-sampling or evaluation fraction outside [0, 1].
    InvalidFraction(f64),
    /// A row index outside the slice it addresses.
    RowOutOfRange { row: usize, rows: usize },
    /// Metrics requested over zero ranked candidates.
    NoRanks,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::OddComplexDim(d) => write!(f, "ComplEx requires an even dimension, got {d}"),
            Error::EmptyBatch => f.write_str("batch has no positive edges"),
            Error::NonFiniteScore { batch } => write!(f, "non-finite score in batch {batch}"),
            Error::EmptyPool => f.write_str("negative sampling pool is empty"),
            Error::InvalidBuffer { partitions, capacity } => {
                write!(f, "invalid buffer configuration: {partitions} partitions with capacity {capacity}")
            }
            Error::TooManyPartitions { partitions, nodes } => {
                write!(f, "cannot split {nodes} nodes into {partitions} partitions")
            }
            Error::InvalidFraction(a) => write!(f, "fraction {a} is outside [0, 1]"),
            Error::RowOutOfRange { row, rows } => {
                write!(f, "row {row} out of range for {rows} rows")
            }
            Error::NoRanks => f.write_str("no ranks to aggregate"),
        }
    }
}

impl core::error::Error for Error {}
