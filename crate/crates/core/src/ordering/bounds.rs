use crate::error::{Error, Result};

/// Minimum number of swaps (initial fill excluded) any buffer sequence
/// needs so that every pair of partitions is co-resident at least once:
/// `ceil((p(p-1)/2 - c(c-1)/2) / (c-1))`.
pub fn lower_bound_swaps(partitions: u32, capacity: u32) -> Result<u64> {
    let (p, c) = (u64::from(partitions), u64::from(capacity));
    if p == 0 || c == 0 || c > p {
        return Err(Error::InvalidBuffer { partitions, capacity });
    }
    if c == p {
        return Ok(0);
    }
    if c == 1 {
        return Err(Error::InvalidBuffer { partitions, capacity });
    }
    let remaining = p * (p - 1) / 2 - c * (c - 1) / 2;
    Ok(remaining.div_ceil(c - 1))
}

/// Swap count of the elimination ordering in closed form:
/// with `x = floor((p-c)/(c-1))`, `(p-c) + (x+1)((p-c) - x(c-1)/2)`.
pub fn elimination_swaps(partitions: u32, capacity: u32) -> Result<u64> {
    let (p, c) = (u64::from(partitions), u64::from(capacity));
    if p == 0 || c == 0 || c > p {
        return Err(Error::InvalidBuffer { partitions, capacity });
    }
    if c == p {
        return Ok(0);
    }
    if c == 1 {
        return Err(Error::InvalidBuffer { partitions, capacity });
    }
    let x = (p - c) / (c - 1);
    // x(x+1) is even, so the halving is exact.
    Ok((p - c) + (x + 1) * (p - c) - (x + 1) * x * (c - 1) / 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwapBound {
    pub lower_bound: u64,
    pub elimination_count: u64,
    /// Number of full rounds after the first, `floor((p-c)/(c-1))`.
    pub rounds_x: u64,
}

impl SwapBound {
    pub fn new(partitions: u32, capacity: u32) -> Result<Self> {
        let lower_bound = lower_bound_swaps(partitions, capacity)?;
        let elimination_count = elimination_swaps(partitions, capacity)?;
        let rounds_x = if capacity >= 2 { u64::from(partitions - capacity) / u64::from(capacity - 1) } else { 0 };
        Ok(Self { lower_bound, elimination_count, rounds_x })
    }
}
