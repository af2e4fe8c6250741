use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

/// How many negatives to draw and what fraction comes from the degree
/// distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativeSampleSpec {
    pub count: usize,
    pub degree_fraction: f64,
}

impl NegativeSampleSpec {
    pub fn new(count: usize, degree_fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&degree_fraction) {
            return Err(Error::InvalidFraction(degree_fraction));
        }
        Ok(Self { count, degree_fraction })
    }

    /// `ceil(alpha * n)` draws come from the degree table.
    pub fn degree_count(&self) -> usize {
        let x = self.degree_fraction * self.count as f64;
        let c = x as usize;
        let c = if (c as f64) < x { c + 1 } else { c };
        c.min(self.count)
    }
}

/// Candidate nodes for negatives: the contiguous id range
/// `first..first + len`, plus the edge endpoints falling in that range
/// (one entry per incident edge) used for degree-proportional draws.
#[derive(Debug, Clone, Copy)]
pub struct NegativePool<'a> {
    pub first: u32,
    pub len: u32,
    pub endpoints: &'a [u32],
}

/// Draws `spec.count` node ids: `ceil(alpha n)` by picking a uniform edge
/// endpoint (so frequency is proportional to degree), the rest uniformly
/// from the id range.
///
/// A pool whose endpoint table is empty falls back to uniform draws.
pub fn sample_negatives<R: Rng + ?Sized>(
    spec: &NegativeSampleSpec,
    pool: &NegativePool<'_>,
    rng: &mut R,
) -> Result<Vec<u32>> {
    if pool.len == 0 {
        return Err(Error::EmptyPool);
    }
    let by_degree = if pool.endpoints.is_empty() {
        if spec.degree_count() > 0 {
            log::warn!("no endpoints in pool starting at {}; drawing uniformly", pool.first);
        }
        0
    } else {
        spec.degree_count()
    };
    let mut out = Vec::with_capacity(spec.count);
    for _ in 0..by_degree {
        out.push(pool.endpoints[rng.gen_range(0..pool.endpoints.len())]);
    }
    for _ in by_degree..spec.count {
        out.push(pool.first + rng.gen_range(0..pool.len));
    }
    Ok(out)
}
