//! Uniform node partitioning and edge-bucket indexing.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Contiguous row ranges, one per partition, after node relabeling.
///
/// Partition `k` owns node ids `offsets[k]..offsets[k + 1]`. Sizes differ
/// by at most one: the first `|V| mod p` partitions get one extra row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionAssignment {
    offsets: Vec<u64>,
}

impl PartitionAssignment {
    pub fn uniform(num_nodes: u64, partitions: u32) -> Result<Self> {
        if partitions == 0 || u64::from(partitions) > num_nodes.max(1) {
            return Err(Error::TooManyPartitions { partitions, nodes: num_nodes });
        }
        let p = u64::from(partitions);
        let base = num_nodes / p;
        let extra = num_nodes % p;
        let mut offsets = Vec::with_capacity(partitions as usize + 1);
        let mut start = 0u64;
        offsets.push(0);
        for k in 0..p {
            start += base + u64::from(k < extra);
            offsets.push(start);
        }
        Ok(Self { offsets })
    }

    pub fn from_offsets(offsets: Vec<u64>) -> Self {
        debug_assert!(offsets.windows(2).all(|w| w[0] <= w[1]));
        Self { offsets }
    }

    pub fn num_partitions(&self) -> u32 {
        (self.offsets.len() - 1) as u32
    }

    pub fn num_nodes(&self) -> u64 {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    pub fn start(&self, partition: u32) -> u64 {
        self.offsets[partition as usize]
    }

    pub fn rows(&self, partition: u32) -> u64 {
        self.offsets[partition as usize + 1] - self.offsets[partition as usize]
    }

    /// Partition holding `node`, or `None` if the node is out of range.
    pub fn partition_of(&self, node: u64) -> Option<u32> {
        if node >= self.num_nodes() {
            return None;
        }
        // partition_point returns the first offset > node; the owner is one before.
        let idx = self.offsets.partition_point(|&o| o <= node);
        Some((idx - 1) as u32)
    }
}

/// Flat index of bucket `(i, j)` among `p * p` buckets.
#[inline]
pub fn bucket_index(src_part: u32, dst_part: u32, partitions: u32) -> usize {
    src_part as usize * partitions as usize + dst_part as usize
}
