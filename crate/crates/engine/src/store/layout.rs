//! Node-to-partition assignment and edge bucketing.

use graphvec_core::partition::bucket_index;
use graphvec_core::{rng, PartitionAssignment};
use rand::seq::SliceRandom;

use super::format::Edge;
use crate::error::{EngineError, Result};

/// Randomly permutes node ids so that partition `k` holds a contiguous
/// range of new ids. Returns the assignment and `relabel[old] = new`.
pub fn partition_nodes(num_nodes: u64, partitions: u32, seed: u64) -> Result<(PartitionAssignment, Vec<u32>)> {
    let assignment = PartitionAssignment::uniform(num_nodes, partitions)?;
    let n =
        u32::try_from(num_nodes).map_err(|_| EngineError::Config(format!("{num_nodes} nodes exceed 32-bit ids")))?;
    let mut order: Vec<u32> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[0x9A27]));
    let mut relabel = vec![0u32; order.len()];
    for (new, &old) in order.iter().enumerate() {
        relabel[old as usize] = new as u32;
    }
    Ok((assignment, relabel))
}

pub fn relabel_edges(edges: &mut [Edge], relabel: &[u32]) {
    for e in edges {
        e.src = relabel[e.src as usize];
        e.dst = relabel[e.dst as usize];
    }
}

/// Edges grouped by bucket `(i, j)` in row-major bucket order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeBuckets {
    pub partitions: u32,
    pub edges: Vec<Edge>,
    /// `p^2 + 1` offsets into `edges`.
    pub offsets: Vec<u64>,
}

impl EdgeBuckets {
    /// Stable counting sort of `edges` into buckets.
    pub fn build(edges: &[Edge], assignment: &PartitionAssignment) -> Result<Self> {
        let p = assignment.num_partitions();
        let part = |node: u32| {
            assignment
                .partition_of(u64::from(node))
                .ok_or_else(|| EngineError::Mismatch(format!("node {node} outside {} nodes", assignment.num_nodes())))
        };
        let mut keys = Vec::with_capacity(edges.len());
        let mut counts = vec![0u64; (p as usize) * (p as usize) + 1];
        for e in edges {
            let k = bucket_index(part(e.src)?, part(e.dst)?, p);
            keys.push(k as u32);
            counts[k + 1] += 1;
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let offsets = counts.clone();
        let mut cursor = counts;
        let mut out = vec![Edge::default(); edges.len()];
        for (e, &k) in edges.iter().zip(&keys) {
            out[cursor[k as usize] as usize] = *e;
            cursor[k as usize] += 1;
        }
        Ok(EdgeBuckets { partitions: p, edges: out, offsets })
    }

    pub fn from_parts(partitions: u32, edges: Vec<Edge>, offsets: Vec<u64>) -> Result<Self> {
        let buckets = partitions as usize * partitions as usize;
        let ok = offsets.len() == buckets + 1
            && offsets[0] == 0
            && offsets.windows(2).all(|w| w[0] <= w[1])
            && offsets[buckets] == edges.len() as u64;
        if !ok {
            return Err(EngineError::Mismatch(format!(
                "bucket offsets do not describe {} edges in {buckets} buckets",
                edges.len()
            )));
        }
        Ok(EdgeBuckets { partitions, edges, offsets })
    }

    pub fn bucket(&self, src_part: u32, dst_part: u32) -> &[Edge] {
        let k = bucket_index(src_part, dst_part, self.partitions);
        &self.edges[self.offsets[k] as usize..self.offsets[k + 1] as usize]
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}
