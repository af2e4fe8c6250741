#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use graphvec::block::PartitionBlock;
use graphvec::store::{Dataset, LayoutOptions, ParamFiles};
use graphvec::synthetic::CommunityGraph;

pub fn community_dataset(
    dir: &Path,
    nodes: u32,
    edges: usize,
    relations: u32,
    p: u32,
    dim: usize,
    seed: u64,
) -> Dataset {
    let mut g = CommunityGraph::social(nodes, edges, seed);
    g.relations = relations;
    g.community_size = 16;
    g.split = [0.9, 0.05, 0.05];
    Dataset::create(dir, g.generate(), LayoutOptions { partitions: p, dim, seed }, false).unwrap()
}

pub fn load_blocks(files: &ParamFiles) -> Vec<Arc<PartitionBlock>> {
    (0..files.num_partitions())
        .map(|k| {
            let data = files.read_partition(k).unwrap();
            Arc::new(PartitionBlock::new(k, files.assignment.start(k) as u32, files.dim, data, None))
        })
        .collect()
}

/// Bit patterns of all parameters and accumulators, in partition order.
pub fn block_bits(blocks: &[Arc<PartitionBlock>]) -> Vec<u32> {
    blocks
        .iter()
        .flat_map(|b| {
            let d = b.read();
            d.params.iter().chain(&d.accum).map(|v| v.to_bits()).collect::<Vec<_>>()
        })
        .collect()
}

pub fn file_bits(files: &ParamFiles) -> Vec<u32> {
    (0..files.num_partitions())
        .flat_map(|k| {
            let d = files.read_partition(k).unwrap();
            d.params.iter().chain(&d.accum).map(|v| v.to_bits()).collect::<Vec<_>>()
        })
        .collect()
}
