//! Seeded synthetic graphs with community structure.

use graphvec_core::rng;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::store::{split_counts, Edge, RawGraph};

/// Nodes are grouped into communities of `community_size`. Sources follow a
/// skewed degree distribution; with probability `intra` the destination is
/// drawn from the source's community, shifted by the relation id, otherwise
/// from the whole graph.
#[derive(Debug, Clone, Copy)]
pub struct CommunityGraph {
    pub nodes: u32,
    pub edges: usize,
    pub relations: u32,
    pub community_size: u32,
    pub intra: f64,
    /// Exponent applied to a uniform draw when picking sources; larger is more skewed.
    pub skew: f64,
    pub split: [f64; 3],
    pub seed: u64,
}

impl CommunityGraph {
    /// A social-network-like shape: one relation, sparse, skewed degrees.
    pub fn social(nodes: u32, edges: usize, seed: u64) -> Self {
        CommunityGraph {
            nodes,
            edges,
            relations: 1,
            community_size: 64,
            intra: 0.85,
            skew: 2.0,
            split: [0.98, 0.01, 0.01],
            seed,
        }
    }

    pub fn generate(&self) -> RawGraph {
        let mut rng = rng::stream(self.seed, &[0xC0DE]);
        let n = self.nodes;
        let size = self.community_size.clamp(1, n);
        let communities = n.div_ceil(size);
        let mut edges = Vec::with_capacity(self.edges);
        while edges.len() < self.edges {
            let u: f64 = rng.gen();
            let src = ((u.powf(self.skew) * f64::from(n)) as u32).min(n - 1);
            let rel = rng.gen_range(0..self.relations);
            let dst = if rng.gen_bool(self.intra) {
                let c = (src / size + rel) % communities;
                let lo = c * size;
                let hi = (lo + size).min(n);
                rng.gen_range(lo..hi)
            } else {
                rng.gen_range(0..n)
            };
            if dst != src {
                edges.push(Edge::new(src, rel, dst));
            }
        }
        edges.shuffle(&mut rng);
        let [train, valid, _] = split_counts(edges.len(), self.split);
        let test = edges.split_off(train + valid);
        let valid = edges.split_off(train);
        RawGraph {
            node_names: (0..n).map(|i| i.to_string()).collect(),
            relation_names: (0..self.relations).map(|r| format!("r{r}")).collect(),
            splits: [edges, valid, test],
        }
    }
}
