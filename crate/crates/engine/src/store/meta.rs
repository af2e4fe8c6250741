use std::fs;
use std::path::Path;

use graphvec_core::PartitionAssignment;
use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Contents of `meta.json` in a preprocessed dataset directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub format_version: u32,
    pub num_nodes: u64,
    pub num_relations: u32,
    pub num_edges: u64,
    pub num_partitions: u32,
    pub embedding_dim: usize,
    /// Edge counts of the train, valid and test splits.
    pub split_sizes: [u64; 3],
    pub seed: u64,
}

impl GraphMeta {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(EngineError::Mismatch(msg));
        if self.format_version != FORMAT_VERSION {
            return bad(format!("unsupported format version {}", self.format_version));
        }
        if self.split_sizes.iter().sum::<u64>() != self.num_edges {
            return bad(format!("split sizes {:?} do not add up to {} edges", self.split_sizes, self.num_edges));
        }
        if self.embedding_dim == 0 {
            return bad("embedding dimension is zero".into());
        }
        if self.num_relations == 0 {
            return bad("no relation types".into());
        }
        self.assignment().map(|_| ())
    }

    pub fn assignment(&self) -> Result<PartitionAssignment> {
        Ok(PartitionAssignment::uniform(self.num_nodes, self.num_partitions)?)
    }

    /// Bytes of one embedding row plus its Adagrad accumulator.
    pub fn row_bytes(&self) -> u64 {
        2 * self.embedding_dim as u64 * 4
    }

    /// Node parameter and optimizer-state bytes over the whole graph.
    pub fn node_state_bytes(&self) -> u64 {
        self.num_nodes * self.row_bytes()
    }

    /// Size of the largest partition file.
    pub fn partition_bytes(&self) -> u64 {
        self.num_nodes.div_ceil(u64::from(self.num_partitions.max(1))) * self.row_bytes()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| EngineError::io(path, e))?;
        let meta: GraphMeta = serde_json::from_str(&text).map_err(|e| EngineError::format(path, e.to_string()))?;
        meta.validate()?;
        Ok(meta)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("meta serializes");
        fs::write(path, text + "\n").map_err(|e| EngineError::io(path, e))
    }
}
