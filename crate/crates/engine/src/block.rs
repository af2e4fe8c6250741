//! In-memory partition blocks and the relation table.

use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

/// Embedding rows of one partition followed by their Adagrad state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlockData {
    pub params: Vec<f32>,
    pub accum: Vec<f32>,
}

impl BlockData {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        BlockData { params: vec![0.0; rows * dim], accum: vec![0.0; rows * dim] }
    }
}

/// Counts live blocks so peak buffer memory can be checked.
#[derive(Debug, Default)]
pub struct BlockTracker {
    live: AtomicUsize,
    peak: AtomicUsize,
}

impl BlockTracker {
    fn acquire(&self) {
        let now = self.live.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
    }

    pub fn live(&self) -> usize {
        self.live.load(Ordering::SeqCst)
    }

    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    pub fn reset_peak(&self) {
        self.peak.store(self.live(), Ordering::SeqCst);
    }
}

/// A partition's rows behind a lock, with a per-row update counter.
#[derive(Debug)]
pub struct PartitionBlock {
    pub partition: u32,
    /// Global id of row 0.
    pub first: u32,
    pub rows: usize,
    pub dim: usize,
    data: RwLock<BlockData>,
    versions: Vec<AtomicU32>,
    tracker: Option<Arc<BlockTracker>>,
}

impl PartitionBlock {
    pub fn new(partition: u32, first: u32, dim: usize, data: BlockData, tracker: Option<Arc<BlockTracker>>) -> Self {
        assert_eq!(data.params.len(), data.accum.len());
        assert!(dim > 0 && data.params.len().is_multiple_of(dim));
        let rows = data.params.len() / dim;
        if let Some(t) = &tracker {
            t.acquire();
        }
        PartitionBlock {
            partition,
            first,
            rows,
            dim,
            data: RwLock::new(data),
            versions: (0..rows).map(|_| AtomicU32::new(0)).collect(),
            tracker,
        }
    }

    pub fn read(&self) -> RwLockReadGuard<'_, BlockData> {
        self.data.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn write(&self) -> RwLockWriteGuard<'_, BlockData> {
        self.data.write().unwrap_or_else(|e| e.into_inner())
    }

    /// Local row of global node `node`, if it lives here.
    pub fn local(&self, node: u32) -> Option<usize> {
        let r = node.checked_sub(self.first)? as usize;
        (r < self.rows).then_some(r)
    }

    pub fn version(&self, row: usize) -> u32 {
        self.versions[row].load(Ordering::Acquire)
    }

    pub fn bump(&self, row: usize) {
        self.versions[row].fetch_add(1, Ordering::AcqRel);
    }
}

impl Drop for PartitionBlock {
    fn drop(&mut self) {
        if let Some(t) = &self.tracker {
            t.live.fetch_sub(1, Ordering::SeqCst);
        }
    }
}

/// Relation embeddings and their Adagrad state, kept resident.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelationTable {
    pub dim: usize,
    pub params: Vec<f32>,
    pub accum: Vec<f32>,
    /// Number of batches whose relation updates have been applied.
    pub updates: u64,
}

impl RelationTable {
    pub fn rows(&self) -> usize {
        self.params.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, r: u32) -> &[f32] {
        let d = self.dim;
        &self.params[r as usize * d..(r as usize + 1) * d]
    }
}

/// The partitions currently visible to a training or evaluation pass.
#[derive(Debug, Clone, Default)]
pub struct NodeView {
    blocks: Vec<Arc<PartitionBlock>>,
}

impl NodeView {
    pub fn new(mut blocks: Vec<Arc<PartitionBlock>>) -> Self {
        blocks.dedup_by_key(|b| b.partition);
        NodeView { blocks }
    }

    pub fn blocks(&self) -> &[Arc<PartitionBlock>] {
        &self.blocks
    }

    /// Block index and local row of `node`.
    pub fn locate(&self, node: u32) -> Option<(usize, usize)> {
        self.blocks.iter().enumerate().find_map(|(i, b)| b.local(node).map(|r| (i, r)))
    }
}
