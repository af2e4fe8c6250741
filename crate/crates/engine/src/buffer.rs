//! Fixed-capacity partition buffer driven by a known bucket sequence.
//!
//! At most `capacity` partitions are resident. Admissions follow the bucket
//! sequence: the source partition first, then the destination, each evicting
//! the resident partition whose next use is furthest away. One prefetch slot
//! and one writeback slot sit beside the resident set, so at most
//! `capacity + 2` blocks are alive at once.

use std::collections::BTreeMap;
use std::mem;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use graphvec_core::ordering::{BufferEvent, NextUse};
use graphvec_core::Bucket;

use crate::block::{BlockTracker, NodeView, PartitionBlock};
use crate::error::{EngineError, Result};
use crate::store::ParamFiles;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferConfig {
    pub capacity: u32,
    /// Load the next needed partition in the background.
    pub prefetch: bool,
    /// Write evicted partitions in the background.
    pub async_writeback: bool,
    /// Never write partitions back.
    pub read_only: bool,
}

impl BufferConfig {
    pub fn new(capacity: u32) -> Self {
        BufferConfig { capacity, prefetch: true, async_writeback: true, read_only: false }
    }

    pub fn blocking(capacity: u32) -> Self {
        BufferConfig { capacity, prefetch: false, async_writeback: false, read_only: false }
    }
}

/// IO and admission counters for one pass over the bucket sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BufferStats {
    pub reads: u64,
    pub writes: u64,
    pub bytes_read: u64,
    pub bytes_written: u64,
    pub admissions: u64,
    /// Admissions that evicted a resident partition.
    pub swaps: u64,
    pub prefetch_hits: u64,
    /// Time `acquire` spent blocked on IO or on the staging slots.
    pub stall: Duration,
    pub peak_blocks: usize,
    pub events: Vec<BufferEvent>,
}

struct Resident {
    block: Arc<PartitionBlock>,
    pins: u32,
    dirty: bool,
}

enum Prefetch {
    Idle,
    Loading(u32),
    Ready(u32, Arc<PartitionBlock>),
}

struct State {
    resident: BTreeMap<u32, Resident>,
    cursor: usize,
    prefetch: Prefetch,
    /// Partition queued for or undergoing writeback.
    writeback: Option<u32>,
    writeback_block: Option<Arc<PartitionBlock>>,
    /// Partition being read synchronously by `acquire`.
    loading: Option<u32>,
    failure: Option<EngineError>,
    shutdown: bool,
    stats: BufferStats,
}

struct Shared {
    files: ParamFiles,
    config: BufferConfig,
    sequence: Vec<Bucket>,
    next_use: NextUse,
    tracker: Arc<BlockTracker>,
    state: Mutex<State>,
    cond: Condvar,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn wait<'a>(&self, st: MutexGuard<'a, State>) -> MutexGuard<'a, State> {
        self.cond.wait(st).unwrap_or_else(|e| e.into_inner())
    }

    /// Waits and charges the blocked time to the stall counter.
    fn stall<'a>(&self, st: MutexGuard<'a, State>) -> MutexGuard<'a, State> {
        let t = Instant::now();
        let mut st = self.wait(st);
        st.stats.stall += t.elapsed();
        st
    }

    fn load(&self, k: u32) -> Result<Arc<PartitionBlock>> {
        let data = self.files.read_partition(k)?;
        let first = self.files.assignment.start(k) as u32;
        Ok(Arc::new(PartitionBlock::new(k, first, self.files.dim, data, Some(self.tracker.clone()))))
    }

    fn store(&self, block: &PartitionBlock) -> Result<()> {
        self.files.write_partition(block.partition, &block.read())
    }

    fn count_read(&self, st: &mut State, k: u32) {
        st.stats.reads += 1;
        st.stats.bytes_read += self.files.partition_bytes(k);
    }

    fn count_write(&self, st: &mut State, k: u32) {
        st.stats.writes += 1;
        st.stats.bytes_written += self.files.partition_bytes(k);
    }

    /// First partition in the remaining sequence that is not already
    /// resident, staged or in flight.
    fn prefetch_target(&self, st: &State) -> Option<u32> {
        self.sequence[st.cursor.min(self.sequence.len())..]
            .iter()
            .flat_map(|b| [b.src, b.dst])
            .find(|k| !st.resident.contains_key(k) && st.writeback != Some(*k) && st.loading != Some(*k))
    }

    fn prefetch_loop(&self) {
        let mut st = self.lock();
        loop {
            if st.shutdown {
                return;
            }
            let target = match st.prefetch {
                Prefetch::Idle if st.failure.is_none() => self.prefetch_target(&st),
                _ => None,
            };
            let Some(k) = target else {
                st = self.wait(st);
                continue;
            };
            st.prefetch = Prefetch::Loading(k);
            drop(st);
            let res = self.load(k);
            st = self.lock();
            match res {
                Ok(block) => {
                    self.count_read(&mut st, k);
                    st.prefetch = Prefetch::Ready(k, block);
                }
                Err(e) => {
                    st.prefetch = Prefetch::Idle;
                    st.failure.get_or_insert(e);
                }
            }
            self.cond.notify_all();
        }
    }

    fn writeback_loop(&self) {
        let mut st = self.lock();
        loop {
            let Some(block) = st.writeback_block.take() else {
                if st.shutdown {
                    return;
                }
                st = self.wait(st);
                continue;
            };
            drop(st);
            let res = self.store(&block);
            st = self.lock();
            st.writeback = None;
            match res {
                Ok(()) => self.count_write(&mut st, block.partition),
                Err(e) => {
                    st.failure.get_or_insert(e);
                }
            }
            drop(block);
            self.cond.notify_all();
        }
    }

    /// Hands a dirty block to the writeback slot, or writes it inline,
    /// charging the inline write to the stall counter when `stall` is set.
    fn evict_dirty<'a>(
        &'a self,
        mut st: MutexGuard<'a, State>,
        block: Arc<PartitionBlock>,
        stall: bool,
    ) -> Result<MutexGuard<'a, State>> {
        let k = block.partition;
        st.writeback = Some(k);
        if self.config.async_writeback {
            st.writeback_block = Some(block);
            self.cond.notify_all();
            return Ok(st);
        }
        drop(st);
        let t = Instant::now();
        let res = self.store(&block);
        drop(block);
        let mut st = self.lock();
        if stall {
            st.stats.stall += t.elapsed();
        }
        st.writeback = None;
        res?;
        self.count_write(&mut st, k);
        self.cond.notify_all();
        Ok(st)
    }
}

/// Resident partitions pinned for one bucket; unpins on drop.
pub struct BucketGuard {
    shared: Arc<Shared>,
    parts: [u32; 2],
    view: NodeView,
}

impl BucketGuard {
    pub fn view(&self) -> &NodeView {
        &self.view
    }

    pub fn bucket(&self) -> Bucket {
        Bucket { src: self.parts[0], dst: self.parts[1] }
    }
}

impl Drop for BucketGuard {
    fn drop(&mut self) {
        let mut st = self.shared.lock();
        for k in self.parts {
            if let Some(r) = st.resident.get_mut(&k) {
                r.pins -= 1;
            }
        }
        self.shared.cond.notify_all();
    }
}

pub struct PartitionBuffer {
    shared: Arc<Shared>,
    threads: Vec<JoinHandle<()>>,
}

impl PartitionBuffer {
    pub fn new(files: ParamFiles, sequence: Vec<Bucket>, config: BufferConfig) -> Result<Self> {
        let p = files.num_partitions();
        let c = config.capacity;
        if c == 0 || c > p {
            return Err(EngineError::Config(format!("buffer capacity {c} must be in 1..={p}")));
        }
        if let Some(b) = sequence.iter().find(|b| b.src >= p || b.dst >= p) {
            return Err(EngineError::Config(format!("bucket {b:?} outside {p} partitions")));
        }
        if c < 2 && sequence.iter().any(|b| b.src != b.dst) {
            return Err(EngineError::Config("off-diagonal buckets need capacity of at least 2".into()));
        }
        let shared = Arc::new(Shared {
            next_use: NextUse::new(&sequence, p),
            files,
            config,
            sequence,
            tracker: Arc::new(BlockTracker::default()),
            state: Mutex::new(State {
                resident: BTreeMap::new(),
                cursor: 0,
                prefetch: Prefetch::Idle,
                writeback: None,
                writeback_block: None,
                loading: None,
                failure: None,
                shutdown: false,
                stats: BufferStats::default(),
            }),
            cond: Condvar::new(),
        });
        let mut threads = Vec::new();
        if config.prefetch {
            let s = shared.clone();
            threads
                .push(thread::Builder::new().name("prefetch".into()).spawn(move || s.prefetch_loop()).expect("spawn"));
        }
        if config.async_writeback && !config.read_only {
            let s = shared.clone();
            threads.push(
                thread::Builder::new().name("writeback".into()).spawn(move || s.writeback_loop()).expect("spawn"),
            );
        }
        Ok(PartitionBuffer { shared, threads })
    }

    pub fn sequence(&self) -> &[Bucket] {
        &self.shared.sequence
    }

    pub fn config(&self) -> BufferConfig {
        self.shared.config
    }

    pub fn files(&self) -> &ParamFiles {
        &self.shared.files
    }

    /// Currently resident partitions in ascending order.
    pub fn resident(&self) -> Vec<u32> {
        self.shared.lock().resident.keys().copied().collect()
    }

    /// Pin count of a resident partition.
    pub fn pin_count(&self, k: u32) -> Option<u32> {
        self.shared.lock().resident.get(&k).map(|r| r.pins)
    }

    /// Counters accumulated so far in the current pass.
    pub fn stats(&self) -> BufferStats {
        let mut s = self.shared.lock().stats.clone();
        s.peak_blocks = self.shared.tracker.peak();
        s
    }

    pub fn live_blocks(&self) -> usize {
        self.shared.tracker.live()
    }

    /// Makes both partitions of the next bucket resident and pins them.
    ///
    /// Buckets must be requested in sequence order. Blocks while a needed
    /// partition is still being written back or while every eviction
    /// candidate is pinned.
    pub fn acquire(&self, bucket: Bucket) -> Result<BucketGuard> {
        let sh = &*self.shared;
        let mut st = sh.lock();
        if let Some(e) = st.failure.take() {
            return Err(e);
        }
        let step = st.cursor;
        match sh.sequence.get(step) {
            Some(&b) if b == bucket => {}
            expected => return Err(EngineError::Buffer(format!("bucket {bucket:?} requested, expected {expected:?}"))),
        }
        let needed = [bucket.src, bucket.dst];
        for (n, &k) in needed.iter().enumerate() {
            if n == 1 && k == needed[0] {
                break;
            }
            loop {
                if let Some(e) = st.failure.take() {
                    return Err(e);
                }
                if st.resident.contains_key(&k) {
                    break;
                }
                if st.writeback == Some(k) || matches!(st.prefetch, Prefetch::Loading(x) if x == k) {
                    st = sh.stall(st);
                    continue;
                }
                let mut evicted = None;
                if st.resident.len() as u32 >= sh.config.capacity {
                    let candidates: Vec<u32> = st
                        .resident
                        .iter()
                        .filter(|(id, r)| r.pins == 0 && !needed.contains(id))
                        .map(|(&id, _)| id)
                        .collect();
                    let Some(victim) = sh.next_use.furthest(candidates, step) else {
                        st = sh.stall(st);
                        continue;
                    };
                    let needs_write = st.resident[&victim].dirty && !sh.config.read_only;
                    if needs_write && st.writeback.is_some() {
                        st = sh.stall(st);
                        continue;
                    }
                    let r = st.resident.remove(&victim).expect("victim is resident");
                    if needs_write {
                        st = sh.evict_dirty(st, r.block, true)?;
                    }
                    evicted = Some(victim);
                }
                let block = match mem::replace(&mut st.prefetch, Prefetch::Idle) {
                    Prefetch::Ready(x, block) if x == k => {
                        st.stats.prefetch_hits += 1;
                        sh.cond.notify_all();
                        block
                    }
                    other => {
                        st.prefetch = other;
                        st.loading = Some(k);
                        drop(st);
                        let t = Instant::now();
                        let res = sh.load(k);
                        st = sh.lock();
                        st.stats.stall += t.elapsed();
                        st.loading = None;
                        let block = res?;
                        sh.count_read(&mut st, k);
                        block
                    }
                };
                st.resident.insert(k, Resident { block, pins: 0, dirty: false });
                st.stats.admissions += 1;
                if evicted.is_some() {
                    st.stats.swaps += 1;
                }
                st.stats.events.push(BufferEvent { step, evicted, admitted: k });
                break;
            }
        }
        let dirty = !sh.config.read_only;
        let mut blocks = Vec::with_capacity(2);
        for k in needed {
            let r = st.resident.get_mut(&k).expect("admitted");
            r.pins += 1;
            r.dirty |= dirty;
            blocks.push(r.block.clone());
        }
        st.cursor += 1;
        sh.cond.notify_all();
        Ok(BucketGuard { shared: self.shared.clone(), parts: needed, view: NodeView::new(blocks) })
    }

    /// Writes back every dirty partition, empties the buffer and rewinds
    /// to the start of the sequence. Returns the counters for the pass.
    pub fn finish_pass(&mut self) -> Result<BufferStats> {
        let sh = &*self.shared;
        let mut st = sh.lock();
        loop {
            let busy = matches!(st.prefetch, Prefetch::Loading(_)) || st.resident.values().any(|r| r.pins > 0);
            if !busy {
                break;
            }
            st = sh.wait(st);
        }
        st.prefetch = Prefetch::Idle;
        let ids: Vec<u32> = st.resident.keys().copied().collect();
        for k in ids {
            while st.writeback.is_some() {
                st = sh.wait(st);
            }
            let r = st.resident.remove(&k).expect("resident");
            if r.dirty && !sh.config.read_only {
                st = sh.evict_dirty(st, r.block, false)?;
            }
        }
        while st.writeback.is_some() {
            st = sh.wait(st);
        }
        if let Some(e) = st.failure.take() {
            return Err(e);
        }
        st.cursor = 0;
        let mut stats = mem::take(&mut st.stats);
        stats.peak_blocks = sh.tracker.peak();
        sh.tracker.reset_peak();
        Ok(stats)
    }
}

impl Drop for PartitionBuffer {
    fn drop(&mut self) {
        {
            let mut st = self.shared.lock();
            if st.resident.values().any(|r| r.dirty) && !self.shared.config.read_only {
                log::warn!("partition buffer dropped with unwritten partitions");
            }
            st.shutdown = true;
            self.shared.cond.notify_all();
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}
