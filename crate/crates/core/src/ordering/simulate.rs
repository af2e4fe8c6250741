use alloc::vec;
use alloc::vec::Vec;

use super::{check_shape, Bucket, BufferEvent, OrderingPlan};
use crate::error::Result;

/// Per-partition sorted list of the steps that touch it, for
/// furthest-next-use queries.
#[derive(Debug, Clone)]
pub struct NextUse {
    uses: Vec<Vec<usize>>,
}

impl NextUse {
    pub fn new(buckets: &[Bucket], partitions: u32) -> Self {
        let mut uses = vec![Vec::new(); partitions as usize];
        for (k, b) in buckets.iter().enumerate() {
            uses[b.src as usize].push(k);
            if b.dst != b.src {
                uses[b.dst as usize].push(k);
            }
        }
        Self { uses }
    }

    /// First step `>= from` that uses `partition`; `usize::MAX` if none.
    pub fn next_use(&self, partition: u32, from: usize) -> usize {
        let list = &self.uses[partition as usize];
        let i = list.partition_point(|&s| s < from);
        list.get(i).copied().unwrap_or(usize::MAX)
    }

    /// Among `candidates`, the one used furthest after `from` (never used
    /// again counts as infinitely far); ties go to the lower id.
    pub fn furthest(&self, candidates: impl IntoIterator<Item = u32>, from: usize) -> Option<u32> {
        let mut best: Option<(usize, u32)> = None;
        for c in candidates {
            let n = self.next_use(c, from);
            best = match best {
                None => Some((n, c)),
                Some((bn, bc)) if n > bn || (n == bn && c < bc) => Some((n, c)),
                keep => keep,
            };
        }
        best.map(|(_, c)| c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub states: Vec<Vec<u32>>,
    pub state_of_step: Vec<usize>,
    pub events: Vec<BufferEvent>,
}

impl Replay {
    pub fn swap_count(&self) -> u64 {
        self.events.iter().filter(|e| e.evicted.is_some()).count() as u64
    }
}

/// Serves `buckets` in order with a `capacity`-slot buffer, admitting the
/// source partition then the destination on demand and evicting the
/// resident with the furthest next use.
pub fn belady_replay(buckets: &[Bucket], partitions: u32, capacity: u32) -> Result<Replay> {
    check_shape(partitions, capacity)?;
    let next = NextUse::new(buckets, partitions);
    let cap = capacity as usize;
    let mut resident: Vec<u32> = Vec::with_capacity(cap);
    let mut states: Vec<Vec<u32>> = Vec::new();
    let mut state_of_step = Vec::with_capacity(buckets.len());
    let mut events = Vec::new();

    for (k, b) in buckets.iter().enumerate() {
        for x in [b.src, b.dst] {
            if resident.contains(&x) {
                continue;
            }
            let evicted = if resident.len() == cap {
                let victim = next
                    .furthest(resident.iter().copied().filter(|&r| r != b.src && r != b.dst), k)
                    .expect("capacity >= 2 leaves an evictable resident");
                resident.retain(|&r| r != victim);
                Some(victim)
            } else {
                None
            };
            resident.push(x);
            events.push(BufferEvent { step: k, evicted, admitted: x });
            let mut s = resident.clone();
            s.sort_unstable();
            states.push(s);
        }
        state_of_step.push(states.len() - 1);
    }
    Ok(Replay { states, state_of_step, events })
}

/// Partition IO for one epoch over `plan`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IoReport {
    pub reads: u64,
    pub writes: u64,
    pub total_bytes: u64,
}

/// Every admission is a read; every eviction writes the (dirty) partition
/// back, and the partitions resident at the end are flushed once.
pub fn simulate_io(plan: &OrderingPlan, partition_bytes: u64) -> IoReport {
    let reads = plan.events.len() as u64;
    let final_residents = plan.states.last().map_or(0, |s| s.len()) as u64;
    let writes = plan.swap_count + final_residents;
    IoReport { reads, writes, total_bytes: (reads + writes) * partition_bytes }
}
