//! Edge-bucket traversal orders and their partition-swap accounting.
//!
//! A plan lists all `p^2` buckets together with the buffer trace that
//! serves them: which partitions are resident at each step and every
//! admission/eviction. Elimination builds its trace directly from its
//! rounds; the locality-based orders get theirs from a furthest-next-use
//! (Belady) replay with capacity `c`.

mod bounds;
mod elimination;
mod hilbert;
mod simulate;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;

pub use bounds::{elimination_swaps, lower_bound_swaps, SwapBound};
pub use elimination::elimination_order;
pub use hilbert::{hilbert_d2xy, hilbert_order, hilbert_symmetric_order};
pub use simulate::{belady_replay, simulate_io, IoReport, NextUse, Replay};

use crate::error::{Error, Result};
use crate::rng;

/// Edge bucket `(i, j)`: sources in partition `i`, destinations in `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bucket {
    pub src: u32,
    pub dst: u32,
}

impl Bucket {
    pub const fn new(src: u32, dst: u32) -> Self {
        Self { src, dst }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OrderingKind {
    Elimination,
    Hilbert,
    HilbertSymmetric,
    Random,
}

impl OrderingKind {
    pub const ALL: [OrderingKind; 4] =
        [OrderingKind::Elimination, OrderingKind::Hilbert, OrderingKind::HilbertSymmetric, OrderingKind::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            OrderingKind::Elimination => "elimination",
            OrderingKind::Hilbert => "hilbert",
            OrderingKind::HilbertSymmetric => "hilbert_symmetric",
            OrderingKind::Random => "random",
        }
    }

    pub fn generate(self, partitions: u32, capacity: u32, seed: u64) -> Result<OrderingPlan> {
        match self {
            OrderingKind::Elimination => elimination_order(partitions, capacity, seed),
            OrderingKind::Hilbert => hilbert_order(partitions, capacity),
            OrderingKind::HilbertSymmetric => hilbert_symmetric_order(partitions, capacity),
            OrderingKind::Random => random_order(partitions, capacity, seed),
        }
    }
}

impl fmt::Display for OrderingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OrderingKind {
    type Err = &'static str;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "elimination" => Ok(OrderingKind::Elimination),
            "hilbert" => Ok(OrderingKind::Hilbert),
            "hilbert_symmetric" => Ok(OrderingKind::HilbertSymmetric),
            "random" => Ok(OrderingKind::Random),
            _ => Err("expected one of elimination, hilbert, hilbert_symmetric, random"),
        }
    }
}

/// One admission into the buffer, with the partition it displaced once
/// the buffer is full.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferEvent {
    /// Index into `buckets` of the first bucket served after this event.
    pub step: usize,
    pub evicted: Option<u32>,
    pub admitted: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingPlan {
    pub kind: OrderingKind,
    pub partitions: u32,
    pub capacity: u32,
    pub seed: u64,
    pub buckets: Vec<Bucket>,
    /// Successive buffer contents, each sorted ascending.
    pub states: Vec<Vec<u32>>,
    /// For each bucket, the index into `states` that serves it.
    pub state_of_step: Vec<usize>,
    pub events: Vec<BufferEvent>,
    /// Admissions that evicted a resident partition (initial fill excluded).
    pub swap_count: u64,
}

impl OrderingPlan {
    pub fn initial_loads(&self) -> u64 {
        self.events.iter().filter(|e| e.evicted.is_none()).count() as u64
    }

    pub fn swap_events(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.events.iter().filter_map(|e| e.evicted.map(|v| (v, e.admitted)))
    }

    pub fn bound(&self) -> Result<SwapBound> {
        SwapBound::new(self.partitions, self.capacity)
    }

    /// Checks every structural invariant of a plan, returning the first
    /// violation as text.
    pub fn check(&self) -> core::result::Result<(), alloc::string::String> {
        use alloc::format;
        let p = self.partitions as usize;
        if self.buckets.len() != p * p {
            return Err(format!("{} buckets, expected {}", self.buckets.len(), p * p));
        }
        let mut seen = vec![false; p * p];
        for b in &self.buckets {
            if b.src as usize >= p || b.dst as usize >= p {
                return Err(format!("bucket {b:?} out of range"));
            }
            let idx = b.src as usize * p + b.dst as usize;
            if seen[idx] {
                return Err(format!("bucket {b:?} repeated"));
            }
            seen[idx] = true;
        }
        if self.state_of_step.len() != self.buckets.len() {
            return Err("state_of_step length mismatch".into());
        }
        for (k, (b, &s)) in self.buckets.iter().zip(&self.state_of_step).enumerate() {
            let state = self.states.get(s).ok_or_else(|| format!("step {k}: no state {s}"))?;
            if !state.contains(&b.src) || !state.contains(&b.dst) {
                return Err(format!("step {k}: bucket {b:?} not resident in {state:?}"));
            }
        }
        if self.state_of_step.windows(2).any(|w| w[0] > w[1]) {
            return Err("trace goes backwards".into());
        }
        for s in &self.states {
            if s.len() > self.capacity as usize {
                return Err(format!("state {s:?} exceeds capacity {}", self.capacity));
            }
        }
        for w in self.states.windows(2) {
            let added = w[1].iter().filter(|x| !w[0].contains(x)).count();
            let removed = w[0].iter().filter(|x| !w[1].contains(x)).count();
            if added > 1 || removed > 1 {
                return Err(format!("states {:?} -> {:?} differ by more than one swap", w[0], w[1]));
            }
        }
        let swaps = self.events.iter().filter(|e| e.evicted.is_some()).count() as u64;
        if swaps != self.swap_count {
            return Err(format!("swap_count {} but {} evicting events", self.swap_count, swaps));
        }
        Ok(())
    }
}

pub(crate) fn check_shape(partitions: u32, capacity: u32) -> Result<()> {
    if partitions == 0 || capacity == 0 || capacity > partitions || (capacity < 2 && partitions > 1) {
        return Err(Error::InvalidBuffer { partitions, capacity });
    }
    Ok(())
}

/// Builds a plan for an arbitrary bucket sequence by Belady replay.
pub fn plan_from_sequence(
    kind: OrderingKind,
    partitions: u32,
    capacity: u32,
    seed: u64,
    buckets: Vec<Bucket>,
) -> Result<OrderingPlan> {
    check_shape(partitions, capacity)?;
    let replay = belady_replay(&buckets, partitions, capacity)?;
    Ok(OrderingPlan {
        kind,
        partitions,
        capacity,
        seed,
        buckets,
        states: replay.states,
        state_of_step: replay.state_of_step,
        swap_count: replay.events.iter().filter(|e| e.evicted.is_some()).count() as u64,
        events: replay.events,
    })
}

/// Seeded uniform permutation of all buckets.
pub fn random_order(partitions: u32, capacity: u32, seed: u64) -> Result<OrderingPlan> {
    check_shape(partitions, capacity)?;
    let mut buckets: Vec<Bucket> =
        (0..partitions).flat_map(|i| (0..partitions).map(move |j| Bucket::new(i, j))).collect();
    buckets.shuffle(&mut rng::stream(seed, &[0x7261_6e64]));
    plan_from_sequence(OrderingKind::Random, partitions, capacity, seed, buckets)
}
