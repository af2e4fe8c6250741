use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{check_shape, Bucket, BufferEvent, OrderingKind, OrderingPlan};
use crate::error::Result;
use crate::rng;

/// Records buffer states and emits every newly co-resident bucket.
struct TraceBuilder {
    p: usize,
    processed: Vec<bool>,
    buckets: Vec<Bucket>,
    states: Vec<Vec<u32>>,
    state_of_step: Vec<usize>,
    events: Vec<BufferEvent>,
}

impl TraceBuilder {
    fn new(p: u32) -> Self {
        let p = p as usize;
        Self {
            p,
            processed: vec![false; p * p],
            buckets: Vec::with_capacity(p * p),
            states: Vec::new(),
            state_of_step: Vec::with_capacity(p * p),
            events: Vec::new(),
        }
    }

    fn fill(&mut self, buffer: &[u32]) {
        for &x in buffer {
            self.events.push(BufferEvent { step: self.buckets.len(), evicted: None, admitted: x });
        }
        self.record(buffer);
    }

    fn swap(&mut self, buffer: &mut [u32], slot: usize, incoming: u32) {
        let evicted = buffer[slot];
        buffer[slot] = incoming;
        self.events.push(BufferEvent { step: self.buckets.len(), evicted: Some(evicted), admitted: incoming });
        self.record(buffer);
    }

    fn record(&mut self, buffer: &[u32]) {
        let mut state = buffer.to_vec();
        state.sort_unstable();
        let mut fresh = Vec::new();
        for &i in &state {
            for &j in &state {
                let idx = i as usize * self.p + j as usize;
                if !self.processed[idx] {
                    self.processed[idx] = true;
                    fresh.push(Bucket::new(i, j));
                }
            }
        }
        // `state` is sorted, so `fresh` is already in lexicographic order.
        let s = self.states.len();
        self.states.push(state);
        self.state_of_step.extend(core::iter::repeat_n(s, fresh.len()));
        self.buckets.extend(fresh);
    }
}

/// Buffer-aware ordering that retires `c - 1` partitions per round.
///
/// The buffer starts with `c` partitions. Each round fixes `c - 1` of
/// them, streams every other unretired partition through the one free
/// slot, then retires the fixed set and refills it with fresh unretired
/// partitions. Every swap therefore exposes `c - 1` unseen pairs, and the
/// swap count equals [`super::elimination_swaps`]. Choices among equally
/// good partitions are drawn from the seeded RNG.
pub fn elimination_order(partitions: u32, capacity: u32, seed: u64) -> Result<OrderingPlan> {
    check_shape(partitions, capacity)?;
    let p = partitions as usize;
    let c = capacity as usize;
    let mut rng = rng::stream(seed, &[0x656c_696d]);

    let mut perm: Vec<u32> = (0..partitions).collect();
    perm.shuffle(&mut rng);
    let mut buffer: Vec<u32> = perm[..c].to_vec();
    let free_slot = c - 1;
    let fixed_slots: Vec<usize> = (0..c - 1).collect();
    let mut unretired = vec![true; p];

    let mut trace = TraceBuilder::new(partitions);
    trace.fill(&buffer);

    if c < p {
        loop {
            let mut outside: Vec<u32> =
                (0..partitions).filter(|x| unretired[*x as usize] && !buffer.contains(x)).collect();
            outside.shuffle(&mut rng);
            for x in outside {
                trace.swap(&mut buffer, free_slot, x);
            }

            for &s in &fixed_slots {
                unretired[buffer[s] as usize] = false;
            }
            let mut remaining: Vec<u32> =
                (0..partitions).filter(|x| unretired[*x as usize] && !buffer.contains(x)).collect();
            if remaining.is_empty() {
                break;
            }
            remaining.shuffle(&mut rng);
            // Final round: everything still unretired fits next to the free-slot occupant.
            let last_round = remaining.len() < c;
            for (&slot, &x) in fixed_slots.iter().zip(&remaining) {
                trace.swap(&mut buffer, slot, x);
            }
            if last_round {
                break;
            }
        }
    }

    let swap_count = trace.events.iter().filter(|e| e.evicted.is_some()).count() as u64;
    Ok(OrderingPlan {
        kind: OrderingKind::Elimination,
        partitions,
        capacity,
        seed,
        buckets: trace.buckets,
        states: trace.states,
        state_of_step: trace.state_of_step,
        events: trace.events,
        swap_count,
    })
}
