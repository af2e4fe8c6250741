use alloc::vec;
use alloc::vec::Vec;

use super::{check_shape, plan_from_sequence, Bucket, OrderingKind, OrderingPlan};
use crate::error::Result;

/// Maps distance `d` along the Hilbert curve over an `n x n` grid
/// (`n` a power of two) to cell `(x, y)`.
pub fn hilbert_d2xy(n: u32, d: u64) -> (u32, u32) {
    let (mut x, mut y) = (0u64, 0u64);
    let mut t = d;
    let mut s = 1u64;
    while s < u64::from(n) {
        let rx = 1 & (t / 2);
        let ry = 1 & (t ^ rx);
        if ry == 0 {
            if rx == 1 {
                x = s - 1 - x;
                y = s - 1 - y;
            }
            core::mem::swap(&mut x, &mut y);
        }
        x += s * rx;
        y += s * ry;
        t /= 4;
        s *= 2;
    }
    (x as u32, y as u32)
}

/// Cells of the `p x p` bucket grid in Hilbert order. Non-power-of-two `p`
/// walks the next power of two and skips cells outside the grid.
fn hilbert_cells(p: u32) -> Vec<Bucket> {
    let n = p.next_power_of_two();
    let total = u64::from(n) * u64::from(n);
    (0..total).map(|d| hilbert_d2xy(n, d)).filter(|&(x, y)| x < p && y < p).map(|(x, y)| Bucket::new(x, y)).collect()
}

pub fn hilbert_order(partitions: u32, capacity: u32) -> Result<OrderingPlan> {
    check_shape(partitions, capacity)?;
    plan_from_sequence(OrderingKind::Hilbert, partitions, capacity, 0, hilbert_cells(partitions))
}

/// Hilbert order that serves `(j, i)` right after `(i, j)`.
pub fn hilbert_symmetric_order(partitions: u32, capacity: u32) -> Result<OrderingPlan> {
    check_shape(partitions, capacity)?;
    let p = partitions as usize;
    let mut emitted = vec![false; p * p];
    let mut seq = Vec::with_capacity(p * p);
    for b in hilbert_cells(partitions) {
        for cell in [b, Bucket::new(b.dst, b.src)] {
            let idx = cell.src as usize * p + cell.dst as usize;
            if !emitted[idx] {
                emitted[idx] = true;
                seq.push(cell);
            }
        }
    }
    plan_from_sequence(OrderingKind::HilbertSymmetric, partitions, capacity, 0, seq)
}
