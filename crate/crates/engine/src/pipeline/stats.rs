use std::fmt::Write as _;
use std::time::Duration;

use crate::buffer::BufferStats;

/// Queue depths seen by the compute stage when it picks up a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancySample {
    pub seconds: f64,
    pub load_queue: usize,
    pub compute_queue: usize,
    pub transfer_queue: usize,
    pub update_queue: usize,
    pub in_flight: usize,
}

#[derive(Debug, Clone, Default)]
pub struct EpochStats {
    pub epoch: u64,
    pub edges: u64,
    pub batches: u64,
    /// Mean loss per positive edge.
    pub loss: f64,
    pub seconds: f64,
    /// Global-counter lag between gather and compute, maximized over batches.
    pub max_staleness: u64,
    /// Per-row version lag between gather and compute.
    pub max_row_lag: u32,
    pub max_positive_rows_in_flight: usize,
    pub compute_busy: Duration,
    pub loader_busy: Duration,
    pub updater_busy: Duration,
    pub loader_workers: usize,
    pub updater_workers: usize,
    pub buffer: Option<BufferStats>,
    pub occupancy: Vec<OccupancySample>,
    pub(crate) loss_sum: f64,
}

impl EpochStats {
    pub fn edges_per_sec(&self) -> f64 {
        if self.seconds > 0.0 {
            self.edges as f64 / self.seconds
        } else {
            0.0
        }
    }

    fn fraction(&self, busy: Duration, workers: usize) -> f64 {
        if self.seconds <= 0.0 {
            return 0.0;
        }
        busy.as_secs_f64() / (self.seconds * workers.max(1) as f64)
    }

    pub fn compute_busy_fraction(&self) -> f64 {
        self.fraction(self.compute_busy, 1)
    }

    pub fn loader_busy_fraction(&self) -> f64 {
        self.fraction(self.loader_busy, self.loader_workers)
    }

    pub fn updater_busy_fraction(&self) -> f64 {
        self.fraction(self.updater_busy, self.updater_workers)
    }

    pub const CSV_HEADER: &'static str =
        "epoch,edges,mean_loss,seconds,edges_per_sec,partition_reads,partition_writes,\
swaps,stall_seconds,peak_blocks,max_staleness,max_row_lag,compute_busy,loader_busy,updater_busy";

    pub fn csv_row(&self) -> String {
        let b = self.buffer.clone().unwrap_or_default();
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{:.6},{:.3},{:.1},{},{},{},{:.3},{},{},{},{:.4},{:.4},{:.4}",
            self.epoch,
            self.edges,
            self.loss,
            self.seconds,
            self.edges_per_sec(),
            b.reads,
            b.writes,
            b.swaps,
            b.stall.as_secs_f64(),
            b.peak_blocks,
            self.max_staleness,
            self.max_row_lag,
            self.compute_busy_fraction(),
            self.loader_busy_fraction(),
            self.updater_busy_fraction(),
        );
        s
    }

    pub const OCCUPANCY_HEADER: &'static str =
        "epoch,seconds,load_queue,compute_queue,transfer_queue,update_queue,in_flight";

    pub fn occupancy_rows(&self) -> impl Iterator<Item = String> + '_ {
        self.occupancy.iter().map(move |o| {
            format!(
                "{},{:.4},{},{},{},{},{}",
                self.epoch, o.seconds, o.load_queue, o.compute_queue, o.transfer_queue, o.update_queue, o.in_flight
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_row_matches_header() {
        let s = EpochStats { seconds: 2.0, edges: 10, ..Default::default() };
        assert_eq!(s.csv_row().split(',').count(), EpochStats::CSV_HEADER.split(',').count());
        assert_eq!(s.edges_per_sec(), 5.0);
    }
}
