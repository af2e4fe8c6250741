//! Bucket-by-bucket training with either a synchronous loop or a
//! five-stage pipeline that admits at most `staleness_bound` batches at once.
//!
//! Stages: load (gather rows and negatives), transfer in, compute (loss,
//! gradients, relation update), transfer out, update (apply node deltas).
//! A batch is admitted only when a token is free; tokens return when its
//! update has been applied, so every batch sees all but at most
//! `staleness_bound - 1` earlier updates.

mod batch;
mod stats;

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, unbounded, RecvTimeoutError};
use graphvec_core::{Bucket, ModelKind, NegativePool, NegativeSampleSpec, PartitionAssignment};

pub use batch::{apply, bucket_order, compute, gather, negative_stream, row_lag, Batch, BucketCtx, Update};
pub use stats::{EpochStats, OccupancySample};

use crate::block::{NodeView, PartitionBlock, RelationTable};
use crate::buffer::PartitionBuffer;
use crate::error::{EngineError, Result};
use crate::store::{Edge, EdgeBuckets};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    Sync,
    Pipelined,
}

#[derive(Debug, Clone)]
pub struct TrainSettings {
    pub kind: ModelKind,
    pub dim: usize,
    pub lr: f32,
    pub eps: f32,
    pub batch_size: usize,
    pub negatives: NegativeSampleSpec,
    pub seed: u64,
    pub mode: TrainMode,
    pub staleness_bound: usize,
    pub loader_workers: usize,
    pub update_workers: usize,
    /// Simulated host/device transfer time added in each direction.
    pub transfer_latency: Duration,
}

impl TrainSettings {
    pub fn new(kind: ModelKind, dim: usize) -> Self {
        TrainSettings {
            kind,
            dim,
            lr: 0.1,
            eps: 1e-10,
            batch_size: 10_000,
            negatives: NegativeSampleSpec { count: 100, degree_fraction: 0.5 },
            seed: 0,
            mode: TrainMode::Pipelined,
            staleness_bound: 16,
            loader_workers: 2,
            update_workers: 2,
            transfer_latency: Duration::ZERO,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.check_dim(self.dim)?;
        let bad = |m: &str| Err(EngineError::Config(m.into()));
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.staleness_bound == 0 {
            return bad("staleness bound must be at least 1");
        }
        if self.loader_workers == 0 || self.update_workers == 0 {
            return bad("worker counts must be positive");
        }
        if !(self.lr > 0.0 && self.eps > 0.0) {
            return bad("learning rate and epsilon must be positive");
        }
        NegativeSampleSpec::new(self.negatives.count, self.negatives.degree_fraction)?;
        Ok(())
    }
}

/// Training-edge endpoints per partition, for degree-based negatives.
#[derive(Debug, Clone)]
pub struct EndpointPools {
    assignment: PartitionAssignment,
    endpoints: Vec<Vec<u32>>,
}

impl EndpointPools {
    pub fn build(edges: &[Edge], assignment: &PartitionAssignment) -> Self {
        let p = assignment.num_partitions() as usize;
        let mut endpoints = vec![Vec::new(); p];
        for e in edges {
            for n in [e.src, e.dst] {
                if let Some(k) = assignment.partition_of(u64::from(n)) {
                    endpoints[k as usize].push(n);
                }
            }
        }
        EndpointPools { assignment: assignment.clone(), endpoints }
    }

    pub fn pool(&self, k: u32) -> NegativePool<'_> {
        NegativePool {
            first: self.assignment.start(k) as u32,
            len: self.assignment.rows(k) as u32,
            endpoints: &self.endpoints[k as usize],
        }
    }
}

/// Where node partitions live during an epoch.
pub enum Storage<'a> {
    /// All partitions resident; buckets are visited in `sequence` order.
    Memory { blocks: &'a [Arc<PartitionBlock>], sequence: &'a [Bucket] },
    /// Partitions paged through a buffer following its own sequence.
    Buffer(&'a mut PartitionBuffer),
}

pub struct Trainer<'a> {
    settings: TrainSettings,
    buckets: &'a EdgeBuckets,
    pools: EndpointPools,
}

impl<'a> Trainer<'a> {
    pub fn new(settings: TrainSettings, buckets: &'a EdgeBuckets, assignment: &PartitionAssignment) -> Result<Self> {
        settings.validate()?;
        if buckets.partitions != assignment.num_partitions() {
            return Err(EngineError::Mismatch(format!(
                "edges bucketed for {} partitions, nodes split into {}",
                buckets.partitions,
                assignment.num_partitions()
            )));
        }
        let pools = EndpointPools::build(&buckets.edges, assignment);
        Ok(Trainer { settings, buckets, pools })
    }

    pub fn settings(&self) -> &TrainSettings {
        &self.settings
    }

    pub fn run_epoch(
        &self,
        epoch: u64,
        storage: &mut Storage<'_>,
        relations: &mut RelationTable,
    ) -> Result<EpochStats> {
        let s = &self.settings;
        if s.kind.uses_relations() && relations.dim != s.dim {
            return Err(EngineError::Mismatch(format!("relation dim {} vs {}", relations.dim, s.dim)));
        }
        let sequence: Vec<Bucket> = match storage {
            Storage::Memory { sequence, .. } => sequence.to_vec(),
            Storage::Buffer(buf) => buf.sequence().to_vec(),
        };
        let start = Instant::now();
        let (loaders, updaters) = match s.mode {
            TrainMode::Sync => (1, 1),
            TrainMode::Pipelined => (s.loader_workers, s.update_workers),
        };
        let mut stats = EpochStats { epoch, loader_workers: loaders, updater_workers: updaters, ..Default::default() };
        for (step, &b) in sequence.iter().enumerate() {
            let (guard, view) = match storage {
                Storage::Memory { blocks, .. } => {
                    let get = |k: u32| {
                        blocks.get(k as usize).cloned().ok_or_else(|| EngineError::Mismatch(format!("no block {k}")))
                    };
                    (None, NodeView::new(vec![get(b.src)?, get(b.dst)?]))
                }
                Storage::Buffer(buf) => {
                    let g = buf.acquire(b)?;
                    let v = g.view().clone();
                    (Some(g), v)
                }
            };
            if let Some(block) = view.blocks().iter().find(|blk| blk.dim != s.dim) {
                return Err(EngineError::Mismatch(format!("partition {} has dim {}", block.partition, block.dim)));
            }
            let edges = self.buckets.bucket(b.src, b.dst);
            if !edges.is_empty() {
                let order = bucket_order(edges, s.seed, epoch, step as u64);
                let ctx = BucketCtx {
                    settings: s,
                    epoch,
                    step: step as u64,
                    edges: &order,
                    view: &view,
                    src_pool: self.pools.pool(b.src),
                    dst_pool: self.pools.pool(b.dst),
                };
                match s.mode {
                    TrainMode::Sync => run_sync(&ctx, relations, &mut stats)?,
                    TrainMode::Pipelined => run_pipelined(&ctx, relations, &mut stats, start)?,
                }
            }
            drop(view);
            drop(guard);
        }
        if let Storage::Buffer(buf) = storage {
            stats.buffer = Some(buf.finish_pass()?);
        }
        stats.seconds = start.elapsed().as_secs_f64();
        stats.loss = if stats.edges > 0 { stats.loss_sum / stats.edges as f64 } else { 0.0 };
        Ok(stats)
    }
}

fn wait_until(t: Option<Instant>) {
    if let Some(t) = t {
        let now = Instant::now();
        if t > now {
            thread::sleep(t - now);
        }
    }
}

fn run_sync(ctx: &BucketCtx<'_>, relations: &mut RelationTable, stats: &mut EpochStats) -> Result<()> {
    let s = ctx.settings;
    for id in 0..ctx.num_batches() {
        let t = Instant::now();
        let batch = gather(ctx, id, stats.batches)?;
        stats.loader_busy += t.elapsed();
        stats.max_positive_rows_in_flight = stats.max_positive_rows_in_flight.max(batch.positive_rows);
        thread::sleep(s.transfer_latency);
        let t = Instant::now();
        let update = compute(s, batch, relations)?;
        stats.compute_busy += t.elapsed();
        thread::sleep(s.transfer_latency);
        let t = Instant::now();
        apply(ctx.view, &update, s.dim);
        stats.updater_busy += t.elapsed();
        stats.loss_sum += update.loss * update.edges as f64;
        stats.edges += update.edges as u64;
        stats.batches += 1;
    }
    Ok(())
}

#[derive(Default)]
struct ComputeOut {
    loss_sum: f64,
    edges: u64,
    batches: u64,
    max_staleness: u64,
    max_row_lag: u32,
    busy: Duration,
    samples: Vec<OccupancySample>,
}

fn join<T>(h: thread::ScopedJoinHandle<'_, Result<T>>, name: &str) -> Result<T> {
    h.join().unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(EngineError::Worker(format!("{name} panicked: {msg}")))
    })
}

fn run_pipelined(
    ctx: &BucketCtx<'_>,
    relations: &mut RelationTable,
    stats: &mut EpochStats,
    epoch_start: Instant,
) -> Result<()> {
    let s = ctx.settings;
    let nb = ctx.num_batches();
    let bound = s.staleness_bound;
    let latency = s.transfer_latency;

    let (tok_tx, tok_rx) = bounded::<()>(bound);
    for _ in 0..bound {
        tok_tx.send(()).expect("token channel has room");
    }
    let (id_tx, id_rx) = unbounded::<u64>();
    let (load_tx, load_rx) = unbounded::<Batch>();
    let (comp_tx, comp_rx) = unbounded::<Batch>();
    let (xfer_tx, xfer_rx) = unbounded::<Update>();
    let (upd_tx, upd_rx) = unbounded::<Update>();

    let abort = AtomicBool::new(false);
    let retired = AtomicU64::new(stats.batches);
    let in_flight = AtomicUsize::new(0);
    let rows_in_flight = AtomicUsize::new(0);
    let max_rows = AtomicUsize::new(stats.max_positive_rows_in_flight);
    let loader_ns = AtomicU64::new(0);
    let updater_ns = AtomicU64::new(0);
    let (abort, retired, in_flight, rows_in_flight, max_rows, loader_ns, updater_ns) =
        (&abort, &retired, &in_flight, &rows_in_flight, &max_rows, &loader_ns, &updater_ns);

    let out = thread::scope(|sc| -> Result<ComputeOut> {
        let dispatcher = sc.spawn(move || -> Result<()> {
            for id in 0..nb {
                loop {
                    if abort.load(Ordering::Relaxed) {
                        return Ok(());
                    }
                    match tok_rx.recv_timeout(Duration::from_millis(5)) {
                        Ok(()) => break,
                        Err(RecvTimeoutError::Timeout) => continue,
                        Err(RecvTimeoutError::Disconnected) => return Ok(()),
                    }
                }
                in_flight.fetch_add(1, Ordering::SeqCst);
                if id_tx.send(id).is_err() {
                    return Ok(());
                }
            }
            Ok(())
        });

        let mut loaders = Vec::new();
        for _ in 0..s.loader_workers {
            let (id_rx, load_tx) = (id_rx.clone(), load_tx.clone());
            loaders.push(sc.spawn(move || -> Result<()> {
                for id in id_rx {
                    let t = Instant::now();
                    let batch = gather(ctx, id, retired.load(Ordering::SeqCst))
                        .inspect_err(|_| abort.store(true, Ordering::SeqCst))?;
                    loader_ns.fetch_add(t.elapsed().as_nanos() as u64, Ordering::Relaxed);
                    let rows = rows_in_flight.fetch_add(batch.positive_rows, Ordering::SeqCst) + batch.positive_rows;
                    max_rows.fetch_max(rows, Ordering::SeqCst);
                    if load_tx.send(batch).is_err() {
                        break;
                    }
                }
                Ok(())
            }));
        }
        drop((id_rx, load_tx));

        let load_probe = load_rx.clone();
        let transfer_in = sc.spawn(move || -> Result<()> {
            for mut b in load_rx {
                if !latency.is_zero() {
                    b.ready_at = Some(Instant::now() + latency);
                }
                if comp_tx.send(b).is_err() {
                    break;
                }
            }
            Ok(())
        });

        let (xfer_probe, upd_probe) = (xfer_rx.clone(), upd_rx.clone());
        let comp_probe = comp_rx.clone();
        let compute_h = sc.spawn(move || -> Result<ComputeOut> {
            let mut out = ComputeOut::default();
            let comp_rx = comp_probe;
            while let Ok(b) = comp_rx.recv() {
                wait_until(b.ready_at);
                out.samples.push(OccupancySample {
                    seconds: epoch_start.elapsed().as_secs_f64(),
                    load_queue: load_probe.len(),
                    compute_queue: comp_rx.len(),
                    transfer_queue: xfer_probe.len(),
                    update_queue: upd_probe.len(),
                    in_flight: in_flight.load(Ordering::SeqCst),
                });
                let stale = retired.load(Ordering::SeqCst) - b.retired_at_gather;
                out.max_staleness = out.max_staleness.max(stale);
                out.max_row_lag = out.max_row_lag.max(row_lag(ctx.view, &b));
                let t = Instant::now();
                let update = compute(s, b, relations).inspect_err(|_| abort.store(true, Ordering::SeqCst))?;
                out.busy += t.elapsed();
                out.loss_sum += update.loss * update.edges as f64;
                out.edges += update.edges as u64;
                out.batches += 1;
                if xfer_tx.send(update).is_err() {
                    break;
                }
            }
            Ok(out)
        });
        drop(comp_rx);

        let transfer_out = sc.spawn(move || -> Result<()> {
            for mut u in xfer_rx {
                if !latency.is_zero() {
                    u.ready_at = Some(Instant::now() + latency);
                }
                if upd_tx.send(u).is_err() {
                    break;
                }
            }
            Ok(())
        });

        let mut updaters = Vec::new();
        for _ in 0..s.update_workers {
            let (upd_rx, tok_tx) = (upd_rx.clone(), tok_tx.clone());
            updaters.push(sc.spawn(move || -> Result<()> {
                for u in upd_rx {
                    wait_until(u.ready_at);
                    let t = Instant::now();
                    apply(ctx.view, &u, s.dim);
                    updater_ns.fetch_add(t.elapsed().as_nanos() as u64, Ordering::Relaxed);
                    rows_in_flight.fetch_sub(u.positive_rows, Ordering::SeqCst);
                    in_flight.fetch_sub(1, Ordering::SeqCst);
                    retired.fetch_add(1, Ordering::SeqCst);
                    let _ = tok_tx.send(());
                }
                Ok(())
            }));
        }
        drop((upd_rx, tok_tx));

        let mut first_err = None;
        let mut note = |r: Result<()>| {
            if let Err(e) = r {
                abort.store(true, Ordering::SeqCst);
                first_err.get_or_insert(e);
            }
        };
        note(join(dispatcher, "dispatcher"));
        for h in loaders {
            note(join(h, "loader"));
        }
        note(join(transfer_in, "transfer"));
        let out = join(compute_h, "compute");
        note(join(transfer_out, "transfer"));
        for h in updaters {
            note(join(h, "updater"));
        }
        let out = out?;
        match first_err {
            Some(e) => Err(e),
            None if out.batches != nb => Err(EngineError::Worker(format!("{} of {nb} batches completed", out.batches))),
            None => Ok(out),
        }
    })?;

    stats.loss_sum += out.loss_sum;
    stats.edges += out.edges;
    stats.batches += out.batches;
    stats.max_staleness = stats.max_staleness.max(out.max_staleness);
    stats.max_row_lag = stats.max_row_lag.max(out.max_row_lag);
    stats.max_positive_rows_in_flight = max_rows.load(Ordering::SeqCst);
    stats.compute_busy += out.busy;
    stats.loader_busy += Duration::from_nanos(loader_ns.load(Ordering::Relaxed));
    stats.updater_busy += Duration::from_nanos(updater_ns.load(Ordering::Relaxed));
    stats.occupancy.extend(out.samples);
    Ok(())
}
