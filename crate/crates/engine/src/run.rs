//! End-to-end commands: train and evaluate from a run configuration, and
//! tabulate ordering swap counts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use graphvec_core::{simulate_io, EvalReport, OrderingKind, SwapBound};

use crate::block::{PartitionBlock, RelationTable};
use crate::buffer::{BufferConfig, PartitionBuffer};
use crate::config::{RunConfig, StorageMode};
use crate::error::{EngineError, Result};
use crate::evaluate::{evaluate, DiskSource, EvalResult, EvalSettings, MemorySource, TripleFilter};
use crate::pipeline::{EpochStats, Storage, Trainer};
use crate::store::{Dataset, Edge, ParamFiles, Split};

pub const EPOCH_CSV: &str = "epoch_stats.csv";
pub const OCCUPANCY_CSV: &str = "occupancy.csv";

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub epochs: Vec<EpochStats>,
    /// Validation reports when per-epoch evaluation is enabled.
    pub evals: Vec<EvalReport>,
    pub params_dir: PathBuf,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| EngineError::io(path, e))
}

fn append(path: &Path, text: &str) -> Result<()> {
    use std::io::Write;
    let mut f = fs::OpenOptions::new().append(true).create(true).open(path).map_err(|e| EngineError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| EngineError::io(path, e))
}

/// Checks that the configuration matches the dataset before touching parameters.
pub fn check_compatible(cfg: &RunConfig, ds: &Dataset) -> Result<()> {
    let m = &ds.meta;
    if cfg.dim != m.embedding_dim {
        return Err(EngineError::Mismatch(format!("config dim {} but dataset has {}", cfg.dim, m.embedding_dim)));
    }
    if cfg.partitions != m.num_partitions {
        return Err(EngineError::Mismatch(format!(
            "config has {} partitions but dataset has {}",
            cfg.partitions, m.num_partitions
        )));
    }
    Ok(())
}

/// Train-split endpoints, used for degree-proportional evaluation negatives.
pub fn endpoints(edges: &[Edge]) -> Vec<u32> {
    edges.iter().flat_map(|e| [e.src, e.dst]).collect()
}

pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let ds = Dataset::open(&cfg.resolved_data_dir())?;
    check_compatible(cfg, &ds)?;
    let run_dir = &cfg.run_dir;
    fs::create_dir_all(run_dir).map_err(|e| EngineError::io(run_dir, e))?;
    write(&run_dir.join("config.toml"), &cfg.to_toml())?;

    let params_dir = run_dir.join("params");
    let files = ds.params()?.copy_to(&params_dir)?.with_io_delay(Duration::from_millis(cfg.io_delay_ms));
    let assignment = ds.assignment()?;
    let buckets = ds.train_buckets()?;
    let p = ds.meta.num_partitions;
    let capacity = match cfg.storage {
        StorageMode::InMemory => p,
        StorageMode::Partitioned => cfg.buffer_capacity,
    };
    let plan = cfg.ordering_kind()?.generate(p, capacity, cfg.seed)?;
    log::info!(
        "{} ordering over {p} partitions with capacity {capacity}: {} swaps per epoch",
        plan.kind,
        plan.swap_count
    );
    let trainer = Trainer::new(cfg.train_settings()?, &buckets, &assignment)?;
    let mut relations = files.read_relations()?;

    let filter = if cfg.eval_every_epoch && cfg.eval_filtered {
        let splits: Vec<Vec<Edge>> = Split::ALL.iter().map(|&s| ds.edges(s)).collect::<Result<_>>()?;
        Some(TripleFilter::new(splits.iter().map(Vec::as_slice)))
    } else {
        None
    };
    let valid = if cfg.eval_every_epoch { ds.edges(Split::Valid)? } else { Vec::new() };
    let degree = endpoints(&buckets.edges);
    let eval_settings = cfg.eval_settings()?;

    let epoch_csv = run_dir.join(EPOCH_CSV);
    let occ_csv = run_dir.join(OCCUPANCY_CSV);
    write(&epoch_csv, &format!("{}\n", EpochStats::CSV_HEADER))?;
    write(&occ_csv, &format!("{}\n", EpochStats::OCCUPANCY_HEADER))?;

    let mut outcome = TrainOutcome { epochs: Vec::new(), evals: Vec::new(), params_dir: params_dir.clone() };
    let mut blocks: Vec<Arc<PartitionBlock>> = Vec::new();
    let mut buffer = None;
    match cfg.storage {
        StorageMode::InMemory => {
            for k in 0..p {
                let data = files.read_partition(k)?;
                blocks.push(Arc::new(PartitionBlock::new(k, assignment.start(k) as u32, files.dim, data, None)));
            }
        }
        StorageMode::Partitioned => {
            let config = BufferConfig {
                capacity,
                prefetch: cfg.prefetch,
                async_writeback: cfg.async_writeback,
                read_only: false,
            };
            buffer = Some(PartitionBuffer::new(files.clone(), plan.buckets.clone(), config)?);
        }
    }

    for epoch in 0..cfg.epochs {
        let stats = {
            let mut storage = match buffer.as_mut() {
                Some(b) => Storage::Buffer(b),
                None => Storage::Memory { blocks: &blocks, sequence: &plan.buckets },
            };
            trainer.run_epoch(epoch, &mut storage, &mut relations)?
        };
        log::info!(
            "epoch {epoch}: loss {:.4}, {:.0} edges/s, {:.1}s",
            stats.loss,
            stats.edges_per_sec(),
            stats.seconds
        );
        append(&epoch_csv, &format!("{}\n", stats.csv_row()))?;
        let occ: String = stats.occupancy_rows().map(|r| r + "\n").collect();
        append(&occ_csv, &occ)?;
        outcome.epochs.push(stats);

        if cfg.checkpoint || cfg.eval_every_epoch {
            persist(&files, &blocks, &relations)?;
        }
        if cfg.checkpoint {
            files.copy_to(&run_dir.join("checkpoints").join(format!("epoch_{epoch}")))?;
        }
        if cfg.eval_every_epoch && !valid.is_empty() {
            let result = if blocks.is_empty() {
                evaluate(
                    &valid,
                    &eval_settings,
                    &mut DiskSource { files: files.clone() },
                    &relations,
                    filter.as_ref(),
                    &degree,
                )?
            } else {
                let mut src = MemorySource { assignment: assignment.clone(), blocks: &blocks };
                evaluate(&valid, &eval_settings, &mut src, &relations, filter.as_ref(), &degree)?
            };
            log::info!("epoch {epoch} valid: {}", result.report);
            outcome.evals.push(result.report);
        }
    }
    persist(&files, &blocks, &relations)?;
    Ok(outcome)
}

fn persist(files: &ParamFiles, blocks: &[Arc<PartitionBlock>], relations: &RelationTable) -> Result<()> {
    for b in blocks {
        files.write_partition(b.partition, &b.read())?;
    }
    files.write_relations(relations)
}

/// Evaluates parameters stored in `params_dir` on one split of the dataset.
pub fn evaluate_params(ds: &Dataset, params_dir: &Path, split: Split, settings: &EvalSettings) -> Result<EvalResult> {
    if settings.dim != ds.meta.embedding_dim {
        return Err(EngineError::Mismatch(format!(
            "evaluation dim {} but dataset has {}",
            settings.dim, ds.meta.embedding_dim
        )));
    }
    let files = ParamFiles::new(params_dir, &ds.meta)?;
    let relations = files.read_relations()?;
    let train = ds.edges(Split::Train)?;
    let edges = if split == Split::Train { train.clone() } else { ds.edges(split)? };
    let filter = if settings.filtered {
        let valid = ds.edges(Split::Valid)?;
        let test = ds.edges(Split::Test)?;
        Some(TripleFilter::new([train.as_slice(), valid.as_slice(), test.as_slice()]))
    } else {
        None
    };
    let degree = endpoints(&train);
    evaluate(&edges, settings, &mut DiskSource { files }, &relations, filter.as_ref(), &degree)
}

pub const EVAL_CSV_HEADER: &str = "split,count,mrr,mrr_source,mrr_destination,hits";

pub fn eval_csv_row(split: Split, r: &EvalReport) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    let hits: Vec<String> = r.hits.iter().map(|(k, h)| format!("{k}:{h:.6}")).collect();
    format!(
        "{},{},{:.6},{},{},{}",
        split.as_str(),
        r.count,
        r.mrr,
        opt(r.mrr_source),
        opt(r.mrr_destination),
        hits.join(";")
    )
}

#[derive(Debug, Clone)]
pub struct OrderingSweep {
    pub kinds: Vec<OrderingKind>,
    pub partitions: Vec<u32>,
    /// Explicit capacities, or `None` to use `ratio * p`.
    pub capacities: Option<Vec<u32>>,
    pub ratio: f64,
    pub seeds: Vec<u64>,
    pub partition_bytes: u64,
}

pub const SWEEP_CSV_HEADER: &str = "ordering,p,c,seed,swaps,lower_bound,ratio,reads,writes,total_bytes,status";

/// Swap counts for every (ordering, p, c, seed) combination. Invalid
/// combinations produce a row with an error status.
pub fn ordering_sweep(sweep: &OrderingSweep, trace: Option<&mut String>) -> Vec<String> {
    let mut rows = Vec::new();
    let mut trace = trace;
    for &p in &sweep.partitions {
        let caps = match &sweep.capacities {
            Some(c) => c.clone(),
            None => vec![((sweep.ratio * f64::from(p)).round() as u32).max(1)],
        };
        for &c in &caps {
            for &kind in &sweep.kinds {
                for &seed in &sweep.seeds {
                    let plan = kind.generate(p, c, seed);
                    let bound = SwapBound::new(p, c);
                    match (plan, bound) {
                        (Ok(plan), Ok(bound)) => {
                            let io = simulate_io(&plan, sweep.partition_bytes);
                            let ratio = if bound.lower_bound > 0 {
                                plan.swap_count as f64 / bound.lower_bound as f64
                            } else {
                                1.0
                            };
                            rows.push(format!(
                                "{kind},{p},{c},{seed},{},{},{ratio:.4},{},{},{},ok",
                                plan.swap_count, bound.lower_bound, io.reads, io.writes, io.total_bytes
                            ));
                            if let Some(t) = trace.as_deref_mut() {
                                for (step, b) in plan.buckets.iter().enumerate() {
                                    let resident = &plan.states[plan.state_of_step[step]];
                                    let res: Vec<String> = resident.iter().map(u32::to_string).collect();
                                    let _ = writeln!(
                                        t,
                                        "{kind}\t{p}\t{c}\t{seed}\t{step}\t{}\t{}\t{}",
                                        b.src,
                                        b.dst,
                                        res.join(" ")
                                    );
                                }
                            }
                        }
                        (Err(e), _) | (_, Err(e)) => {
                            rows.push(format!("{kind},{p},{c},{seed},,,,,,,\"error: {e}\""));
                        }
                    }
                }
            }
        }
    }
    rows
}
