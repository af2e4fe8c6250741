//! Link-prediction ranking streamed over node partitions.
//!
//! Pass one collects the embeddings of every evaluated endpoint (and any
//! sampled negatives). With a sampled pool everything is ranked from those
//! rows. With the all-nodes pool a second pass scores each partition
//! against every query with one matrix product per chunk.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use graphvec_core::real::dot;
use graphvec_core::{
    aggregate, rng, sample_negatives, Bucket, CorruptionSide, EvalReport, ModelKind, NegativePool, NegativeSampleSpec,
    PartitionAssignment, Real,
};
use rand::seq::index;

use crate::block::{PartitionBlock, RelationTable};
use crate::buffer::{BufferConfig, PartitionBuffer};
use crate::error::{EngineError, Result};
use crate::store::{Edge, ParamFiles};

const EVAL_STREAM: u64 = 0xE7A1;

#[derive(Debug, Clone)]
pub struct EvalSettings {
    pub kind: ModelKind,
    pub dim: usize,
    /// Sampled candidate pool; `None` ranks against every node. Ignored
    /// when `filtered` is set.
    pub negatives: Option<NegativeSampleSpec>,
    /// Skip candidates that form a known true triple.
    pub filtered: bool,
    pub k_list: Vec<u32>,
    pub seed: u64,
    /// Evaluate a seeded random subset of at most this many edges.
    pub max_edges: Option<usize>,
    /// Edges per sampled-negative chunk and per scoring block.
    pub chunk: usize,
}

impl EvalSettings {
    pub fn new(kind: ModelKind, dim: usize) -> Self {
        EvalSettings {
            kind,
            dim,
            negatives: None,
            filtered: false,
            k_list: vec![1, 3, 10],
            seed: 0,
            max_edges: None,
            chunk: 1000,
        }
    }
}

/// Known true triples, used to skip false negatives.
#[derive(Debug, Default, Clone)]
pub struct TripleFilter {
    set: HashSet<(u32, u32, u32)>,
}

impl TripleFilter {
    pub fn new<'a>(splits: impl IntoIterator<Item = &'a [Edge]>) -> Self {
        let mut set = HashSet::new();
        for split in splits {
            set.extend(split.iter().map(|e| (e.src, e.rel, e.dst)));
        }
        TripleFilter { set }
    }

    pub fn contains(&self, src: u32, rel: u32, dst: u32) -> bool {
        self.set.contains(&(src, rel, dst))
    }
}

/// Read access to node partitions, one at a time.
pub trait ParamSource {
    fn assignment(&self) -> &PartitionAssignment;
    fn visit(&mut self, f: &mut dyn FnMut(&PartitionBlock) -> Result<()>) -> Result<()>;
}

pub struct MemorySource<'a> {
    pub assignment: PartitionAssignment,
    pub blocks: &'a [Arc<PartitionBlock>],
}

impl ParamSource for MemorySource<'_> {
    fn assignment(&self) -> &PartitionAssignment {
        &self.assignment
    }

    fn visit(&mut self, f: &mut dyn FnMut(&PartitionBlock) -> Result<()>) -> Result<()> {
        self.blocks.iter().try_for_each(|b| f(b))
    }
}

/// Streams partitions from disk through a read-only buffer.
pub struct DiskSource {
    pub files: ParamFiles,
}

impl ParamSource for DiskSource {
    fn assignment(&self) -> &PartitionAssignment {
        &self.files.assignment
    }

    fn visit(&mut self, f: &mut dyn FnMut(&PartitionBlock) -> Result<()>) -> Result<()> {
        let p = self.files.num_partitions();
        let sequence = (0..p).map(|k| Bucket { src: k, dst: k }).collect();
        let config = BufferConfig { capacity: 1, prefetch: p > 1, async_writeback: false, read_only: true };
        let mut buffer = PartitionBuffer::new(self.files.clone(), sequence, config)?;
        for k in 0..p {
            let guard = buffer.acquire(Bucket { src: k, dst: k })?;
            f(&guard.view().blocks()[0])?;
        }
        buffer.finish_pass()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EvalResult {
    pub report: EvalReport,
    pub edges: Vec<Edge>,
    /// One rank per edge and side, destination side first.
    pub ranks: Vec<(CorruptionSide, u64)>,
}

struct Query {
    side: CorruptionSide,
    edge: usize,
    target: u32,
    positive: f32,
}

/// Ranks every edge against corrupted sources and destinations.
pub fn evaluate(
    edges: &[Edge],
    settings: &EvalSettings,
    source: &mut dyn ParamSource,
    relations: &RelationTable,
    filter: Option<&TripleFilter>,
    degree_endpoints: &[u32],
) -> Result<EvalResult> {
    let d = settings.dim;
    let kind = settings.kind;
    kind.check_dim(d)?;
    if settings.filtered && filter.is_none() {
        return Err(EngineError::Config("filtered ranking needs the known triples".into()));
    }
    let num_nodes = source.assignment().num_nodes();
    let edges: Vec<Edge> = match settings.max_edges {
        Some(m) if m < edges.len() => {
            let mut idx = index::sample(&mut rng::stream(settings.seed, &[EVAL_STREAM]), edges.len(), m).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| edges[i]).collect()
        }
        _ => edges.to_vec(),
    };
    if edges.is_empty() {
        return Err(graphvec_core::Error::NoRanks.into());
    }
    if let Some(e) = edges.iter().find(|e| u64::from(e.src.max(e.dst)) >= num_nodes) {
        return Err(EngineError::Mismatch(format!("edge {e:?} outside {num_nodes} nodes")));
    }
    let chunk = settings.chunk.max(1);
    let pool = NegativePool { first: 0, len: num_nodes as u32, endpoints: degree_endpoints };
    let sampled_spec = if settings.filtered { None } else { settings.negatives.as_ref() };

    let mut sampled: Vec<[Vec<u32>; 2]> = Vec::new();
    if let Some(spec) = sampled_spec {
        for c in 0..edges.len().div_ceil(chunk) {
            let mut rng = rng::stream(settings.seed, &[EVAL_STREAM, c as u64]);
            let dst = sample_negatives(spec, &pool, &mut rng)?;
            let src = sample_negatives(spec, &pool, &mut rng)?;
            sampled.push([dst, src]);
        }
    }

    let mut wanted: Vec<u32> = edges.iter().flat_map(|e| [e.src, e.dst]).collect();
    for [a, b] in &sampled {
        wanted.extend_from_slice(a);
        wanted.extend_from_slice(b);
    }
    wanted.sort_unstable();
    wanted.dedup();
    let slot: HashMap<u32, usize> = wanted.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut rows = vec![0f32; wanted.len() * d];
    source.visit(&mut |block| {
        let lo = wanted.partition_point(|&n| n < block.first);
        let data = block.read();
        for (i, &n) in wanted.iter().enumerate().skip(lo) {
            let Some(r) = block.local(n) else { break };
            rows[i * d..(i + 1) * d].copy_from_slice(&data.params[r * d..(r + 1) * d]);
        }
        Ok(())
    })?;
    let row = |n: u32| &rows[slot[&n] * d..(slot[&n] + 1) * d];
    let rel_row = |r: u32| -> &[f32] {
        if kind.uses_relations() {
            relations.row(r)
        } else {
            &[]
        }
    };

    let sides = [CorruptionSide::Destination, CorruptionSide::Source];
    let mut queries = Vec::with_capacity(edges.len() * 2);
    let mut qmat = vec![0f32; edges.len() * 2 * d];
    for (i, e) in edges.iter().enumerate() {
        for side in sides {
            let qi = queries.len();
            let q = &mut qmat[qi * d..(qi + 1) * d];
            let target = match side {
                CorruptionSide::Destination => {
                    kind.dst_query(row(e.src), rel_row(e.rel), q);
                    e.dst
                }
                CorruptionSide::Source => {
                    kind.src_query(rel_row(e.rel), row(e.dst), q);
                    e.src
                }
            };
            let positive = dot(q, row(target));
            queries.push(Query { side, edge: i, target, positive });
        }
    }
    let false_negative = |q: &Query, cand: u32| -> bool {
        let e = &edges[q.edge];
        match (filter, settings.filtered) {
            (Some(f), true) => match q.side {
                CorruptionSide::Destination => f.contains(e.src, e.rel, cand),
                CorruptionSide::Source => f.contains(cand, e.rel, e.dst),
            },
            _ => false,
        }
    };

    let mut counts = vec![0u64; queries.len()];
    if sampled_spec.is_some() {
        for (c, [neg_dst, neg_src]) in sampled.iter().enumerate() {
            let q_lo = c * chunk * 2;
            let q_hi = ((c + 1) * chunk * 2).min(queries.len());
            for (side_idx, negs) in [neg_dst, neg_src].into_iter().enumerate() {
                let mut nmat = Vec::with_capacity(negs.len() * d);
                for &n in negs {
                    nmat.extend_from_slice(row(n));
                }
                let sel: Vec<usize> = (q_lo..q_hi).filter(|&qi| qi % 2 == side_idx).collect();
                score_block(&qmat, &sel, &nmat, negs.len(), d, &mut |qi, j, s| {
                    let q = &queries[qi];
                    if s >= q.positive && !false_negative(q, negs[j]) {
                        counts[qi] += 1;
                    }
                });
            }
        }
    } else {
        let all: Vec<usize> = (0..queries.len()).collect();
        source.visit(&mut |block| {
            let data = block.read();
            for sel in all.chunks(chunk * 2) {
                score_block(&qmat, sel, &data.params, block.rows, d, &mut |qi, j, s| {
                    let q = &queries[qi];
                    let cand = block.first + j as u32;
                    if s >= q.positive && cand != q.target && !false_negative(q, cand) {
                        counts[qi] += 1;
                    }
                });
            }
            Ok(())
        })?;
    }

    let ranks: Vec<(CorruptionSide, u64)> = queries.iter().zip(&counts).map(|(q, &c)| (q.side, 1 + c)).collect();
    let report = aggregate(&ranks, &settings.k_list)?;
    Ok(EvalResult { report, edges, ranks })
}

/// Scores the selected query rows against `n` candidate rows and reports
/// each `(query, candidate, score)`.
fn score_block(
    qmat: &[f32],
    sel: &[usize],
    cand: &[f32],
    n: usize,
    d: usize,
    visit: &mut dyn FnMut(usize, usize, f32),
) {
    if sel.is_empty() || n == 0 {
        return;
    }
    let mut q = Vec::with_capacity(sel.len() * d);
    for &qi in sel {
        q.extend_from_slice(&qmat[qi * d..(qi + 1) * d]);
    }
    const COLS: usize = 4096;
    let mut s = vec![0f32; sel.len() * COLS.min(n)];
    for c0 in (0..n).step_by(COLS) {
        let w = COLS.min(n - c0);
        let out = &mut s[..sel.len() * w];
        f32::gemm(sel.len(), d, w, 1.0, &q, d, 1, &cand[c0 * d..], 1, d, 0.0, out);
        for (r, &qi) in sel.iter().enumerate() {
            for (j, &v) in out[r * w..(r + 1) * w].iter().enumerate() {
                visit(qi, c0 + j, v);
            }
        }
    }
}
