//! The per-batch steps shared by the synchronous and pipelined trainers:
//! gather rows and negatives, compute the loss and Adagrad deltas, apply.

use std::collections::HashMap;
use std::time::Instant;

use graphvec_core::model::{adagrad_delta, apply_delta};
use graphvec_core::{loss_and_grad, rng, sample_negatives, BatchInput, LocalEdge, NegativePool};
use rand::seq::SliceRandom;

use super::TrainSettings;
use crate::block::{NodeView, RelationTable};
use crate::error::{EngineError, Result};
use crate::store::Edge;

const NEGATIVE_STREAM: u64 = 0x4E47;
const SHUFFLE_STREAM: u64 = 0x5348;

/// Random stream for the negatives of batch `batch` of bucket step `step`.
pub fn negative_stream(seed: u64, epoch: u64, step: u64, batch: u64) -> rng::StreamRng {
    rng::stream(seed, &[NEGATIVE_STREAM, epoch, step, batch])
}

/// The edges of one bucket in the order they are batched in `epoch`.
pub fn bucket_order(edges: &[Edge], seed: u64, epoch: u64, step: u64) -> Vec<Edge> {
    let mut order = edges.to_vec();
    order.shuffle(&mut rng::stream(seed, &[SHUFFLE_STREAM, epoch, step]));
    order
}

/// Everything needed to form batches for one bucket.
pub struct BucketCtx<'a> {
    pub settings: &'a TrainSettings,
    pub epoch: u64,
    pub step: u64,
    /// Bucket edges in this epoch's order.
    pub edges: &'a [Edge],
    pub view: &'a NodeView,
    pub src_pool: NegativePool<'a>,
    pub dst_pool: NegativePool<'a>,
}

impl BucketCtx<'_> {
    pub fn num_batches(&self) -> u64 {
        self.edges.len().div_ceil(self.settings.batch_size.max(1)) as u64
    }
}

/// Rows and negatives gathered for one batch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub id: u64,
    pub edges: Vec<LocalEdge>,
    pub rel_ids: Vec<u32>,
    pub node_ids: Vec<u32>,
    /// `(block, row)` of each gathered node in the bucket view.
    pub locations: Vec<(usize, usize)>,
    pub params: Vec<f32>,
    pub accum: Vec<f32>,
    /// Row versions observed at gather time.
    pub stamps: Vec<u32>,
    /// Batches retired before this one was gathered.
    pub retired_at_gather: u64,
    /// Distinct rows touched by the positive edges.
    pub positive_rows: usize,
    pub neg_src: Vec<u32>,
    pub neg_dst: Vec<u32>,
    pub ready_at: Option<Instant>,
}

/// Additive node updates produced by compute.
#[derive(Debug, Clone)]
pub struct Update {
    pub id: u64,
    /// Position of this batch in the total order of relation updates.
    pub relation_seq: u64,
    pub locations: Vec<(usize, usize)>,
    pub dparam: Vec<f32>,
    pub daccum: Vec<f32>,
    pub loss: f64,
    pub edges: usize,
    pub positive_rows: usize,
    pub ready_at: Option<Instant>,
}

struct RowMap {
    index: HashMap<u32, u32>,
    ids: Vec<u32>,
}

impl RowMap {
    fn with_capacity(n: usize) -> Self {
        RowMap { index: HashMap::with_capacity(n), ids: Vec::with_capacity(n) }
    }

    fn local(&mut self, id: u32) -> u32 {
        let next = self.ids.len() as u32;
        *self.index.entry(id).or_insert_with(|| {
            self.ids.push(id);
            next
        })
    }
}

pub fn gather(ctx: &BucketCtx<'_>, id: u64, retired: u64) -> Result<Batch> {
    let s = ctx.settings;
    let d = s.dim;
    let lo = id as usize * s.batch_size;
    let hi = (lo + s.batch_size).min(ctx.edges.len());
    let edges = &ctx.edges[lo..hi];

    let mut nodes = RowMap::with_capacity(2 * edges.len() + 2 * s.negatives.count);
    let mut rels = RowMap::with_capacity(16);
    let uses_rel = s.kind.uses_relations();
    let local: Vec<LocalEdge> = edges
        .iter()
        .map(|e| LocalEdge {
            src: nodes.local(e.src),
            rel: if uses_rel { rels.local(e.rel) } else { 0 },
            dst: nodes.local(e.dst),
        })
        .collect();
    let positive_rows = nodes.ids.len();

    let mut rng = negative_stream(s.seed, ctx.epoch, ctx.step, id);
    let neg_src: Vec<u32> =
        sample_negatives(&s.negatives, &ctx.src_pool, &mut rng)?.into_iter().map(|n| nodes.local(n)).collect();
    let neg_dst: Vec<u32> =
        sample_negatives(&s.negatives, &ctx.dst_pool, &mut rng)?.into_iter().map(|n| nodes.local(n)).collect();

    let rows = nodes.ids.len();
    let mut params = vec![0.0f32; rows * d];
    let mut accum = vec![0.0f32; rows * d];
    let mut stamps = Vec::with_capacity(rows);
    let mut locations = Vec::with_capacity(rows);
    let blocks = ctx.view.blocks();
    let guards: Vec<_> = blocks.iter().map(|b| b.read()).collect();
    for (i, &node) in nodes.ids.iter().enumerate() {
        let (bi, r) =
            ctx.view.locate(node).ok_or_else(|| EngineError::Buffer(format!("node {node} is not resident")))?;
        let src = r * d..(r + 1) * d;
        params[i * d..(i + 1) * d].copy_from_slice(&guards[bi].params[src.clone()]);
        accum[i * d..(i + 1) * d].copy_from_slice(&guards[bi].accum[src]);
        stamps.push(blocks[bi].version(r));
        locations.push((bi, r));
    }
    drop(guards);

    Ok(Batch {
        id,
        edges: local,
        rel_ids: rels.ids,
        node_ids: nodes.ids,
        locations,
        params,
        accum,
        stamps,
        retired_at_gather: retired,
        positive_rows,
        neg_src,
        neg_dst,
        ready_at: None,
    })
}

/// Largest `current version - gathered version` over the batch rows.
pub fn row_lag(view: &NodeView, batch: &Batch) -> u32 {
    let blocks = view.blocks();
    batch
        .locations
        .iter()
        .zip(&batch.stamps)
        .map(|(&(b, r), &s)| blocks[b].version(r).wrapping_sub(s))
        .max()
        .unwrap_or(0)
}

/// Computes loss and gradients, updates relations in place and returns the
/// node deltas.
pub fn compute(settings: &TrainSettings, batch: Batch, relations: &mut RelationTable) -> Result<Update> {
    let d = settings.dim;
    let lr = settings.lr;
    let eps = settings.eps;
    let mut rel_rows = Vec::with_capacity(batch.rel_ids.len() * d);
    for &r in &batch.rel_ids {
        rel_rows.extend_from_slice(relations.row(r));
    }
    let grad = loss_and_grad(&BatchInput {
        batch_id: batch.id,
        kind: settings.kind,
        dim: d,
        nodes: &batch.params,
        relations: &rel_rows,
        edges: &batch.edges,
        neg_src: &batch.neg_src,
        neg_dst: &batch.neg_dst,
    })?;

    let mut dp = vec![0.0f32; d];
    let mut da = vec![0.0f32; d];
    for (i, &r) in batch.rel_ids.iter().enumerate() {
        let g = &grad.relations[i * d..(i + 1) * d];
        let span = r as usize * d..(r as usize + 1) * d;
        adagrad_delta(&relations.accum[span.clone()], g, lr, eps, &mut dp, &mut da);
        let (params, accum) = (&mut relations.params[span.clone()], &mut relations.accum[span]);
        apply_delta(params, accum, &dp, &da);
    }

    relations.updates += 1;

    let mut dparam = vec![0.0f32; batch.params.len()];
    let mut daccum = vec![0.0f32; batch.params.len()];
    adagrad_delta(&batch.accum, &grad.nodes, lr, eps, &mut dparam, &mut daccum);
    Ok(Update {
        id: batch.id,
        relation_seq: relations.updates,
        locations: batch.locations,
        dparam,
        daccum,
        loss: f64::from(grad.loss),
        edges: batch.edges.len(),
        positive_rows: batch.positive_rows,
        ready_at: None,
    })
}

/// Adds the deltas to the resident rows and bumps their versions.
pub fn apply(view: &NodeView, update: &Update, dim: usize) {
    let blocks = view.blocks();
    for (bi, block) in blocks.iter().enumerate() {
        if !update.locations.iter().any(|&(b, _)| b == bi) {
            continue;
        }
        let mut data = block.write();
        let data = &mut *data;
        for (i, &(b, r)) in update.locations.iter().enumerate() {
            if b != bi {
                continue;
            }
            let dst = r * dim..(r + 1) * dim;
            let src = i * dim..(i + 1) * dim;
            apply_delta(
                &mut data.params[dst.clone()],
                &mut data.accum[dst],
                &update.dparam[src.clone()],
                &update.daccum[src],
            );
            block.bump(r);
        }
    }
}
