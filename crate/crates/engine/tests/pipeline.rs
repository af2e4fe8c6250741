mod common;

use std::collections::HashMap;
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::Duration;

use graphvec::block::{NodeView, PartitionBlock, RelationTable};
use graphvec::buffer::{BufferConfig, PartitionBuffer};
use graphvec::pipeline::{
    apply, bucket_order, compute, gather, negative_stream, BucketCtx, EpochStats, Storage, TrainMode, TrainSettings,
    Trainer,
};
use graphvec::store::{Dataset, Edge, EdgeBuckets, ParamFiles};
use graphvec_core::{
    adagrad_step, loss_and_grad, sample_negatives, BatchInput, Bucket, GradientDelta, LocalEdge, ModelKind,
    NegativePool, NegativeSampleSpec, OrderingKind, ParameterSlice, PartitionAssignment,
};

struct World {
    _dir: tempfile::TempDir,
    ds: Dataset,
    buckets: EdgeBuckets,
    assignment: PartitionAssignment,
    files: ParamFiles,
}

fn world(nodes: u32, edges: usize, rels: u32, p: u32, dim: usize) -> World {
    let dir = tempfile::tempdir().unwrap();
    let ds = common::community_dataset(dir.path(), nodes, edges, rels, p, dim, 3);
    World {
        buckets: ds.train_buckets().unwrap(),
        assignment: ds.assignment().unwrap(),
        files: ds.params().unwrap(),
        ds,
        _dir: dir,
    }
}

fn settings(kind: ModelKind, dim: usize, mode: TrainMode, bound: usize) -> TrainSettings {
    let mut s = TrainSettings::new(kind, dim);
    s.batch_size = 200;
    s.negatives = NegativeSampleSpec::new(20, 0.5).unwrap();
    s.seed = 11;
    s.mode = mode;
    s.staleness_bound = bound;
    s
}

fn memory_run(w: &World, s: &TrainSettings, seq: &[Bucket], epochs: u64) -> (Vec<u32>, RelationTable, Vec<EpochStats>) {
    let blocks = common::load_blocks(&w.files);
    let mut rel = w.files.read_relations().unwrap();
    let trainer = Trainer::new(s.clone(), &w.buckets, &w.assignment).unwrap();
    let mut stats = Vec::new();
    for e in 0..epochs {
        let mut storage = Storage::Memory { blocks: &blocks, sequence: seq };
        stats.push(trainer.run_epoch(e, &mut storage, &mut rel).unwrap());
    }
    (common::block_bits(&blocks), rel, stats)
}

fn buffered_run(
    w: &World,
    s: &TrainSettings,
    seq: &[Bucket],
    cfg: BufferConfig,
    epochs: u64,
) -> (Vec<u32>, RelationTable, Vec<EpochStats>) {
    let dir = tempfile::tempdir().unwrap();
    let files = w.files.copy_to(dir.path()).unwrap();
    let mut rel = files.read_relations().unwrap();
    let trainer = Trainer::new(s.clone(), &w.buckets, &w.assignment).unwrap();
    let mut buf = PartitionBuffer::new(files.clone(), seq.to_vec(), cfg).unwrap();
    let mut stats = Vec::new();
    for e in 0..epochs {
        stats.push(trainer.run_epoch(e, &mut Storage::Buffer(&mut buf), &mut rel).unwrap());
    }
    (common::file_bits(&files), rel, stats)
}

fn rel_bits(r: &RelationTable) -> Vec<u32> {
    r.params.iter().chain(&r.accum).map(|v| v.to_bits()).collect()
}

const WHOLE: [Bucket; 1] = [Bucket { src: 0, dst: 0 }];

#[test]
fn bound_one_pipeline_is_bit_identical_to_sync() {
    let w = world(800, 8000, 3, 1, 8);
    for kind in [ModelKind::Dot, ModelKind::DistMult, ModelKind::ComplEx] {
        let (a, ra, sa) = memory_run(&w, &settings(kind, 8, TrainMode::Sync, 1), &WHOLE, 2);
        let (b, rb, sb) = memory_run(&w, &settings(kind, 8, TrainMode::Pipelined, 1), &WHOLE, 2);
        assert_eq!(a, b, "{kind}");
        assert_eq!(rel_bits(&ra), rel_bits(&rb), "{kind}");
        assert_eq!(sa[1].loss.to_bits(), sb[1].loss.to_bits());
        assert_eq!(sb[1].max_staleness, 0);
    }

    let w = world(800, 8000, 2, 4, 8);
    let plan = OrderingKind::Elimination.generate(4, 2, 0).unwrap();
    let (a, ra, _) =
        buffered_run(&w, &settings(ModelKind::DistMult, 8, TrainMode::Sync, 1), &plan.buckets, BufferConfig::new(2), 2);
    let (b, rb, _) = buffered_run(
        &w,
        &settings(ModelKind::DistMult, 8, TrainMode::Pipelined, 1),
        &plan.buckets,
        BufferConfig::new(2),
        2,
    );
    assert_eq!(a, b);
    assert_eq!(rel_bits(&ra), rel_bits(&rb));
}

#[test]
fn staleness_never_exceeds_bound() {
    let w = world(1000, 20_000, 2, 1, 8);
    for bound in [1usize, 4, 16] {
        let mut s = settings(ModelKind::DistMult, 8, TrainMode::Pipelined, bound);
        s.batch_size = 100;
        let (_, rel, stats) = memory_run(&w, &s, &WHOLE, 1);
        let st = &stats[0];
        assert!(st.max_staleness < bound as u64, "bound {bound}: {}", st.max_staleness);
        assert!(st.max_row_lag as usize <= bound);
        assert_eq!(st.edges, w.buckets.len() as u64);
        assert_eq!(rel.updates, st.batches);
        assert_eq!(st.batches, w.buckets.len().div_ceil(100) as u64);
    }
}

#[test]
fn rows_in_flight_stay_within_two_b_bound() {
    let w = world(100_000, 300_000, 1, 1, 4);
    let mut s = settings(ModelKind::Dot, 4, TrainMode::Pipelined, 16);
    s.batch_size = 10_000;
    s.negatives = NegativeSampleSpec::new(10, 0.0).unwrap();
    let (_, _, stats) = memory_run(&w, &s, &WHOLE, 1);
    let rows = stats[0].max_positive_rows_in_flight;
    assert!(rows > 0 && rows <= 2 * 10_000 * 16, "{rows}");
}

#[test]
fn sync_trainer_matches_hand_rolled_loop() {
    let w = world(300, 1000, 2, 1, 6);
    let kind = ModelKind::DistMult;
    let mut s = settings(kind, 6, TrainMode::Sync, 1);
    let n_edges = w.buckets.len();
    s.batch_size = n_edges.div_ceil(2);
    let (bits, rel, stats) = memory_run(&w, &s, &WHOLE, 1);
    assert_eq!(stats[0].batches, 2);

    let d = 6;
    let all = w.files.read_all().unwrap();
    let mut nodes = ParameterSlice { dim: d, params: all.params, accum: all.accum };
    let r0 = w.files.read_relations().unwrap();
    let mut rels = ParameterSlice { dim: d, params: r0.params, accum: r0.accum };
    let endpoints: Vec<u32> = w.buckets.edges.iter().flat_map(|e| [e.src, e.dst]).collect();
    let pool = NegativePool { first: 0, len: w.ds.meta.num_nodes as u32, endpoints: &endpoints };
    let order = bucket_order(&w.buckets.edges, s.seed, 0, 0);
    for (bi, chunk) in order.chunks(s.batch_size).enumerate() {
        let mut ids: Vec<u32> = Vec::new();
        let mut pos: HashMap<u32, u32> = HashMap::new();
        let mut local = |n: u32, ids: &mut Vec<u32>| {
            *pos.entry(n).or_insert_with(|| {
                ids.push(n);
                ids.len() as u32 - 1
            })
        };
        let mut rel_ids: Vec<u32> = Vec::new();
        let mut edges = Vec::new();
        for e in chunk {
            let src = local(e.src, &mut ids);
            let r = match rel_ids.iter().position(|&x| x == e.rel) {
                Some(i) => i as u32,
                None => {
                    rel_ids.push(e.rel);
                    rel_ids.len() as u32 - 1
                }
            };
            let dst = local(e.dst, &mut ids);
            edges.push(LocalEdge { src, rel: r, dst });
        }
        let mut rng = negative_stream(s.seed, 0, 0, bi as u64);
        let ns: Vec<u32> =
            sample_negatives(&s.negatives, &pool, &mut rng).unwrap().into_iter().map(|n| local(n, &mut ids)).collect();
        let nd: Vec<u32> =
            sample_negatives(&s.negatives, &pool, &mut rng).unwrap().into_iter().map(|n| local(n, &mut ids)).collect();
        let gathered: Vec<f32> =
            ids.iter().flat_map(|&n| nodes.params[n as usize * d..(n as usize + 1) * d].to_vec()).collect();
        let rel_rows: Vec<f32> =
            rel_ids.iter().flat_map(|&r| rels.params[r as usize * d..(r as usize + 1) * d].to_vec()).collect();
        let g = loss_and_grad(&BatchInput {
            batch_id: bi as u64,
            kind,
            dim: d,
            nodes: &gathered,
            relations: &rel_rows,
            edges: &edges,
            neg_src: &ns,
            neg_dst: &nd,
        })
        .unwrap();
        adagrad_step(&mut rels, &GradientDelta { rows: rel_ids.clone(), grads: g.relations }, s.lr, s.eps).unwrap();
        adagrad_step(&mut nodes, &GradientDelta { rows: ids.clone(), grads: g.nodes }, s.lr, s.eps).unwrap();
    }
    let want: Vec<u32> = nodes.params.iter().chain(&nodes.accum).map(|v| v.to_bits()).collect();
    assert_eq!(bits, want);
    assert_eq!(rel.params, rels.params);
    assert_eq!(rel.accum, rels.accum);
}

#[test]
fn single_partition_buffer_matches_memory() {
    let w = world(500, 5000, 2, 1, 8);
    let s = settings(ModelKind::ComplEx, 8, TrainMode::Pipelined, 1);
    let (a, ra, _) = memory_run(&w, &s, &WHOLE, 2);
    let (b, rb, _) = buffered_run(&w, &s, &WHOLE, BufferConfig::new(1), 2);
    assert_eq!(a, b);
    assert_eq!(rel_bits(&ra), rel_bits(&rb));
}

#[test]
fn buffered_checksum_equals_bufferless_run() {
    let w = world(1200, 12_000, 2, 6, 8);
    for kind in [OrderingKind::Elimination, OrderingKind::Hilbert] {
        let plan = kind.generate(6, 3, 1).unwrap();
        let s = settings(ModelKind::DistMult, 8, TrainMode::Sync, 1);
        let (a, _, _) = memory_run(&w, &s, &plan.buckets, 2);
        let (b, _, stats) = buffered_run(&w, &s, &plan.buckets, BufferConfig::new(3), 2);
        assert_eq!(a, b, "{kind}");
        let sum = |bits: &[u32]| bits.iter().map(|&x| f64::from(f32::from_bits(x))).sum::<f64>();
        assert_eq!(sum(&a).to_bits(), sum(&b).to_bits());
        for st in &stats {
            let buf = st.buffer.as_ref().unwrap();
            assert_eq!(buf.swaps, plan.swap_count, "{kind}");
            assert!(buf.peak_blocks <= 5);
            assert_eq!(st.edges, w.buckets.len() as u64);
        }
    }
}

#[test]
fn node_delta_application_commutes_for_disjoint_batches() {
    let w = world(400, 2000, 1, 1, 6);
    let s = settings(ModelKind::DistMult, 6, TrainMode::Sync, 1);
    let blocks = common::load_blocks(&w.files);
    let view = NodeView::new(vec![blocks[0].clone()]);
    let mut rel = w.files.read_relations().unwrap();
    let groups: [Vec<Edge>; 3] =
        [0u32, 1, 2].map(|g| (0..20).map(|i| Edge::new(g * 100 + i, 0, g * 100 + 50 + i)).collect());
    let endpoints: Vec<u32> = Vec::new();
    let mut updates = Vec::new();
    for (g, edges) in groups.iter().enumerate() {
        let pool = NegativePool { first: g as u32 * 100 + 20, len: 30, endpoints: &endpoints };
        let ctx =
            BucketCtx { settings: &s, epoch: 0, step: g as u64, edges, view: &view, src_pool: pool, dst_pool: pool };
        let batch = gather(&ctx, 0, 0).unwrap();
        updates.push(compute(&s, batch, &mut rel).unwrap());
    }
    let seqs: Vec<u64> = updates.iter().map(|u| u.relation_seq).collect();
    assert_eq!(seqs, vec![1, 2, 3]);
    let mut finals = Vec::new();
    for perm in [[0usize, 1, 2], [2, 0, 1], [1, 2, 0]] {
        let copy: Vec<Arc<PartitionBlock>> =
            vec![Arc::new(PartitionBlock::new(0, 0, 6, blocks[0].read().clone(), None))];
        let v = NodeView::new(copy.clone());
        for i in perm {
            apply(&v, &updates[i], 6);
        }
        finals.push(common::block_bits(&copy));
    }
    assert_eq!(finals[0], finals[1]);
    assert_eq!(finals[0], finals[2]);
    assert_ne!(finals[0], common::block_bits(&blocks));
}

#[test]
fn compute_failure_aborts_the_epoch() {
    let w = world(400, 4000, 1, 1, 8);
    let (tx, rx) = mpsc::channel();
    let handle = thread::spawn(move || {
        let blocks = common::load_blocks(&w.files);
        blocks[0].write().params.iter_mut().for_each(|v| *v = f32::NAN);
        let mut rel = w.files.read_relations().unwrap();
        let s = settings(ModelKind::DistMult, 8, TrainMode::Pipelined, 8);
        let trainer = Trainer::new(s, &w.buckets, &w.assignment).unwrap();
        let r = trainer.run_epoch(0, &mut Storage::Memory { blocks: &blocks, sequence: &WHOLE }, &mut rel);
        tx.send(r.map(|_| ()).map_err(|e| e.to_string())).unwrap();
    });
    let r = rx.recv_timeout(Duration::from_secs(60)).expect("epoch hung after a worker failure");
    let msg = r.unwrap_err();
    assert!(msg.contains("non-finite"), "{msg}");
    handle.join().unwrap();
}

#[test]
fn complete_bipartite_graph_separates_edges_from_non_edges() {
    let dir = tempfile::tempdir().unwrap();
    let mut raw = graphvec::store::RawGraph {
        node_names: (0..20).map(|i| format!("n{i}")).collect(),
        relation_names: vec!["e".into()],
        splits: Default::default(),
    };
    for a in 0..10 {
        for b in 10..20 {
            raw.splits[0].push(Edge::new(a, 0, b));
        }
    }
    let ds = Dataset::create(dir.path(), raw, graphvec::store::LayoutOptions { partitions: 1, dim: 8, seed: 2 }, false)
        .unwrap();
    let buckets = ds.train_buckets().unwrap();
    let files = ds.params().unwrap();
    let blocks = common::load_blocks(&files);
    let mut rel = files.read_relations().unwrap();
    let mut s = settings(ModelKind::Dot, 8, TrainMode::Sync, 1);
    s.batch_size = 25;
    s.negatives = NegativeSampleSpec::new(5, 0.0).unwrap();
    let trainer = Trainer::new(s, &buckets, &ds.assignment().unwrap()).unwrap();
    for e in 0..50 {
        trainer.run_epoch(e, &mut Storage::Memory { blocks: &blocks, sequence: &WHOLE }, &mut rel).unwrap();
    }
    let edges: std::collections::HashSet<(u32, u32)> = buckets.edges.iter().map(|e| (e.src, e.dst)).collect();
    let data = blocks[0].read();
    let row = |n: u32| &data.params[n as usize * 8..(n as usize + 1) * 8];
    let (mut pos, mut np, mut neg, mut nn) = (0.0f64, 0, 0.0f64, 0);
    for a in 0..20u32 {
        for b in 0..20u32 {
            if a == b {
                continue;
            }
            let sc: f32 = row(a).iter().zip(row(b)).map(|(x, y)| x * y).sum();
            if edges.contains(&(a, b)) {
                pos += f64::from(sc);
                np += 1;
            } else {
                neg += f64::from(sc);
                nn += 1;
            }
        }
    }
    assert_eq!(np, 100);
    assert!(pos / np as f64 > neg / nn as f64, "{} vs {}", pos / np as f64, neg / nn as f64);
}

#[test]
fn empty_workload_reports_zeros() {
    let w = world(100, 500, 1, 2, 4);
    let empty = EdgeBuckets::from_parts(2, Vec::new(), vec![0; 5]).unwrap();
    let trainer = Trainer::new(settings(ModelKind::Dot, 4, TrainMode::Pipelined, 4), &empty, &w.assignment).unwrap();
    let blocks = common::load_blocks(&w.files);
    let mut rel = w.files.read_relations().unwrap();
    let seq = OrderingKind::Elimination.generate(2, 2, 0).unwrap().buckets;
    let st = trainer.run_epoch(0, &mut Storage::Memory { blocks: &blocks, sequence: &seq }, &mut rel).unwrap();
    assert_eq!((st.edges, st.batches, st.max_staleness, st.max_positive_rows_in_flight), (0, 0, 0, 0));
    assert_eq!(st.loss, 0.0);
    assert!(st.occupancy.is_empty());
    assert_eq!(st.compute_busy, Duration::ZERO);
}

#[test]
fn pipelining_raises_compute_utilization_under_transfer_latency() {
    let w = world(1000, 8000, 1, 1, 8);
    let mut fr = Vec::new();
    for mode in [TrainMode::Sync, TrainMode::Pipelined] {
        let mut s = settings(ModelKind::DistMult, 8, mode, 8);
        s.transfer_latency = Duration::from_millis(4);
        let (_, _, stats) = memory_run(&w, &s, &WHOLE, 1);
        fr.push(stats[0].compute_busy_fraction());
        if mode == TrainMode::Pipelined {
            assert!(!stats[0].occupancy.is_empty());
        }
    }
    assert!(fr[0] < fr[1], "sync {} vs pipelined {}", fr[0], fr[1]);
}

#[test]
fn loss_decreases_over_epochs() {
    let w = world(600, 10_000, 2, 2, 8);
    let plan = OrderingKind::Elimination.generate(2, 2, 0).unwrap();
    let (_, _, stats) = memory_run(&w, &settings(ModelKind::ComplEx, 8, TrainMode::Pipelined, 4), &plan.buckets, 4);
    assert!(stats[3].loss < stats[0].loss, "{:?}", stats.iter().map(|s| s.loss).collect::<Vec<_>>());
}
