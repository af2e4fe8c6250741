mod common;

use std::sync::Arc;

use graphvec::block::{BlockData, PartitionBlock, RelationTable};
use graphvec::evaluate::{evaluate, DiskSource, EvalSettings, MemorySource, TripleFilter};
use graphvec::store::{Edge, Split};
use graphvec_core::rng;
use graphvec_core::{rank_edge, CorruptionSide, ModelKind, NegativeSampleSpec, PartitionAssignment};
use rand::Rng;

struct Toy {
    assignment: PartitionAssignment,
    blocks: Vec<Arc<PartitionBlock>>,
    relations: RelationTable,
    params: Vec<f32>,
}

fn toy(params: Vec<f32>, relations: Vec<f32>, dim: usize, p: u32) -> Toy {
    let n = (params.len() / dim) as u64;
    let assignment = PartitionAssignment::uniform(n, p).unwrap();
    let blocks = (0..p)
        .map(|k| {
            let lo = assignment.start(k) as usize * dim;
            let hi = lo + assignment.rows(k) as usize * dim;
            let data = BlockData { params: params[lo..hi].to_vec(), accum: vec![0.0; hi - lo] };
            Arc::new(PartitionBlock::new(k, assignment.start(k) as u32, dim, data, None))
        })
        .collect();
    let accum = vec![0.0; relations.len()];
    Toy { assignment, blocks, relations: RelationTable { dim, params: relations, accum, updates: 0 }, params }
}

impl Toy {
    fn source(&self) -> MemorySource<'_> {
        MemorySource { assignment: self.assignment.clone(), blocks: &self.blocks }
    }
}

#[test]
fn four_node_toy_ranks_by_hand() {
    // e0=(1,0) e1=(0,1) e2=(1,1) e3=(2,0)
    let t = toy(vec![1., 0., 0., 1., 1., 1., 2., 0.], vec![0., 0.], 2, 2);
    let test = [Edge::new(0, 0, 2), Edge::new(3, 0, 1)];
    let s = EvalSettings::new(ModelKind::Dot, 2);
    let r = evaluate(&test, &s, &mut t.source(), &t.relations, None, &[]).unwrap();
    let ranks: Vec<u64> = r.ranks.iter().map(|x| x.1).collect();
    assert_eq!(ranks, vec![3, 4, 4, 4]);
    assert_eq!(r.ranks[0].0, CorruptionSide::Destination);
    let mrr = (1.0 / 3.0 + 0.75) / 4.0;
    assert!((r.report.mrr - mrr).abs() < 1e-12);
    assert_eq!(r.report.hits[0].1, 0.0);
    assert!((r.report.hits[1].1 - 0.25).abs() < 1e-12);

    let known = [Edge::new(0, 0, 3), Edge::new(3, 0, 2)];
    let filter = TripleFilter::new([&test[..], &known[..]]);
    let mut s = s;
    s.filtered = true;
    let r = evaluate(&test, &s, &mut t.source(), &t.relations, Some(&filter), &[]).unwrap();
    let ranks: Vec<u64> = r.ranks.iter().map(|x| x.1).collect();
    assert_eq!(ranks, vec![2, 3, 3, 4]);
    assert!((r.report.mrr - (0.5 + 2.0 / 3.0 + 0.25) / 4.0).abs() < 1e-12);
}

fn integer_world(n: usize, dim: usize, rels: usize, p: u32, seed: u64) -> (Toy, Vec<Edge>, Vec<Edge>) {
    let mut rng = rng::stream(seed, &[]);
    let mut int = |k: usize| -> Vec<f32> { (0..k).map(|_| rng.gen_range(-3i32..=3) as f32).collect() };
    let params = int(n * dim);
    let relations = int(rels * dim);
    let mut rng = rng::stream(seed, &[1]);
    let mut edge = || Edge::new(rng.gen_range(0..n as u32), rng.gen_range(0..rels as u32), rng.gen_range(0..n as u32));
    let test: Vec<Edge> = (0..80).map(|_| edge()).collect();
    let train: Vec<Edge> = (0..400).map(|_| edge()).collect();
    (toy(params, relations, dim, p), test, train)
}

// Small integer embeddings make every score exact, so the GEMM path and
// direct scoring must agree rank for rank, ties included.
#[test]
fn all_node_ranks_match_direct_scoring() {
    for kind in [ModelKind::Dot, ModelKind::DistMult, ModelKind::ComplEx] {
        let (t, test, train) = integer_world(60, 4, 3, 3, 9);
        let filter = TripleFilter::new([&test[..], &train[..]]);
        for filtered in [false, true] {
            let mut s = EvalSettings::new(kind, 4);
            s.filtered = filtered;
            s.chunk = 7;
            let r = evaluate(&test, &s, &mut t.source(), &t.relations, Some(&filter), &[]).unwrap();
            let node = |v: u32| &t.params[v as usize * 4..(v as usize + 1) * 4];
            for (i, e) in test.iter().enumerate() {
                let rel = t.relations.row(e.rel);
                for (j, side) in [CorruptionSide::Destination, CorruptionSide::Source].into_iter().enumerate() {
                    let target = if side == CorruptionSide::Destination { e.dst } else { e.src };
                    let cands: Vec<u32> = (0..60).filter(|&v| v != target).collect();
                    let fneg = |c: u32| match side {
                        CorruptionSide::Destination => filter.contains(e.src, e.rel, c),
                        CorruptionSide::Source => filter.contains(c, e.rel, e.dst),
                    };
                    let want = rank_edge(
                        kind,
                        e.src,
                        e.dst,
                        rel,
                        side,
                        &cands,
                        node,
                        filtered.then_some(&fneg as &dyn Fn(u32) -> bool),
                    );
                    assert_eq!(r.ranks[2 * i + j], (side, want), "{kind} filtered={filtered} edge {i}");
                }
            }
        }
    }
}

#[test]
fn filtering_never_lowers_mrr() {
    let (t, test, train) = integer_world(50, 4, 2, 2, 4);
    let filter = TripleFilter::new([&test[..], &train[..]]);
    let mut s = EvalSettings::new(ModelKind::DistMult, 4);
    let raw = evaluate(&test, &s, &mut t.source(), &t.relations, Some(&filter), &[]).unwrap();
    s.filtered = true;
    let filt = evaluate(&test, &s, &mut t.source(), &t.relations, Some(&filter), &[]).unwrap();
    assert!(filt.report.mrr >= raw.report.mrr);
    for (a, b) in raw.ranks.iter().zip(&filt.ranks) {
        assert!(b.1 <= a.1);
    }
}

#[test]
fn filtered_ranking_requires_known_triples() {
    let (t, test, _) = integer_world(20, 2, 1, 1, 1);
    let mut s = EvalSettings::new(ModelKind::Dot, 2);
    s.filtered = true;
    assert!(evaluate(&test, &s, &mut t.source(), &t.relations, None, &[]).is_err());
}

#[test]
fn disk_source_matches_memory_source() {
    let dir = tempfile::tempdir().unwrap();
    let ds = common::community_dataset(dir.path(), 900, 6000, 2, 4, 8, 5);
    let files = ds.params().unwrap();
    let blocks = common::load_blocks(&files);
    let relations = files.read_relations().unwrap();
    let test = ds.edges(Split::Test).unwrap();
    for negatives in [None, Some(NegativeSampleSpec::new(50, 0.5).unwrap())] {
        let mut s = EvalSettings::new(ModelKind::ComplEx, 8);
        s.negatives = negatives;
        let endpoints: Vec<u32> = test.iter().flat_map(|e| [e.src, e.dst]).collect();
        let mut mem = MemorySource { assignment: files.assignment.clone(), blocks: &blocks };
        let a = evaluate(&test, &s, &mut mem, &relations, None, &endpoints).unwrap();
        let b = evaluate(&test, &s, &mut DiskSource { files: files.clone() }, &relations, None, &endpoints).unwrap();
        assert_eq!(a.ranks, b.ranks);
        assert_eq!(a.report.mrr.to_bits(), b.report.mrr.to_bits());
    }
}

#[test]
fn sampled_ranking_is_seeded_and_bounded() {
    let (t, test, _) = integer_world(200, 4, 2, 2, 6);
    let endpoints: Vec<u32> = test.iter().flat_map(|e| [e.src, e.dst]).collect();
    let mut s = EvalSettings::new(ModelKind::DistMult, 4);
    s.negatives = Some(NegativeSampleSpec::new(25, 0.3).unwrap());
    s.chunk = 16;
    s.seed = 3;
    let a = evaluate(&test, &s, &mut t.source(), &t.relations, None, &endpoints).unwrap();
    let b = evaluate(&test, &s, &mut t.source(), &t.relations, None, &endpoints).unwrap();
    assert_eq!(a.ranks, b.ranks);
    assert!(a.ranks.iter().all(|&(_, r)| (1..=26).contains(&r)));
    s.seed = 4;
    let c = evaluate(&test, &s, &mut t.source(), &t.relations, None, &endpoints).unwrap();
    assert_ne!(a.ranks, c.ranks);
    assert!(a.report.mrr > 0.0 && a.report.mrr <= 1.0);
}

#[test]
fn max_edges_takes_a_seeded_subset() {
    let (t, test, _) = integer_world(40, 2, 1, 1, 2);
    let mut s = EvalSettings::new(ModelKind::Dot, 2);
    s.max_edges = Some(10);
    let a = evaluate(&test, &s, &mut t.source(), &t.relations, None, &[]).unwrap();
    assert_eq!(a.edges.len(), 10);
    assert_eq!(a.ranks.len(), 20);
    assert!(a.edges.iter().all(|e| test.contains(e)));
    let b = evaluate(&test, &s, &mut t.source(), &t.relations, None, &[]).unwrap();
    assert_eq!(a.edges, b.edges);
}

#[test]
fn empty_or_out_of_range_edges_are_errors() {
    let (t, _, _) = integer_world(10, 2, 1, 1, 2);
    let s = EvalSettings::new(ModelKind::Dot, 2);
    assert!(evaluate(&[], &s, &mut t.source(), &t.relations, None, &[]).is_err());
    assert!(evaluate(&[Edge::new(0, 0, 10)], &s, &mut t.source(), &t.relations, None, &[]).is_err());
}
