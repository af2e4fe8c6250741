//! Independent oracles shared by the ordering and gradient suites.
#![allow(dead_code)]

use std::collections::VecDeque;

use graphvec_core::ordering::BufferEvent;
use graphvec_core::rng::stream;
use graphvec_core::{loss_and_grad, score, BatchInput, Bucket, LocalEdge, ModelKind};
use rand::Rng;

/// Breadth-first search over (resident set, covered pairs) for the fewest
/// swaps after an initial fill that co-locate every pair at least once.
pub fn brute_force_min_swaps(p: u32, c: u32) -> u64 {
    let pairs: Vec<(u32, u32)> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
    let full: u32 = if pairs.is_empty() { 0 } else { (1u32 << pairs.len()) - 1 };
    let cover = |res: u32| -> u32 {
        pairs
            .iter()
            .enumerate()
            .filter(|(_, &(i, j))| res & (1 << i) != 0 && res & (1 << j) != 0)
            .fold(0, |m, (k, _)| m | (1 << k))
    };
    let n_states = 1usize << p;
    let mut seen = vec![vec![false; full as usize + 1]; n_states];
    let mut queue = VecDeque::new();
    for res in 0..(1u32 << p) {
        if res.count_ones() == c {
            let cov = cover(res);
            seen[res as usize][cov as usize] = true;
            queue.push_back((res, cov, 0u64));
        }
    }
    while let Some((res, cov, depth)) = queue.pop_front() {
        if cov == full {
            return depth;
        }
        for out in 0..p {
            if res & (1 << out) == 0 {
                continue;
            }
            for inn in 0..p {
                if res & (1 << inn) != 0 {
                    continue;
                }
                let nres = (res & !(1 << out)) | (1 << inn);
                let ncov = cov | cover(nres);
                if !seen[nres as usize][ncov as usize] {
                    seen[nres as usize][ncov as usize] = true;
                    queue.push_back((nres, ncov, depth + 1));
                }
            }
        }
    }
    unreachable!("every pair can be covered")
}

/// Belady by definition: scan forward from the current step for each
/// candidate's next use.
pub fn oracle_replay(buckets: &[Bucket], c: usize) -> Vec<BufferEvent> {
    let mut resident: Vec<u32> = Vec::new();
    let mut events = Vec::new();
    for (k, b) in buckets.iter().enumerate() {
        for x in [b.src, b.dst] {
            if resident.contains(&x) {
                continue;
            }
            let mut evicted = None;
            if resident.len() == c {
                let mut best: Option<(usize, u32)> = None;
                for &r in &resident {
                    if r == b.src || r == b.dst {
                        continue;
                    }
                    let next =
                        buckets[k..].iter().position(|bb| bb.src == r || bb.dst == r).map_or(usize::MAX, |o| k + o);
                    let better = match best {
                        None => true,
                        Some((bn, br)) => next > bn || (next == bn && r < br),
                    };
                    if better {
                        best = Some((next, r));
                    }
                }
                let victim = best.unwrap().1;
                resident.retain(|&r| r != victim);
                evicted = Some(victim);
            }
            resident.push(x);
            events.push(BufferEvent { step: k, evicted, admitted: x });
        }
    }
    events
}

pub struct Case {
    pub dim: usize,
    pub nodes: Vec<f64>,
    pub rels: Vec<f64>,
    pub edges: Vec<LocalEdge>,
    pub neg_src: Vec<u32>,
    pub neg_dst: Vec<u32>,
}

pub fn random_case(seed: u64, dim: usize) -> Case {
    let mut rng = stream(seed, &[]);
    let n_nodes = rng.gen_range(3..8u32);
    let n_rels = rng.gen_range(1..4u32);
    let nodes = (0..n_nodes as usize * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let rels = (0..n_rels as usize * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let edges = (0..rng.gen_range(1..5))
        .map(|_| LocalEdge {
            src: rng.gen_range(0..n_nodes),
            rel: rng.gen_range(0..n_rels),
            dst: rng.gen_range(0..n_nodes),
        })
        .collect();
    let neg_src = (0..rng.gen_range(0..5)).map(|_| rng.gen_range(0..n_nodes)).collect();
    let neg_dst = (0..rng.gen_range(0..5)).map(|_| rng.gen_range(0..n_nodes)).collect();
    Case { dim, nodes, rels, edges, neg_src, neg_dst }
}

/// Loss from scratch: per positive, per side, `log(sum exp) - f(e)`.
pub fn oracle_loss(kind: ModelKind, c: &Case, nodes: &[f64], rels: &[f64]) -> f64 {
    let d = c.dim;
    let v = |i: u32| &nodes[i as usize * d..(i as usize + 1) * d];
    let r = |i: u32| &rels[i as usize * d..(i as usize + 1) * d];
    let mut total = 0.0;
    for e in &c.edges {
        let f = score(kind, v(e.src), r(e.rel), v(e.dst)).unwrap();
        let mut z = f.exp();
        for &x in &c.neg_dst {
            z += score(kind, v(e.src), r(e.rel), v(x)).unwrap().exp();
        }
        total += z.ln() - f;
        let mut z = f.exp();
        for &x in &c.neg_src {
            z += score(kind, v(x), r(e.rel), v(e.dst)).unwrap().exp();
        }
        total += z.ln() - f;
    }
    total / c.edges.len() as f64
}

fn rel_err(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < 1e-6 {
        (a - n).abs()
    } else {
        (a - n).abs() / scale
    }
}

/// Worst relative error between analytic and central-difference gradients
/// over every node and relation coordinate of one random case.
pub fn gradient_error(kind: ModelKind, seed: u64) -> f64 {
    let c = random_case(seed, 8);
    let input = BatchInput {
        batch_id: seed,
        kind,
        dim: c.dim,
        nodes: &c.nodes,
        relations: &c.rels,
        edges: &c.edges,
        neg_src: &c.neg_src,
        neg_dst: &c.neg_dst,
    };
    let g = loss_and_grad(&input).unwrap();
    assert!((g.loss - oracle_loss(kind, &c, &c.nodes, &c.rels)).abs() < 1e-10);
    let h = 1e-4;
    let mut worst = 0.0f64;
    for i in 0..c.nodes.len() {
        let mut plus = c.nodes.clone();
        let mut minus = c.nodes.clone();
        plus[i] += h;
        minus[i] -= h;
        let fd = (oracle_loss(kind, &c, &plus, &c.rels) - oracle_loss(kind, &c, &minus, &c.rels)) / (2.0 * h);
        worst = worst.max(rel_err(g.nodes[i], fd));
    }
    for i in 0..c.rels.len() {
        let mut plus = c.rels.clone();
        let mut minus = c.rels.clone();
        plus[i] += h;
        minus[i] -= h;
        let fd = (oracle_loss(kind, &c, &c.nodes, &plus) - oracle_loss(kind, &c, &c.nodes, &minus)) / (2.0 * h);
        let analytic = if kind.uses_relations() { g.relations[i] } else { 0.0 };
        worst = worst.max(rel_err(analytic, fd));
    }
    worst
}
