use alloc::vec;
use alloc::vec::Vec;

use super::score::ModelKind;
use crate::error::{Error, Result};
use crate::real::{dot, Real};

/// A positive edge addressed by row indices into the gathered batch slices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LocalEdge {
    pub src: u32,
    pub rel: u32,
    pub dst: u32,
}

/// One batch worth of gathered parameters.
///
/// `nodes` and `relations` are row-major `rows x dim` matrices holding
/// each referenced node / relation exactly once. Negatives are shared by
/// every positive in the batch: `neg_src` replaces the source of each
/// positive, `neg_dst` its destination.
#[derive(Debug, Clone, Copy)]
pub struct BatchInput<'a, T> {
    pub batch_id: u64,
    pub kind: ModelKind,
    pub dim: usize,
    pub nodes: &'a [T],
    pub relations: &'a [T],
    pub edges: &'a [LocalEdge],
    pub neg_src: &'a [u32],
    pub neg_dst: &'a [u32],
}

/// Loss and gradients, shaped like the input slices.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGrad<T> {
    /// Mean over positives of the summed source- and destination-side terms.
    pub loss: T,
    pub loss_src: T,
    pub loss_dst: T,
    pub nodes: Vec<T>,
    pub relations: Vec<T>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Src,
    Dst,
}

fn check_rows(row: u32, rows: usize) -> Result<()> {
    if (row as usize) < rows {
        Ok(())
    } else {
        Err(Error::RowOutOfRange { row: row as usize, rows })
    }
}

fn validate<T: Real>(input: &BatchInput<'_, T>) -> Result<(usize, usize)> {
    let d = input.dim;
    input.kind.check_dim(d)?;
    if d == 0 || !input.nodes.len().is_multiple_of(d) {
        return Err(Error::DimensionMismatch { expected: d, found: input.nodes.len() });
    }
    if !input.relations.len().is_multiple_of(d) {
        return Err(Error::DimensionMismatch { expected: d, found: input.relations.len() });
    }
    if input.edges.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let node_rows = input.nodes.len() / d;
    let rel_rows = input.relations.len() / d;
    for e in input.edges {
        check_rows(e.src, node_rows)?;
        check_rows(e.dst, node_rows)?;
        if input.kind.uses_relations() {
            check_rows(e.rel, rel_rows)?;
        }
    }
    for &n in input.neg_src.iter().chain(input.neg_dst) {
        check_rows(n, node_rows)?;
    }
    Ok((node_rows, rel_rows))
}

/// Softmax cross-entropy of each positive against its shared negatives.
///
/// Per positive `e` and corruption side, the term is
/// `-f(e) + log(exp f(e) + sum_{e'} exp f(e'))`, computed with the maximum
/// subtracted. Gradients are exact derivatives of the mean over positives.
pub fn loss_and_grad<T: Real>(input: &BatchInput<'_, T>) -> Result<BatchGrad<T>> {
    validate(input)?;
    let d = input.dim;
    let kind = input.kind;
    let edges = input.edges;
    let b = edges.len();
    let inv_b = T::ONE / T::from_f64(b as f64);
    let nodes = input.nodes;
    let rels = input.relations;
    let row = |i: u32| i as usize * d..(i as usize + 1) * d;
    let rel_row = |i: u32| -> &[T] {
        if kind.uses_relations() {
            &rels[i as usize * d..(i as usize + 1) * d]
        } else {
            &[]
        }
    };

    let mut g_nodes = vec![T::ZERO; nodes.len()];
    let mut g_rels = vec![T::ZERO; rels.len()];
    let mut q = vec![T::ZERO; b * d];
    let mut gq = vec![T::ZERO; b * d];
    let mut pos = vec![T::ZERO; b];
    let mut ppos = vec![T::ZERO; b];
    let mut side_loss = [T::ZERO; 2];

    for (si, side) in [Side::Dst, Side::Src].into_iter().enumerate() {
        let negs = match side {
            Side::Dst => input.neg_dst,
            Side::Src => input.neg_src,
        };
        let n = negs.len();

        for (k, e) in edges.iter().enumerate() {
            let qk = &mut q[k * d..(k + 1) * d];
            let target = match side {
                Side::Dst => {
                    kind.dst_query(&nodes[row(e.src)], rel_row(e.rel), qk);
                    e.dst
                }
                Side::Src => {
                    kind.src_query(rel_row(e.rel), &nodes[row(e.dst)], qk);
                    e.src
                }
            };
            pos[k] = dot(qk, &nodes[row(target)]);
        }

        let mut negm = vec![T::ZERO; n * d];
        for (j, &v) in negs.iter().enumerate() {
            negm[j * d..(j + 1) * d].copy_from_slice(&nodes[row(v)]);
        }
        // scores[k, j] = q_k . neg_j
        let mut scores = vec![T::ZERO; b * n];
        T::gemm(b, d, n, T::ONE, &q, d, 1, &negm, 1, d, T::ZERO, &mut scores);

        // Turn scores into softmax probabilities scaled by 1/b in place.
        for k in 0..b {
            let srow = &mut scores[k * n..(k + 1) * n];
            let p = pos[k];
            if !p.is_finite() || srow.iter().any(|s| !s.is_finite()) {
                return Err(Error::NonFiniteScore { batch: input.batch_id });
            }
            let m = srow.iter().fold(p, |m, &s| m.max(s));
            let mut sum = (p - m).exp();
            for &s in srow.iter() {
                sum += (s - m).exp();
            }
            let lse = m + sum.ln();
            side_loss[si] += lse - p;
            ppos[k] = ((p - lse).exp() - T::ONE) * inv_b;
            for s in srow.iter_mut() {
                *s = (*s - lse).exp() * inv_b;
            }
        }

        // dL/dq_k = sum_j P[k, j] neg_j + ppos_k * target_k
        gq.iter_mut().for_each(|g| *g = T::ZERO);
        T::gemm(b, n, d, T::ONE, &scores, n, 1, &negm, d, 1, T::ZERO, &mut gq);
        // dL/dneg_j = sum_k P[k, j] q_k
        let mut g_negm = vec![T::ZERO; n * d];
        T::gemm(n, b, d, T::ONE, &scores, 1, n, &q, d, 1, T::ZERO, &mut g_negm);
        for (j, &v) in negs.iter().enumerate() {
            let dst = &mut g_nodes[row(v)];
            for (g, x) in dst.iter_mut().zip(&g_negm[j * d..(j + 1) * d]) {
                *g += *x;
            }
        }

        for (k, e) in edges.iter().enumerate() {
            let target = match side {
                Side::Dst => e.dst,
                Side::Src => e.src,
            };
            let qk = &q[k * d..(k + 1) * d];
            let gqk = &mut gq[k * d..(k + 1) * d];
            let t = &nodes[row(target)];
            for l in 0..d {
                gqk[l] += ppos[k] * t[l];
            }
            let gt = &mut g_nodes[row(target)];
            for l in 0..d {
                gt[l] += ppos[k] * qk[l];
            }
            let gr = if kind.uses_relations() {
                Some(&mut g_rels[e.rel as usize * d..(e.rel as usize + 1) * d])
            } else {
                None
            };
            let gqk = &gq[k * d..(k + 1) * d];
            match side {
                Side::Dst => {
                    let s = &nodes[row(e.src)];
                    let gs = &mut g_nodes[row(e.src)];
                    kind.dst_query_backward(s, rel_row(e.rel), gqk, gs, gr);
                }
                Side::Src => {
                    let dv = &nodes[row(e.dst)];
                    let gd = &mut g_nodes[row(e.dst)];
                    kind.src_query_backward(rel_row(e.rel), dv, gqk, gr, gd);
                }
            }
        }
    }

    let loss_dst = side_loss[0] * inv_b;
    let loss_src = side_loss[1] * inv_b;
    Ok(BatchGrad { loss: (side_loss[0] + side_loss[1]) * inv_b, loss_src, loss_dst, nodes: g_nodes, relations: g_rels })
}
