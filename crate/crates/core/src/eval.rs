//! Ranks and link-prediction metrics.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::model::ModelKind;
use crate::real::{dot, Real};

/// Which endpoint of a test edge is replaced by candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorruptionSide {
    Source,
    Destination,
}

impl CorruptionSide {
    pub const BOTH: [CorruptionSide; 2] = [CorruptionSide::Source, CorruptionSide::Destination];
}

/// `1 + |{n : n >= positive}|`: ties count against the positive.
pub fn rank_from_scores<T: Real>(positive: T, negatives: impl IntoIterator<Item = T>) -> u64 {
    1 + negatives.into_iter().filter(|&n| n >= positive).count() as u64
}

/// Ranks one edge against explicit candidates by direct scoring.
///
/// `node` looks up a node embedding by id and `relation` is the edge's
/// relation embedding. Candidates for which `is_false_negative` returns
/// true are skipped before counting.
#[allow(clippy::too_many_arguments)]
pub fn rank_edge<'a, T: Real>(
    kind: ModelKind,
    src: u32,
    dst: u32,
    relation: &[T],
    side: CorruptionSide,
    negatives: &[u32],
    node: impl Fn(u32) -> &'a [T],
    is_false_negative: Option<&dyn Fn(u32) -> bool>,
) -> u64 {
    if negatives.is_empty() {
        log::warn!("ranking edge ({src}, {dst}) against an empty candidate set");
        return 1;
    }
    let s = node(src);
    let d = node(dst);
    let mut q = vec![T::ZERO; s.len()];
    let target = match side {
        CorruptionSide::Destination => {
            kind.dst_query(s, relation, &mut q);
            d
        }
        CorruptionSide::Source => {
            kind.src_query(relation, d, &mut q);
            s
        }
    };
    let positive = dot(&q, target);
    let kept = negatives.iter().filter(|&&c| is_false_negative.is_none_or(|f| !f(c))).map(|&c| dot(&q, node(c)));
    rank_from_scores(positive, kept)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// |C|, the number of ranked (edge, side) candidates.
    pub count: u64,
    pub mrr: f64,
    /// `(k, fraction of ranks <= k)` in the order requested.
    pub hits: Vec<(u32, f64)>,
    pub mrr_source: Option<f64>,
    pub mrr_destination: Option<f64>,
    /// Bin `b` counts ranks in `[2^b, 2^(b+1))`.
    pub rank_histogram: Vec<u64>,
}

impl EvalReport {
    pub fn hits_at(&self, k: u32) -> Option<f64> {
        self.hits.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "candidates={} mrr={:.4}", self.count, self.mrr)?;
        for (k, v) in &self.hits {
            write!(f, " hits@{k}={v:.4}")?;
        }
        Ok(())
    }
}

/// MRR and Hits@k over pooled ranks from both corruption sides.
pub fn aggregate(ranks: &[(CorruptionSide, u64)], k_list: &[u32]) -> Result<EvalReport> {
    if ranks.is_empty() {
        return Err(Error::NoRanks);
    }
    let n = ranks.len() as f64;
    let recip = |r: u64| 1.0 / r.max(1) as f64;
    let mrr = ranks.iter().map(|&(_, r)| recip(r)).sum::<f64>() / n;
    let hits =
        k_list.iter().map(|&k| (k, ranks.iter().filter(|&&(_, r)| r <= u64::from(k)).count() as f64 / n)).collect();
    let side_mrr = |side: CorruptionSide| {
        let (sum, cnt) =
            ranks.iter().filter(|(s, _)| *s == side).fold((0.0, 0u64), |(s, c), &(_, r)| (s + recip(r), c + 1));
        (cnt > 0).then(|| sum / cnt as f64)
    };
    let mut rank_histogram = Vec::new();
    for &(_, r) in ranks {
        let bin = (63 - r.max(1).leading_zeros()) as usize;
        if rank_histogram.len() <= bin {
            rank_histogram.resize(bin + 1, 0);
        }
        rank_histogram[bin] += 1;
    }
    Ok(EvalReport {
        count: ranks.len() as u64,
        mrr,
        hits,
        mrr_source: side_mrr(CorruptionSide::Source),
        mrr_destination: side_mrr(CorruptionSide::Destination),
        rank_histogram,
    })
}
