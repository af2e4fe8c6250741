use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::real::{dot, Real};

/// Which score function `f(s, r, d)` the model uses.
///
/// ComplEx vectors store the `d/2` real parts first, then the `d/2`
/// imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// `s . d`, relations ignored.
    Dot,
    /// `sum_k s_k r_k d_k`.
    DistMult,
    /// `Re(sum_k s_k r_k conj(d_k))`.
    ComplEx,
}

impl ModelKind {
    pub fn uses_relations(self) -> bool {
        !matches!(self, ModelKind::Dot)
    }

    pub fn check_dim(self, dim: usize) -> Result<()> {
        if self == ModelKind::ComplEx && !dim.is_multiple_of(2) {
            return Err(Error::OddComplexDim(dim));
        }
        Ok(())
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dot => "dot",
            ModelKind::DistMult => "distmult",
            ModelKind::ComplEx => "complex",
        }
    }

    /// Writes `q` such that `f(s, r, x) = q . x` for every destination `x`.
    pub fn dst_query<T: Real>(self, s: &[T], r: &[T], q: &mut [T]) {
        match self {
            ModelKind::Dot => q.copy_from_slice(s),
            ModelKind::DistMult => {
                for ((q, s), r) in q.iter_mut().zip(s).zip(r) {
                    *q = *s * *r;
                }
            }
            ModelKind::ComplEx => {
                let h = s.len() / 2;
                let (s_re, s_im) = s.split_at(h);
                let (r_re, r_im) = r.split_at(h);
                let (q_re, q_im) = q.split_at_mut(h);
                for k in 0..h {
                    q_re[k] = s_re[k] * r_re[k] - s_im[k] * r_im[k];
                    q_im[k] = s_re[k] * r_im[k] + s_im[k] * r_re[k];
                }
            }
        }
    }

    /// Writes `q` such that `f(x, r, d) = q . x` for every source `x`.
    pub fn src_query<T: Real>(self, r: &[T], d: &[T], q: &mut [T]) {
        match self {
            ModelKind::Dot => q.copy_from_slice(d),
            ModelKind::DistMult => {
                for ((q, r), d) in q.iter_mut().zip(r).zip(d) {
                    *q = *r * *d;
                }
            }
            ModelKind::ComplEx => {
                // r * conj(d) = (c x + e y) + i (e x - c y); Re(s * w) = a w_re - b w_im.
                let h = d.len() / 2;
                let (r_re, r_im) = r.split_at(h);
                let (d_re, d_im) = d.split_at(h);
                let (q_re, q_im) = q.split_at_mut(h);
                for k in 0..h {
                    q_re[k] = r_re[k] * d_re[k] + r_im[k] * d_im[k];
                    q_im[k] = r_re[k] * d_im[k] - r_im[k] * d_re[k];
                }
            }
        }
    }

    /// Accumulates `dq/ds` and `dq/dr` (times `gq`) for a destination query.
    pub fn dst_query_backward<T: Real>(self, s: &[T], r: &[T], gq: &[T], gs: &mut [T], gr: Option<&mut [T]>) {
        match self {
            ModelKind::Dot => {
                for (gs, g) in gs.iter_mut().zip(gq) {
                    *gs += *g;
                }
            }
            ModelKind::DistMult => {
                for k in 0..gq.len() {
                    gs[k] += gq[k] * r[k];
                }
                if let Some(gr) = gr {
                    for k in 0..gq.len() {
                        gr[k] += gq[k] * s[k];
                    }
                }
            }
            ModelKind::ComplEx => {
                let h = s.len() / 2;
                for k in 0..h {
                    let (c, e) = (r[k], r[h + k]);
                    let (g_re, g_im) = (gq[k], gq[h + k]);
                    gs[k] += g_re * c + g_im * e;
                    gs[h + k] += g_im * c - g_re * e;
                }
                if let Some(gr) = gr {
                    for k in 0..h {
                        let (a, b) = (s[k], s[h + k]);
                        let (g_re, g_im) = (gq[k], gq[h + k]);
                        gr[k] += g_re * a + g_im * b;
                        gr[h + k] += g_im * a - g_re * b;
                    }
                }
            }
        }
    }

    /// Accumulates `dq/dr` and `dq/dd` (times `gq`) for a source query.
    pub fn src_query_backward<T: Real>(self, r: &[T], d: &[T], gq: &[T], gr: Option<&mut [T]>, gd: &mut [T]) {
        match self {
            ModelKind::Dot => {
                for (gd, g) in gd.iter_mut().zip(gq) {
                    *gd += *g;
                }
            }
            ModelKind::DistMult => {
                for k in 0..gq.len() {
                    gd[k] += gq[k] * r[k];
                }
                if let Some(gr) = gr {
                    for k in 0..gq.len() {
                        gr[k] += gq[k] * d[k];
                    }
                }
            }
            ModelKind::ComplEx => {
                let h = d.len() / 2;
                for k in 0..h {
                    let (c, e) = (r[k], r[h + k]);
                    let (g_re, g_im) = (gq[k], gq[h + k]);
                    gd[k] += g_re * c - g_im * e;
                    gd[h + k] += g_re * e + g_im * c;
                }
                if let Some(gr) = gr {
                    for k in 0..h {
                        let (x, y) = (d[k], d[h + k]);
                        let (g_re, g_im) = (gq[k], gq[h + k]);
                        gr[k] += g_re * x + g_im * y;
                        gr[h + k] += g_re * y - g_im * x;
                    }
                }
            }
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = &'static str;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dot" => Ok(ModelKind::Dot),
            "distmult" => Ok(ModelKind::DistMult),
            "complex" => Ok(ModelKind::ComplEx),
            _ => Err("expected one of dot, distmult, complex"),
        }
    }
}

/// Reference score `f(s, r, d)` evaluated straight from its definition.
pub fn score<T: Real>(kind: ModelKind, s: &[T], r: &[T], d: &[T]) -> Result<T> {
    if s.len() != d.len() {
        return Err(Error::DimensionMismatch { expected: s.len(), found: d.len() });
    }
    if kind.uses_relations() && r.len() != s.len() {
        return Err(Error::DimensionMismatch { expected: s.len(), found: r.len() });
    }
    kind.check_dim(s.len())?;
    Ok(match kind {
        ModelKind::Dot => dot(s, d),
        ModelKind::DistMult => {
            let mut acc = T::ZERO;
            for k in 0..s.len() {
                acc += s[k] * r[k] * d[k];
            }
            acc
        }
        ModelKind::ComplEx => {
            let h = s.len() / 2;
            let mut acc = T::ZERO;
            for k in 0..h {
                let (a, b) = (s[k], s[h + k]);
                let (c, e) = (r[k], r[h + k]);
                let (x, y) = (d[k], d[h + k]);
                // (a + ib)(c + ie) = (ac - be) + i(ae + bc); times (x - iy), real part:
                acc += (a * c - b * e) * x + (a * e + b * c) * y;
            }
            acc
        }
    })
}
