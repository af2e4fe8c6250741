use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real::Real;

/// Gathered embedding rows with their Adagrad accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSlice<T> {
    pub dim: usize,
    pub params: Vec<T>,
    pub accum: Vec<T>,
}

impl<T: Real> ParameterSlice<T> {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self { dim, params: vec![T::ZERO; rows * dim], accum: vec![T::ZERO; rows * dim] }
    }

    pub fn rows(&self) -> usize {
        self.params.len().checked_div(self.dim).unwrap_or(0)
    }
}

/// Sparse per-row gradients: `grads` holds one `dim`-vector per entry of `rows`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientDelta<T> {
    pub rows: Vec<u32>,
    pub grads: Vec<T>,
}

/// Computes the additive Adagrad update for one block of values.
///
/// `daccum = g^2` and `dparam = -lr * g / (sqrt(accum + g^2) + eps)`, so
/// applying the pair with [`apply_delta`] performs one Adagrad step.
/// Keeping the step additive lets updates to disjoint rows commute.
pub fn adagrad_delta<T: Real>(accum: &[T], grad: &[T], lr: T, eps: T, dparam: &mut [T], daccum: &mut [T]) {
    for i in 0..grad.len() {
        let g = grad[i];
        let g2 = g * g;
        daccum[i] = g2;
        dparam[i] = -(lr * g / ((accum[i] + g2).sqrt() + eps));
    }
}

pub fn apply_delta<T: Real>(params: &mut [T], accum: &mut [T], dparam: &[T], daccum: &[T]) {
    for (p, d) in params.iter_mut().zip(dparam) {
        *p += *d;
    }
    for (a, d) in accum.iter_mut().zip(daccum) {
        *a += *d;
    }
}

/// Applies one Adagrad step to the rows of `slice` named by `delta`.
pub fn adagrad_step<T: Real>(slice: &mut ParameterSlice<T>, delta: &GradientDelta<T>, lr: T, eps: T) -> Result<()> {
    let d = slice.dim;
    if delta.grads.len() != delta.rows.len() * d {
        return Err(Error::DimensionMismatch { expected: delta.rows.len() * d, found: delta.grads.len() });
    }
    let rows = slice.rows();
    let mut dp = vec![T::ZERO; d];
    let mut da = vec![T::ZERO; d];
    for (i, &r) in delta.rows.iter().enumerate() {
        let r = r as usize;
        if r >= rows {
            return Err(Error::RowOutOfRange { row: r, rows });
        }
        let span = r * d..(r + 1) * d;
        adagrad_delta(&slice.accum[span.clone()], &delta.grads[i * d..(i + 1) * d], lr, eps, &mut dp, &mut da);
        apply_delta(&mut slice.params[span.clone()], &mut slice.accum[span], &dp, &da);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(g: f64, _lr: f64) -> GradientDelta<f64> {
        GradientDelta { rows: vec![0], grads: vec![g] }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut s = ParameterSlice { dim: 1, params: vec![0.25f64], accum: vec![3.0] };
        adagrad_step(&mut s, &one(0.0, 0.1), 0.1, 1e-10).unwrap();
        assert_eq!(s.params, vec![0.25]);
        assert_eq!(s.accum, vec![3.0]);
    }

    #[test]
    fn first_step_by_hand() {
        let mut s = ParameterSlice::<f64>::zeros(1, 1);
        adagrad_step(&mut s, &one(2.0, 0.1), 0.1, 1e-10).unwrap();
        assert_eq!(s.accum, vec![4.0]);
        assert!((s.params[0] + 0.1).abs() < 1e-9);
    }

    #[test]
    fn two_unit_steps_by_hand() {
        let lr = 0.1;
        let mut s = ParameterSlice::<f64>::zeros(1, 1);
        adagrad_step(&mut s, &one(1.0, lr), lr, 1e-10).unwrap();
        adagrad_step(&mut s, &one(1.0, lr), lr, 1e-10).unwrap();
        let expect = -lr * (1.0 + 1.0 / 2f64.sqrt());
        assert!((s.params[0] - expect).abs() < 1e-6);
    }

    #[test]
    fn disjoint_rows_commute_bitwise() {
        let base = ParameterSlice {
            dim: 2,
            params: vec![0.1f32, -0.2, 0.3, 0.4, -0.5, 0.6],
            accum: vec![0.0f32, 0.5, 1.0, 0.0, 2.0, 0.1],
        };
        let a = GradientDelta { rows: vec![0, 2], grads: vec![0.3f32, -0.1, 0.7, 0.2] };
        let b = GradientDelta { rows: vec![1], grads: vec![-0.9f32, 0.05] };
        let mut x = base.clone();
        adagrad_step(&mut x, &a, 0.1, 1e-10).unwrap();
        adagrad_step(&mut x, &b, 0.1, 1e-10).unwrap();
        let mut y = base;
        adagrad_step(&mut y, &b, 0.1, 1e-10).unwrap();
        adagrad_step(&mut y, &a, 0.1, 1e-10).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn row_out_of_range() {
        let mut s = ParameterSlice::<f64>::zeros(1, 1);
        let d = GradientDelta { rows: vec![4], grads: vec![1.0] };
        assert!(adagrad_step(&mut s, &d, 0.1, 1e-10).is_err());
    }
}
