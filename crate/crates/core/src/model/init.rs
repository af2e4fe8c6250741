use rand::Rng;

use crate::real::Real;

/// Half-width `1/sqrt(d)` of the initialization interval.
pub fn init_bound(dim: usize) -> f64 {
    1.0 / (dim.max(1) as f64).sqrt()
}

/// Fills `out` with i.i.d. draws from `U[-1/sqrt(d), 1/sqrt(d)]`.
pub fn init_uniform<T: Real, R: Rng + ?Sized>(rng: &mut R, dim: usize, out: &mut [T]) {
    let a = init_bound(dim);
    for v in out.iter_mut() {
        *v = T::from_f64(rng.gen_range(-a..=a));
    }
}
