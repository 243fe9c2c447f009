//! Deterministic reductions.
//!
//! Grid sums are split into fixed slabs, each slab is summed with Neumaier
//! compensation, and the slab partials are combined by a fixed pairwise tree.
//! The result depends only on the data, never on the thread count.

use rayon::prelude::*;

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut k = Kahan::new();
    for x in it {
        k.add(x);
    }
    k.value()
}

/// Fixed-shape pairwise tree over `parts`.
pub fn pairwise(parts: &[f64]) -> f64 {
    match parts.len() {
        0 => 0.0,
        1 => parts[0],
        n => {
            let mid = n / 2;
            pairwise(&parts[..mid]) + pairwise(&parts[mid..])
        }
    }
}

/// Sum of `f(slab)` over `0..nslabs`, evaluated in parallel, combined deterministically.
pub fn slab_sum<F>(nslabs: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let parts: Vec<f64> = (0..nslabs).into_par_iter().map(f).collect();
    pairwise(&parts)
}

/// Maximum of `f(slab)`; NaN propagates.
pub fn slab_max<F>(nslabs: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let parts: Vec<f64> = (0..nslabs).into_par_iter().map(f).collect();
    parts.into_iter().fold(0.0, |m, x| if x.is_nan() || m.is_nan() { f64::NAN } else { m.max(x) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_small_terms() {
        let mut v = vec![1.0e16];
        v.extend(std::iter::repeat(1.0).take(1000));
        v.push(-1.0e16);
        assert_eq!(kahan_sum(v.iter().copied()), 1000.0);
    }

    #[test]
    fn pairwise_matches_exact_integers() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(pairwise(&v), 5050.0);
    }

    #[test]
    fn slab_sum_independent_of_pool_size() {
        let f = |i: usize| ((i as f64) * 0.37).sin() * 1e-3 + 1.0 / (i as f64 + 1.0);
        let a = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| slab_sum(997, f));
        let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| slab_sum(997, f));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn slab_max_flags_nan() {
        assert!(slab_max(4, |i| if i == 2 { f64::NAN } else { 1.0 }).is_nan());
        assert_eq!(slab_max(4, |i| i as f64), 3.0);
    }
}
