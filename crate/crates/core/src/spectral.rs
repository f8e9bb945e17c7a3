//! Expressiveness of a kernel matrix, measured without eigenwork.
//!
//! The spectral ratio (trace over Frobenius norm) is a rank proxy: it is
//! 1 for the constant all-ones matrix and sqrt(m) for the identity. The
//! normalized form rescales that range to [0, 1], making values
//! comparable across matrix sizes. Sums run with compensated
//! accumulation so matrices with 10^8 entries keep full precision.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gram::KernelMatrix;

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn total(self) -> f64 {
        self.sum + self.comp
    }
}

/// Sums `f` over the elements with per-row compensation; rows are reduced
/// in index order so the result does not depend on thread count.
fn row_compensated_sum(k: &KernelMatrix, f: impl Fn(f64) -> f64 + Sync) -> f64 {
    let m = k.item_count();
    let values = k.values();
    let row_sums: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut acc = Compensated::default();
            for j in 0..m {
                acc.add(f(values[(i, j)]));
            }
            acc.total()
        })
        .collect();
    let mut acc = Compensated::default();
    for s in row_sums {
        acc.add(s);
    }
    acc.total()
}

/// Trace of `K` divided by its Frobenius norm; lies in `[1, sqrt(m)]`
/// for normalized kernels.
pub fn spectral_ratio(k: &KernelMatrix) -> Result<f64> {
    let m = k.item_count();
    let mut trace = Compensated::default();
    for i in 0..m {
        trace.add(k.values()[(i, i)]);
    }
    let trace = trace.total();
    if !(trace > 0.0) {
        return Err(Error::Domain(format!(
            "spectral ratio needs positive trace, got {trace}"
        )));
    }
    let sq = row_compensated_sum(k, |v| v * v);
    Ok(trace / sq.sqrt())
}

/// Spectral ratio rescaled to `[0, 1]`: `(C(K) - 1) / (sqrt(m) - 1)`;
/// 0 for the all-ones matrix, 1 for the identity.
pub fn normalized_spectral_ratio(k: &KernelMatrix) -> Result<f64> {
    let m = k.item_count();
    if m < 2 {
        return Err(Error::Domain(format!(
            "normalized spectral ratio needs at least 2 items, got {m}"
        )));
    }
    Ok((spectral_ratio(k)? - 1.0) / ((m as f64).sqrt() - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use ndarray::{array, Array2};

    fn wrap(values: Array2<f64>) -> KernelMatrix {
        KernelMatrix::new(values, KernelSpec::linear(true)).unwrap()
    }

    #[test]
    fn identity_ratio_is_sqrt_m() {
        let k = wrap(Array2::eye(9));
        assert!((spectral_ratio(&k).unwrap() - 3.0).abs() < 1e-14);
        assert!((normalized_spectral_ratio(&k).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn all_ones_ratio_is_one() {
        for m in [2usize, 5, 17] {
            let k = wrap(Array2::ones((m, m)));
            assert!((spectral_ratio(&k).unwrap() - 1.0).abs() < 1e-14);
            assert!(normalized_spectral_ratio(&k).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn two_by_two_example() {
        let k = wrap(array![[1.0, 0.5], [0.5, 1.0]]);
        let c = spectral_ratio(&k).unwrap();
        assert!((c - 2.0 / 2.5f64.sqrt()).abs() < 1e-14);
        let nc = normalized_spectral_ratio(&k).unwrap();
        let want = (2.0 / 2.5f64.sqrt() - 1.0) / (2f64.sqrt() - 1.0);
        assert!((nc - want).abs() < 1e-14);
    }

    #[test]
    fn zero_trace_rejected() {
        let k = wrap(Array2::zeros((3, 3)));
        assert!(spectral_ratio(&k).is_err());
    }

    #[test]
    fn single_item_rejected_for_normalized() {
        let k = wrap(Array2::eye(1));
        assert!(spectral_ratio(&k).is_ok());
        assert!(normalized_spectral_ratio(&k).is_err());
    }

    #[test]
    fn entrywise_dominance_orders_ratios() {
        // two normalized kernels where every off-diagonal of the first
        // dominates the second in square: larger entries, smaller ratio
        let a = wrap(array![[1.0, 0.9, 0.8], [0.9, 1.0, 0.7], [0.8, 0.7, 1.0]]);
        let b = wrap(array![[1.0, 0.3, 0.2], [0.3, 1.0, 0.1], [0.2, 0.1, 1.0]]);
        assert!(spectral_ratio(&a).unwrap() <= spectral_ratio(&b).unwrap());
    }

    #[test]
    fn compensated_sum_survives_many_tiny_terms() {
        let m = 500;
        let mut v = Array2::from_elem((m, m), 1e-8);
        for i in 0..m {
            v[(i, i)] = 1.0;
        }
        let k = wrap(v);
        // frobenius^2 = m + (m^2 - m) * 1e-16, trace = m
        let want_sq = m as f64 + (m as f64 * m as f64 - m as f64) * 1e-16;
        let got = spectral_ratio(&k).unwrap();
        let want = m as f64 / want_sq.sqrt();
        assert!((got - want).abs() / want < 1e-13, "got {got}, want {want}");
    }
}
