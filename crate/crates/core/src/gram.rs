//! Gram matrix construction over the items of a binary interaction
//! matrix.
//!
//! Every kernel family needs the same pairwise ingredients, so
//! [`PairwiseCounts`] computes per-item active counts and all pairwise
//! intersection sizes once; Gram matrices for any number of kernel specs
//! and arities are then filled from those counts without touching the
//! sparse rows again. Upper triangles are computed in parallel over rows
//! and mirrored, which keeps results bitwise identical for any worker
//! count.

use ndarray::Array2;
use rayon::prelude::*;

use crate::binomial::{binom_dd, Dd, RatioTable};
use crate::data::BinaryInteractionMatrix;
use crate::error::{Error, Result};
use crate::kernel::{
    linear_kernel_normalized, mdnf_kernel, mdnf_kernel_normalized, tanimoto_kernel,
    BinaryVectorStats, KernelFamily, KernelSpec,
};

/// Dense symmetric matrix of kernel values between items, tagged with the
/// spec that produced it.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    values: Array2<f64>,
    spec: KernelSpec,
    null_items: Vec<usize>,
}

impl KernelMatrix {
    /// Wraps an externally built matrix, validating shape and exact
    /// symmetry.
    pub fn new(values: Array2<f64>, spec: KernelSpec) -> Result<KernelMatrix> {
        let (r, c) = values.dim();
        if r != c {
            return Err(Error::Dimension(format!("kernel matrix must be square, got {r}x{c}")));
        }
        for i in 0..r {
            for j in (i + 1)..r {
                if values[(i, j)] != values[(j, i)] {
                    return Err(Error::Dimension(format!(
                        "kernel matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(KernelMatrix {
            values,
            spec,
            null_items: Vec::new(),
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    pub fn item_count(&self) -> usize {
        self.values.nrows()
    }

    /// Items whose self-similarity under the producing kernel was 0
    /// (empty rows, or fewer actives than a conjunctive arity). Under a
    /// normalized spec their diagonal entries were forced to 1.
    pub fn null_items(&self) -> &[usize] {
        &self.null_items
    }
}

/// Per-item active counts and all pairwise intersection counts of an
/// interaction matrix; the shared input of every Gram construction.
pub struct PairwiseCounts {
    user_count: u64,
    item_count: usize,
    active: Vec<u32>,
    /// Row-major `item_count`-squared intersection counts.
    inter: Vec<u32>,
}

fn intersection_size(a: &[u32], b: &[u32]) -> u32 {
    let mut count = 0u32;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

impl PairwiseCounts {
    /// Counts actives and pairwise intersections by merging the sorted
    /// item rows, upper triangle in parallel.
    pub fn build(x: &BinaryInteractionMatrix) -> PairwiseCounts {
        let m = x.item_count();
        let rows = x.rows();
        let active: Vec<u32> = rows.iter().map(|r| r.len() as u32).collect();
        let mut inter = vec![0u32; m * m];
        inter
            .par_chunks_mut(m.max(1))
            .enumerate()
            .for_each(|(i, out)| {
                out[i] = active[i];
                for j in (i + 1)..m {
                    out[j] = intersection_size(&rows[i], &rows[j]);
                }
            });
        for i in 1..m {
            for j in 0..i {
                inter[i * m + j] = inter[j * m + i];
            }
        }
        PairwiseCounts {
            user_count: x.user_count() as u64,
            item_count: m,
            active,
            inter,
        }
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn user_count(&self) -> u64 {
        self.user_count
    }

    /// Active count of one item.
    pub fn active(&self, item: usize) -> u32 {
        self.active[item]
    }

    /// Intersection count of an item pair.
    pub fn intersection(&self, i: usize, j: usize) -> u32 {
        self.inter[i * self.item_count + j]
    }

    /// The four counts describing the pair `(i, j)`.
    pub fn stats(&self, i: usize, j: usize) -> BinaryVectorStats {
        BinaryVectorStats {
            n: self.user_count,
            nx: self.active[i] as u64,
            nz: self.active[j] as u64,
            nxz: self.intersection(i, j) as u64,
        }
    }
}

fn check_spec(counts: &PairwiseCounts, spec: KernelSpec) -> Result<()> {
    if spec.arity == 0 {
        return Err(Error::Domain("kernel arity must be >= 1".into()));
    }
    if spec.family.uses_arity() && spec.arity as u64 > counts.user_count {
        return Err(Error::Domain(format!(
            "arity {} exceeds user count {}",
            spec.arity, counts.user_count
        )));
    }
    Ok(())
}

/// Whether the item's embedding under `spec` is the null vector, making
/// its raw self-similarity 0.
fn is_null_item(spec: KernelSpec, active: u32) -> bool {
    match spec.family {
        KernelFamily::Conjunctive => (active as u64) < spec.arity as u64,
        _ => active == 0,
    }
}

/// Fills one row of the upper triangle, `j >= i`, for the given spec.
///
/// Kernels with an arity get table-driven fast paths: the disjunctive
/// hit fractions come from a precomputed ratio table and stay in
/// double-double until fully combined; conjunctive ratios are plain
/// factor products, which involve no cancellation.
struct GramFill<'a> {
    counts: &'a PairwiseCounts,
    spec: KernelSpec,
    /// Disjunctive only: `r(a) = C(a,d)/C(n,d)` for all `a`.
    ratio_table: Option<RatioTable>,
    /// Disjunctive only: `C(n,d)` for the unnormalized value.
    total_dd: Dd,
    /// Conjunctive unnormalized only: `C(v,d)` by intersection count `v`.
    c_table: Vec<f64>,
}

impl<'a> GramFill<'a> {
    fn new(counts: &'a PairwiseCounts, spec: KernelSpec) -> GramFill<'a> {
        let n = counts.user_count;
        let d = spec.arity;
        let ratio_table = (spec.family == KernelFamily::Disjunctive).then(|| RatioTable::new(n, d));
        let total_dd = if spec.family == KernelFamily::Disjunctive && !spec.normalized {
            binom_dd(n, d)
        } else {
            Dd::ZERO
        };
        let c_table = if spec.family == KernelFamily::Conjunctive && !spec.normalized {
            let max_active = counts.active.iter().copied().max().unwrap_or(0) as u64;
            (0..=max_active).map(|v| crate::binomial::binom(v, d)).collect()
        } else {
            Vec::new()
        };
        GramFill {
            counts,
            spec,
            ratio_table,
            total_dd,
            c_table,
        }
    }

    fn conj_ratio(nxz: u64, nb: u64, d: u32) -> f64 {
        let mut r = 1.0f64;
        for i in 0..d as u64 {
            r *= (nxz - i) as f64;
            r /= (nb - i) as f64;
        }
        r
    }

    fn fill_row(&self, i: usize, out: &mut [f64]) {
        let m = self.counts.item_count;
        let n = self.counts.user_count;
        let d = self.spec.arity;
        let nxi = self.counts.active[i] as u64;
        match (self.spec.family, self.spec.normalized) {
            (KernelFamily::Disjunctive, normalized) => {
                let table = self.ratio_table.as_ref().expect("table built for disjunctive");
                let miss_i = table.get(n - nxi);
                let gi = Dd::ONE.sub(miss_i).to_f64();
                for j in i..m {
                    let nxj = self.counts.active[j] as u64;
                    let nxz = self.counts.intersection(i, j) as u64;
                    let miss_j = table.get(n - nxj);
                    let union = nxi + nxj - nxz;
                    let g = Dd::ONE
                        .sub(miss_i)
                        .sub(miss_j)
                        .add(table.get(n - union));
                    out[j] = if normalized {
                        if nxi == 0 || nxj == 0 {
                            0.0
                        } else {
                            let gj = Dd::ONE.sub(miss_j).to_f64();
                            (g.to_f64() / (gi * gj).sqrt()).clamp(0.0, 1.0)
                        }
                    } else {
                        self.total_dd.mul(g).to_f64().round()
                    };
                }
            }
            (KernelFamily::Conjunctive, true) => {
                let d64 = d as u64;
                for j in i..m {
                    let nxj = self.counts.active[j] as u64;
                    let nxz = self.counts.intersection(i, j) as u64;
                    out[j] = if nxz < d64 || nxi < d64 || nxj < d64 {
                        0.0
                    } else {
                        (Self::conj_ratio(nxz, nxi, d) * Self::conj_ratio(nxz, nxj, d))
                            .sqrt()
                            .min(1.0)
                    };
                }
            }
            (KernelFamily::Conjunctive, false) => {
                for j in i..m {
                    let nxz = self.counts.intersection(i, j) as usize;
                    out[j] = self.c_table[nxz];
                }
            }
            (KernelFamily::Linear, false) => {
                for j in i..m {
                    out[j] = self.counts.intersection(i, j) as f64;
                }
            }
            (KernelFamily::Linear, true) => {
                for j in i..m {
                    out[j] = linear_kernel_normalized(self.counts.stats(i, j));
                }
            }
            (KernelFamily::Mdnf, false) => {
                for j in i..m {
                    out[j] = mdnf_kernel(self.counts.stats(i, j)).to_f64();
                }
            }
            (KernelFamily::Mdnf, true) => {
                for j in i..m {
                    out[j] = mdnf_kernel_normalized(self.counts.stats(i, j));
                }
            }
            (KernelFamily::Tanimoto, _) => {
                for j in i..m {
                    out[j] = tanimoto_kernel(self.counts.stats(i, j));
                }
            }
        }
    }
}

/// Builds the Gram matrix for `spec` from precomputed counts.
pub fn gram_from_counts(counts: &PairwiseCounts, spec: KernelSpec) -> Result<KernelMatrix> {
    check_spec(counts, spec)?;
    let m = counts.item_count;
    let fill = GramFill::new(counts, spec);
    let mut values = vec![0.0f64; m * m];
    values
        .par_chunks_mut(m.max(1))
        .enumerate()
        .for_each(|(i, row)| fill.fill_row(i, row));
    for i in 1..m {
        for j in 0..i {
            values[i * m + j] = values[j * m + i];
        }
    }
    let mut matrix =
        Array2::from_shape_vec((m, m), values).expect("length m*m matches shape (m, m)");
    let null_items: Vec<usize> = (0..m)
        .filter(|&i| is_null_item(spec, counts.active[i]))
        .collect();
    if spec.normalized {
        for i in 0..m {
            matrix[(i, i)] = 1.0;
        }
    }
    Ok(KernelMatrix {
        values: matrix,
        spec,
        null_items,
    })
}

/// Builds the Gram matrix of `spec` over the items of `x`.
pub fn gram(x: &BinaryInteractionMatrix, spec: KernelSpec) -> Result<KernelMatrix> {
    let counts = PairwiseCounts::build(x);
    gram_from_counts(&counts, spec)
}

/// Divides each entry by the geometric mean of its two diagonal entries.
///
/// Rows with a zero diagonal (null embeddings) become unit rows of the
/// identity: diagonal forced to 1, off-diagonals 0.
pub fn normalize_kernel(k: &KernelMatrix) -> KernelMatrix {
    let m = k.item_count();
    let mut spec = k.spec;
    spec.normalized = true;
    let mut null_items = Vec::new();
    let mut scale = vec![0.0f64; m];
    for i in 0..m {
        let d = k.values[(i, i)];
        if d == 0.0 {
            null_items.push(i);
        } else {
            scale[i] = 1.0 / d.sqrt();
        }
    }
    let mut values = Array2::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            values[(i, j)] = if i == j {
                1.0
            } else {
                k.values[(i, j)] * scale[i] * scale[j]
            };
        }
    }
    KernelMatrix {
        values,
        spec,
        null_items,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{c_kernel, d_kernel, KernelSpec};
    use ndarray::array;

    fn matrix(rows: Vec<Vec<u32>>, users: usize) -> BinaryInteractionMatrix {
        BinaryInteractionMatrix::from_rows(users, rows).unwrap()
    }

    #[test]
    fn counts_match_row_intersections() {
        let x = matrix(vec![vec![0, 1, 3], vec![1, 2], vec![0, 1, 2, 3], vec![]], 4);
        let c = PairwiseCounts::build(&x);
        assert_eq!(c.active(0), 3);
        assert_eq!(c.intersection(0, 1), 1);
        assert_eq!(c.intersection(1, 0), 1);
        assert_eq!(c.intersection(0, 2), 3);
        assert_eq!(c.intersection(3, 2), 0);
        assert_eq!(c.intersection(2, 2), 4);
        let s = c.stats(0, 1);
        assert_eq!((s.n, s.nx, s.nz, s.nxz), (4, 3, 2, 1));
    }

    #[test]
    fn identical_items_normalize_to_ones() {
        let x = matrix(vec![vec![0, 2], vec![0, 2]], 3);
        for spec in [
            KernelSpec::linear(true),
            KernelSpec::conjunctive(2, true).unwrap(),
            KernelSpec::disjunctive(2, true).unwrap(),
            KernelSpec::mdnf(true),
            KernelSpec::tanimoto(true),
        ] {
            let k = gram(&x, spec).unwrap();
            for v in k.values() {
                assert!((v - 1.0).abs() < 1e-12, "{spec:?} gave {v}");
            }
        }
    }

    #[test]
    fn disjoint_items_give_diagonal_linear_gram() {
        let x = matrix(vec![vec![0], vec![1], vec![2]], 3);
        let k = gram(&x, KernelSpec::linear(false)).unwrap();
        assert_eq!(k.values(), &array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn gram_entries_match_scalar_kernels() {
        let x = matrix(
            vec![vec![0, 1, 2, 4], vec![1, 2, 3], vec![0, 4], vec![2], vec![]],
            5,
        );
        let c = PairwiseCounts::build(&x);
        for d in 1..=3u32 {
            let kc = gram_from_counts(&c, KernelSpec::conjunctive(d, false).unwrap()).unwrap();
            let kd = gram_from_counts(&c, KernelSpec::disjunctive(d, false).unwrap()).unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    let s = c.stats(i, j);
                    assert_eq!(kc.values()[(i, j)], c_kernel(s, d), "C d={d} ({i},{j})");
                    assert_eq!(kd.values()[(i, j)], d_kernel(s, d).unwrap(), "D d={d} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn normalized_gram_matches_normalize_of_raw_gram() {
        let x = matrix(
            vec![vec![0, 1, 2, 4], vec![1, 2, 3], vec![0, 4], vec![2], vec![]],
            5,
        );
        for spec in [
            KernelSpec::linear(false),
            KernelSpec::conjunctive(2, false).unwrap(),
            KernelSpec::disjunctive(2, false).unwrap(),
            KernelSpec::mdnf(false),
            KernelSpec::tanimoto(false),
        ] {
            let raw = gram(&x, spec).unwrap();
            let via_fix = normalize_kernel(&raw);
            let mut norm_spec = spec;
            norm_spec.normalized = true;
            let direct = gram(&x, norm_spec).unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    let a = via_fix.values()[(i, j)];
                    let b = direct.values()[(i, j)];
                    assert!(
                        (a - b).abs() < 1e-12,
                        "{spec:?} ({i},{j}): normalize_kernel={a}, direct={b}"
                    );
                }
            }
            assert_eq!(via_fix.null_items(), direct.null_items());
        }
    }

    #[test]
    fn normalize_kernel_examples() {
        let spec = KernelSpec::linear(false);
        let k = KernelMatrix::new(array![[4.0, 2.0], [2.0, 1.0]], spec).unwrap();
        let n = normalize_kernel(&k);
        assert_eq!(n.values(), &array![[1.0, 1.0], [1.0, 1.0]]);

        let k = KernelMatrix::new(array![[0.0, 0.0], [0.0, 3.0]], spec).unwrap();
        let n = normalize_kernel(&k);
        assert_eq!(n.values(), &array![[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(n.null_items(), &[0]);

        let k = KernelMatrix::new(array![[2.0, 0.0], [0.0, 8.0]], spec).unwrap();
        let n = normalize_kernel(&k);
        assert_eq!(n.values(), &array![[1.0, 0.0], [0.0, 1.0]]);
        assert!(n.null_items().is_empty());
    }

    #[test]
    fn null_items_reported_per_family() {
        let x = matrix(vec![vec![0], vec![], vec![0, 1, 2]], 3);
        let k = gram(&x, KernelSpec::conjunctive(2, true).unwrap()).unwrap();
        assert_eq!(k.null_items(), &[0, 1]);
        assert_eq!(k.values()[(0, 0)], 1.0);
        assert_eq!(k.values()[(0, 2)], 0.0);
        let k = gram(&x, KernelSpec::disjunctive(2, true).unwrap()).unwrap();
        assert_eq!(k.null_items(), &[1]);
        let k = gram(&x, KernelSpec::tanimoto(true)).unwrap();
        assert_eq!(k.null_items(), &[1]);
        assert_eq!(k.values()[(1, 1)], 1.0);
    }

    #[test]
    fn arity_above_user_count_rejected() {
        let x = matrix(vec![vec![0], vec![1]], 2);
        assert!(gram(&x, KernelSpec::conjunctive(3, false).unwrap()).is_err());
        assert!(gram(&x, KernelSpec::disjunctive(3, false).unwrap()).is_err());
    }

    #[test]
    fn kernel_matrix_rejects_asymmetry() {
        let spec = KernelSpec::linear(false);
        assert!(KernelMatrix::new(array![[1.0, 2.0], [3.0, 1.0]], spec).is_err());
        assert!(KernelMatrix::new(Array2::zeros((2, 3)), spec).is_err());
    }

    #[test]
    fn symmetry_is_exact() {
        let x = matrix(
            vec![vec![0, 2, 3], vec![1, 2], vec![0, 1, 2, 3, 4], vec![4]],
            5,
        );
        for spec in [
            KernelSpec::disjunctive(3, true).unwrap(),
            KernelSpec::conjunctive(2, true).unwrap(),
            KernelSpec::mdnf(true),
        ] {
            let k = gram(&x, spec).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    assert_eq!(k.values()[(i, j)], k.values()[(j, i)]);
                }
            }
        }
    }
}
