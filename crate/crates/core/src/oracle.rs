//! Explicit feature embeddings for small instances.
//!
//! The closed-form kernels count combinatorial features without ever
//! materializing them. This module materializes them: one coordinate per
//! d-subset of variables, so Gram matrices of these embeddings are
//! ground truth for the closed forms. Sizes are hard-capped because the
//! embedding dimension is a binomial coefficient; everything here exists
//! for verification, not production work.

use itertools::Itertools;
use ndarray::Array2;

use crate::data::BinaryInteractionMatrix;
use crate::error::{Error, Result};
use crate::kernel::KernelFamily;

/// Largest variable count the embeddings accept.
pub const MAX_VARIABLES: usize = 20;
/// Largest arity the embeddings accept.
pub const MAX_ARITY: u32 = 6;

fn check_guard(n: usize, d: u32) -> Result<()> {
    if n > MAX_VARIABLES {
        return Err(Error::Domain(format!(
            "embedding refused: {n} variables exceeds the cap of {MAX_VARIABLES}"
        )));
    }
    if d == 0 || d > MAX_ARITY {
        return Err(Error::Domain(format!(
            "embedding refused: arity {d} outside 1..={MAX_ARITY}"
        )));
    }
    Ok(())
}

/// One coordinate per `d`-subset of variables, in lexicographic subset
/// order: 1 iff every variable of the subset is active in `x`.
pub fn conjunctive_embedding(x: &[bool], d: u32) -> Result<Vec<u8>> {
    check_guard(x.len(), d)?;
    Ok((0..x.len())
        .combinations(d as usize)
        .map(|subset| subset.iter().all(|&v| x[v]) as u8)
        .collect())
}

/// One coordinate per `d`-subset of variables, in lexicographic subset
/// order: 1 iff at least one variable of the subset is active in `x`.
pub fn disjunctive_embedding(x: &[bool], d: u32) -> Result<Vec<u8>> {
    check_guard(x.len(), d)?;
    Ok((0..x.len())
        .combinations(d as usize)
        .map(|subset| subset.iter().any(|&v| x[v]) as u8)
        .collect())
}

/// Pairwise integer dot products of equal-length embeddings.
pub fn gram_from_embedding(embeddings: &[Vec<u8>]) -> Result<Array2<u64>> {
    let m = embeddings.len();
    let dim = embeddings.first().map_or(0, Vec::len);
    if embeddings.iter().any(|e| e.len() != dim) {
        return Err(Error::Dimension("embeddings differ in length".into()));
    }
    let mut gram = Array2::zeros((m, m));
    for i in 0..m {
        for j in i..m {
            let dot: u64 = embeddings[i]
                .iter()
                .zip(&embeddings[j])
                .map(|(&a, &b)| (a & b) as u64)
                .sum();
            gram[(i, j)] = dot;
            gram[(j, i)] = dot;
        }
    }
    Ok(gram)
}

/// Ground-truth Gram matrix over the items of `x` by explicit embedding;
/// conjunctive and disjunctive families only.
pub fn oracle_gram(x: &BinaryInteractionMatrix, family: KernelFamily, d: u32) -> Result<Array2<u64>> {
    let embed = match family {
        KernelFamily::Conjunctive => conjunctive_embedding,
        KernelFamily::Disjunctive => disjunctive_embedding,
        other => {
            return Err(Error::Domain(format!(
                "no embedding oracle for the {other} kernel"
            )))
        }
    };
    let embeddings: Vec<Vec<u8>> = (0..x.item_count())
        .map(|i| embed(&x.dense_row(i), d))
        .collect::<Result<_>>()?;
    gram_from_embedding(&embeddings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binomial::binom;

    fn bools(bits: &[u8]) -> Vec<bool> {
        bits.iter().map(|&b| b != 0).collect()
    }

    #[test]
    fn conjunctive_examples() {
        assert_eq!(
            conjunctive_embedding(&bools(&[1, 1, 0]), 2).unwrap(),
            vec![1, 0, 0]
        );
        assert_eq!(
            conjunctive_embedding(&bools(&[1, 1, 1, 1]), 3).unwrap(),
            vec![1, 1, 1, 1]
        );
        // subsets of {0..3} in lexicographic order:
        // {01},{02},{03},{12},{13},{23}; active set {0,2,3}
        assert_eq!(
            conjunctive_embedding(&bools(&[1, 0, 1, 1]), 2).unwrap(),
            vec![0, 1, 1, 0, 0, 1]
        );
    }

    #[test]
    fn disjunctive_examples() {
        assert_eq!(
            disjunctive_embedding(&bools(&[1, 0, 0]), 2).unwrap(),
            vec![1, 1, 0]
        );
        assert_eq!(
            disjunctive_embedding(&bools(&[0, 0, 0, 0]), 2).unwrap(),
            vec![0; 6]
        );
        assert_eq!(
            disjunctive_embedding(&bools(&[1, 1, 0, 0]), 2).unwrap(),
            vec![1, 1, 1, 1, 1, 0]
        );
    }

    #[test]
    fn embedding_dimension_is_binomial() {
        for n in [3usize, 7, 12] {
            for d in 1..=4u32 {
                let x = vec![true; n];
                let e = conjunctive_embedding(&x, d).unwrap();
                assert_eq!(e.len() as f64, binom(n as u64, d));
                let e = disjunctive_embedding(&vec![false; n], d).unwrap();
                assert_eq!(e.len() as f64, binom(n as u64, d));
            }
        }
    }

    #[test]
    fn conjunctive_dimension_peaks_at_half() {
        let n = 11u64;
        let mid = (n / 2) as u32;
        let at = |d: u32| binom(n, d);
        for d in 1..=MAX_ARITY.min(n as u32) {
            assert!(at(d) <= at(mid) || d == mid);
        }
        // directly: C(11, 5) = C(11, 6) is the joint maximum over all d
        let all_max = (0..=n as u32).map(at).fold(f64::MIN, f64::max);
        assert_eq!(at(mid), all_max);
    }

    #[test]
    fn disjunctive_active_count_identity() {
        for (n, actives) in [(6usize, 2usize), (9, 4), (12, 0), (10, 10)] {
            let mut x = vec![false; n];
            for v in 0..actives {
                x[v] = true;
            }
            for d in 1..=3u32 {
                let e = disjunctive_embedding(&x, d).unwrap();
                let ones: u64 = e.iter().map(|&b| b as u64).sum();
                let want = binom(n as u64, d) - binom((n - actives) as u64, d);
                assert_eq!(ones as f64, want, "n={n} actives={actives} d={d}");
            }
        }
    }

    #[test]
    fn guards_refuse_large_instances() {
        let x = vec![true; 21];
        assert!(conjunctive_embedding(&x, 2).is_err());
        let x = vec![true; 8];
        assert!(conjunctive_embedding(&x, 7).is_err());
        assert!(disjunctive_embedding(&x, 0).is_err());
    }

    #[test]
    fn gram_of_orthogonal_embeddings_is_diagonal() {
        let e = vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]];
        let g = gram_from_embedding(&e).unwrap();
        assert_eq!(g, Array2::from_diag(&ndarray::arr1(&[1, 1, 1])));
    }

    #[test]
    fn gram_of_identical_embeddings_is_constant() {
        let e = vec![vec![1, 1, 0, 1]; 3];
        let g = gram_from_embedding(&e).unwrap();
        assert!(g.iter().all(|&v| v == 3));
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let e = vec![vec![1, 0], vec![1, 0, 1]];
        assert!(gram_from_embedding(&e).is_err());
    }

    #[test]
    fn no_oracle_for_non_combinatorial_families() {
        let x = BinaryInteractionMatrix::from_rows(3, vec![vec![0], vec![1]]).unwrap();
        assert!(oracle_gram(&x, KernelFamily::Linear, 1).is_err());
        assert!(oracle_gram(&x, KernelFamily::Conjunctive, 1).is_ok());
    }
}
