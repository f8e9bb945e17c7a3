//! Per-user ranking by a small simplex-constrained quadratic program.
//!
//! For each user with positive item set `I_u`, the model is a probability
//! distribution `alpha` over `I_u` minimizing
//! `alpha' K_pp alpha + lambda_p |alpha|^2 - 2 alpha' q_p`,
//! where `K_pp` is the kernel submatrix over `I_u` and `q` holds the row
//! means of the full kernel matrix. Intuitively, `alpha` concentrates on
//! positives that are similar to each other and dissimilar from the
//! average item, which pushes a randomly drawn positive above a randomly
//! drawn negative. Items are then scored by their `alpha`-weighted
//! kernel similarity to the positives, minus `q` as a popularity
//! baseline.
//!
//! The problem is a tiny convex QP; projected gradient descent with a
//! fixed Lipschitz step and exact simplex projection solves it
//! deterministically, with per-user solves independent and
//! parallelizable.

use ndarray::ArrayView2;
use rayon::prelude::*;

use crate::data::BinaryInteractionMatrix;
use crate::error::{Error, Result};
use crate::gram::{gram, KernelMatrix};
use crate::kernel::KernelSpec;
use crate::spectral::Compensated;

/// Solver parameters for the per-user problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankerConfig {
    /// Ridge weight on `alpha`; spreads mass across the positives.
    pub lambda_p: f64,
    /// Projected-gradient iteration cap.
    pub max_iters: usize,
    /// Stop once the objective decrease falls below this.
    pub tol: f64,
}

impl Default for RankerConfig {
    fn default() -> RankerConfig {
        RankerConfig {
            lambda_p: 0.1,
            max_iters: 1000,
            tol: 1e-8,
        }
    }
}

impl RankerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_p >= 0.0) {
            return Err(Error::Domain(format!(
                "lambda_p must be >= 0, got {}",
                self.lambda_p
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Domain("max_iters must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Domain(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// A fitted per-user model: a probability distribution over the user's
/// positive items.
#[derive(Debug, Clone)]
pub struct UserModel {
    pub user_id: u32,
    /// Item indices of the user's training positives.
    pub positive_items: Vec<u32>,
    /// Simplex weights aligned with `positive_items`.
    pub alpha: Vec<f64>,
}

/// Row means of the kernel matrix: the average similarity of each item
/// to the whole catalogue.
pub fn compute_q(k: &KernelMatrix) -> Vec<f64> {
    let m = k.item_count();
    let values = k.values();
    (0..m)
        .into_par_iter()
        .map(|i| {
            let mut acc = Compensated::default();
            for j in 0..m {
                acc.add(values[(i, j)]);
            }
            acc.total() / m as f64
        })
        .collect()
}

/// Euclidean projection of `v` onto the probability simplex.
///
/// Sort-based: with the entries in descending order, find the largest
/// prefix whose water-level shift keeps every prefix entry positive,
/// then clamp everything below that level to zero.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("simplex projection input must not contain NaN"));
    let mut prefix = 0.0;
    let mut theta = sorted[0] - 1.0;
    for (k, &u) in sorted.iter().enumerate() {
        prefix += u;
        let t = (prefix - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn objective(k_pp: ArrayView2<f64>, q_p: &[f64], lambda_p: f64, alpha: &[f64]) -> f64 {
    let p = alpha.len();
    let mut quad = 0.0;
    for i in 0..p {
        let mut row = 0.0;
        for j in 0..p {
            row += k_pp[(i, j)] * alpha[j];
        }
        quad += alpha[i] * row;
    }
    let sq: f64 = alpha.iter().map(|a| a * a).sum();
    let lin: f64 = alpha.iter().zip(q_p).map(|(a, q)| a * q).sum();
    quad + lambda_p * sq - 2.0 * lin
}

fn solve_user_traced(
    k_pp: ArrayView2<f64>,
    q_p: &[f64],
    cfg: &RankerConfig,
    mut on_objective: impl FnMut(f64),
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let p = q_p.len();
    if p == 0 {
        return Err(Error::Empty("user has no positive items".into()));
    }
    if k_pp.dim() != (p, p) {
        return Err(Error::Dimension(format!(
            "kernel submatrix {:?} does not match {p} positives",
            k_pp.dim()
        )));
    }
    if p == 1 {
        return Ok(vec![1.0]);
    }

    // upper bound on the largest eigenvalue: both the trace and, since
    // the matrix is symmetric, the largest absolute row sum dominate it
    let mut trace = 0.0;
    let mut max_row = 0.0f64;
    for i in 0..p {
        trace += k_pp[(i, i)].abs();
        let row: f64 = (0..p).map(|j| k_pp[(i, j)].abs()).sum();
        max_row = max_row.max(row);
    }
    let lipschitz = 2.0 * (trace.min(max_row) + cfg.lambda_p);
    if lipschitz <= 0.0 {
        // no curvature at all: the objective is linear and minimized at
        // the vertex of the largest q entry (first one on ties)
        let best = q_p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("q must not contain NaN"))
            .map(|(i, _)| i)
            .expect("p >= 1");
        let mut alpha = vec![0.0; p];
        alpha[best] = 1.0;
        return Ok(alpha);
    }
    let step = 1.0 / lipschitz;

    let mut alpha = vec![1.0 / p as f64; p];
    let mut obj = objective(k_pp, q_p, cfg.lambda_p, &alpha);
    on_objective(obj);
    let mut grad = vec![0.0; p];
    for _ in 0..cfg.max_iters {
        for i in 0..p {
            let mut row = 0.0;
            for j in 0..p {
                row += k_pp[(i, j)] * alpha[j];
            }
            grad[i] = 2.0 * (row + cfg.lambda_p * alpha[i] - q_p[i]);
        }
        let moved: Vec<f64> = alpha
            .iter()
            .zip(&grad)
            .map(|(a, g)| a - step * g)
            .collect();
        alpha = project_simplex(&moved);
        let next = objective(k_pp, q_p, cfg.lambda_p, &alpha);
        on_objective(next);
        if obj - next < cfg.tol {
            break;
        }
        obj = next;
    }
    Ok(alpha)
}

/// Minimizes the per-user objective over the simplex.
///
/// Projected gradient with step `1/L`, `L = 2 (min(trace, max row sum)
/// + lambda_p)`, starting from the uniform distribution, stopping when
/// an iteration improves the objective by less than `tol` or after
/// `max_iters` rounds. Single-positive users get the trivial
/// distribution.
pub fn solve_user(k_pp: ArrayView2<f64>, q_p: &[f64], cfg: &RankerConfig) -> Result<Vec<f64>> {
    solve_user_traced(k_pp, q_p, cfg, |_| {})
}

/// Fits the model of one user from the full kernel matrix.
pub fn fit_user(
    k: &KernelMatrix,
    q: &[f64],
    user_id: u32,
    positive_items: &[u32],
    cfg: &RankerConfig,
) -> Result<UserModel> {
    let p = positive_items.len();
    let values = k.values();
    let mut k_pp = ndarray::Array2::zeros((p, p));
    for (a, &i) in positive_items.iter().enumerate() {
        for (b, &j) in positive_items.iter().enumerate() {
            k_pp[(a, b)] = values[(i as usize, j as usize)];
        }
    }
    let q_p: Vec<f64> = positive_items.iter().map(|&i| q[i as usize]).collect();
    let alpha = solve_user(k_pp.view(), &q_p, cfg)?;
    Ok(UserModel {
        user_id,
        positive_items: positive_items.to_vec(),
        alpha,
    })
}

/// Scores every item for a fitted user: the `alpha`-weighted sum of the
/// kernel rows of the user's positives, minus the popularity baseline.
pub fn score_user(k: &KernelMatrix, model: &UserModel, q: &[f64]) -> Vec<f64> {
    let m = k.item_count();
    let values = k.values();
    let mut scores = vec![0.0f64; m];
    for (&item, &a) in model.positive_items.iter().zip(&model.alpha) {
        let row = values.row(item as usize);
        for (s, &v) in scores.iter_mut().zip(row.iter()) {
            *s += a * v;
        }
    }
    for (s, &qi) in scores.iter_mut().zip(q) {
        *s -= qi;
    }
    scores
}

/// Fits and scores each listed user against a prebuilt kernel matrix;
/// users with an empty positive list come back as `None`. Solves run in
/// parallel and the output order follows the input.
pub fn recommend_from_gram(
    k: &KernelMatrix,
    q: &[f64],
    users: &[(u32, Vec<u32>)],
    cfg: &RankerConfig,
) -> Result<Vec<Option<Vec<f64>>>> {
    cfg.validate()?;
    users
        .par_iter()
        .map(|(user_id, positives)| {
            if positives.is_empty() {
                return Ok(None);
            }
            let model = fit_user(k, q, *user_id, positives, cfg)?;
            Ok(Some(score_user(k, &model, q)))
        })
        .collect()
}

/// End-to-end scoring of every user of a training matrix under one
/// kernel spec: builds the Gram matrix once, the row means once, then
/// fits and scores users independently.
pub fn recommend_all(
    train: &BinaryInteractionMatrix,
    spec: KernelSpec,
    cfg: &RankerConfig,
) -> Result<Vec<Option<Vec<f64>>>> {
    let k = gram(train, spec)?;
    let q = compute_q(&k);
    let users: Vec<(u32, Vec<u32>)> = train
        .user_items()
        .into_iter()
        .enumerate()
        .map(|(u, items)| (u as u32, items))
        .collect();
    recommend_from_gram(&k, &q, &users, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn q_is_row_means() {
        let spec = KernelSpec::linear(false);
        let k = KernelMatrix::new(Array2::ones((3, 3)), spec).unwrap();
        assert_eq!(compute_q(&k), vec![1.0, 1.0, 1.0]);
        let k = KernelMatrix::new(Array2::eye(4), spec).unwrap();
        assert_eq!(compute_q(&k), vec![0.25; 4]);
        let k = KernelMatrix::new(array![[1.0, 0.5], [0.5, 1.0]], spec).unwrap();
        assert_eq!(compute_q(&k), vec![0.75, 0.75]);
    }

    #[test]
    fn simplex_projection_examples() {
        assert_eq!(project_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        assert_eq!(project_simplex(&[5.0, 1.0]), vec![1.0, 0.0]);
        let w = project_simplex(&[0.5, 0.5, 0.5]);
        for x in &w {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn simplex_projection_is_feasible_and_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let p = rng.gen_range(1..=6);
            let v: Vec<f64> = (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let w = project_simplex(&v);
            let sum: f64 = w.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|&x| x >= 0.0));
            // no random feasible point is closer to v
            let dist: f64 = v.iter().zip(&w).map(|(a, b)| (a - b).powi(2)).sum();
            for _ in 0..50 {
                let mut c: Vec<f64> = (0..p).map(|_| rng.gen_range(0.0..1.0f64)).collect();
                let cs: f64 = c.iter().sum();
                c.iter_mut().for_each(|x| *x /= cs);
                let cd: f64 = v.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum();
                assert!(dist <= cd + 1e-9);
            }
        }
    }

    #[test]
    fn single_positive_gets_unit_weight() {
        let k = Array2::from_elem((1, 1), 0.7);
        let alpha = solve_user(k.view(), &[0.3], &RankerConfig::default()).unwrap();
        assert_eq!(alpha, vec![1.0]);
    }

    #[test]
    fn identity_kernel_vertex_solution() {
        // objective |alpha|^2 - 2 alpha . q with q = (1, 0): vertex (1, 0)
        let k: Array2<f64> = Array2::eye(2);
        let cfg = RankerConfig {
            lambda_p: 0.0,
            max_iters: 2000,
            tol: 1e-14,
        };
        let alpha = solve_user(k.view(), &[1.0, 0.0], &cfg).unwrap();
        assert!((alpha[0] - 1.0).abs() < 1e-6, "alpha={alpha:?}");
        assert!(alpha[1].abs() < 1e-6);
    }

    #[test]
    fn symmetric_q_gives_uniform_solution() {
        let k: Array2<f64> = Array2::eye(2);
        let cfg = RankerConfig {
            lambda_p: 0.0,
            ..RankerConfig::default()
        };
        let alpha = solve_user(k.view(), &[0.4, 0.4], &cfg).unwrap();
        assert!((alpha[0] - 0.5).abs() < 1e-9);
        assert!((alpha[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let p = rng.gen_range(2..=6);
            // random PSD: A A' plus a touch of ridge
            let a = Array2::from_shape_fn((p, p), |_| rng.gen_range(-1.0..1.0));
            let k = a.dot(&a.t());
            let q: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let cfg = RankerConfig {
                lambda_p: rng.gen_range(0.0..0.5),
                max_iters: 300,
                tol: 1e-12,
            };
            let mut seq = Vec::new();
            solve_user_traced(k.view(), &q, &cfg, |o| seq.push(o)).unwrap();
            for w in seq.windows(2) {
                assert!(w[1] <= w[0] + 1e-10, "objective rose: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn solution_beats_simplex_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let p = rng.gen_range(2..=3usize);
            let a = Array2::from_shape_fn((p, p), |_| rng.gen_range(-1.0..1.0));
            let k = a.dot(&a.t());
            let q: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let cfg = RankerConfig {
                lambda_p: 0.1,
                max_iters: 5000,
                tol: 1e-13,
            };
            let alpha = solve_user(k.view(), &q, &cfg).unwrap();
            let got = objective(k.view(), &q, cfg.lambda_p, &alpha);

            let steps = 200usize;
            let mut best = f64::INFINITY;
            if p == 2 {
                for i in 0..=steps {
                    let a0 = i as f64 / steps as f64;
                    let cand = [a0, 1.0 - a0];
                    best = best.min(objective(k.view(), &q, cfg.lambda_p, &cand));
                }
            } else {
                for i in 0..=steps {
                    for j in 0..=(steps - i) {
                        let a0 = i as f64 / steps as f64;
                        let a1 = j as f64 / steps as f64;
                        let cand = [a0, a1, 1.0 - a0 - a1];
                        best = best.min(objective(k.view(), &q, cfg.lambda_p, &cand));
                    }
                }
            }
            assert!(got <= best + 1e-6, "solver {got} vs grid {best}");
        }
    }

    #[test]
    fn zero_curvature_picks_best_vertex() {
        let k: Array2<f64> = Array2::zeros((3, 3));
        let cfg = RankerConfig {
            lambda_p: 0.0,
            ..RankerConfig::default()
        };
        let alpha = solve_user(k.view(), &[0.1, 0.9, 0.3], &cfg).unwrap();
        assert_eq!(alpha, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn empty_positive_set_is_an_error() {
        let k: Array2<f64> = Array2::zeros((0, 0));
        assert!(solve_user(k.view(), &[], &RankerConfig::default()).is_err());
    }

    #[test]
    fn scoring_matches_hand_arithmetic() {
        let spec = KernelSpec::linear(false);
        let k = KernelMatrix::new(array![[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]], spec)
            .unwrap();
        let q = compute_q(&k);
        let model = UserModel {
            user_id: 0,
            positive_items: vec![0],
            alpha: vec![1.0],
        };
        let scores = score_user(&k, &model, &q);
        assert_eq!(scores, vec![2.0 - 1.0, 1.0 - 4.0 / 3.0, 0.0 - 1.0]);

        let model2 = UserModel {
            user_id: 1,
            positive_items: vec![0, 2],
            alpha: vec![0.5, 0.5],
        };
        let scores2 = score_user(&k, &model2, &q);
        assert_eq!(scores2, vec![1.0 - 1.0, 1.0 - 4.0 / 3.0, 1.0 - 1.0]);
    }

    #[test]
    fn all_ones_kernel_scores_zero() {
        let spec = KernelSpec::linear(false);
        let k = KernelMatrix::new(Array2::ones((4, 4)), spec).unwrap();
        let q = compute_q(&k);
        let model = UserModel {
            user_id: 0,
            positive_items: vec![1, 3],
            alpha: vec![0.25, 0.75],
        };
        for s in score_user(&k, &model, &q) {
            assert_eq!(s, 0.0);
        }
    }

    #[test]
    fn identical_histories_get_identical_scores() {
        // users 0 and 1 share the history {item 0, item 1}
        let rows = vec![vec![0, 1], vec![0, 1], vec![2]];
        let x = BinaryInteractionMatrix::from_rows(3, rows).unwrap();
        let scores = recommend_all(&x, KernelSpec::tanimoto(true), &RankerConfig::default()).unwrap();
        assert_eq!(scores[0], scores[1]);
        let again = recommend_all(&x, KernelSpec::tanimoto(true), &RankerConfig::default()).unwrap();
        assert_eq!(scores, again, "fixed inputs reproduce bitwise");
    }

    #[test]
    fn config_validation() {
        assert!(RankerConfig::default().validate().is_ok());
        assert!(RankerConfig {
            lambda_p: -0.1,
            ..RankerConfig::default()
        }
        .validate()
        .is_err());
        assert!(RankerConfig {
            tol: 0.0,
            ..RankerConfig::default()
        }
        .validate()
        .is_err());
        assert!(RankerConfig {
            max_iters: 0,
            ..RankerConfig::default()
        }
        .validate()
        .is_err());
    }
}
