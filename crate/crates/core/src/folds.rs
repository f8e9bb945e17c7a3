//! Cross-validation folds over users and their interactions.
//!
//! The split is user-oriented: users are shuffled into `FOLD_COUNT`
//! near-equal sets, each user's interaction list is shuffled and cut in
//! two, and fold `t` holds out the second halves of set `t`'s users. Users
//! with fewer than [`MIN_TEST_RATINGS`] interactions are never held out,
//! so every evaluated user keeps a usable training history. All
//! randomness comes from one ChaCha8 stream seeded with the given 64-bit
//! seed, which makes plans identical across platforms and runs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::BinaryInteractionMatrix;
use crate::error::{Error, Result};

/// Number of folds in the evaluation protocol.
pub const FOLD_COUNT: usize = 5;

/// Users below this interaction count contribute all interactions to
/// training in every fold.
pub const MIN_TEST_RATINGS: usize = 5;

/// The complete, reproducible assignment of every interaction to train or
/// test in each fold.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    seed: u64,
    /// Fold set of each user.
    user_set: Vec<u8>,
    /// Each user's items in shuffled order; the first `train_len` stay in
    /// training when the user is held out.
    user_items: Vec<Vec<u32>>,
    /// Length of the training half per user; equals the full length for
    /// users that are never held out.
    train_len: Vec<u32>,
}

/// Builds the fold plan for `x` from a single seed.
///
/// The RNG stream is consumed in a fixed order: one shuffle of the user
/// list, then one shuffle of each user's item list in ascending user
/// order. Sets are dealt round-robin over the shuffled user list, so
/// their sizes differ by at most one. A user's training half keeps the
/// extra interaction when the count is odd.
pub fn make_folds(x: &BinaryInteractionMatrix, seed: u64) -> Result<FoldPlan> {
    let n_users = x.user_count();
    if n_users == 0 || x.interaction_count() == 0 {
        return Err(Error::Empty("cannot split an empty matrix".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut order: Vec<u32> = (0..n_users as u32).collect();
    order.shuffle(&mut rng);
    let mut user_set = vec![0u8; n_users];
    for (pos, &u) in order.iter().enumerate() {
        user_set[u as usize] = (pos % FOLD_COUNT) as u8;
    }

    let mut user_items = x.user_items();
    let mut train_len = vec![0u32; n_users];
    for (u, items) in user_items.iter_mut().enumerate() {
        items.shuffle(&mut rng);
        let r = items.len();
        train_len[u] = if r < MIN_TEST_RATINGS {
            r as u32
        } else {
            (r - r / 2) as u32
        };
    }

    Ok(FoldPlan {
        seed,
        user_set,
        user_items,
        train_len,
    })
}

impl FoldPlan {
    pub fn fold_count(&self) -> usize {
        FOLD_COUNT
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn user_count(&self) -> usize {
        self.user_set.len()
    }

    /// Fold set the user belongs to.
    pub fn user_fold(&self, user: usize) -> usize {
        self.user_set[user] as usize
    }

    /// Whether the user's second half is held out when its set is the
    /// test fold.
    pub fn is_holdout_user(&self, user: usize) -> bool {
        (self.train_len[user] as usize) < self.user_items[user].len()
    }

    /// Users evaluated in the given fold: members of set `fold` with a
    /// non-empty held-out half.
    pub fn test_users(&self, fold: usize) -> Vec<u32> {
        assert!(fold < FOLD_COUNT);
        (0..self.user_set.len() as u32)
            .filter(|&u| self.user_set[u as usize] as usize == fold && self.is_holdout_user(u as usize))
            .collect()
    }

    /// The user's training items in the given fold, ascending.
    pub fn train_items(&self, fold: usize, user: usize) -> Vec<u32> {
        assert!(fold < FOLD_COUNT);
        let items = &self.user_items[user];
        let cut = if self.user_set[user] as usize == fold {
            self.train_len[user] as usize
        } else {
            items.len()
        };
        let mut out = items[..cut].to_vec();
        out.sort_unstable();
        out
    }

    /// The user's held-out items in the given fold, ascending; empty
    /// unless the user is evaluated in this fold.
    pub fn test_items(&self, fold: usize, user: usize) -> Vec<u32> {
        assert!(fold < FOLD_COUNT);
        if self.user_set[user] as usize != fold {
            return Vec::new();
        }
        let mut out = self.user_items[user][self.train_len[user] as usize..].to_vec();
        out.sort_unstable();
        out
    }

    /// The training matrix of one fold: `x` minus the held-out
    /// interactions of that fold's test users.
    pub fn train_matrix(&self, x: &BinaryInteractionMatrix, fold: usize) -> BinaryInteractionMatrix {
        assert!(fold < FOLD_COUNT);
        let mut held = vec![Vec::new(); self.user_set.len()];
        for u in 0..self.user_set.len() {
            if self.user_set[u] as usize == fold {
                held[u] = self.test_items(fold, u);
            }
        }
        let rows = x
            .rows()
            .iter()
            .enumerate()
            .map(|(item, row)| {
                row.iter()
                    .copied()
                    .filter(|&u| held[u as usize].binary_search(&(item as u32)).is_err())
                    .collect()
            })
            .collect();
        BinaryInteractionMatrix::from_rows(x.user_count(), rows)
            .expect("filtering preserves row validity")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_matrix(seed: u64, n_users: usize, n_items: usize, p: f64) -> BinaryInteractionMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = vec![Vec::new(); n_items];
        for (i, row) in rows.iter_mut().enumerate() {
            for u in 0..n_users {
                if rng.gen_bool(p) {
                    row.push(u as u32);
                }
            }
            // guarantee progress so the matrix is never empty
            if row.is_empty() && i == 0 {
                row.push(0);
            }
        }
        BinaryInteractionMatrix::from_rows(n_users, rows).unwrap()
    }

    fn interaction_set(x: &BinaryInteractionMatrix) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for (i, row) in x.rows().iter().enumerate() {
            for &u in row {
                out.push((u, i as u32));
            }
        }
        out.sort_unstable();
        out
    }

    #[test]
    fn uniform_small_example() {
        // 10 users x 10 ratings each: every fold holds out 2 users with
        // 5 ratings apiece, leaving 90 in training
        let rows = (0..10)
            .map(|_| (0..10u32).collect::<Vec<_>>())
            .collect::<Vec<_>>();
        let x = BinaryInteractionMatrix::from_rows(10, rows).unwrap();
        let plan = make_folds(&x, 7).unwrap();
        for fold in 0..FOLD_COUNT {
            let test_users = plan.test_users(fold);
            assert_eq!(test_users.len(), 2);
            let test_total: usize = test_users
                .iter()
                .map(|&u| plan.test_items(fold, u as usize).len())
                .sum();
            assert_eq!(test_total, 10);
            let train = plan.train_matrix(&x, fold);
            assert_eq!(train.interaction_count(), 90);
        }
    }

    #[test]
    fn folds_partition_interactions() {
        let x = random_matrix(3, 40, 60, 0.2);
        let plan = make_folds(&x, 11).unwrap();
        let all = interaction_set(&x);
        for fold in 0..FOLD_COUNT {
            let train = interaction_set(&plan.train_matrix(&x, fold));
            let mut test = Vec::new();
            for u in 0..x.user_count() {
                for i in plan.test_items(fold, u) {
                    test.push((u as u32, i));
                }
            }
            let mut union = train.clone();
            union.extend(&test);
            union.sort_unstable();
            assert_eq!(union, all, "fold {fold}: train and test must partition");
            for t in &test {
                assert!(train.binary_search(t).is_err());
            }
        }
    }

    #[test]
    fn per_fold_train_items_match_train_matrix(){
        let x = random_matrix(9, 25, 40, 0.3);
        let plan = make_folds(&x, 5).unwrap();
        for fold in 0..FOLD_COUNT {
            let train = plan.train_matrix(&x, fold);
            let cols = train.user_items();
            for u in 0..x.user_count() {
                assert_eq!(plan.train_items(fold, u), cols[u], "fold {fold} user {u}");
            }
        }
    }

    #[test]
    fn small_history_users_never_held_out() {
        let mut rows = vec![Vec::new(); 30];
        // user 0 has 4 ratings, user 1 has 5, user 2 has 11
        for i in 0..4 {
            rows[i].push(0);
        }
        for i in 0..5 {
            rows[i].push(1);
        }
        for i in 0..11 {
            rows[i].push(2);
        }
        let x = BinaryInteractionMatrix::from_rows(3, rows).unwrap();
        for seed in 0..20 {
            let plan = make_folds(&x, seed).unwrap();
            assert!(!plan.is_holdout_user(0));
            for fold in 0..FOLD_COUNT {
                assert!(plan.test_items(fold, 0).is_empty());
            }
            // 5 ratings split 3 train / 2 test; 11 split 6 / 5
            let f1 = plan.user_fold(1);
            assert_eq!(plan.train_items(f1, 1).len(), 3);
            assert_eq!(plan.test_items(f1, 1).len(), 2);
            let f2 = plan.user_fold(2);
            assert_eq!(plan.train_items(f2, 2).len(), 6);
            assert_eq!(plan.test_items(f2, 2).len(), 5);
        }
    }

    #[test]
    fn fold_sets_are_near_equal() {
        let x = random_matrix(1, 103, 50, 0.3);
        let plan = make_folds(&x, 2).unwrap();
        let mut sizes = vec![0usize; FOLD_COUNT];
        for u in 0..x.user_count() {
            sizes[plan.user_fold(u)] += 1;
        }
        let (min, max) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(max - min <= 1, "set sizes {sizes:?}");
    }

    #[test]
    fn same_seed_reproduces_plan() {
        let x = random_matrix(5, 30, 30, 0.25);
        let a = make_folds(&x, 42).unwrap();
        let b = make_folds(&x, 42).unwrap();
        assert_eq!(a.user_set, b.user_set);
        assert_eq!(a.user_items, b.user_items);
        assert_eq!(a.train_len, b.train_len);
        let c = make_folds(&x, 43).unwrap();
        assert!(a.user_set != c.user_set || a.user_items != c.user_items);
    }

    #[test]
    fn test_users_keep_training_majority() {
        let x = random_matrix(8, 60, 80, 0.15);
        let plan = make_folds(&x, 13).unwrap();
        let deg = x.user_degrees();
        for fold in 0..FOLD_COUNT {
            for &u in &plan.test_users(fold) {
                let u = u as usize;
                let train = plan.train_items(fold, u).len();
                let test = plan.test_items(fold, u).len();
                assert!(deg[u] >= MIN_TEST_RATINGS);
                assert_eq!(train + test, deg[u]);
                assert!(train >= test, "train half keeps the extra interaction");
                assert!(train >= MIN_TEST_RATINGS.div_ceil(2));
            }
        }
    }

    #[test]
    fn empty_matrix_rejected() {
        let x = BinaryInteractionMatrix::from_rows(3, vec![Vec::new(); 4]).unwrap();
        assert!(make_folds(&x, 0).is_err());
    }
}
