//! Ranking metrics over held-out items and their cross-fold aggregation.
//!
//! For one user, the held-out positives `P` compete against the
//! negatives `N`: every item the user never touched in either split.
//! Training positives are excluded from both sides, so a model is never
//! rewarded or punished for re-ranking what it already saw. Users with
//! an empty `P` or `N` cannot be scored and are reported as skipped.

use crate::error::{Error, Result};

/// How equal scores across the positive–negative boundary are credited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieHandling {
    /// A tied pair counts as a miss: the positive must be strictly ahead.
    #[default]
    Strict,
    /// A tied pair earns half credit.
    HalfCredit,
}

impl std::str::FromStr for TieHandling {
    type Err = Error;

    fn from_str(s: &str) -> Result<TieHandling> {
        match s.trim().to_ascii_lowercase().as_str() {
            "strict" => Ok(TieHandling::Strict),
            "half" | "half_credit" | "half-credit" => Ok(TieHandling::HalfCredit),
            other => Err(Error::Domain(format!("unknown tie handling '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ItemRole {
    Negative,
    TrainPos,
    TestPos,
}

fn roles(test_pos: &[u32], train_pos: &[u32], m: usize) -> Vec<ItemRole> {
    let mut role = vec![ItemRole::Negative; m];
    for &i in train_pos {
        role[i as usize] = ItemRole::TrainPos;
    }
    for &i in test_pos {
        debug_assert!(
            role[i as usize] == ItemRole::Negative,
            "test and train positives must be disjoint"
        );
        role[i as usize] = ItemRole::TestPos;
    }
    role
}

/// Probability that a random held-out positive outranks a random
/// negative, computed from sorted negative scores in `O(m log m)`.
///
/// `None` when the user has no held-out positives or no negatives.
pub fn auc(test_pos: &[u32], train_pos: &[u32], scores: &[f64], ties: TieHandling) -> Option<f64> {
    let role = roles(test_pos, train_pos, scores.len());
    let mut neg: Vec<f64> = scores
        .iter()
        .zip(&role)
        .filter(|(_, r)| **r == ItemRole::Negative)
        .map(|(s, _)| *s)
        .collect();
    if test_pos.is_empty() || neg.is_empty() {
        return None;
    }
    neg.sort_unstable_by(|a, b| a.partial_cmp(b).expect("scores must not contain NaN"));
    let mut credit = 0.0f64;
    for &p in test_pos {
        let s = scores[p as usize];
        let below = neg.partition_point(|&x| x < s);
        credit += below as f64;
        if ties == TieHandling::HalfCredit {
            let not_above = neg.partition_point(|&x| x <= s);
            credit += 0.5 * (not_above - below) as f64;
        }
    }
    Some(credit / (test_pos.len() as f64 * neg.len() as f64))
}

/// Top-`k` ranking of the non-training items: indices sorted by score
/// descending, index ascending on equal scores.
fn ranked_candidates(role: &[ItemRole], scores: &[f64], k: usize) -> Vec<u32> {
    let mut cand: Vec<u32> = (0..scores.len() as u32)
        .filter(|&i| role[i as usize] != ItemRole::TrainPos)
        .collect();
    cand.sort_by(|&a, &b| {
        scores[b as usize]
            .partial_cmp(&scores[a as usize])
            .expect("scores must not contain NaN")
            .then(a.cmp(&b))
    });
    cand.truncate(k);
    cand
}

/// Average precision over the top `k` of the non-training ranking,
/// divided by `min(|P|, k)`; `None` under the same conditions as [`auc`].
pub fn map_at_k(test_pos: &[u32], train_pos: &[u32], scores: &[f64], k: usize) -> Option<f64> {
    let role = roles(test_pos, train_pos, scores.len());
    let negatives = role.iter().filter(|r| **r == ItemRole::Negative).count();
    if test_pos.is_empty() || negatives == 0 || k == 0 {
        return None;
    }
    let top = ranked_candidates(&role, scores, k);
    let mut hits = 0usize;
    let mut ap = 0.0f64;
    for (pos, &item) in top.iter().enumerate() {
        if role[item as usize] == ItemRole::TestPos {
            hits += 1;
            ap += hits as f64 / (pos + 1) as f64;
        }
    }
    Some(ap / test_pos.len().min(k) as f64)
}

/// Discounted cumulative gain at `k` with binary relevance, divided by
/// the gain of an ideal ranking; `None` under the same conditions as
/// [`auc`].
pub fn ndcg_at_k(test_pos: &[u32], train_pos: &[u32], scores: &[f64], k: usize) -> Option<f64> {
    let role = roles(test_pos, train_pos, scores.len());
    let negatives = role.iter().filter(|r| **r == ItemRole::Negative).count();
    if test_pos.is_empty() || negatives == 0 || k == 0 {
        return None;
    }
    let top = ranked_candidates(&role, scores, k);
    let mut dcg = 0.0f64;
    for (pos, &item) in top.iter().enumerate() {
        if role[item as usize] == ItemRole::TestPos {
            dcg += 1.0 / ((pos + 2) as f64).log2();
        }
    }
    let ideal: f64 = (0..test_pos.len().min(k))
        .map(|pos| 1.0 / ((pos + 2) as f64).log2())
        .sum();
    Some(dcg / ideal)
}

/// All three per-user metrics from one shared pass.
pub fn evaluate_user(
    test_pos: &[u32],
    train_pos: &[u32],
    scores: &[f64],
    k: usize,
    ties: TieHandling,
) -> Option<UserMetrics> {
    Some(UserMetrics {
        auc: auc(test_pos, train_pos, scores, ties)?,
        map_at_k: map_at_k(test_pos, train_pos, scores, k)?,
        ndcg_at_k: ndcg_at_k(test_pos, train_pos, scores, k)?,
    })
}

/// One user's metric values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserMetrics {
    pub auc: f64,
    pub map_at_k: f64,
    pub ndcg_at_k: f64,
}

/// Per-fold averages over the evaluated users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldMetrics {
    pub auc: f64,
    pub map_at_k: f64,
    pub ndcg_at_k: f64,
    /// Users that produced metrics.
    pub evaluated_users: usize,
    /// Users skipped for an empty positive or negative side.
    pub skipped_users: usize,
}

/// Averages a fold's user metrics; `None` when no user was evaluable.
pub fn fold_metrics(users: &[Option<UserMetrics>]) -> Option<FoldMetrics> {
    let evaluated: Vec<&UserMetrics> = users.iter().flatten().collect();
    if evaluated.is_empty() {
        return None;
    }
    let count = evaluated.len() as f64;
    Some(FoldMetrics {
        auc: evaluated.iter().map(|u| u.auc).sum::<f64>() / count,
        map_at_k: evaluated.iter().map(|u| u.map_at_k).sum::<f64>() / count,
        ndcg_at_k: evaluated.iter().map(|u| u.ndcg_at_k).sum::<f64>() / count,
        evaluated_users: evaluated.len(),
        skipped_users: users.len() - evaluated.len(),
    })
}

/// Mean and population standard deviation of one metric across folds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

fn summarize(values: impl Iterator<Item = f64> + Clone) -> MetricSummary {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MetricSummary {
        mean,
        std: var.sqrt(),
    }
}

/// Cross-fold aggregation: per-fold values retained, each metric
/// summarized by mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_fold: Vec<FoldMetrics>,
    pub auc: MetricSummary,
    pub map_at_k: MetricSummary,
    pub ndcg_at_k: MetricSummary,
}

pub fn aggregate(per_fold: &[FoldMetrics]) -> Result<EvalReport> {
    if per_fold.is_empty() {
        return Err(Error::Empty("no folds to aggregate".into()));
    }
    Ok(EvalReport {
        per_fold: per_fold.to_vec(),
        auc: summarize(per_fold.iter().map(|f| f.auc)),
        map_at_k: summarize(per_fold.iter().map(|f| f.map_at_k)),
        ndcg_at_k: summarize(per_fold.iter().map(|f| f.ndcg_at_k)),
    })
}
