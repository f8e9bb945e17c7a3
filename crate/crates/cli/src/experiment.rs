//! The fold-by-fold experiment loop: split, build each fold's Gram
//! matrices from shared pairwise counts, rank, evaluate, and persist
//! results as CSV. All output except the timing columns is a pure
//! function of the dataset, the config, and the seed.

use anyhow::{bail, Context, Result};
use bkrec_core::data::Dataset;
use bkrec_core::eval::{aggregate, evaluate_user, fold_metrics, EvalReport, FoldMetrics};
use bkrec_core::folds::{make_folds, FoldPlan, FOLD_COUNT};
use bkrec_core::gram::{gram_from_counts, PairwiseCounts};
use bkrec_core::kernel::{KernelFamily, KernelSpec};
use bkrec_core::ranker::{compute_q, recommend_from_gram};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::ExperimentConfig;
use crate::stats_cmd::load_dataset;

/// One evaluated (kernel, fold) cell.
#[derive(Debug, Clone, Copy)]
pub struct FoldRecord {
    pub spec: KernelSpec,
    pub fold: usize,
    pub metrics: FoldMetrics,
    /// Gram construction time for this cell, excluding the shared
    /// pairwise-count precomputation.
    pub gram_seconds: f64,
    /// Full wall time of the cell: Gram, solves, and evaluation.
    pub fold_seconds: f64,
}

/// One kernel's aggregate over its evaluated folds.
#[derive(Debug, Clone)]
pub struct ResultRecord {
    pub spec: KernelSpec,
    pub report: EvalReport,
    pub wall_seconds: f64,
}

/// Everything a run produced, for callers and tests.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dataset: String,
    pub results: Vec<ResultRecord>,
    pub folds: Vec<FoldRecord>,
    pub files: Vec<PathBuf>,
}

/// Refuses Gram construction whose dense double matrix would exceed
/// the configured budget.
pub fn check_gram_budget(item_count: usize, max_gram_gb: f64) -> Result<()> {
    let bytes = (item_count as f64).powi(2) * 8.0;
    let gb = bytes / (1u64 << 30) as f64;
    if gb > max_gram_gb {
        bail!(
            "a {item_count}x{item_count} kernel matrix needs {gb:.2} GB of doubles, \
             above the {max_gram_gb} GB budget; subsample items or raise \
             [output] max_gram_gb"
        );
    }
    Ok(())
}

/// Arity kernels need at least `arity` users to form a feature.
fn check_arities(specs: &[KernelSpec], user_count: usize) -> Result<()> {
    for spec in specs {
        if spec.family.uses_arity() && spec.arity as usize > user_count {
            bail!(
                "arity {} exceeds the {} users available for {}",
                spec.arity,
                user_count,
                spec.family
            );
        }
    }
    Ok(())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let specs = cfg.kernels.specs();
    if specs.is_empty() {
        eprintln!("warning: [kernels] families is empty; nothing to run");
        return Ok(RunSummary {
            dataset: cfg.dataset.name.clone(),
            results: Vec::new(),
            folds: Vec::new(),
            files: Vec::new(),
        });
    }

    let data = load_dataset(&cfg.dataset)?;
    check_arities(&specs, data.matrix.user_count())?;
    check_gram_budget(data.matrix.item_count(), cfg.output.max_gram_gb)?;

    std::fs::create_dir_all(&cfg.output.dir)
        .with_context(|| format!("creating {}", cfg.output.dir.display()))?;

    let plan = make_folds(&data.matrix, cfg.eval.seed)?;
    let mut files = Vec::new();
    if cfg.output.fold_manifests {
        files.extend(write_manifests(&cfg.output.dir, &data, &plan)?);
    }

    let mut records: Vec<FoldRecord> = Vec::new();
    for fold in 0..FOLD_COUNT {
        let t_counts = Instant::now();
        let train = plan.train_matrix(&data.matrix, fold);
        let counts = PairwiseCounts::build(&train);
        eprintln!(
            "fold {fold}: pairwise counts for {} items in {:.2}s",
            train.item_count(),
            t_counts.elapsed().as_secs_f64()
        );
        let users: Vec<(u32, Vec<u32>)> = plan
            .test_users(fold)
            .iter()
            .map(|&u| (u, plan.train_items(fold, u as usize)))
            .collect();

        for &spec in &specs {
            let t_fold = Instant::now();
            let t_gram = Instant::now();
            let k = gram_from_counts(&counts, spec)
                .with_context(|| format!("gram for {}", spec.label()))?;
            let gram_seconds = t_gram.elapsed().as_secs_f64();

            let q = compute_q(&k);
            let scored = recommend_from_gram(&k, &q, &users, &cfg.ranker)?;
            let per_user: Vec<_> = users
                .iter()
                .zip(&scored)
                .map(|((u, train_items), scores)| {
                    let test_items = plan.test_items(fold, *u as usize);
                    scores.as_ref().and_then(|s| {
                        evaluate_user(&test_items, train_items, s, cfg.eval.top_k, cfg.eval.ties)
                    })
                })
                .collect();
            match fold_metrics(&per_user) {
                Some(metrics) => records.push(FoldRecord {
                    spec,
                    fold,
                    metrics,
                    gram_seconds,
                    fold_seconds: t_fold.elapsed().as_secs_f64(),
                }),
                None => eprintln!(
                    "warning: fold {fold} has no evaluable user for {}",
                    spec.label()
                ),
            }
        }
    }

    let mut results = Vec::new();
    for &spec in &specs {
        let mine: Vec<&FoldRecord> = records.iter().filter(|r| r.spec == spec).collect();
        if mine.is_empty() {
            bail!("no fold produced an evaluable user for {}", spec.label());
        }
        let fold_values: Vec<FoldMetrics> = mine.iter().map(|r| r.metrics).collect();
        let report = aggregate(&fold_values)?;
        let wall_seconds = mine.iter().map(|r| r.fold_seconds).sum();
        results.push(ResultRecord {
            spec,
            report,
            wall_seconds,
        });
    }

    files.push(write_results(&cfg.output.dir, &cfg.dataset.name, &results)?);
    files.push(write_folds(&cfg.output.dir, &cfg.dataset.name, &records)?);
    for family in arity_families(&specs) {
        files.push(write_curve(&cfg.output.dir, &cfg.dataset.name, family, &results)?);
    }

    Ok(RunSummary {
        dataset: cfg.dataset.name.clone(),
        results,
        folds: records,
        files,
    })
}

fn arity_families(specs: &[KernelSpec]) -> Vec<KernelFamily> {
    let mut out = Vec::new();
    for spec in specs {
        if spec.family.uses_arity() && !out.contains(&spec.family) {
            out.push(spec.family);
        }
    }
    out
}

/// Fold manifests list each held-out user's interactions tagged train
/// or test; users absent from a manifest train on their full history.
fn write_manifests(dir: &Path, data: &Dataset, plan: &FoldPlan) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for fold in 0..plan.fold_count() {
        let path = dir.join(format!("manifest_fold{fold}.csv"));
        let mut w = csv::Writer::from_path(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        w.write_record(["user", "item", "role"])?;
        for &u in &plan.test_users(fold) {
            let user = &data.user_tokens[u as usize];
            for item in plan.train_items(fold, u as usize) {
                w.write_record([user, &data.item_tokens[item as usize], "train"])?;
            }
            for item in plan.test_items(fold, u as usize) {
                w.write_record([user, &data.item_tokens[item as usize], "test"])?;
            }
        }
        w.flush()?;
        out.push(path);
    }
    Ok(out)
}

fn summary_fields(report: &EvalReport) -> [String; 6] {
    [
        report.auc.mean.to_string(),
        report.auc.std.to_string(),
        report.map_at_k.mean.to_string(),
        report.map_at_k.std.to_string(),
        report.ndcg_at_k.mean.to_string(),
        report.ndcg_at_k.std.to_string(),
    ]
}

fn write_results(dir: &Path, dataset: &str, results: &[ResultRecord]) -> Result<PathBuf> {
    let path = dir.join("results.csv");
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record([
        "dataset",
        "family",
        "arity",
        "auc_mean",
        "auc_std",
        "map10_mean",
        "map10_std",
        "ndcg10_mean",
        "ndcg10_std",
        "wall_seconds",
    ])?;
    for r in results {
        let mut row = vec![
            dataset.to_string(),
            r.spec.family.as_str().to_string(),
            r.spec.arity.to_string(),
        ];
        row.extend(summary_fields(&r.report));
        row.push(format!("{:.3}", r.wall_seconds));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(path)
}

fn write_folds(dir: &Path, dataset: &str, records: &[FoldRecord]) -> Result<PathBuf> {
    let path = dir.join("folds.csv");
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record([
        "dataset",
        "family",
        "arity",
        "fold",
        "auc",
        "map10",
        "ndcg10",
        "evaluated_users",
        "skipped_users",
        "gram_seconds",
        "fold_seconds",
    ])?;
    for r in records {
        w.write_record([
            dataset,
            r.spec.family.as_str(),
            &r.spec.arity.to_string(),
            &r.fold.to_string(),
            &r.metrics.auc.to_string(),
            &r.metrics.map_at_k.to_string(),
            &r.metrics.ndcg_at_k.to_string(),
            &r.metrics.evaluated_users.to_string(),
            &r.metrics.skipped_users.to_string(),
            &format!("{:.3}", r.gram_seconds),
            &format!("{:.3}", r.fold_seconds),
        ])?;
    }
    w.flush()?;
    Ok(path)
}

/// Per-family sweep files carry no timing column, so they reproduce
/// byte-for-byte under a fixed seed.
fn write_curve(
    dir: &Path,
    dataset: &str,
    family: KernelFamily,
    results: &[ResultRecord],
) -> Result<PathBuf> {
    let path = dir.join(format!("curve_{}.csv", family.as_str()));
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record([
        "dataset",
        "family",
        "arity",
        "auc_mean",
        "auc_std",
        "map10_mean",
        "map10_std",
        "ndcg10_mean",
        "ndcg10_std",
    ])?;
    for r in results.iter().filter(|r| r.spec.family == family) {
        let mut row = vec![
            dataset.to_string(),
            family.as_str().to_string(),
            r.spec.arity.to_string(),
        ];
        row.extend(summary_fields(&r.report));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(path)
}
