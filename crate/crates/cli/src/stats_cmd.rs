//! Dataset statistics: size counts and density, with optional expected
//! values that turn the report into a check.

use anyhow::{Context, Result};
use bkrec_core::data::{filter_max_ratings, load_interactions, Dataset};

use crate::config::DatasetConfig;

/// Basic shape of a loaded dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsReport {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    /// Fraction of filled cells, in [0, 1].
    pub density: f64,
}

impl StatsReport {
    pub fn density_percent(&self) -> f64 {
        self.density * 100.0
    }
}

/// Expected values to compare against; `None` fields are not checked.
#[derive(Debug, Clone, Copy, Default)]
pub struct Expectations {
    pub users: Option<usize>,
    pub items: Option<usize>,
    pub ratings: Option<usize>,
    /// Expected density as a percentage.
    pub density_percent: Option<f64>,
    /// Absolute tolerance on the density percentage (default 0.01).
    pub density_tolerance: Option<f64>,
}

impl Expectations {
    pub fn is_empty(&self) -> bool {
        self.users.is_none()
            && self.items.is_none()
            && self.ratings.is_none()
            && self.density_percent.is_none()
    }
}

pub fn load_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    let data = load_interactions(&cfg.path, cfg.format)
        .with_context(|| format!("loading {}", cfg.path.display()))?;
    match cfg.max_ratings {
        Some(cap) => Ok(filter_max_ratings(&data, cap)?),
        None => Ok(data),
    }
}

pub fn dataset_stats(cfg: &DatasetConfig) -> Result<StatsReport> {
    let data = load_dataset(cfg)?;
    Ok(report_of(&data))
}

pub fn report_of(data: &Dataset) -> StatsReport {
    let m = &data.matrix;
    StatsReport {
        users: m.user_count(),
        items: m.item_count(),
        ratings: m.interaction_count(),
        density: m.density(),
    }
}

/// Lists every expectation the report misses; empty means all good.
pub fn mismatches(report: &StatsReport, expect: &Expectations) -> Vec<String> {
    let mut out = Vec::new();
    let mut check_count = |label: &str, got: usize, want: Option<usize>| {
        if let Some(want) = want {
            if got != want {
                out.push(format!("{label}: expected {want}, got {got}"));
            }
        }
    };
    check_count("users", report.users, expect.users);
    check_count("items", report.items, expect.items);
    check_count("ratings", report.ratings, expect.ratings);
    if let Some(want) = expect.density_percent {
        let tol = expect.density_tolerance.unwrap_or(0.01);
        let got = report.density_percent();
        if (got - want).abs() > tol {
            out.push(format!(
                "density: expected {want}% within {tol}, got {got:.4}%"
            ));
        }
    }
    out
}

pub fn print_report(name: &str, report: &StatsReport) {
    println!("dataset   {name}");
    println!("users     {}", report.users);
    println!("items     {}", report.items);
    println!("ratings   {}", report.ratings);
    println!("density   {:.4}%", report.density_percent());
}
