//! Expressiveness sweep: normalized spectral ratio of each configured
//! kernel over the full interaction matrix. Kernels are always
//! normalized here, arity sweeps always include arity 1 as the common
//! reference point, and a conjunctive sweep gains the mDNF limit row.

use anyhow::{bail, Context, Result};
use bkrec_core::gram::{gram_from_counts, PairwiseCounts};
use bkrec_core::kernel::{KernelFamily, KernelSpec};
use bkrec_core::spectral::normalized_spectral_ratio;
use std::path::PathBuf;

use crate::config::ExperimentConfig;
use crate::stats_cmd::load_dataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRow {
    pub family: KernelFamily,
    pub arity: u32,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct SpectralSummary {
    pub dataset: String,
    pub rows: Vec<SpectralRow>,
    pub file: Option<PathBuf>,
}

/// The (family, arity) list a config expands to, in output order.
fn sweep_points(cfg: &ExperimentConfig) -> Vec<(KernelFamily, u32)> {
    let mut points = Vec::new();
    let push = |p: (KernelFamily, u32), points: &mut Vec<(KernelFamily, u32)>| {
        if !points.contains(&p) {
            points.push(p);
        }
    };
    for &family in &cfg.kernels.families {
        if family.uses_arity() {
            let mut arities = cfg.kernels.arities.clone();
            arities.push(1);
            arities.sort_unstable();
            arities.dedup();
            for d in arities {
                push((family, d), &mut points);
            }
            if family == KernelFamily::Conjunctive {
                push((KernelFamily::Mdnf, 1), &mut points);
            }
        } else {
            push((family, 1), &mut points);
        }
    }
    points
}

pub fn run_spectral(cfg: &ExperimentConfig) -> Result<SpectralSummary> {
    let points = sweep_points(cfg);
    if points.is_empty() {
        eprintln!("warning: [kernels] families is empty; nothing to sweep");
        return Ok(SpectralSummary {
            dataset: cfg.dataset.name.clone(),
            rows: Vec::new(),
            file: None,
        });
    }

    let data = load_dataset(&cfg.dataset)?;
    let n = data.matrix.user_count();
    if data.matrix.item_count() < 2 {
        bail!("spectral ratios need at least 2 items");
    }
    for &(family, d) in &points {
        if family.uses_arity() && d as usize > n {
            bail!("arity {d} exceeds the {n} users available for {family}");
        }
    }
    crate::experiment::check_gram_budget(data.matrix.item_count(), cfg.output.max_gram_gb)?;

    let counts = PairwiseCounts::build(&data.matrix);
    let mut rows = Vec::new();
    for (family, d) in points {
        let spec = KernelSpec::new(family, d, true)?;
        let k = gram_from_counts(&counts, spec)
            .with_context(|| format!("gram for {}", spec.label()))?;
        let value = normalized_spectral_ratio(&k)?;
        rows.push(SpectralRow {
            family,
            arity: d,
            value,
        });
    }

    std::fs::create_dir_all(&cfg.output.dir)
        .with_context(|| format!("creating {}", cfg.output.dir.display()))?;
    let path = cfg.output.dir.join("spectral.csv");
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["dataset", "family", "arity", "normalized_spectral_ratio"])?;
    for row in &rows {
        w.write_record([
            cfg.dataset.name.as_str(),
            row.family.as_str(),
            &row.arity.to_string(),
            &row.value.to_string(),
        ])?;
    }
    w.flush()?;

    Ok(SpectralSummary {
        dataset: cfg.dataset.name.clone(),
        rows,
        file: Some(path),
    })
}
