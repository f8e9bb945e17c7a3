use anyhow::{bail, Context, Result};
use bkrec_cli::config::{DatasetConfig, ExperimentConfig};
use bkrec_cli::experiment::run_experiment;
use bkrec_cli::spectral_cmd::run_spectral;
use bkrec_cli::stats_cmd::{dataset_stats, mismatches, print_report, Expectations};
use bkrec_core::data::TriplesFormat;
use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "bkrec",
    version,
    about = "Boolean-kernel top-N recommendation experiments"
)]
struct Cli {
    /// Run configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides the config's [eval] seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Caps the worker-thread count (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Overrides the config's [output] dir.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prints dataset size and density, optionally checked against
    /// expected values (any mismatch exits non-zero).
    Stats {
        /// Dataset file; defaults to the config's [dataset] path.
        #[arg(long, value_name = "PATH")]
        path: Option<PathBuf>,
        /// File format: tsv, csv, or auto.
        #[arg(long, value_name = "FMT", default_value = "auto")]
        format: TriplesFormat,
        #[arg(long, value_name = "N")]
        expect_users: Option<usize>,
        #[arg(long, value_name = "N")]
        expect_items: Option<usize>,
        #[arg(long, value_name = "N")]
        expect_ratings: Option<usize>,
        /// Expected density as a percentage.
        #[arg(long, value_name = "PCT")]
        expect_density: Option<f64>,
        /// Absolute tolerance on the density percentage.
        #[arg(long, value_name = "PCT", default_value_t = 0.01)]
        density_tolerance: f64,
    },
    /// Runs the fold protocol for every configured kernel and writes
    /// result CSVs.
    Experiment,
    /// Writes normalized spectral ratios for the configured kernels.
    Spectral,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .context("--config PATH is required for this command")?;
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(seed) = cli.seed {
        cfg.eval.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .context("setting up the worker pool")?;
    }

    match &cli.command {
        Command::Stats {
            path,
            format,
            expect_users,
            expect_items,
            expect_ratings,
            expect_density,
            density_tolerance,
        } => {
            let dataset = match path {
                Some(p) => DatasetConfig {
                    name: p
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "dataset".to_string()),
                    path: p.clone(),
                    format: *format,
                    max_ratings: None,
                },
                None => load_config(&cli)
                    .context("stats needs --path or --config")?
                    .dataset,
            };
            let report = dataset_stats(&dataset)?;
            print_report(&dataset.name, &report);
            let expect = Expectations {
                users: *expect_users,
                items: *expect_items,
                ratings: *expect_ratings,
                density_percent: *expect_density,
                density_tolerance: Some(*density_tolerance),
            };
            if !expect.is_empty() {
                let problems = mismatches(&report, &expect);
                if problems.is_empty() {
                    println!("expected values all match");
                } else {
                    for p in &problems {
                        eprintln!("mismatch: {p}");
                    }
                    bail!("{} expectation(s) failed", problems.len());
                }
            }
        }
        Command::Experiment => {
            let cfg = load_config(&cli)?;
            let summary = run_experiment(&cfg)?;
            for r in &summary.results {
                println!(
                    "{:<18} auc {:.4} +/- {:.4}  map@k {:.4}  ndcg@k {:.4}  ({:.1}s)",
                    r.spec.label(),
                    r.report.auc.mean,
                    r.report.auc.std,
                    r.report.map_at_k.mean,
                    r.report.ndcg_at_k.mean,
                    r.wall_seconds
                );
            }
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Spectral => {
            let cfg = load_config(&cli)?;
            let summary = run_spectral(&cfg)?;
            for row in &summary.rows {
                println!(
                    "{:<14} arity {:<3} spectral ratio {:.6}",
                    row.family, row.arity, row.value
                );
            }
            if let Some(f) = &summary.file {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}
