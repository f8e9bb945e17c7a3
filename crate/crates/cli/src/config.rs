//! Run configuration: a plain-text file of `key = value` lines grouped
//! into `[dataset]`, `[kernels]`, `[ranker]`, `[eval]`, and `[output]`
//! sections. Unknown sections or keys are rejected so typos surface
//! before any compute starts.

use anyhow::{bail, Context, Result};
use bkrec_core::data::TriplesFormat;
use bkrec_core::eval::TieHandling;
use bkrec_core::folds::FOLD_COUNT;
use bkrec_core::kernel::{KernelFamily, KernelSpec};
use bkrec_core::ranker::RankerConfig;
use ini::Ini;
use std::path::{Path, PathBuf};

/// Where the interactions live and how to read them.
#[derive(Debug, Clone)]
pub struct DatasetConfig {
    /// Label used in the first CSV column; defaults to the file stem.
    pub name: String,
    pub path: PathBuf,
    pub format: TriplesFormat,
    /// Drop users with more interactions than this, when set.
    pub max_ratings: Option<usize>,
}

/// Which kernels to run.
#[derive(Debug, Clone)]
pub struct KernelsConfig {
    pub families: Vec<KernelFamily>,
    /// Arity sweep applied to each family that takes an arity.
    pub arities: Vec<u32>,
    pub normalized: bool,
}

impl KernelsConfig {
    /// Expands families x arities into concrete specs, in config order
    /// with arities ascending; families without an arity appear once.
    pub fn specs(&self) -> Vec<KernelSpec> {
        let mut out = Vec::new();
        for &family in &self.families {
            if family.uses_arity() {
                for &d in &self.arities {
                    out.push(KernelSpec::new(family, d, self.normalized).expect("arity >= 1"));
                }
            } else {
                out.push(KernelSpec::new(family, 1, self.normalized).expect("arity 1"));
            }
        }
        out
    }
}

/// Fold protocol and metric settings.
#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    /// Fold count; the split protocol is defined for exactly 5.
    pub folds: usize,
    pub seed: u64,
    /// Cutoff for the @k metrics.
    pub top_k: usize,
    pub ties: TieHandling,
}

/// Where results go and the resource guard.
#[derive(Debug, Clone)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Refuse Gram construction beyond this many gigabytes of doubles.
    pub max_gram_gb: f64,
    /// Write per-fold train/test manifests next to the result CSVs.
    pub fold_manifests: bool,
}

/// Everything a run needs, parsed and validated up front.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub kernels: KernelsConfig,
    pub ranker: RankerConfig,
    pub eval: EvalConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    /// Reads and validates a config file. Relative paths inside the
    /// file resolve against the file's own directory.
    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty());
        ExperimentConfig::from_str_with_base(&text, base)
            .with_context(|| format!("in config {}", path.display()))
    }

    /// Parses config text; `base` anchors relative paths when given.
    pub fn from_str_with_base(text: &str, base: Option<&Path>) -> Result<ExperimentConfig> {
        let ini = Ini::load_from_str(text).map_err(|e| anyhow::anyhow!("bad syntax: {e}"))?;
        check_layout(&ini)?;

        let dataset = parse_dataset(&ini, base)?;
        let kernels = parse_kernels(&ini)?;
        let ranker = parse_ranker(&ini)?;
        let eval = parse_eval(&ini)?;
        let output = parse_output(&ini, base)?;
        Ok(ExperimentConfig {
            dataset,
            kernels,
            ranker,
            eval,
            output,
        })
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("dataset", &["name", "path", "format", "max_ratings"]),
    ("kernels", &["families", "arities", "normalized"]),
    ("ranker", &["lambda_p", "max_iters", "tol"]),
    ("eval", &["folds", "seed", "top_k", "ties"]),
    ("output", &["dir", "max_gram_gb", "fold_manifests"]),
];

fn check_layout(ini: &Ini) -> Result<()> {
    for (section, props) in ini.iter() {
        let name = match section {
            None => {
                if props.iter().next().is_some() {
                    bail!("keys before the first [section] are not allowed");
                }
                continue;
            }
            Some(s) => s,
        };
        let known = SECTIONS.iter().find(|(s, _)| *s == name);
        let keys = match known {
            None => bail!("unknown section [{name}]"),
            Some((_, keys)) => keys,
        };
        for (key, _) in props.iter() {
            if !keys.contains(&key) {
                bail!("unknown key '{key}' in section [{name}]");
            }
        }
    }
    Ok(())
}

fn get<'a>(ini: &'a Ini, section: &str, key: &str) -> Option<&'a str> {
    ini.section(Some(section))
        .and_then(|p| p.get(key))
        .map(str::trim)
        .filter(|v| !v.is_empty())
}

fn parse_value<T: std::str::FromStr>(section: &str, key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e| anyhow::anyhow!("[{section}] {key} = '{raw}': {e}"))
}

fn parse_bool(section: &str, key: &str, raw: &str) -> Result<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => bail!("[{section}] {key} = '{raw}': expected true or false"),
    }
}

fn resolve(base: Option<&Path>, raw: &str) -> PathBuf {
    let p = PathBuf::from(raw);
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p,
    }
}

fn parse_dataset(ini: &Ini, base: Option<&Path>) -> Result<DatasetConfig> {
    let raw_path = get(ini, "dataset", "path").context("[dataset] path is required")?;
    let path = resolve(base, raw_path);
    let name = match get(ini, "dataset", "name") {
        Some(n) => n.to_string(),
        None => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string()),
    };
    let format = match get(ini, "dataset", "format") {
        Some(f) => parse_value("dataset", "format", f)?,
        None => TriplesFormat::Auto,
    };
    let max_ratings = match get(ini, "dataset", "max_ratings") {
        Some(v) => {
            let cap: usize = parse_value("dataset", "max_ratings", v)?;
            if cap == 0 {
                bail!("[dataset] max_ratings must be at least 1");
            }
            Some(cap)
        }
        None => None,
    };
    Ok(DatasetConfig {
        name,
        path,
        format,
        max_ratings,
    })
}

/// Parses an arity list such as `1-5, 38` into sorted unique arities.
pub fn parse_arities(text: &str) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for token in text.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        match token.split_once('-') {
            Some((lo, hi)) => {
                let lo: u32 = parse_value("kernels", "arities", lo.trim())?;
                let hi: u32 = parse_value("kernels", "arities", hi.trim())?;
                if lo == 0 || lo > hi {
                    bail!("bad arity range '{token}'");
                }
                out.extend(lo..=hi);
            }
            None => {
                let d: u32 = parse_value("kernels", "arities", token)?;
                if d == 0 {
                    bail!("arity 0 is not defined");
                }
                out.push(d);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn parse_kernels(ini: &Ini) -> Result<KernelsConfig> {
    // an explicitly empty value is a valid empty kernel list; a missing
    // key is a config mistake
    let raw = ini
        .section(Some("kernels"))
        .and_then(|p| p.get("families"))
        .context("[kernels] families is required")?;
    let mut families = Vec::new();
    for token in raw.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        let family: KernelFamily = parse_value("kernels", "families", token)?;
        if !families.contains(&family) {
            families.push(family);
        }
    }
    let arities = match get(ini, "kernels", "arities") {
        Some(a) => parse_arities(a)?,
        None => Vec::new(),
    };
    if families.iter().any(|f| f.uses_arity()) && arities.is_empty() {
        bail!("[kernels] arities is required when families include an arity kernel");
    }
    let normalized = match get(ini, "kernels", "normalized") {
        Some(v) => parse_bool("kernels", "normalized", v)?,
        None => true,
    };
    Ok(KernelsConfig {
        families,
        arities,
        normalized,
    })
}

fn parse_ranker(ini: &Ini) -> Result<RankerConfig> {
    let mut cfg = RankerConfig::default();
    if let Some(v) = get(ini, "ranker", "lambda_p") {
        cfg.lambda_p = parse_value("ranker", "lambda_p", v)?;
    }
    if let Some(v) = get(ini, "ranker", "max_iters") {
        cfg.max_iters = parse_value("ranker", "max_iters", v)?;
    }
    if let Some(v) = get(ini, "ranker", "tol") {
        cfg.tol = parse_value("ranker", "tol", v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_eval(ini: &Ini) -> Result<EvalConfig> {
    let folds = match get(ini, "eval", "folds") {
        Some(v) => parse_value("eval", "folds", v)?,
        None => FOLD_COUNT,
    };
    if folds != FOLD_COUNT {
        bail!("[eval] folds = {folds}: the split protocol is defined for exactly {FOLD_COUNT}");
    }
    let seed = match get(ini, "eval", "seed") {
        Some(v) => parse_value("eval", "seed", v)?,
        None => 42,
    };
    let top_k = match get(ini, "eval", "top_k") {
        Some(v) => parse_value("eval", "top_k", v)?,
        None => 10,
    };
    if top_k == 0 {
        bail!("[eval] top_k must be at least 1");
    }
    let ties = match get(ini, "eval", "ties") {
        Some(v) => parse_value("eval", "ties", v)?,
        None => TieHandling::Strict,
    };
    Ok(EvalConfig {
        folds,
        seed,
        top_k,
        ties,
    })
}

fn parse_output(ini: &Ini, base: Option<&Path>) -> Result<OutputConfig> {
    let dir = resolve(base, get(ini, "output", "dir").unwrap_or("out"));
    let max_gram_gb = match get(ini, "output", "max_gram_gb") {
        Some(v) => parse_value("output", "max_gram_gb", v)?,
        None => 8.0,
    };
    if !(max_gram_gb > 0.0) {
        bail!("[output] max_gram_gb must be positive");
    }
    let fold_manifests = match get(ini, "output", "fold_manifests") {
        Some(v) => parse_bool("output", "fold_manifests", v)?,
        None => true,
    };
    Ok(OutputConfig {
        dir,
        max_gram_gb,
        fold_manifests,
    })
}
