//! Dataset ingestion and the binary interaction matrix.
//!
//! Items are the examples and users are the variables: row `i` of the
//! matrix is the binary vector of users who interacted with item `i`.
//! Kernels between items then reduce to intersections of these rows.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Sparse binary items-by-users matrix; each row holds the strictly
/// ascending user indices active for that item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryInteractionMatrix {
    user_count: usize,
    rows: Vec<Vec<u32>>,
}

impl BinaryInteractionMatrix {
    /// Builds from per-item user lists, validating bounds, order, and
    /// uniqueness.
    pub fn from_rows(user_count: usize, rows: Vec<Vec<u32>>) -> Result<BinaryInteractionMatrix> {
        for (i, row) in rows.iter().enumerate() {
            for pair in row.windows(2) {
                if pair[0] >= pair[1] {
                    return Err(Error::Dimension(format!(
                        "item {i}: user indices not strictly ascending"
                    )));
                }
            }
            if let Some(&last) = row.last() {
                if last as usize >= user_count {
                    return Err(Error::Dimension(format!(
                        "item {i}: user index {last} out of range (user_count={user_count})"
                    )));
                }
            }
        }
        Ok(BinaryInteractionMatrix { user_count, rows })
    }

    /// Number of items (rows, examples).
    pub fn item_count(&self) -> usize {
        self.rows.len()
    }

    /// Number of users (columns, variables).
    pub fn user_count(&self) -> usize {
        self.user_count
    }

    /// Total number of interactions.
    pub fn interaction_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Fraction of the items-by-users grid that is filled.
    pub fn density(&self) -> f64 {
        let cells = self.item_count() as f64 * self.user_count as f64;
        if cells == 0.0 {
            return 0.0;
        }
        self.interaction_count() as f64 / cells
    }

    /// Active user indices of one item, strictly ascending.
    pub fn row(&self, item: usize) -> &[u32] {
        &self.rows[item]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    /// Dense boolean form of one item row; for small verification work.
    pub fn dense_row(&self, item: usize) -> Vec<bool> {
        let mut out = vec![false; self.user_count];
        for &u in &self.rows[item] {
            out[u as usize] = true;
        }
        out
    }

    /// Items of each user, ascending: the transpose view.
    pub fn user_items(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.user_count];
        for (item, row) in self.rows.iter().enumerate() {
            for &u in row {
                out[u as usize].push(item as u32);
            }
        }
        out
    }

    /// Interaction count per user.
    pub fn user_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.user_count];
        for row in &self.rows {
            for &u in row {
                deg[u as usize] += 1;
            }
        }
        deg
    }
}

/// Field separator of a triples file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriplesFormat {
    Tsv,
    Csv,
    /// Detect per file: tab wins if the first line contains one, else comma.
    Auto,
}

impl std::str::FromStr for TriplesFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<TriplesFormat> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tsv" | "triples_tsv" | "tab" => Ok(TriplesFormat::Tsv),
            "csv" | "triples_csv" | "comma" => Ok(TriplesFormat::Csv),
            "auto" => Ok(TriplesFormat::Auto),
            other => Err(Error::Domain(format!("unknown triples format '{other}'"))),
        }
    }
}

/// A loaded dataset: the binary matrix plus the original tokens, indexed
/// by the dense ids used everywhere else.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub matrix: BinaryInteractionMatrix,
    pub user_tokens: Vec<String>,
    pub item_tokens: Vec<String>,
}

fn intern(map: &mut HashMap<String, u32>, tokens: &mut Vec<String>, t: &str) -> u32 {
    if let Some(&id) = map.get(t) {
        return id;
    }
    let id = tokens.len() as u32;
    map.insert(t.to_string(), id);
    tokens.push(t.to_string());
    id
}

/// Loads `(user, item, value)` triples, binarizing on `value > 0`.
///
/// Tokens map to dense indices in first-appearance order. A header line is
/// skipped when its value field is not numeric. Rows with `value <= 0` are
/// dropped; duplicate pairs collapse to one interaction. Extra trailing
/// fields (timestamps and the like) are ignored.
pub fn load_interactions(path: &Path, format: TriplesFormat) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);

    let mut user_map = HashMap::new();
    let mut item_map = HashMap::new();
    let mut user_tokens = Vec::new();
    let mut item_tokens = Vec::new();
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    let mut sep: Option<char> = match format {
        TriplesFormat::Tsv => Some('\t'),
        TriplesFormat::Csv => Some(','),
        TriplesFormat::Auto => None,
    };

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() {
            continue;
        }
        let sep = *sep.get_or_insert_with(|| if trimmed.contains('\t') { '\t' } else { ',' });
        let mut fields = trimmed.split(sep);
        let (user, item, value) = match (fields.next(), fields.next(), fields.next()) {
            (Some(u), Some(i), Some(v)) => (u.trim(), i.trim(), v.trim()),
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected at least 3 '{sep}'-separated fields"),
                })
            }
        };
        let value: f64 = match value.parse() {
            Ok(v) => v,
            Err(_) if lineno == 1 => continue,
            Err(_) => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("value field '{value}' is not numeric"),
                })
            }
        };
        if !(value > 0.0) {
            continue;
        }
        let u = intern(&mut user_map, &mut user_tokens, user);
        let i = intern(&mut item_map, &mut item_tokens, item);
        pairs.push((i, u));
    }

    if pairs.is_empty() {
        return Err(Error::Empty(format!(
            "no interactions found in {}",
            path.display()
        )));
    }

    let mut rows = vec![Vec::new(); item_tokens.len()];
    pairs.sort_unstable();
    pairs.dedup();
    for (i, u) in pairs {
        rows[i as usize].push(u);
    }

    let matrix = BinaryInteractionMatrix::from_rows(user_tokens.len(), rows)?;
    Ok(Dataset {
        matrix,
        user_tokens,
        item_tokens,
    })
}

/// Removes users with strictly more than `cap` interactions, reindexing
/// the remaining users densely; items keep their positions.
pub fn filter_max_ratings(data: &Dataset, cap: usize) -> Result<Dataset> {
    if cap == 0 {
        return Err(Error::Domain("rating cap must be >= 1".into()));
    }
    let deg = data.matrix.user_degrees();
    let mut remap = vec![u32::MAX; deg.len()];
    let mut user_tokens = Vec::new();
    for (u, &d) in deg.iter().enumerate() {
        if d <= cap {
            remap[u] = user_tokens.len() as u32;
            user_tokens.push(data.user_tokens[u].clone());
        }
    }
    let rows = data
        .matrix
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .filter_map(|&u| {
                    let r = remap[u as usize];
                    (r != u32::MAX).then_some(r)
                })
                .collect()
        })
        .collect();
    let matrix = BinaryInteractionMatrix::from_rows(user_tokens.len(), rows)?;
    Ok(Dataset {
        matrix,
        user_tokens,
        item_tokens: data.item_tokens.clone(),
    })
}
