//! Datasets: schema, cells, labels, and the majority-class training split.

mod csv_io;
mod synth;

pub use csv_io::{load_csv, load_schema, save_schema, write_csv, CsvOptions};
pub use synth::{synth_generate, FeatureGen, SegmentSpec, SynthSpec};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Feature kind of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

/// One column of the schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default)]
    pub allows_missing: bool,
}

/// A single cell value. Missing is a dedicated variant, never a sentinel
/// number: the Weight-of-Evidence transform needs a distinct missing bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    Numeric(f64),
    Category(String),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_numeric(&self) -> Option<f64> {
        match self {
            Cell::Numeric(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_category(&self) -> Option<&str> {
        match self {
            Cell::Category(s) => Some(s),
            _ => None,
        }
    }
}

/// Rows of mixed numeric/categorical/missing cells plus a binary class label
/// (1 = defaulted within the performance window, 0 = otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: Vec<FeatureSchema>,
    pub rows: Vec<Vec<Cell>>,
    pub labels: Vec<u8>,
}

impl Dataset {
    /// Build a dataset, validating every invariant: unique feature names,
    /// row arity, cell/kind conformance and label domain.
    pub fn new(schema: Vec<FeatureSchema>, rows: Vec<Vec<Cell>>, labels: Vec<u8>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for f in &schema {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name `{}`", f.name)));
            }
        }
        if rows.len() != labels.len() {
            return Err(Error::Schema(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::Schema(format!(
                    "row {} has {} cells, schema has {} features",
                    i + 1,
                    row.len(),
                    schema.len()
                )));
            }
            for (cell, feat) in row.iter().zip(&schema) {
                let ok = match (cell, feat.kind) {
                    (Cell::Numeric(v), FeatureKind::Numeric) => v.is_finite(),
                    (Cell::Category(_), FeatureKind::Categorical) => true,
                    (Cell::Missing, _) => true,
                    _ => false,
                };
                if !ok {
                    return Err(Error::Schema(format!(
                        "row {} cell `{}` does not conform to its kind",
                        i + 1,
                        feat.name
                    )));
                }
            }
        }
        for (i, &y) in labels.iter().enumerate() {
            if y > 1 {
                return Err(Error::Schema(format!("label at row {} is not in {{0,1}}", i + 1)));
            }
        }
        Ok(Dataset { schema, rows, labels })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|f| f.name == name)
    }

    /// Dataset restricted to the given row indices (schema shared).
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Train/eval partition: training indices are a uniform sample of the
/// majority (label 0) class; everything else evaluates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub eval_indices: Vec<usize>,
    pub seed: u64,
}

/// Sample `floor(train_fraction * #majority)` majority-class rows for
/// training; the remaining majority rows and all minority rows evaluate.
/// Deterministic for a fixed seed.
pub fn split_majority(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must be in (0,1), got {train_fraction}"
        )));
    }
    let majority: Vec<usize> = (0..ds.n_rows()).filter(|&i| ds.labels[i] == 0).collect();
    if majority.is_empty() {
        return Err(Error::Split("dataset has no majority-class (label 0) rows".into()));
    }
    let take = (train_fraction * majority.len() as f64).floor() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = majority.clone();
    shuffled.shuffle(&mut rng);
    let mut train: Vec<usize> = shuffled.into_iter().take(take).collect();
    train.sort_unstable();

    let train_set: BTreeSet<usize> = train.iter().copied().collect();
    let eval: Vec<usize> = (0..ds.n_rows()).filter(|i| !train_set.contains(i)).collect();

    Ok(SplitPlan {
        train_indices: train,
        eval_indices: eval,
        seed,
    })
}
