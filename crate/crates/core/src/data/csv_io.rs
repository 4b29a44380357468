//! CSV ingestion and export, plus the schema sidecar format.
//!
//! Files are comma-separated UTF-8 with one header line. Empty cells and a
//! configurable missing token parse as missing. Lines starting with `#` are
//! provenance comments and are skipped on read.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::{Cell, Dataset, FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

/// CSV parsing options.
#[derive(Debug, Clone)]
pub struct CsvOptions {
    /// Cell content treated as a missing value, besides the empty string.
    pub missing_token: String,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            missing_token: String::new(),
        }
    }
}

/// Schema sidecar: feature list plus the label column name.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaFile {
    pub features: Vec<FeatureSchema>,
    pub label_column: String,
}

pub fn load_schema(path: &Path) -> Result<SchemaFile> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_schema(path: &Path, schema: &[FeatureSchema], label_column: &str) -> Result<()> {
    let file = SchemaFile {
        features: schema.to_vec(),
        label_column: label_column.to_string(),
    };
    fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

/// Load a dataset from CSV given its schema and label column.
///
/// Columns are located by header name; extra columns are ignored. Malformed
/// rows (wrong arity, unparsable numeric, label outside {0,1}) produce a
/// load error naming the 1-based data row number.
pub fn load_csv(
    path: &Path,
    schema: &[FeatureSchema],
    label_column: &str,
    opts: &CsvOptions,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)?;

    let headers = reader.headers()?.clone();
    let col_of = |name: &str| headers.iter().position(|h| h == name);

    let mut feature_cols = Vec::with_capacity(schema.len());
    for f in schema {
        let idx = col_of(&f.name).ok_or_else(|| {
            Error::Schema(format!("header is missing schema column `{}`", f.name))
        })?;
        feature_cols.push(idx);
    }
    let label_col = col_of(label_column)
        .ok_or_else(|| Error::Schema(format!("header is missing label column `{label_column}`")))?;
    let expected_arity = headers.len();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record?;
        if record.len() != expected_arity {
            return Err(Error::Load {
                row: row_no,
                message: format!("expected {} fields, found {}", expected_arity, record.len()),
            });
        }
        let mut cells = Vec::with_capacity(schema.len());
        for (f, &col) in schema.iter().zip(&feature_cols) {
            let raw = record.get(col).unwrap_or("");
            cells.push(parse_cell(raw, f, opts, row_no)?);
        }
        let raw_label = record.get(label_col).unwrap_or("");
        let label = match raw_label.trim() {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(Error::Load {
                    row: row_no,
                    message: format!("label `{other}` is not in {{0,1}}"),
                })
            }
        };
        rows.push(cells);
        labels.push(label);
    }

    Dataset::new(schema.to_vec(), rows, labels)
}

fn parse_cell(raw: &str, f: &FeatureSchema, opts: &CsvOptions, row_no: usize) -> Result<Cell> {
    let trimmed = raw.trim();
    if trimmed.is_empty() || trimmed == opts.missing_token {
        if !f.allows_missing {
            return Err(Error::Load {
                row: row_no,
                message: format!("feature `{}` does not allow missing values", f.name),
            });
        }
        return Ok(Cell::Missing);
    }
    match f.kind {
        FeatureKind::Numeric => trimmed
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Cell::Numeric)
            .ok_or_else(|| Error::Load {
                row: row_no,
                message: format!("feature `{}`: `{trimmed}` is not a finite number", f.name),
            }),
        FeatureKind::Categorical => Ok(Cell::Category(trimmed.to_string())),
    }
}

/// Write a dataset to CSV. Numeric cells use round-trip decimal formatting,
/// so a reload reproduces every cell exactly. An optional `# key=value`
/// comment line carries provenance.
pub fn write_csv(
    path: &Path,
    ds: &Dataset,
    label_column: &str,
    opts: &CsvOptions,
    header_comment: Option<&str>,
) -> Result<()> {
    let mut out = String::new();
    if let Some(comment) = header_comment {
        out.push_str("# ");
        out.push_str(comment);
        out.push('\n');
    }
    let mut header: Vec<&str> = ds.schema.iter().map(|f| f.name.as_str()).collect();
    header.push(label_column);
    out.push_str(&header.join(","));
    out.push('\n');

    for (row, &label) in ds.rows.iter().zip(&ds.labels) {
        let mut fields = Vec::with_capacity(row.len() + 1);
        for cell in row {
            fields.push(match cell {
                Cell::Numeric(v) => v.to_string(),
                Cell::Category(s) => s.clone(),
                Cell::Missing => opts.missing_token.clone(),
            });
        }
        fields.push(label.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
