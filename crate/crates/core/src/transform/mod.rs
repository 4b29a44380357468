//! Data transformations feeding the autoencoder: coarse and fine WoE, plus
//! the comparison transforms (full-rank PCA, standardization, raw
//! pass-through), each followed by a per-column `[0,1]` rescale so the
//! sigmoid decoder output can match the inputs.

mod pca;
mod woe;

pub use pca::PcaModel;
pub use woe::{
    coarse_merge, fit_fine_bins, woe_fit, woe_value, Bin, BinDomain, BinSpec, WoeOptions, WoeTable,
};

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::data::{Cell, Dataset, FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

/// Which transformation the pipeline applies before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    WoeCoarse,
    WoeFine,
    PcaFull,
    Standardize,
    Raw,
}

/// Per-output-column rescale to `[0,1]`, fitted on the transform's own
/// training output. Constant columns are flagged and map to 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub min: f64,
    pub max: f64,
    pub constant: bool,
}

impl ColumnScale {
    fn apply(&self, v: f64) -> f64 {
        if self.constant {
            0.5
        } else {
            ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        }
    }
}

/// One-hot layout of categorical features for the non-WoE transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotEncoder {
    /// Per feature: observed categories in lexicographic order; empty for
    /// numeric features (passed through).
    pub categories: Vec<Vec<String>>,
    pub columns: Vec<String>,
}

impl OneHotEncoder {
    fn fit(ds: &Dataset) -> Result<Self> {
        let mut categories = Vec::with_capacity(ds.n_features());
        let mut columns = Vec::new();
        for (j, f) in ds.schema.iter().enumerate() {
            match f.kind {
                FeatureKind::Numeric => {
                    categories.push(Vec::new());
                    columns.push(f.name.clone());
                }
                FeatureKind::Categorical => {
                    let mut seen = BTreeSet::new();
                    for row in &ds.rows {
                        if let Cell::Category(token) = &row[j] {
                            seen.insert(token.clone());
                        }
                    }
                    if seen.is_empty() {
                        return Err(Error::Fit(format!(
                            "feature `{}` has no observed categories",
                            f.name
                        )));
                    }
                    for token in &seen {
                        columns.push(format!("{}={token}", f.name));
                    }
                    categories.push(seen.into_iter().collect());
                }
            }
        }
        Ok(OneHotEncoder { categories, columns })
    }

    fn encode_row(&self, schema: &[FeatureSchema], row: &[Cell]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.columns.len());
        for ((cell, f), cats) in row.iter().zip(schema).zip(&self.categories) {
            match (cell, f.kind) {
                (Cell::Numeric(v), FeatureKind::Numeric) => out.push(*v),
                (Cell::Category(token), FeatureKind::Categorical) => {
                    let hit = cats.iter().position(|c| c == token).ok_or_else(|| {
                        Error::Transform(format!(
                            "feature `{}`: unseen category `{token}` with no fallback bin",
                            f.name
                        ))
                    })?;
                    for k in 0..cats.len() {
                        out.push(if k == hit { 1.0 } else { 0.0 });
                    }
                }
                (Cell::Missing, _) => {
                    return Err(Error::Transform(format!(
                        "feature `{}`: missing values are only supported by the WoE transforms",
                        f.name
                    )))
                }
                _ => unreachable!("validated at construction"),
            }
        }
        Ok(out)
    }
}

/// Column means and standard deviations for the standardization transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizeModel {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Fitted state of a transformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FittedTransform {
    Woe { table: WoeTable },
    Pca { encoder: OneHotEncoder, model: PcaModel },
    Standardize { encoder: OneHotEncoder, model: StandardizeModel },
    Raw { encoder: OneHotEncoder },
}

/// A fitted transformation plus its `[0,1]` output scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub fitted: FittedTransform,
    pub scaling: Vec<ColumnScale>,
    pub output_columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl TransformSpec {
    pub fn output_dim(&self) -> usize {
        self.output_columns.len()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Fit `kind` on the dataset and freeze the output scaling on the same
/// rows. WoE fitting needs both classes present in `ds`.
pub fn fit_transform(ds: &Dataset, kind: TransformKind, woe_opts: &WoeOptions) -> Result<TransformSpec> {
    if ds.n_rows() == 0 {
        return Err(Error::Fit("cannot fit a transform on an empty dataset".into()));
    }
    let (fitted, output_columns) = match kind {
        TransformKind::WoeCoarse | TransformKind::WoeFine => {
            let opts = WoeOptions {
                coarse: kind == TransformKind::WoeCoarse,
                ..woe_opts.clone()
            };
            let table = woe_fit(ds, &opts)?;
            let columns = ds.schema.iter().map(|f| f.name.clone()).collect();
            (FittedTransform::Woe { table }, columns)
        }
        TransformKind::PcaFull => {
            let encoder = OneHotEncoder::fit(ds)?;
            let rows = encode_all(&encoder, ds)?;
            let model = PcaModel::fit(&rows)?;
            let columns = (1..=model.dim()).map(|i| format!("pc{i}")).collect();
            (FittedTransform::Pca { encoder, model }, columns)
        }
        TransformKind::Standardize => {
            let encoder = OneHotEncoder::fit(ds)?;
            let rows = encode_all(&encoder, ds)?;
            let d = encoder.columns.len();
            let n = rows.len() as f64;
            let mut mean = vec![0.0; d];
            for row in &rows {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v / n;
                }
            }
            let mut var = vec![0.0; d];
            for row in &rows {
                for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                    *s += (v - m) * (v - m) / n;
                }
            }
            let std = var.iter().map(|v| v.sqrt()).collect();
            let columns = encoder.columns.clone();
            (
                FittedTransform::Standardize { encoder, model: StandardizeModel { mean, std } },
                columns,
            )
        }
        TransformKind::Raw => {
            let encoder = OneHotEncoder::fit(ds)?;
            let columns = encoder.columns.clone();
            (FittedTransform::Raw { encoder }, columns)
        }
    };

    let mut spec = TransformSpec {
        kind,
        fitted,
        scaling: Vec::new(),
        output_columns,
        config_hash: None,
    };
    let unscaled = apply_unscaled(&spec, ds)?;
    spec.scaling = fit_scaling(&unscaled, spec.output_dim());
    Ok(spec)
}

fn encode_all(encoder: &OneHotEncoder, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
    ds.rows
        .iter()
        .map(|row| encoder.encode_row(&ds.schema, row))
        .collect()
}

fn fit_scaling(rows: &[Vec<f64>], d: usize) -> Vec<ColumnScale> {
    let mut scales = vec![
        ColumnScale {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            constant: true,
        };
        d
    ];
    for row in rows {
        for (scale, &v) in scales.iter_mut().zip(row) {
            scale.min = scale.min.min(v);
            scale.max = scale.max.max(v);
        }
    }
    for scale in &mut scales {
        scale.constant = !(scale.min < scale.max);
    }
    scales
}

/// Transform without the final `[0,1]` rescale. The pre-rescale outputs are
/// what the comparison-transform properties are stated on.
pub fn apply_unscaled(spec: &TransformSpec, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
    match &spec.fitted {
        FittedTransform::Woe { table } => {
            if table.features.len() != ds.n_features() {
                return Err(Error::Transform(format!(
                    "fitted on {} features, dataset has {}",
                    table.features.len(),
                    ds.n_features()
                )));
            }
            ds.rows
                .iter()
                .map(|row| {
                    row.iter()
                        .zip(&table.features)
                        .map(|(cell, spec)| spec.woe_for(cell))
                        .collect()
                })
                .collect()
        }
        FittedTransform::Pca { encoder, model } => Ok(encode_all(encoder, ds)?
            .iter()
            .map(|row| model.project(row))
            .collect()),
        FittedTransform::Standardize { encoder, model } => Ok(encode_all(encoder, ds)?
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&model.mean)
                    .zip(&model.std)
                    .map(|((v, m), s)| if *s < 1e-15 { 0.0 } else { (v - m) / s })
                    .collect()
            })
            .collect()),
        FittedTransform::Raw { encoder } => encode_all(encoder, ds),
    }
}

/// Transform the dataset into the `[0,1]` matrix the autoencoder consumes.
/// Values outside the fitted range clip to the boundary.
pub fn apply_transform(spec: &TransformSpec, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
    let unscaled = apply_unscaled(spec, ds)?;
    Ok(unscaled
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(&spec.scaling)
                .map(|(&v, scale)| scale.apply(v))
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, FeatureGen, SegmentSpec, SynthSpec};

    fn numeric_dataset(n: usize, seed: u64) -> Dataset {
        let spec = SynthSpec {
            segments: vec![
                SegmentSpec {
                    weight: 0.5,
                    features: vec![
                        ("a".to_string(), FeatureGen::Numeric { mean: 0.0, variance: 1.0 }),
                        ("b".to_string(), FeatureGen::Numeric { mean: 1.0, variance: 4.0 }),
                        (
                            "c".to_string(),
                            FeatureGen::Categorical {
                                categories: vec!["x".into(), "y".into()],
                                probs: vec![0.5, 0.5],
                            },
                        ),
                    ],
                    default_prob: 0.1,
                    missing_rate: 0.0,
                },
                SegmentSpec {
                    weight: 0.5,
                    features: vec![
                        ("a".to_string(), FeatureGen::Numeric { mean: 3.0, variance: 1.0 }),
                        ("b".to_string(), FeatureGen::Numeric { mean: -2.0, variance: 1.0 }),
                        (
                            "c".to_string(),
                            FeatureGen::Categorical {
                                categories: vec!["x".into(), "y".into()],
                                probs: vec![0.2, 0.8],
                            },
                        ),
                    ],
                    default_prob: 0.4,
                    missing_rate: 0.0,
                },
            ],
        };
        synth_generate(&spec, n, seed).unwrap()
    }

    #[test]
    fn woe_transform_outputs_table_values_rescaled() {
        let ds = super::woe::tests::age_table_dataset();
        let spec = fit_transform(
            &ds,
            TransformKind::WoeCoarse,
            &WoeOptions {
                max_bins: 3,
                ..WoeOptions::default()
            },
        )
        .unwrap();
        // A 25-year-old routes to the young coarse group.
        let probe = Dataset::new(
            ds.schema.clone(),
            vec![vec![Cell::Numeric(25.0)]],
            vec![0],
        )
        .unwrap();
        let unscaled = apply_unscaled(&spec, &probe).unwrap();
        assert!((unscaled[0][0] - (-0.5445)).abs() < 1e-3);
        let scaled = apply_transform(&spec, &probe).unwrap();
        assert!(scaled[0][0] >= 0.0 && scaled[0][0] <= 1.0);
        // Rescale is affine over the fitted value range.
        let woes = [-0.5445f64, 0.9889, -0.4272];
        let (lo, hi) = (-0.5445f64, 0.9889f64);
        let expected = (woes[0] - lo) / (hi - lo);
        assert!((scaled[0][0] - expected).abs() < 1e-3);
    }

    #[test]
    fn standardize_centers_its_training_data() {
        let ds = numeric_dataset(400, 5);
        let spec = fit_transform(&ds, TransformKind::Standardize, &WoeOptions::default()).unwrap();
        let out = apply_unscaled(&spec, &ds).unwrap();
        let d = spec.output_dim();
        let n = out.len() as f64;
        for j in 0..d {
            let mean: f64 = out.iter().map(|r| r[j]).sum::<f64>() / n;
            let var: f64 = out.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-9, "column {j} mean {mean}");
            assert!((var - 1.0).abs() < 1e-9, "column {j} var {var}");
        }
    }

    #[test]
    fn pca_outputs_are_uncorrelated() {
        let ds = numeric_dataset(500, 11);
        let spec = fit_transform(&ds, TransformKind::PcaFull, &WoeOptions::default()).unwrap();
        let out = apply_unscaled(&spec, &ds).unwrap();
        let d = spec.output_dim();
        let n = out.len() as f64;
        let mean: Vec<f64> = (0..d)
            .map(|j| out.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect();
        for i in 0..d {
            for j in 0..i {
                let cov: f64 = out
                    .iter()
                    .map(|r| (r[i] - mean[i]) * (r[j] - mean[j]))
                    .sum::<f64>()
                    / (n - 1.0);
                assert!(cov.abs() < 1e-6, "cov[{i}][{j}] = {cov}");
            }
        }
    }

    #[test]
    fn scaled_output_stays_in_unit_interval() {
        let ds = numeric_dataset(300, 17);
        for kind in [
            TransformKind::WoeCoarse,
            TransformKind::WoeFine,
            TransformKind::PcaFull,
            TransformKind::Standardize,
            TransformKind::Raw,
        ] {
            let spec = fit_transform(&ds, kind, &WoeOptions::default()).unwrap();
            let out = apply_transform(&spec, &ds).unwrap();
            for row in &out {
                for &v in row {
                    assert!((0.0..=1.0).contains(&v), "{kind:?} produced {v}");
                }
            }
        }
    }

    #[test]
    fn transform_spec_round_trips_through_json() {
        let ds = numeric_dataset(150, 23);
        let spec = fit_transform(&ds, TransformKind::WoeCoarse, &WoeOptions::default()).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: TransformSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
        let again = apply_transform(&back, &ds).unwrap();
        assert_eq!(apply_transform(&spec, &ds).unwrap(), again);
    }

    #[test]
    fn out_of_range_values_clip() {
        let ds = numeric_dataset(200, 29);
        let spec = fit_transform(&ds, TransformKind::Raw, &WoeOptions::default()).unwrap();
        let mut probe_rows = vec![ds.rows[0].clone()];
        probe_rows[0][0] = Cell::Numeric(1e9);
        let probe = Dataset::new(ds.schema.clone(), probe_rows, vec![0]).unwrap();
        let out = apply_transform(&spec, &probe).unwrap();
        assert_eq!(out[0][0], 1.0);
    }
}
