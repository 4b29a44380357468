//! Weight-of-Evidence binning: fine classing, coarse classing and the
//! fitted per-feature bin tables.
//!
//! A bin's WoE is the log ratio of the good-class share to the bad-class
//! share, computed from raw counts. Bins with a zero count on either side
//! fall back to +0.5 smoothing so the log stays finite.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::data::{Cell, Dataset, FeatureKind};
use crate::error::{Error, Result};

/// Where a bin's observations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BinDomain {
    /// Half-open numeric interval `(lower, upper]`; the outermost bins use
    /// infinite endpoints so every finite value routes somewhere.
    Interval {
        #[serde(with = "decimal_text")]
        lower: f64,
        #[serde(with = "decimal_text")]
        upper: f64,
    },
    /// A set of category tokens.
    Categories { tokens: Vec<String> },
}

/// One bin with its class counts and WoE value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    #[serde(flatten)]
    pub domain: BinDomain,
    pub goods: u64,
    pub bads: u64,
    #[serde(with = "sig17")]
    pub woe: f64,
}

impl Bin {
    pub fn count(&self) -> u64 {
        self.goods + self.bads
    }

    pub fn bad_rate(&self) -> f64 {
        if self.count() == 0 {
            0.0
        } else {
            self.bads as f64 / self.count() as f64
        }
    }
}

/// Fitted binning of one feature. The missing bin stands apart from the
/// ordered regular bins and is never merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub feature: String,
    pub kind: FeatureKind,
    pub bins: Vec<Bin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing: Option<Bin>,
    /// Index into `bins` that unseen categories route to, when designated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<usize>,
}

impl BinSpec {
    /// Total number of bins, counting the missing bin.
    pub fn n_bins(&self) -> usize {
        self.bins.len() + usize::from(self.missing.is_some())
    }

    /// Sum of observations across all bins, missing included.
    pub fn total_count(&self) -> u64 {
        self.bins.iter().map(Bin::count).sum::<u64>()
            + self.missing.as_ref().map_or(0, Bin::count)
    }

    /// WoE value for one cell of this feature.
    pub fn woe_for(&self, cell: &Cell) -> Result<f64> {
        match cell {
            Cell::Missing => self
                .missing
                .as_ref()
                .map(|b| b.woe)
                .ok_or_else(|| {
                    Error::Transform(format!(
                        "feature `{}`: missing value but the fitted table has no missing bin",
                        self.feature
                    ))
                }),
            Cell::Numeric(v) => self
                .bins
                .iter()
                .find(|b| match &b.domain {
                    BinDomain::Interval { lower, upper } => *v > *lower && *v <= *upper,
                    BinDomain::Categories { .. } => false,
                })
                .map(|b| b.woe)
                .ok_or_else(|| {
                    Error::Transform(format!(
                        "feature `{}`: value {v} fits no bin",
                        self.feature
                    ))
                }),
            Cell::Category(token) => {
                let hit = self.bins.iter().find(|b| match &b.domain {
                    BinDomain::Categories { tokens } => tokens.iter().any(|t| t == token),
                    BinDomain::Interval { .. } => false,
                });
                if let Some(b) = hit {
                    return Ok(b.woe);
                }
                if let Some(idx) = self.fallback {
                    return Ok(self.bins[idx].woe);
                }
                Err(Error::Transform(format!(
                    "feature `{}`: unseen category `{token}` with no fallback bin",
                    self.feature
                )))
            }
        }
    }
}

/// The fitted transformation: one `BinSpec` per feature plus the class
/// totals the WoE values were computed against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WoeTable {
    pub features: Vec<BinSpec>,
    pub total_goods: u64,
    pub total_bads: u64,
}

/// Fitting parameters for [`woe_fit`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WoeOptions {
    /// Fine-classing bin count for numeric features.
    pub fine_bins: usize,
    /// Apply coarse classing after the fine fit.
    pub coarse: bool,
    /// Coarse classing: maximum number of bins, missing bin included.
    pub max_bins: usize,
    /// Coarse classing: minimum share of observations per regular bin.
    pub min_share: f64,
    /// Route unseen categories to the most populated bin instead of failing.
    pub fallback_unseen: bool,
}

impl Default for WoeOptions {
    fn default() -> Self {
        WoeOptions {
            fine_bins: 20,
            coarse: true,
            max_bins: 5,
            min_share: 0.05,
            fallback_unseen: false,
        }
    }
}

/// WoE of one bin given its counts, the class totals and the feature's bin
/// count `k`. Exact log of count ratios; +0.5 smoothing only when a side is
/// empty, so the value is always finite.
pub fn woe_value(goods: u64, bads: u64, total_goods: u64, total_bads: u64, k: usize) -> f64 {
    if goods == 0 || bads == 0 {
        let g = (goods as f64 + 0.5) / (total_goods as f64 + 0.5 * k as f64);
        let b = (bads as f64 + 0.5) / (total_bads as f64 + 0.5 * k as f64);
        (g / b).ln()
    } else {
        let g = goods as f64 / total_goods as f64;
        let b = bads as f64 / total_bads as f64;
        (g / b).ln()
    }
}

fn class_totals(ds: &Dataset) -> Result<(u64, u64)> {
    let bads = ds.labels.iter().map(|&y| y as u64).sum::<u64>();
    let goods = ds.n_rows() as u64 - bads;
    if goods == 0 || bads == 0 {
        return Err(Error::Fit(
            "degenerate labels: both classes must be present to fit WoE".into(),
        ));
    }
    Ok((goods, bads))
}

/// Fine classing of one feature: near-equal-population quantile bins for
/// numerics, one bin per category otherwise, plus a missing bin when the
/// data contains missing values.
pub fn fit_fine_bins(ds: &Dataset, feature: &str, k: usize) -> Result<BinSpec> {
    if k < 2 {
        return Err(Error::Config(format!("fine bin count must be >= 2, got {k}")));
    }
    let (total_goods, total_bads) = class_totals(ds)?;
    let col = ds
        .feature_index(feature)
        .ok_or_else(|| Error::Fit(format!("unknown feature `{feature}`")))?;
    let kind = ds.schema[col].kind;

    let mut missing_goods = 0u64;
    let mut missing_bads = 0u64;
    let mut bins = match kind {
        FeatureKind::Numeric => {
            let mut values: Vec<(f64, u8)> = Vec::new();
            for (row, &y) in ds.rows.iter().zip(&ds.labels) {
                match &row[col] {
                    Cell::Numeric(v) => values.push((*v, y)),
                    Cell::Missing => {
                        if y == 0 {
                            missing_goods += 1;
                        } else {
                            missing_bads += 1;
                        }
                    }
                    Cell::Category(_) => unreachable!("validated at construction"),
                }
            }
            if values.is_empty() {
                return Err(Error::Fit(format!(
                    "feature `{feature}` has no observed numeric values"
                )));
            }
            values.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let boundaries = quantile_boundaries(&values, k);
            numeric_bins(&values, &boundaries)
        }
        FeatureKind::Categorical => {
            let mut counts: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
            for (row, &y) in ds.rows.iter().zip(&ds.labels) {
                match &row[col] {
                    Cell::Category(token) => {
                        let e = counts.entry(token).or_insert((0, 0));
                        if y == 0 {
                            e.0 += 1;
                        } else {
                            e.1 += 1;
                        }
                    }
                    Cell::Missing => {
                        if y == 0 {
                            missing_goods += 1;
                        } else {
                            missing_bads += 1;
                        }
                    }
                    Cell::Numeric(_) => unreachable!("validated at construction"),
                }
            }
            if counts.is_empty() {
                return Err(Error::Fit(format!(
                    "feature `{feature}` has no observed categories"
                )));
            }
            counts
                .into_iter()
                .map(|(token, (goods, bads))| Bin {
                    domain: BinDomain::Categories {
                        tokens: vec![token.to_string()],
                    },
                    goods,
                    bads,
                    woe: 0.0,
                })
                .collect()
        }
    };

    let missing = (missing_goods + missing_bads > 0).then_some(Bin {
        domain: BinDomain::Categories { tokens: vec![] },
        goods: missing_goods,
        bads: missing_bads,
        woe: 0.0,
    });

    let n_bins = bins.len() + usize::from(missing.is_some());
    for b in &mut bins {
        b.woe = woe_value(b.goods, b.bads, total_goods, total_bads, n_bins);
    }
    let missing = missing.map(|mut b| {
        b.woe = woe_value(b.goods, b.bads, total_goods, total_bads, n_bins);
        b
    });

    Ok(BinSpec {
        feature: feature.to_string(),
        kind,
        bins,
        missing,
        fallback: None,
    })
}

/// Equal-frequency cut points over sorted values; duplicates and the max
/// value are dropped so every resulting bin is populated.
fn quantile_boundaries(sorted: &[(f64, u8)], k: usize) -> Vec<f64> {
    let n = sorted.len();
    let max = sorted[n - 1].0;
    let mut boundaries = Vec::new();
    for i in 1..k {
        let pos = ((i * n) / k).max(1);
        let candidate = sorted[pos - 1].0;
        if candidate < max && boundaries.last().map_or(true, |&b| candidate > b) {
            boundaries.push(candidate);
        }
    }
    boundaries
}

fn numeric_bins(sorted: &[(f64, u8)], boundaries: &[f64]) -> Vec<Bin> {
    let mut edges = vec![f64::NEG_INFINITY];
    edges.extend_from_slice(boundaries);
    edges.push(f64::INFINITY);
    let mut bins: Vec<Bin> = edges
        .windows(2)
        .map(|w| Bin {
            domain: BinDomain::Interval { lower: w[0], upper: w[1] },
            goods: 0,
            bads: 0,
            woe: 0.0,
        })
        .collect();
    let mut idx = 0usize;
    for &(v, y) in sorted {
        while let BinDomain::Interval { upper, .. } = &bins[idx].domain {
            if v <= *upper {
                break;
            }
            idx += 1;
        }
        if y == 0 {
            bins[idx].goods += 1;
        } else {
            bins[idx].bads += 1;
        }
    }
    bins
}

/// Coarse classing: repeatedly merge the adjacent bin pair with the most
/// similar risk until the bin-count and minimum-share constraints hold.
///
/// Risk similarity is measured on the WoE (log-odds) scale, which is what
/// groups "similar risk" bins the way analyst-driven coarse classing does.
/// Category bins are ordered by risk before merging; the missing bin is
/// never merged. WoE values are recomputed from the merged counts.
pub fn coarse_merge(spec: &BinSpec, max_bins: usize, min_share: f64) -> Result<BinSpec> {
    if max_bins < 1 {
        return Err(Error::Config("max_bins must be >= 1".into()));
    }
    let mut spec = spec.clone();
    let total = spec.total_count();
    let (total_goods, total_bads) = spec_totals(&spec);

    if spec.kind == FeatureKind::Categorical {
        spec.bins
            .sort_by(|a, b| a.woe.partial_cmp(&b.woe).unwrap());
    }

    let reserved = usize::from(spec.missing.is_some());
    let target = max_bins.saturating_sub(reserved).max(1);

    loop {
        let too_many = spec.bins.len() > target;
        let undersized: Vec<usize> = spec
            .bins
            .iter()
            .enumerate()
            .filter(|(_, b)| (b.count() as f64) < min_share * total as f64)
            .map(|(i, _)| i)
            .collect();
        if (!too_many && undersized.is_empty()) || spec.bins.len() < 2 {
            break;
        }

        // Candidate adjacent pairs; when a bin is undersized, only pairs
        // touching one are considered so merging fixes the violation.
        let pair_of_interest = |i: usize| {
            undersized.is_empty() || undersized.contains(&i) || undersized.contains(&(i + 1))
        };
        let mut best: Option<(usize, f64)> = None;
        for i in 0..spec.bins.len() - 1 {
            if !pair_of_interest(i) {
                continue;
            }
            let gap = (spec.bins[i].woe - spec.bins[i + 1].woe).abs();
            if best.map_or(true, |(_, g)| gap < g) {
                best = Some((i, gap));
            }
        }
        let (i, _) = best.expect("at least one adjacent pair");
        let merged = merge_pair(&spec.bins[i], &spec.bins[i + 1]);
        spec.bins[i] = merged;
        spec.bins.remove(i + 1);

        let k = spec.n_bins();
        for b in &mut spec.bins {
            b.woe = woe_value(b.goods, b.bads, total_goods, total_bads, k);
        }
        if let Some(m) = &mut spec.missing {
            m.woe = woe_value(m.goods, m.bads, total_goods, total_bads, k);
        }
    }
    spec.fallback = spec.fallback.filter(|&i| i < spec.bins.len());
    Ok(spec)
}

fn spec_totals(spec: &BinSpec) -> (u64, u64) {
    let mut goods = spec.missing.as_ref().map_or(0, |b| b.goods);
    let mut bads = spec.missing.as_ref().map_or(0, |b| b.bads);
    for b in &spec.bins {
        goods += b.goods;
        bads += b.bads;
    }
    (goods, bads)
}

fn merge_pair(a: &Bin, b: &Bin) -> Bin {
    let domain = match (&a.domain, &b.domain) {
        (
            BinDomain::Interval { lower, .. },
            BinDomain::Interval { upper, .. },
        ) => BinDomain::Interval {
            lower: *lower,
            upper: *upper,
        },
        (BinDomain::Categories { tokens: ta }, BinDomain::Categories { tokens: tb }) => {
            let mut tokens = ta.clone();
            tokens.extend(tb.iter().cloned());
            BinDomain::Categories { tokens }
        }
        _ => unreachable!("bins of one feature share a domain kind"),
    };
    Bin {
        domain,
        goods: a.goods + b.goods,
        bads: a.bads + b.bads,
        woe: 0.0,
    }
}

/// Fit the WoE table for every feature of the dataset.
pub fn woe_fit(ds: &Dataset, opts: &WoeOptions) -> Result<WoeTable> {
    let (total_goods, total_bads) = class_totals(ds)?;
    let mut features = Vec::with_capacity(ds.n_features());
    for f in &ds.schema {
        let fine = fit_fine_bins(ds, &f.name, opts.fine_bins)?;
        let mut spec = if opts.coarse {
            coarse_merge(&fine, opts.max_bins, opts.min_share)?
        } else {
            fine
        };
        if opts.fallback_unseen && f.kind == FeatureKind::Categorical && !spec.bins.is_empty() {
            let largest = spec
                .bins
                .iter()
                .enumerate()
                .max_by_key(|(_, b)| b.count())
                .map(|(i, _)| i);
            spec.fallback = largest;
        }
        features.push(spec);
    }
    Ok(WoeTable {
        features,
        total_goods,
        total_bads,
    })
}

/// Extended-real endpoints as exact decimal text ("-inf"/"inf" allowed).
mod decimal_text {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let text = String::deserialize(d)?;
        match text.as_str() {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            other => other.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// 17-significant-digit decimal text: enough digits to round-trip any f64.
pub(crate) mod sig17 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:.16e}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
