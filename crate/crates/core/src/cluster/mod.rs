//! Iterative bisecting labelling of the latent space.
//!
//! A work queue starts with all points. Each item is split two ways with
//! Ward's criterion; the split is kept only when both halves clear the
//! minimum population and the centroids are farther apart than `rho`.
//! Rejected items become final clusters. Cluster ids are renumbered by
//! descending size at the end, so cluster 1 is always the largest.

mod ward;

pub use ward::{ward_bisect, Bisection, EXACT_BISECT_MAX};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use crate::embed::LatentEmbedding;
use crate::error::{Error, Result};
use crate::linalg::euclidean_distance;

/// Bisection acceptance thresholds. Both are data dependent; `auto` picks
/// the defaults used throughout: `n_min = max(50, 0.5% of n)`, `rho = 0.25`
/// latent units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelingConfig {
    pub n_min: usize,
    pub rho: f64,
    pub subsample_cap: usize,
    pub seed: u64,
}

impl LabelingConfig {
    pub fn auto(n: usize, seed: u64) -> Self {
        LabelingConfig {
            n_min: 50usize.max(n / 200),
            rho: 0.25,
            subsample_cap: 2000,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_min < 1 {
            return Err(Error::Config("n_min must be >= 1".into()));
        }
        if !(self.rho > 0.0) {
            return Err(Error::Config("rho must be positive".into()));
        }
        Ok(())
    }
}

/// A split that passed both acceptance checks, kept for auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedSplit {
    pub size_a: usize,
    pub size_b: usize,
    pub centroid_distance: f64,
}

/// Final cluster labels (1-based, ordered by descending cluster size),
/// centroids and sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<u32>,
    pub centroids: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    pub accepted_splits: Vec<AcceptedSplit>,
}

impl ClusterAssignment {
    pub fn n_clusters(&self) -> usize {
        self.centroids.len()
    }

    /// Export `row_id,cluster` lines; `row_index` supplies the ids.
    pub fn to_csv(&self, row_index: &[usize], path: &Path, header_comment: Option<&str>) -> Result<()> {
        if row_index.len() != self.labels.len() {
            return Err(Error::Shape(format!(
                "{} row ids but {} labels",
                row_index.len(),
                self.labels.len()
            )));
        }
        let mut out = String::new();
        if let Some(comment) = header_comment {
            out.push_str("# ");
            out.push_str(comment);
            out.push('\n');
        }
        out.push_str("row_id,cluster\n");
        for (id, label) in row_index.iter().zip(&self.labels) {
            out.push_str(&format!("{id},{label}\n"));
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Queue-driven bisecting labelling of an embedding.
pub fn label_latent(emb: &LatentEmbedding, cfg: &LabelingConfig) -> Result<ClusterAssignment> {
    cfg.validate()?;
    let n = emb.n_rows();
    if n == 0 {
        return Err(Error::Cluster("cannot label an empty embedding".into()));
    }
    if n < cfg.n_min {
        return Err(Error::Cluster(format!(
            "{n} points is fewer than n_min = {}",
            cfg.n_min
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut queue: VecDeque<Vec<usize>> = VecDeque::new();
    queue.push_back((0..n).collect());
    let mut final_clusters: Vec<Vec<usize>> = Vec::new();
    let mut accepted_splits = Vec::new();

    while let Some(item) = queue.pop_front() {
        if item.len() < 2 {
            final_clusters.push(item);
            continue;
        }
        let points: Vec<Vec<f64>> = item.iter().map(|&i| emb.points[i].clone()).collect();
        let bisection = ward_bisect(&points, cfg.subsample_cap, &mut rng)?;
        let Some(b) = bisection else {
            final_clusters.push(item);
            continue;
        };
        let (mut half_a, mut half_b) = (Vec::new(), Vec::new());
        for (&idx, &s) in item.iter().zip(&b.side) {
            if s {
                half_b.push(idx);
            } else {
                half_a.push(idx);
            }
        }
        let distance = euclidean_distance(&b.centroid_a, &b.centroid_b);
        let accept = half_a.len() > cfg.n_min && half_b.len() > cfg.n_min && distance > cfg.rho;
        if accept {
            accepted_splits.push(AcceptedSplit {
                size_a: half_a.len(),
                size_b: half_b.len(),
                centroid_distance: distance,
            });
            queue.push_back(half_a);
            queue.push_back(half_b);
        } else {
            final_clusters.push(item);
        }
    }

    // Renumber 1..L by descending size; ties keep finalization order.
    let mut order: Vec<usize> = (0..final_clusters.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(final_clusters[i].len()));

    let dz = emb.latent_dim();
    let mut labels = vec![0u32; n];
    let mut centroids = Vec::with_capacity(order.len());
    let mut sizes = Vec::with_capacity(order.len());
    for (rank, &ci) in order.iter().enumerate() {
        let members = &final_clusters[ci];
        let id = (rank + 1) as u32;
        let mut centroid = vec![0.0; dz];
        for &i in members {
            labels[i] = id;
            for (c, v) in centroid.iter_mut().zip(&emb.points[i]) {
                *c += v;
            }
        }
        for c in &mut centroid {
            *c /= members.len() as f64;
        }
        centroids.push(centroid);
        sizes.push(members.len());
    }

    Ok(ClusterAssignment {
        labels,
        centroids,
        sizes,
        accepted_splits,
    })
}

/// Nearest-centroid assignment of new points to existing clusters; ties go
/// to the smallest cluster id.
pub fn assign_new(asg: &ClusterAssignment, new_points: &[Vec<f64>]) -> Result<Vec<u32>> {
    if asg.centroids.is_empty() {
        return Err(Error::Cluster("assignment has no clusters".into()));
    }
    Ok(new_points
        .iter()
        .map(|p| {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (k, c) in asg.centroids.iter().enumerate() {
                let d = euclidean_distance(p, c);
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            (best + 1) as u32
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blob_embedding(centers: &[(f64, f64)], per_blob: usize, spread: f64, seed: u64) -> (LatentEmbedding, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::new();
        let mut truth = Vec::new();
        for (k, &(cx, cy)) in centers.iter().enumerate() {
            for _ in 0..per_blob {
                points.push(vec![
                    cx + spread * (rng.gen::<f64>() - 0.5),
                    cy + spread * (rng.gen::<f64>() - 0.5),
                ]);
                truth.push(k);
            }
        }
        let n = points.len();
        let emb = LatentEmbedding {
            log_vars: vec![vec![0.0; 2]; n],
            row_index: (0..n).collect(),
            points,
        };
        (emb, truth)
    }

    fn adjusted_rand_index(a: &[usize], b: &[u32]) -> f64 {
        let ka = a.iter().max().unwrap() + 1;
        let kb = *b.iter().max().unwrap() as usize + 1;
        let mut table = vec![vec![0usize; kb]; ka];
        for (&x, &y) in a.iter().zip(b) {
            table[x][y as usize - 1] += 1;
        }
        let comb2 = |v: usize| (v * v.saturating_sub(1)) as f64 / 2.0;
        let sum_ij: f64 = table.iter().flatten().map(|&v| comb2(v)).sum();
        let sum_a: f64 = table.iter().map(|row| comb2(row.iter().sum())).sum();
        let sum_b: f64 = (0..kb)
            .map(|j| comb2(table.iter().map(|row| row[j]).sum()))
            .sum();
        let total = comb2(a.len());
        let expected = sum_a * sum_b / total;
        let max = 0.5 * (sum_a + sum_b);
        (sum_ij - expected) / (max - expected)
    }

    #[test]
    fn tight_blob_yields_single_cluster() {
        let (emb, _) = blob_embedding(&[(0.0, 0.0)], 400, 0.1, 1);
        let cfg = LabelingConfig {
            n_min: 20,
            rho: 1.0,
            subsample_cap: 2000,
            seed: 5,
        };
        let asg = label_latent(&emb, &cfg).unwrap();
        assert_eq!(asg.n_clusters(), 1);
        assert!(asg.labels.iter().all(|&l| l == 1));
        assert!(asg.accepted_splits.is_empty());
    }

    #[test]
    fn five_blobs_recovered() {
        let centers = [(-10.0, -10.0), (10.0, -10.0), (0.0, 10.0), (-12.0, 8.0), (12.0, 9.0)];
        let (emb, truth) = blob_embedding(&centers, 150, 0.8, 2);
        let cfg = LabelingConfig {
            n_min: 50,
            rho: 0.25,
            subsample_cap: 2000,
            seed: 7,
        };
        let asg = label_latent(&emb, &cfg).unwrap();
        assert_eq!(asg.n_clusters(), 5);
        let ari = adjusted_rand_index(&truth, &asg.labels);
        assert!(ari > 0.95, "ARI {ari}");
        // Every accepted split respected the distance threshold.
        assert!(asg.accepted_splits.iter().all(|s| s.centroid_distance > cfg.rho));
        // Every final cluster respects the population floor.
        assert!(asg.sizes.iter().all(|&s| s >= cfg.n_min));
    }

    #[test]
    fn undersized_half_rejects_split() {
        // Two blobs, one with fewer than n_min points: the split that
        // would isolate it fails the population check.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut points = Vec::new();
        for _ in 0..300 {
            points.push(vec![rng.gen::<f64>() * 0.5, rng.gen::<f64>() * 0.5]);
        }
        for _ in 0..29 {
            points.push(vec![20.0 + rng.gen::<f64>() * 0.5, rng.gen::<f64>() * 0.5]);
        }
        let n = points.len();
        let emb = LatentEmbedding {
            log_vars: vec![vec![0.0; 2]; n],
            row_index: (0..n).collect(),
            points,
        };
        let cfg = LabelingConfig {
            n_min: 30,
            rho: 0.25,
            subsample_cap: 2000,
            seed: 4,
        };
        let asg = label_latent(&emb, &cfg).unwrap();
        assert_eq!(asg.n_clusters(), 1);
    }

    #[test]
    fn labels_are_ordered_by_size() {
        let (emb, _) = blob_embedding(&[(0.0, 0.0), (30.0, 0.0)], 100, 0.5, 6);
        // Drop some points of the second blob so sizes differ.
        let mut points = emb.points;
        points.truncate(170);
        let n = points.len();
        let emb = LatentEmbedding {
            log_vars: vec![vec![0.0; 2]; n],
            row_index: (0..n).collect(),
            points,
        };
        let cfg = LabelingConfig {
            n_min: 10,
            rho: 0.25,
            subsample_cap: 2000,
            seed: 8,
        };
        let asg = label_latent(&emb, &cfg).unwrap();
        assert_eq!(asg.sizes, vec![100, 70]);
        assert_eq!(asg.labels[0], 1);
        assert_eq!(asg.labels[169], 2);
    }

    #[test]
    fn relabeling_is_deterministic() {
        let (emb, _) = blob_embedding(&[(0.0, 0.0), (8.0, 8.0), (-9.0, 4.0)], 2500, 1.0, 9);
        let cfg = LabelingConfig {
            n_min: 100,
            rho: 0.25,
            subsample_cap: 1000,
            seed: 10,
        };
        let a = label_latent(&emb, &cfg).unwrap();
        let b = label_latent(&emb, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn assign_new_uses_nearest_centroid_with_smallest_id_ties() {
        let asg = ClusterAssignment {
            labels: vec![1, 2, 3],
            centroids: vec![vec![0.0, 0.0], vec![4.0, 0.0], vec![0.0, 4.0]],
            sizes: vec![1, 1, 1],
            accepted_splits: vec![],
        };
        // Exactly on centroid 3.
        assert_eq!(assign_new(&asg, &[vec![0.0, 4.0]]).unwrap(), vec![3]);
        // Equidistant between centroids 1 and 2: the smaller id wins.
        assert_eq!(assign_new(&asg, &[vec![2.0, 0.0]]).unwrap(), vec![1]);
    }

    #[test]
    fn fresh_draws_assign_to_generating_blob() {
        let centers = [(-8.0, 0.0), (8.0, 0.0), (0.0, 9.0)];
        let (emb, _) = blob_embedding(&centers, 200, 0.8, 11);
        let cfg = LabelingConfig {
            n_min: 50,
            rho: 0.25,
            subsample_cap: 2000,
            seed: 12,
        };
        let asg = label_latent(&emb, &cfg).unwrap();
        let (fresh, truth) = blob_embedding(&centers, 34, 0.8, 400);
        let labels = assign_new(&asg, &fresh.points).unwrap();
        // Map each generator to the cluster its centroid landed in, then
        // demand at least 95% agreement.
        let gen_label = |k: usize| {
            let c = vec![centers[k].0, centers[k].1];
            assign_new(&asg, &[c]).unwrap()[0]
        };
        let expected: Vec<u32> = truth.iter().map(|&k| gen_label(k)).collect();
        let matches = labels.iter().zip(&expected).filter(|(a, b)| a == b).count();
        assert!(matches as f64 >= 0.95 * labels.len() as f64);
    }

    #[test]
    fn n_min_precondition_enforced() {
        let (emb, _) = blob_embedding(&[(0.0, 0.0)], 10, 0.5, 1);
        let cfg = LabelingConfig {
            n_min: 50,
            rho: 0.25,
            subsample_cap: 2000,
            seed: 1,
        };
        assert!(matches!(label_latent(&emb, &cfg), Err(Error::Cluster(_))));
    }
}
