//! Two-way Ward split of a point set.
//!
//! Small instances are split exactly: every bipartition is scored by total
//! within-cluster sum of squares and the minimum wins. Larger instances run
//! agglomerative clustering with Ward linkage (nearest-neighbor-chain) and
//! cut the dendrogram at two clusters; beyond the subsample cap, Ward runs
//! on a seeded uniform subsample and the remaining points join the nearer
//! resulting centroid. Final centroids are always computed over all points.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::squared_distance;

/// Instances up to this size are split by exhaustive search, which is both
/// cheap (2^(m-1) candidates) and exactly optimal in Ward's criterion.
pub const EXACT_BISECT_MAX: usize = 14;

/// Result of one accepted two-way split.
#[derive(Debug, Clone, PartialEq)]
pub struct Bisection {
    /// Half assignment per input point: `false` for the half containing
    /// the first point, `true` for the other.
    pub side: Vec<bool>,
    pub centroid_a: Vec<f64>,
    pub centroid_b: Vec<f64>,
}

/// Split points into two groups. Returns `None` when every point is
/// identical, in which case no meaningful bisection exists.
pub fn ward_bisect(
    points: &[Vec<f64>],
    subsample_cap: usize,
    rng: &mut impl Rng,
) -> Result<Option<Bisection>> {
    let m = points.len();
    if m < 2 {
        return Err(Error::Cluster(format!("cannot bisect {m} point(s)")));
    }
    if points.iter().all(|p| p == &points[0]) {
        return Ok(None);
    }

    let mut side = if m <= EXACT_BISECT_MAX {
        exact_min_wss_bipartition(points)
    } else if m > subsample_cap.max(2) {
        let cap = subsample_cap.max(2);
        let mut chosen: Vec<usize> = sample(rng, m, cap).into_vec();
        chosen.sort_unstable();
        let sub: Vec<Vec<f64>> = chosen.iter().map(|&i| points[i].clone()).collect();
        if sub.iter().all(|p| p == &sub[0]) {
            // Degenerate subsample; fall back to the full agglomeration.
            agglomerative_cut2(points)
        } else {
            let sub_side = agglomerative_cut2(&sub);
            let (ca, cb) = centroids(&sub, &sub_side);
            let mut side = vec![false; m];
            let mut sub_iter = chosen.iter().zip(&sub_side).peekable();
            for (i, side_i) in side.iter_mut().enumerate() {
                if let Some(&(&idx, &s)) = sub_iter.peek() {
                    if idx == i {
                        *side_i = s;
                        sub_iter.next();
                        continue;
                    }
                }
                let da = squared_distance(&points[i], &ca);
                let db = squared_distance(&points[i], &cb);
                *side_i = db < da;
            }
            side
        }
    } else {
        agglomerative_cut2(points)
    };

    // One half could end up empty only in the subsampled nearest-centroid
    // completion of pathological data; refuse the split in that case.
    if side.iter().all(|&s| s) || side.iter().all(|&s| !s) {
        return Ok(None);
    }

    // Normalize so the first point sits on side A.
    if side[0] {
        for s in &mut side {
            *s = !*s;
        }
    }
    let (centroid_a, centroid_b) = centroids(points, &side);
    Ok(Some(Bisection {
        side,
        centroid_a,
        centroid_b,
    }))
}

fn centroids(points: &[Vec<f64>], side: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let d = points[0].len();
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    let mut na = 0usize;
    let mut nb = 0usize;
    for (p, &s) in points.iter().zip(side) {
        let (acc, n) = if s { (&mut b, &mut nb) } else { (&mut a, &mut na) };
        for (dst, v) in acc.iter_mut().zip(p) {
            *dst += v;
        }
        *n += 1;
    }
    for v in &mut a {
        *v /= na.max(1) as f64;
    }
    for v in &mut b {
        *v /= nb.max(1) as f64;
    }
    (a, b)
}

/// Total within-cluster sum of squares of a bipartition.
fn bipartition_wss(points: &[Vec<f64>], side: &[bool]) -> f64 {
    let (ca, cb) = centroids(points, side);
    points
        .iter()
        .zip(side)
        .map(|(p, &s)| squared_distance(p, if s { &cb } else { &ca }))
        .sum()
}

/// Enumerate all bipartitions (point 0 fixed on side A) and return the one
/// minimizing within-cluster sum of squares.
fn exact_min_wss_bipartition(points: &[Vec<f64>]) -> Vec<bool> {
    let m = points.len();
    debug_assert!((2..=EXACT_BISECT_MAX).contains(&m));
    let mut best_side = vec![false; m];
    let mut best_cost = f64::INFINITY;
    for mask in 1u32..(1 << (m - 1)) {
        let side: Vec<bool> = (0..m)
            .map(|i| i > 0 && (mask >> (i - 1)) & 1 == 1)
            .collect();
        let cost = bipartition_wss(points, &side);
        if cost < best_cost {
            best_cost = cost;
            best_side = side;
        }
    }
    best_side
}

/// Agglomerative Ward clustering by the nearest-neighbor-chain algorithm,
/// stopped when two clusters remain. Quadratic time and memory.
fn agglomerative_cut2(points: &[Vec<f64>]) -> Vec<bool> {
    let m = points.len();
    debug_assert!(m >= 2);

    // Ward merge cost between singletons: ||a - b||^2 / 2.
    let mut dist = vec![0.0f64; m * m];
    for i in 0..m {
        for j in (i + 1)..m {
            let d = 0.5 * squared_distance(&points[i], &points[j]);
            dist[i * m + j] = d;
            dist[j * m + i] = d;
        }
    }
    let mut alive = vec![true; m];
    let mut size = vec![1.0f64; m];
    let mut members: Vec<Vec<u32>> = (0..m as u32).map(|i| vec![i]).collect();
    let mut n_active = m;
    let mut chain: Vec<usize> = Vec::new();

    while n_active > 2 {
        if chain.len() < 2 {
            let start = alive.iter().position(|&a| a).expect("active cluster");
            chain.clear();
            chain.push(start);
        }
        loop {
            let x = *chain.last().unwrap();
            let prev = if chain.len() >= 2 {
                Some(chain[chain.len() - 2])
            } else {
                None
            };
            // Nearest active neighbor, preferring the previous chain
            // element on ties so reciprocal pairs are detected.
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| dist[x * m + p]);
            for c in 0..m {
                if c == x || !alive[c] {
                    continue;
                }
                let d = dist[x * m + c];
                if d < best_d {
                    best_d = d;
                    best = Some(c);
                }
            }
            let y = best.expect("at least two active clusters");
            if prev == Some(y) {
                merge(&mut dist, &mut alive, &mut size, &mut members, m, x, y);
                chain.pop();
                chain.pop();
                n_active -= 1;
                break;
            }
            chain.push(y);
        }
    }

    let survivors: Vec<usize> = (0..m).filter(|&i| alive[i]).collect();
    let mut side = vec![false; m];
    for &i in &members[survivors[1]] {
        side[i as usize] = true;
    }
    side
}

/// Merge cluster `b` into `a`, updating Ward merge costs by the
/// Lance-Williams recurrence.
fn merge(
    dist: &mut [f64],
    alive: &mut [bool],
    size: &mut [f64],
    members: &mut [Vec<u32>],
    m: usize,
    x: usize,
    y: usize,
) {
    let (a, b) = if x < y { (x, y) } else { (y, x) };
    let (na, nb) = (size[a], size[b]);
    let dab = dist[a * m + b];
    for c in 0..m {
        if !alive[c] || c == a || c == b {
            continue;
        }
        let nc = size[c];
        let dac = dist[a * m + c];
        let dbc = dist[b * m + c];
        let new = ((na + nc) * dac + (nb + nc) * dbc - nc * dab) / (na + nb + nc);
        dist[a * m + c] = new;
        dist[c * m + a] = new;
    }
    size[a] = na + nb;
    alive[b] = false;
    let moved = std::mem::take(&mut members[b]);
    members[a].extend(moved);
}
