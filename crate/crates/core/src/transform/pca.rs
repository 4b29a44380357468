//! Full-rank principal component analysis for the comparison transform.
//!
//! All components are retained (no dimensionality reduction); the fit is an
//! eigendecomposition of the sample covariance matrix, which is plenty
//! stable at the feature counts seen here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, Mat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Component matrix, one eigenvector per column, descending eigenvalue.
    pub components: Mat,
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    /// Fit on rows of a numeric matrix.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::Fit("PCA needs at least two rows".into()));
        }
        let d = rows[0].len();
        let mut mean = vec![0.0; d];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }

        let mut cov = Mat::zeros(d, d);
        for row in rows {
            let centered: Vec<f64> = row.iter().zip(&mean).map(|(v, m)| v - m).collect();
            cov.add_outer(1.0 / (n as f64 - 1.0), &centered, &centered);
        }

        let (eigenvalues, mut components) = sym_eigen(&cov)?;
        // Sign convention: the largest-magnitude loading of each component
        // is positive, making the fit reproducible.
        for c in 0..d {
            let mut best = 0usize;
            for r in 0..d {
                if components.get(r, c).abs() > components.get(best, c).abs() {
                    best = r;
                }
            }
            if components.get(best, c) < 0.0 {
                for r in 0..d {
                    let v = components.get(r, c);
                    components.set(r, c, -v);
                }
            }
        }
        Ok(PcaModel {
            mean,
            components,
            eigenvalues,
        })
    }

    /// Project one row onto all components.
    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = row.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        // coords_j = centered . component_j
        self.components.matvec_t(&centered)
    }

    /// Map component coordinates back to the original space.
    pub fn inverse(&self, coords: &[f64]) -> Vec<f64> {
        let back = self.components.matvec(coords);
        back.iter().zip(&self.mean).map(|(v, m)| v + m).collect()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}
