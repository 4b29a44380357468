//! The training loop: shuffled minibatches, one fresh noise draw per sample
//! per visit, mean-gradient adagrad updates and a per-epoch loss history.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::adagrad::{adagrad_step, AdagradState};
use super::backward::backward;
use super::params::{init_params, VaeParams};
use super::Architecture;
use crate::error::{Error, Result};
use crate::seed;

/// Training configuration. The optimizer follows the reference setup:
/// adagrad with a constant learning rate and a small momentum term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub batch_size: usize,
    pub seed: u64,
    pub adagrad_epsilon: f64,
    pub momentum: f64,
    /// Log epoch losses every this many epochs; 0 disables logging.
    pub log_every: usize,
}

impl TrainConfig {
    pub fn new(architecture: Architecture, seed: u64) -> Self {
        TrainConfig {
            architecture,
            batch_size: 100,
            seed,
            adagrad_epsilon: 1e-8,
            momentum: 0.001,
            log_every: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        self.architecture.validate()?;
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.adagrad_epsilon > 0.0) {
            return Err(Error::Config("adagrad_epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Mean losses of one epoch, in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub neg_elbo: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Per-epoch mean negative ELBO and its two terms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    /// Export as CSV; an optional `# key=value` comment line leads the file.
    pub fn to_csv(&self, path: &Path, header_comment: Option<&str>) -> Result<()> {
        let mut out = String::new();
        if let Some(comment) = header_comment {
            out.push_str("# ");
            out.push_str(comment);
            out.push('\n');
        }
        out.push_str("epoch,neg_elbo,recon,kl\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{},{}\n", e.epoch, e.neg_elbo, e.recon, e.kl));
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Train on rows already transformed into `[0,1]`. Deterministic for a
/// fixed config: initialization, per-epoch shuffles and noise draws all
/// derive from `cfg.seed`.
pub fn train(matrix: &[Vec<f64>], cfg: &TrainConfig) -> Result<(VaeParams, TrainHistory)> {
    cfg.validate()?;
    let n = matrix.len();
    if n < cfg.batch_size {
        return Err(Error::Train(format!(
            "{n} training rows is fewer than the batch size {}",
            cfg.batch_size
        )));
    }
    let dx = cfg.architecture.input_dim;
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != dx {
            return Err(Error::Shape(format!(
                "training row {i} has {} entries, architecture expects {dx}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Train(format!("training row {i} contains non-finite values")));
        }
    }

    let mut params = init_params(&cfg.architecture, seed::derive(cfg.seed, seed::stage::INIT))?;
    let mut state = AdagradState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, seed::stage::TRAIN));
    let dz = cfg.architecture.latent_dim;

    let mut history = TrainHistory::default();
    let mut indices: Vec<usize> = (0..n).collect();

    for epoch in 1..=cfg.architecture.epochs {
        indices.shuffle(&mut rng);
        let mut sum_recon = 0.0;
        let mut sum_kl = 0.0;

        for (batch_no, batch) in indices.chunks(cfg.batch_size).enumerate() {
            let mut grad_sum = params.zeros_like();
            let mut batch_kl = 0.0;
            for &row_idx in batch {
                let eps: Vec<f64> = (0..dz).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let (grads, terms) = backward(&params, &matrix[row_idx], &eps)?;
                if !terms.recon.is_finite() || !terms.kl.is_finite() {
                    return Err(Error::Train(format!(
                        "non-finite loss at epoch {epoch}, batch {}",
                        batch_no + 1
                    )));
                }
                sum_recon += terms.recon;
                sum_kl += terms.kl;
                batch_kl += terms.kl;
                let mut sum_blocks = grad_sum.blocks_mut();
                for (dst, src) in sum_blocks.iter_mut().zip(grads.blocks()) {
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
            // Closed-form KL of two Gaussians is non-negative by
            // construction; a violation means the arithmetic broke.
            assert!(batch_kl >= -1e-12, "negative KL {batch_kl} at epoch {epoch}");

            let scale = 1.0 / batch.len() as f64;
            for block in grad_sum.blocks_mut() {
                for g in block {
                    *g *= scale;
                }
            }
            adagrad_step(
                &mut params,
                &grad_sum,
                &mut state,
                cfg.architecture.learning_rate,
                cfg.adagrad_epsilon,
                cfg.momentum,
            );
            if !params.is_finite() {
                return Err(Error::Train(format!(
                    "parameters diverged at epoch {epoch}, batch {}",
                    batch_no + 1
                )));
            }
        }

        let mean_recon = sum_recon / n as f64;
        let mean_kl = sum_kl / n as f64;
        let stats = EpochStats {
            epoch,
            neg_elbo: -(mean_recon - mean_kl),
            recon: mean_recon,
            kl: mean_kl,
        };
        if cfg.log_every > 0 && epoch % cfg.log_every == 0 {
            log::info!(
                "epoch {epoch}: neg_elbo {:.4}, recon {:.4}, kl {:.4}",
                stats.neg_elbo,
                stats.recon,
                stats.kl
            );
        }
        history.epochs.push(stats);
    }

    Ok((params, history))
}
