//! Latent representations of credit portfolios.
//!
//! The crate covers the full pipeline:
//!
//! 1. [`data`] — CSV ingestion with an explicit schema, majority-class
//!    train/eval splitting and synthetic portfolio generation.
//! 2. [`transform`] — Weight-of-Evidence binning (fine and coarse classing)
//!    plus the comparison transforms (full-rank PCA, standardization, raw
//!    pass-through), all rescaled to `[0, 1]`.
//! 3. [`vae`] — a from-scratch variational autoencoder: tanh MLP encoder and
//!    decoder, single-sample reparametrized ELBO, manual backpropagation and
//!    adagrad optimization.
//! 4. [`embed`] — posterior-mean latent embeddings (exact and Monte Carlo).
//! 5. [`cluster`] — iterative bisecting labelling of the latent space under
//!    minimum-size and minimum-centroid-distance constraints.
//! 6. [`analyze`] — per-cluster default rates with binomial confidence
//!    intervals, pairwise separation, salient dimensions and a small logistic
//!    model for probability-of-default colormaps.
//!
//! Everything is deterministic for a fixed seed; see [`seed`] for how stage
//! seeds are derived from a master seed.

pub mod analyze;
pub mod cluster;
pub mod data;
pub mod embed;
pub mod error;
pub mod linalg;
pub mod seed;
pub mod transform;
pub mod vae;

pub use error::{Error, Result};
