//! Network parameters: the encoder and decoder weight matrices and bias
//! vectors, their initialization, and the versioned parameter file.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::Architecture;
use crate::error::{Error, Result};
use crate::linalg::Mat;

pub const PARAMS_FORMAT_VERSION: u32 = 1;

/// One affine layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Mat,
    pub b: Vec<f64>,
}

impl Layer {
    fn zeros(rows: usize, cols: usize) -> Self {
        Layer {
            w: Mat::zeros(rows, cols),
            b: vec![0.0; rows],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.w.matvec(x);
        for (v, b) in y.iter_mut().zip(&self.b) {
            *v += b;
        }
        y
    }
}

/// All trainable parameters. Hidden stacks hold one layer per configured
/// hidden level; the mu and log-variance heads are affine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeParams {
    pub arch: Architecture,
    pub enc_hidden: Vec<Layer>,
    pub enc_mu: Layer,
    pub enc_log_var: Layer,
    pub dec_hidden: Vec<Layer>,
    pub dec_mu: Layer,
    pub dec_log_var: Layer,
}

impl VaeParams {
    /// Zero-valued parameters with the shapes the architecture dictates.
    pub fn zeros(arch: &Architecture) -> Self {
        let h = arch.hidden_units;
        let dx = arch.input_dim;
        let dz = arch.latent_dim;
        let enc_hidden = (0..arch.hidden_layers)
            .map(|l| Layer::zeros(h, if l == 0 { dx } else { h }))
            .collect();
        let dec_hidden = (0..arch.hidden_layers)
            .map(|l| Layer::zeros(h, if l == 0 { dz } else { h }))
            .collect();
        VaeParams {
            arch: arch.clone(),
            enc_hidden,
            enc_mu: Layer::zeros(dz, h),
            enc_log_var: Layer::zeros(dz, h),
            dec_hidden,
            dec_mu: Layer::zeros(dx, h),
            dec_log_var: Layer::zeros(dx, h),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.arch)
    }

    /// Flat views of every parameter block, in a fixed order shared with
    /// [`VaeParams::blocks_mut`]. Optimizer state and gradient containers
    /// index into this order.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.enc_hidden {
            out.push(l.w.data.as_slice());
            out.push(l.b.as_slice());
        }
        for l in [&self.enc_mu, &self.enc_log_var] {
            out.push(l.w.data.as_slice());
            out.push(l.b.as_slice());
        }
        for l in &self.dec_hidden {
            out.push(l.w.data.as_slice());
            out.push(l.b.as_slice());
        }
        for l in [&self.dec_mu, &self.dec_log_var] {
            out.push(l.w.data.as_slice());
            out.push(l.b.as_slice());
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.enc_hidden {
            out.push(l.w.data.as_mut_slice());
            out.push(l.b.as_mut_slice());
        }
        out.push(self.enc_mu.w.data.as_mut_slice());
        out.push(self.enc_mu.b.as_mut_slice());
        out.push(self.enc_log_var.w.data.as_mut_slice());
        out.push(self.enc_log_var.b.as_mut_slice());
        for l in &mut self.dec_hidden {
            out.push(l.w.data.as_mut_slice());
            out.push(l.b.as_mut_slice());
        }
        out.push(self.dec_mu.w.data.as_mut_slice());
        out.push(self.dec_mu.b.as_mut_slice());
        out.push(self.dec_log_var.w.data.as_mut_slice());
        out.push(self.dec_log_var.b.as_mut_slice());
        out
    }

    pub fn n_parameters(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Check every matrix and bias against the architecture.
    pub fn validate_shapes(&self) -> Result<()> {
        let a = &self.arch;
        a.validate()?;
        let (h, dx, dz) = (a.hidden_units, a.input_dim, a.latent_dim);
        if self.enc_hidden.len() != a.hidden_layers || self.dec_hidden.len() != a.hidden_layers {
            return Err(Error::Shape(format!(
                "expected {} hidden layers, found {}/{}",
                a.hidden_layers,
                self.enc_hidden.len(),
                self.dec_hidden.len()
            )));
        }
        for (l, layer) in self.enc_hidden.iter().enumerate() {
            let cols = if l == 0 { dx } else { h };
            layer.w.expect_shape(&format!("encoder hidden {l}"), h, cols)?;
            expect_len(&layer.b, h, "encoder hidden bias")?;
        }
        self.enc_mu.w.expect_shape("encoder mu", dz, h)?;
        expect_len(&self.enc_mu.b, dz, "encoder mu bias")?;
        self.enc_log_var.w.expect_shape("encoder log_var", dz, h)?;
        expect_len(&self.enc_log_var.b, dz, "encoder log_var bias")?;
        for (l, layer) in self.dec_hidden.iter().enumerate() {
            let cols = if l == 0 { dz } else { h };
            layer.w.expect_shape(&format!("decoder hidden {l}"), h, cols)?;
            expect_len(&layer.b, h, "decoder hidden bias")?;
        }
        self.dec_mu.w.expect_shape("decoder mu", dx, h)?;
        expect_len(&self.dec_mu.b, dx, "decoder mu bias")?;
        self.dec_log_var.w.expect_shape("decoder log_var", dx, h)?;
        expect_len(&self.dec_log_var.b, dx, "decoder log_var bias")?;
        Ok(())
    }
}

fn expect_len(v: &[f64], want: usize, name: &str) -> Result<()> {
    if v.len() != want {
        return Err(Error::Shape(format!(
            "{name}: expected length {want}, got {}",
            v.len()
        )));
    }
    Ok(())
}

/// Glorot-uniform initialization: weights from `U(-a, a)` with
/// `a = sqrt(6 / (fan_in + fan_out))`, biases zero. Deterministic per seed.
pub fn init_params(arch: &Architecture, seed: u64) -> Result<VaeParams> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = VaeParams::zeros(arch);
    let mut fill = |layer: &mut Layer| {
        let (fan_out, fan_in) = layer.w.shape();
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for w in &mut layer.w.data {
            *w = rng.gen_range(-a..a);
        }
    };
    for l in &mut params.enc_hidden {
        fill(l);
    }
    fill(&mut params.enc_mu);
    fill(&mut params.enc_log_var);
    for l in &mut params.dec_hidden {
        fill(l);
    }
    fill(&mut params.dec_mu);
    fill(&mut params.dec_log_var);
    Ok(params)
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    version: u32,
    params: VaeParams,
}

/// Write parameters as a versioned JSON container. Serialization uses
/// round-trip float formatting, so the file is lossless at 64 bits.
pub fn save_params(path: &Path, params: &VaeParams) -> Result<()> {
    let file = ParamsFile {
        version: PARAMS_FORMAT_VERSION,
        params: params.clone(),
    };
    fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

/// Read parameters back, rejecting unknown versions, corrupt content,
/// non-finite entries and shape/architecture disagreements.
pub fn load_params(path: &Path) -> Result<VaeParams> {
    let text = fs::read_to_string(path)?;
    let file: ParamsFile = serde_json::from_str(&text)
        .map_err(|e| Error::Artifact(format!("unreadable parameter file: {e}")))?;
    if file.version != PARAMS_FORMAT_VERSION {
        return Err(Error::Artifact(format!(
            "parameter file version {} is not supported (expected {})",
            file.version, PARAMS_FORMAT_VERSION
        )));
    }
    if !file.params.is_finite() {
        return Err(Error::Artifact("parameter file contains non-finite entries".into()));
    }
    file.params.validate_shapes()?;
    Ok(file.params)
}
