//! The variational autoencoder: tanh MLP encoder/decoder pair trained by
//! stochastic gradient descent on a single-sample reparametrized evidence
//! lower bound, with exact hand-derived gradients and adagrad updates.

mod adagrad;
mod backward;
mod net;
mod params;
mod train;

pub use adagrad::{adagrad_step, AdagradState};
pub use backward::backward;
pub use net::{decode, elbo_terms, encode, reparametrize, DecodedMoments, ElboTerms, EncodedMoments};
pub use params::{init_params, load_params, save_params, Layer, VaeParams, PARAMS_FORMAT_VERSION};
pub use train::{train, EpochStats, TrainConfig, TrainHistory};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Network layout and optimization schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset_id: Option<String>,
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim < 1
            || self.latent_dim < 1
            || self.hidden_layers < 1
            || self.hidden_units < 1
        {
            return Err(Error::Config("all architecture dimensions must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Preset rows: (id, latent dim, hidden layers, hidden units, learning
/// rate, epochs). Input dimension comes from the data.
pub const PRESETS: &[(&str, usize, usize, usize, f64, usize)] = &[
    ("arch1", 2, 1, 5, 0.01, 50),
    ("arch2", 2, 1, 10, 0.01, 50),
    ("arch3", 2, 1, 20, 0.01, 50),
    ("arch4", 2, 1, 30, 0.01, 50),
    ("arch5", 2, 1, 40, 0.01, 50),
    ("arch6", 2, 1, 50, 0.01, 50),
    ("arch7", 2, 1, 60, 0.01, 50),
    ("arch8", 2, 1, 70, 0.01, 50),
    ("arch9", 2, 1, 30, 0.007, 50),
    ("arch10", 2, 1, 30, 0.008, 50),
    ("arch11", 2, 1, 30, 0.009, 50),
    ("arch12", 2, 1, 30, 0.011, 50),
    ("arch13", 2, 1, 30, 0.012, 50),
    ("arch14", 2, 1, 30, 0.013, 50),
    ("arch15", 5, 1, 30, 0.01, 50),
    ("arch16", 10, 1, 30, 0.01, 50),
    ("arch17", 15, 1, 30, 0.01, 50),
    ("arch18", 2, 2, 30, 0.01, 50),
    ("arch19", 2, 3, 30, 0.01, 50),
    ("arch20", 2, 4, 30, 0.01, 50),
    ("arch21", 2, 5, 30, 0.01, 50),
];

/// Instantiate a preset for data of the given input dimension.
pub fn preset(id: &str, input_dim: usize) -> Result<Architecture> {
    let row = PRESETS
        .iter()
        .find(|(name, ..)| *name == id)
        .ok_or_else(|| Error::Config(format!("unknown architecture preset `{id}`")))?;
    let arch = Architecture {
        input_dim,
        latent_dim: row.1,
        hidden_layers: row.2,
        hidden_units: row.3,
        learning_rate: row.4,
        epochs: row.5,
        preset_id: Some(row.0.to_string()),
    };
    arch.validate()?;
    Ok(arch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_table_rows() {
        assert_eq!(PRESETS.len(), 21);
        let a = preset("arch4", 20).unwrap();
        assert_eq!(
            (a.latent_dim, a.hidden_layers, a.hidden_units, a.learning_rate, a.epochs),
            (2, 1, 30, 0.01, 50)
        );
        let a = preset("arch17", 12).unwrap();
        assert_eq!((a.latent_dim, a.hidden_units), (15, 30));
        let a = preset("arch21", 12).unwrap();
        assert_eq!(a.hidden_layers, 5);
        let a = preset("arch9", 12).unwrap();
        assert_eq!(a.learning_rate, 0.007);
        assert!(preset("arch22", 12).is_err());
    }
}
