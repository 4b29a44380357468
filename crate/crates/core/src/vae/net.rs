//! Forward evaluation: encoder, reparametrization, decoder and the
//! per-sample evidence lower bound.
//!
//! The encoder maps an input to the mean and log-variance of a diagonal
//! Gaussian over the latent space; the decoder maps a latent draw to the
//! mean (through a sigmoid) and log-variance of a diagonal Gaussian over
//! the input space. Log-variances are clamped to `[-10, 10]` so their
//! exponentials never overflow.

use serde::{Deserialize, Serialize};

use super::params::{Layer, VaeParams};
use crate::error::{Error, Result};

pub const LOG_VAR_CLAMP: f64 = 10.0;
const LN_2PI: f64 = 1.8378770664093453;

/// Posterior moments `q(z|x) = N(mu, diag(exp(log_var)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedMoments {
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
}

/// Likelihood moments `p(x|z) = N(mu, diag(exp(log_var)))` with `mu` in
/// `(0,1)` from the sigmoid output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedMoments {
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
}

/// The two ELBO terms for one sample: `elbo = recon - kl`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboTerms {
    /// Single-sample reconstruction log-likelihood `log p(x|z)`.
    pub recon: f64,
    /// Closed-form `KL[q(z|x) || N(0, I)]`, always non-negative.
    pub kl: f64,
}

impl ElboTerms {
    pub fn neg_elbo(&self) -> f64 {
        -(self.recon - self.kl)
    }
}

#[inline]
pub(crate) fn sigmoid(v: f64) -> f64 {
    let s = if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    };
    // Keep the mean strictly inside (0,1) even for saturated inputs.
    s.max(f64::MIN_POSITIVE).min(1.0 - f64::EPSILON)
}

#[inline]
fn clamp_log_var(v: f64) -> f64 {
    v.clamp(-LOG_VAR_CLAMP, LOG_VAR_CLAMP)
}

fn hidden_stack(layers: &[Layer], input: &[f64]) -> Vec<Vec<f64>> {
    let mut activations = Vec::with_capacity(layers.len());
    let mut current = input.to_vec();
    for layer in layers {
        let pre = layer.forward(&current);
        current = pre.iter().map(|v| v.tanh()).collect();
        activations.push(current.clone());
    }
    activations
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    /// tanh activations of each encoder hidden layer.
    pub enc_act: Vec<Vec<f64>>,
    pub mu_z: Vec<f64>,
    pub lv_z_raw: Vec<f64>,
    pub lv_z: Vec<f64>,
    pub sigma_z: Vec<f64>,
    pub z: Vec<f64>,
    /// tanh activations of each decoder hidden layer.
    pub dec_act: Vec<Vec<f64>>,
    pub mu_x: Vec<f64>,
    pub lv_x_raw: Vec<f64>,
    pub lv_x: Vec<f64>,
}

pub(crate) fn forward(p: &VaeParams, x: &[f64], eps: &[f64]) -> Result<Trace> {
    if x.len() != p.arch.input_dim {
        return Err(Error::Shape(format!(
            "input has {} entries, architecture expects {}",
            x.len(),
            p.arch.input_dim
        )));
    }
    if eps.len() != p.arch.latent_dim {
        return Err(Error::Shape(format!(
            "eps has {} entries, latent dimension is {}",
            eps.len(),
            p.arch.latent_dim
        )));
    }

    let enc_act = hidden_stack(&p.enc_hidden, x);
    let top = enc_act.last().expect("at least one hidden layer");
    let mu_z = p.enc_mu.forward(top);
    let lv_z_raw = p.enc_log_var.forward(top);
    let lv_z: Vec<f64> = lv_z_raw.iter().map(|&v| clamp_log_var(v)).collect();
    let sigma_z: Vec<f64> = lv_z.iter().map(|v| (0.5 * v).exp()).collect();
    let z: Vec<f64> = mu_z
        .iter()
        .zip(&sigma_z)
        .zip(eps)
        .map(|((m, s), e)| m + s * e)
        .collect();

    let dec_act = hidden_stack(&p.dec_hidden, &z);
    let top = dec_act.last().expect("at least one hidden layer");
    let mu_x: Vec<f64> = p.dec_mu.forward(top).iter().map(|&v| sigmoid(v)).collect();
    let lv_x_raw = p.dec_log_var.forward(top);
    let lv_x: Vec<f64> = lv_x_raw.iter().map(|&v| clamp_log_var(v)).collect();

    Ok(Trace {
        enc_act,
        mu_z,
        lv_z_raw,
        lv_z,
        sigma_z,
        z,
        dec_act,
        mu_x,
        lv_x_raw,
        lv_x,
    })
}

/// Posterior moments for one input.
pub fn encode(p: &VaeParams, x: &[f64]) -> Result<EncodedMoments> {
    if x.len() != p.arch.input_dim {
        return Err(Error::Shape(format!(
            "input has {} entries, architecture expects {}",
            x.len(),
            p.arch.input_dim
        )));
    }
    let act = hidden_stack(&p.enc_hidden, x);
    let top = act.last().expect("at least one hidden layer");
    let mu = p.enc_mu.forward(top);
    let log_var = p
        .enc_log_var
        .forward(top)
        .iter()
        .map(|&v| clamp_log_var(v))
        .collect();
    Ok(EncodedMoments { mu, log_var })
}

/// Draw one latent point: `z = mu + exp(log_var / 2) * eps`, with the noise
/// supplied by the caller so gradients can flow through `mu` and `sigma`.
pub fn reparametrize(m: &EncodedMoments, eps: &[f64]) -> Vec<f64> {
    debug_assert_eq!(m.mu.len(), eps.len());
    m.mu.iter()
        .zip(&m.log_var)
        .zip(eps)
        .map(|((mu, lv), e)| mu + (0.5 * lv).exp() * e)
        .collect()
}

/// Likelihood moments for one latent point.
pub fn decode(p: &VaeParams, z: &[f64]) -> Result<DecodedMoments> {
    if z.len() != p.arch.latent_dim {
        return Err(Error::Shape(format!(
            "latent point has {} entries, architecture expects {}",
            z.len(),
            p.arch.latent_dim
        )));
    }
    let act = hidden_stack(&p.dec_hidden, z);
    let top = act.last().expect("at least one hidden layer");
    let mu = p.dec_mu.forward(top).iter().map(|&v| sigmoid(v)).collect();
    let log_var = p
        .dec_log_var
        .forward(top)
        .iter()
        .map(|&v| clamp_log_var(v))
        .collect();
    Ok(DecodedMoments { mu, log_var })
}

pub(crate) fn elbo_from_trace(trace: &Trace, x: &[f64]) -> ElboTerms {
    // KL[N(mu, sigma^2) || N(0,1)] summed over latent coordinates.
    let kl: f64 = trace
        .mu_z
        .iter()
        .zip(&trace.lv_z)
        .map(|(m, lv)| 0.5 * (m * m + lv.exp() - 1.0 - lv))
        .sum();
    // Diagonal Gaussian log density of x under the decoder moments.
    let recon: f64 = x
        .iter()
        .zip(&trace.mu_x)
        .zip(&trace.lv_x)
        .map(|((xv, mu), lv)| {
            let diff = xv - mu;
            -0.5 * (LN_2PI + lv + diff * diff * (-lv).exp())
        })
        .sum();
    ElboTerms { recon, kl }
}

/// Single-sample ELBO terms for an input and a fixed noise draw.
pub fn elbo_terms(p: &VaeParams, x: &[f64], eps: &[f64]) -> Result<ElboTerms> {
    let trace = forward(p, x, eps)?;
    Ok(elbo_from_trace(&trace, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vae::{init_params, preset, Architecture, VaeParams};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_arch(dx: usize, dz: usize, h: usize) -> Architecture {
        Architecture {
            input_dim: dx,
            latent_dim: dz,
            hidden_layers: 1,
            hidden_units: h,
            learning_rate: 0.01,
            epochs: 1,
            preset_id: None,
        }
    }

    #[test]
    fn zero_params_encode_to_zero_moments() {
        let p = VaeParams::zeros(&tiny_arch(4, 2, 3));
        let m = encode(&p, &[0.3, -0.2, 0.9, 0.0]).unwrap();
        assert_eq!(m.mu, vec![0.0, 0.0]);
        assert_eq!(m.log_var, vec![0.0, 0.0]);
    }

    #[test]
    fn hand_set_scalar_network() {
        // 1-1-1 network with unit weights and zero biases: x = 0 gives
        // h = tanh(0) = 0 and mu = 0.
        let mut p = VaeParams::zeros(&tiny_arch(1, 1, 1));
        p.enc_hidden[0].w.data[0] = 1.0;
        p.enc_mu.w.data[0] = 1.0;
        let m = encode(&p, &[0.0]).unwrap();
        assert_eq!(m.mu, vec![0.0]);
    }

    #[test]
    fn encode_matches_naive_triple_loop() {
        let arch = tiny_arch(5, 3, 7);
        let p = init_params(&arch, 42).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..5).map(|_| rng.gen::<f64>()).collect();

        // Independent evaluation with explicit index loops.
        let mut h = vec![0.0; 7];
        for i in 0..7 {
            let mut acc = p.enc_hidden[0].b[i];
            for j in 0..5 {
                acc += p.enc_hidden[0].w.get(i, j) * x[j];
            }
            h[i] = acc.tanh();
        }
        let mut mu = vec![0.0; 3];
        let mut lv = vec![0.0; 3];
        for i in 0..3 {
            let mut acc_m = p.enc_mu.b[i];
            let mut acc_v = p.enc_log_var.b[i];
            for j in 0..7 {
                acc_m += p.enc_mu.w.get(i, j) * h[j];
                acc_v += p.enc_log_var.w.get(i, j) * h[j];
            }
            mu[i] = acc_m;
            lv[i] = acc_v.clamp(-10.0, 10.0);
        }

        let m = encode(&p, &x).unwrap();
        for i in 0..3 {
            assert!((m.mu[i] - mu[i]).abs() < 1e-12);
            assert!((m.log_var[i] - lv[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn decode_matches_naive_triple_loop() {
        let arch = tiny_arch(4, 2, 6);
        let p = init_params(&arch, 9).unwrap();
        let z = vec![0.3, -0.7];

        let mut h = vec![0.0; 6];
        for i in 0..6 {
            let mut acc = p.dec_hidden[0].b[i];
            for j in 0..2 {
                acc += p.dec_hidden[0].w.get(i, j) * z[j];
            }
            h[i] = acc.tanh();
        }
        let d = decode(&p, &z).unwrap();
        for i in 0..4 {
            let mut acc = p.dec_mu.b[i];
            for j in 0..6 {
                acc += p.dec_mu.w.get(i, j) * h[j];
            }
            let want = 1.0 / (1.0 + (-acc).exp());
            assert!((d.mu[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_params_decode_to_half() {
        let p = VaeParams::zeros(&tiny_arch(3, 2, 4));
        let d = decode(&p, &[0.0, 0.0]).unwrap();
        assert_eq!(d.mu, vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn saturated_sigmoid_stays_positive() {
        let mut p = VaeParams::zeros(&tiny_arch(1, 1, 1));
        p.dec_hidden[0].w.data[0] = 1.0;
        p.dec_mu.w.data[0] = 1000.0;
        p.dec_mu.b[0] = -2000.0;
        let d = decode(&p, &[5.0]).unwrap();
        assert!(d.mu[0] > 0.0 && d.mu[0] < 0.01, "mu {}", d.mu[0]);
    }

    #[test]
    fn reparametrize_algebra() {
        let m = EncodedMoments {
            mu: vec![1.0, 2.0],
            log_var: vec![4.0f64.ln(), 9.0f64.ln()],
        };
        // eps = 0 collapses to the mean.
        assert_eq!(reparametrize(&m, &[0.0, 0.0]), vec![1.0, 2.0]);
        // Unit log-variance shifts by eps exactly.
        let unit = EncodedMoments {
            mu: vec![0.5],
            log_var: vec![0.0],
        };
        assert_eq!(reparametrize(&unit, &[0.25]), vec![0.75]);
        // Hand arithmetic: 1 + 2*1 and 2 + 3*(-1).
        let z = reparametrize(&m, &[1.0, -1.0]);
        assert!((z[0] - 3.0).abs() < 1e-12);
        assert!((z[1] - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn kl_of_standard_normal_posterior_is_zero() {
        let p = VaeParams::zeros(&tiny_arch(2, 2, 3));
        let t = elbo_terms(&p, &[0.5, 0.5], &[0.0, 0.0]).unwrap();
        assert_eq!(t.kl, 0.0);
    }

    #[test]
    fn kl_closed_form_unit_shift() {
        // mu = 1, log_var = 0 in one dimension: KL = 0.5(1 + 1 - 1 - 0).
        let mut p = VaeParams::zeros(&tiny_arch(1, 1, 1));
        p.enc_mu.b[0] = 1.0;
        let t = elbo_terms(&p, &[0.5], &[0.0]).unwrap();
        assert!((t.kl - 0.5).abs() < 1e-15);
    }

    #[test]
    fn recon_at_gaussian_peak() {
        // x equal to the decoded mean with unit variance: the log density
        // is -0.5 ln(2 pi) per dimension.
        let p = VaeParams::zeros(&tiny_arch(1, 1, 1));
        let t = elbo_terms(&p, &[0.5], &[0.0]).unwrap();
        assert!((t.recon - (-0.5 * LN_2PI)).abs() < 1e-12);
    }

    #[test]
    fn kl_is_nonnegative_for_random_params() {
        let arch = tiny_arch(6, 2, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for seed in 0..20 {
            let p = init_params(&arch, seed).unwrap();
            let x: Vec<f64> = (0..6).map(|_| rng.gen::<f64>()).collect();
            let eps: Vec<f64> = (0..2).map(|_| rng.gen::<f64>() - 0.5).collect();
            let t = elbo_terms(&p, &x, &eps).unwrap();
            assert!(t.kl >= 0.0);
        }
    }

    #[test]
    fn encode_rejects_wrong_dims() {
        let p = VaeParams::zeros(&tiny_arch(3, 2, 4));
        assert!(encode(&p, &[0.0, 0.0]).is_err());
        assert!(decode(&p, &[0.0]).is_err());
    }

    #[test]
    fn multi_layer_forward_runs() {
        let arch = Architecture {
            input_dim: 5,
            latent_dim: 2,
            hidden_layers: 3,
            hidden_units: 4,
            learning_rate: 0.01,
            epochs: 1,
            preset_id: None,
        };
        let p = init_params(&arch, 5).unwrap();
        let m = encode(&p, &[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        assert_eq!(m.mu.len(), 2);
        let d = decode(&p, &m.mu).unwrap();
        assert_eq!(d.mu.len(), 5);
    }
}
