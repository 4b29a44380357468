//! Exact reverse-mode gradients of the negative ELBO for one sample and one
//! fixed noise draw.
//!
//! The minimized objective is `J = -(recon - kl)`. Gradients flow through
//! the decoder, the reparametrized latent draw and the encoder; the KL term
//! contributes directly at the posterior moments. Clamped log-variances
//! propagate zero gradient outside the clamp interval.

use super::net::{elbo_from_trace, forward, ElboTerms, Trace, LOG_VAR_CLAMP};
use super::params::{Layer, VaeParams};
use crate::error::Result;

/// Gradient of `J = -(recon - kl)` with respect to every parameter, plus
/// the ELBO terms from the same forward pass.
pub fn backward(p: &VaeParams, x: &[f64], eps: &[f64]) -> Result<(VaeParams, ElboTerms)> {
    let trace = forward(p, x, eps)?;
    let terms = elbo_from_trace(&trace, x);
    let mut grads = p.zeros_like();

    // Decoder output heads.
    let dx = p.arch.input_dim;
    let mut d_mu_raw = vec![0.0; dx];
    let mut d_lv_x = vec![0.0; dx];
    for m in 0..dx {
        let mu = trace.mu_x[m];
        let inv_var = (-trace.lv_x[m]).exp();
        let diff = mu - x[m];
        // dJ/dmu through the Gaussian density, then through the sigmoid.
        d_mu_raw[m] = diff * inv_var * mu * (1.0 - mu);
        let gate = clamp_gate(trace.lv_x_raw[m]);
        d_lv_x[m] = 0.5 * (1.0 - diff * diff * inv_var) * gate;
    }
    let dec_top = trace.dec_act.last().expect("hidden layer");
    accumulate_head(&mut grads.dec_mu, &d_mu_raw, dec_top);
    accumulate_head(&mut grads.dec_log_var, &d_lv_x, dec_top);

    let mut d_act = add_vec(
        &p.dec_mu.w.matvec_t(&d_mu_raw),
        &p.dec_log_var.w.matvec_t(&d_lv_x),
    );

    // Decoder hidden stack, last layer first. The input of layer 0 is z.
    let d_z = backprop_stack(
        &p.dec_hidden,
        &mut grads.dec_hidden,
        &trace.dec_act,
        &trace.z,
        &mut d_act,
    );

    // Reparametrization: z = mu + sigma * eps with sigma = exp(lv/2), plus
    // the closed-form KL contributions at the posterior moments.
    let dz_count = p.arch.latent_dim;
    let mut d_mu_z = vec![0.0; dz_count];
    let mut d_lv_z = vec![0.0; dz_count];
    for j in 0..dz_count {
        d_mu_z[j] = d_z[j] + trace.mu_z[j];
        let through_sigma = d_z[j] * eps[j] * 0.5 * trace.sigma_z[j];
        let kl_term = 0.5 * (trace.lv_z[j].exp() - 1.0);
        d_lv_z[j] = (through_sigma + kl_term) * clamp_gate(trace.lv_z_raw[j]);
    }
    let enc_top = trace.enc_act.last().expect("hidden layer");
    accumulate_head(&mut grads.enc_mu, &d_mu_z, enc_top);
    accumulate_head(&mut grads.enc_log_var, &d_lv_z, enc_top);

    let mut d_act = add_vec(
        &p.enc_mu.w.matvec_t(&d_mu_z),
        &p.enc_log_var.w.matvec_t(&d_lv_z),
    );
    backprop_stack(
        &p.enc_hidden,
        &mut grads.enc_hidden,
        &trace.enc_act,
        x,
        &mut d_act,
    );

    Ok((grads, terms))
}

#[inline]
fn clamp_gate(raw: f64) -> f64 {
    if raw > -LOG_VAR_CLAMP && raw < LOG_VAR_CLAMP {
        1.0
    } else {
        0.0
    }
}

/// `grad.w += d (x)^T`, `grad.b += d` for an affine head.
fn accumulate_head(grad: &mut Layer, d: &[f64], input: &[f64]) {
    grad.w.add_outer(1.0, d, input);
    for (b, v) in grad.b.iter_mut().zip(d) {
        *b += v;
    }
}

/// Backpropagate through a tanh hidden stack. `d_act` enters as the
/// gradient at the stack's final activation; the return value is the
/// gradient at the stack's input.
fn backprop_stack(
    layers: &[Layer],
    grads: &mut [Layer],
    activations: &[Vec<f64>],
    input: &[f64],
    d_act: &mut Vec<f64>,
) -> Vec<f64> {
    for l in (0..layers.len()).rev() {
        let act = &activations[l];
        let d_pre: Vec<f64> = d_act
            .iter()
            .zip(act)
            .map(|(d, a)| d * (1.0 - a * a))
            .collect();
        let layer_input: &[f64] = if l == 0 { input } else { &activations[l - 1] };
        accumulate_head(&mut grads[l], &d_pre, layer_input);
        *d_act = layers[l].w.matvec_t(&d_pre);
    }
    d_act.clone()
}

fn add_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}
