//! Adagrad with heavy-ball velocity.
//!
//! Per entry: the squared-gradient accumulator grows monotonically, the raw
//! step is `lr * g / (sqrt(G) + eps)`, and a small momentum term smooths
//! consecutive steps before the parameter update.

use super::params::VaeParams;

/// Optimizer state: one accumulator and one velocity entry per parameter,
/// stored in the parameter block order.
#[derive(Debug, Clone)]
pub struct AdagradState {
    pub accum: Vec<Vec<f64>>,
    pub velocity: Vec<Vec<f64>>,
}

impl AdagradState {
    pub fn new(params: &VaeParams) -> Self {
        let shapes: Vec<usize> = params.blocks().iter().map(|b| b.len()).collect();
        AdagradState {
            accum: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            velocity: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One optimizer step in place.
pub fn adagrad_step(
    params: &mut VaeParams,
    grads: &VaeParams,
    state: &mut AdagradState,
    learning_rate: f64,
    epsilon: f64,
    momentum: f64,
) {
    let grad_blocks = grads.blocks();
    let mut param_blocks = params.blocks_mut();
    for (((p, g), acc), vel) in param_blocks
        .iter_mut()
        .zip(&grad_blocks)
        .zip(&mut state.accum)
        .zip(&mut state.velocity)
    {
        for i in 0..g.len() {
            let gi = g[i];
            acc[i] += gi * gi;
            let raw = learning_rate * gi / (acc[i].sqrt() + epsilon);
            vel[i] = momentum * vel[i] + raw;
            p[i] -= vel[i];
        }
    }
}
