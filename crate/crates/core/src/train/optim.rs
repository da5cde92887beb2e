use crate::tensor::Tensor;

use super::TrainError;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// One AdamW update of a flat parameter. `step` is 1-based.
///
/// Decay is decoupled: the parameter is shrunk by `lr * weight_decay`
/// directly, then the bias-corrected Adam step is applied.
#[allow(clippy::too_many_arguments)]
pub fn adamw_update(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    lr: f64,
    weight_decay: f64,
) {
    let bc1 = 1.0 - BETA1.powi(step as i32);
    let bc2 = 1.0 - BETA2.powi(step as i32);
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        param[i] -= lr * weight_decay * param[i];
        param[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

struct Slot {
    name: String,
    tensor: Tensor,
    m: Vec<f64>,
    v: Vec<f64>,
    decay: bool,
}

/// AdamW over trainable parameters only. Norm scales/shifts, biases and the
/// modulation gate are not decayed.
pub struct AdamW {
    slots: Vec<Slot>,
    step: u64,
    weight_decay: f64,
}

fn decays(name: &str) -> bool {
    let last = name.rsplit('.').next().unwrap_or(name);
    !matches!(last, "gamma" | "beta" | "bias" | "alpha")
}

impl AdamW {
    pub fn new(params: Vec<(String, Tensor)>, weight_decay: f64) -> Self {
        let slots = params
            .into_iter()
            .filter(|(_, t)| t.requires_grad())
            .map(|(name, tensor)| Slot {
                decay: decays(&name),
                m: vec![0.0; tensor.numel()],
                v: vec![0.0; tensor.numel()],
                name,
                tensor,
            })
            .collect();
        Self {
            slots,
            step: 0,
            weight_decay,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Names of the parameters that carry optimizer state.
    pub fn parameter_names(&self) -> Vec<&str> {
        self.slots.iter().map(|s| s.name.as_str()).collect()
    }

    /// Applies one update from the accumulated gradients (missing = zero).
    pub fn step(&mut self, lr: f64) -> Result<(), TrainError> {
        for s in &self.slots {
            if let Some(g) = s.tensor.grad() {
                if g.iter().any(|x| !x.is_finite()) {
                    return Err(TrainError::NonFiniteGradient(s.name.clone()));
                }
            }
        }
        self.step += 1;
        for s in &mut self.slots {
            let grad = s.tensor.grad().unwrap_or_else(|| vec![0.0; s.m.len()]);
            let wd = if s.decay { self.weight_decay } else { 0.0 };
            adamw_update(&mut s.tensor.data_mut(), &grad, &mut s.m, &mut s.v, self.step, lr, wd);
        }
        Ok(())
    }

    pub fn zero_grad(&self) {
        self.slots.iter().for_each(|s| s.tensor.zero_grad());
    }
}

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_gradients(params: &[Tensor], max_norm: f64) -> f64 {
    let norm = params
        .iter()
        .filter_map(|p| p.grad())
        .map(|g| g.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let f = max_norm / norm;
        params.iter().for_each(|p| p.scale_grad(f));
    }
    norm
}
