use crate::error::{Error, Result};
use crate::numerics::ParamSet;

/// Adam hyperparameters. Defaults are the conventional
/// β1 = 0.9, β2 = 0.999, ε = 1e-8.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter moment estimates and step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f32>,
    pub v: Vec<f32>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of a single parameter.
pub fn adam_step(
    param: &mut [f32],
    grad: &[f32],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if param.len() != grad.len() || param.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "adam_step length mismatch: param {}, grad {}, state {}",
            param.len(),
            grad.len(),
            state.m.len()
        )));
    }
    if cfg.learning_rate <= 0.0 {
        return Err(Error::Config(format!(
            "learning rate must be positive, got {}",
            cfg.learning_rate
        )));
    }
    state.t += 1;
    let bc1 = 1.0 - (cfg.beta1 as f64).powi(state.t as i32);
    let bc2 = 1.0 - (cfg.beta2 as f64).powi(state.t as i32);
    for ((p, &g), (m, v)) in param
        .iter_mut()
        .zip(grad)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = (*m as f64 / bc1) as f32;
        let v_hat = (*v as f64 / bc2) as f32;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

/// Optimizer over a whole [`ParamSet`]. A parameter is updated on a step
/// only when it has a gradient; rarely-touched parameters (embedding rows)
/// keep their moments until their next use, and each parameter carries its
/// own step counter for bias correction.
pub struct Adam {
    cfg: AdamConfig,
    states: Vec<Option<AdamState>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            states: Vec::new(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    /// Updates every trainable parameter that has an accumulated gradient.
    /// Gradients are left in place; callers zero them between steps.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        if self.states.len() < params.len() {
            self.states.resize_with(params.len(), || None);
        }
        for id in params.ids().collect::<Vec<_>>() {
            let tensor = params.get(id);
            if !tensor.requires_grad() || tensor.grad().is_none() {
                continue;
            }
            let len = tensor.numel();
            let state = self.states[id.index()].get_or_insert_with(|| AdamState::new(len));
            let grad = tensor.grad().unwrap().to_vec();
            adam_step(params.get_mut(id).data_mut(), &grad, state, &self.cfg)?;
        }
        Ok(())
    }
}
