use std::collections::BTreeMap;

use ispforge_graph::GraphModel;
use ispforge_tensor::Tensor;

use crate::TrainError;

/// Adam hyperparameters; defaults follow the reference training recipes
/// (lr 1e-4, β 0.9/0.99, ε 1e-8, batch 32).
#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub batch: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-8,
            batch: 32,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.lr > 0.0) || !(self.eps > 0.0) {
            return Err(TrainError::BadArgument(format!(
                "lr and ε must be > 0, got lr={} ε={}",
                self.lr, self.eps
            )));
        }
        for (name, b) in [("β1", self.beta1), ("β2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(TrainError::BadArgument(format!("{name} must be in [0,1), got {b}")));
            }
        }
        if self.batch == 0 {
            return Err(TrainError::BadArgument("batch must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Model plus optimizer moments and step counter.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub model: GraphModel,
    moment1: BTreeMap<String, Tensor>,
    moment2: BTreeMap<String, Tensor>,
    pub step: u64,
}

impl TrainState {
    pub fn new(model: GraphModel) -> Self {
        TrainState {
            model,
            moment1: BTreeMap::new(),
            moment2: BTreeMap::new(),
            step: 0,
        }
    }

    /// One bias-corrected Adam update. Weights without a gradient entry are
    /// left untouched; gradients for unknown weights are an error.
    pub fn adam_step(
        &mut self,
        cfg: &AdamConfig,
        grads: &BTreeMap<String, Tensor>,
    ) -> Result<(), TrainError> {
        cfg.validate()?;
        for name in grads.keys() {
            if !self.model.weights.contains_key(name) {
                return Err(TrainError::UnknownGradientKey(name.clone()));
            }
        }
        self.step += 1;
        let bc1 = 1.0 - (cfg.beta1 as f64).powi(self.step as i32);
        let bc2 = 1.0 - (cfg.beta2 as f64).powi(self.step as i32);

        for (name, grad) in grads {
            let weight = self.model.weights.get_mut(name).unwrap();
            let m = self
                .moment1
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(weight.shape()));
            let v = self
                .moment2
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(weight.shape()));
            for i in 0..grad.data().len() {
                let g = grad.data()[i];
                let mi = cfg.beta1 * m.data()[i] + (1.0 - cfg.beta1) * g;
                let vi = cfg.beta2 * v.data()[i] + (1.0 - cfg.beta2) * g * g;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let m_hat = mi as f64 / bc1;
                let v_hat = vi as f64 / bc2;
                let update = cfg.lr as f64 * m_hat / (v_hat.sqrt() + cfg.eps as f64);
                weight.data_mut()[i] -= update as f32;
            }
        }
        Ok(())
    }

    pub fn weights_finite(&self) -> bool {
        self.model.weights.values().all(Tensor::is_finite)
    }
}
