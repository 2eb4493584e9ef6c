//! Adaptive-moment optimizer, learning-rate schedule and EMA shadow weights.

use serde::{Deserialize, Serialize};

use crate::diff::{Gradients, ParamStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    /// Weight decay is added to the gradient before the moment estimates.
    Adam,
    /// Decoupled weight decay.
    Adamw,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum Schedule {
    Constant,
    /// Cosine annealing from the base rate to `min_lr` over the run.
    Cosine { min_lr: f64 },
}

impl Schedule {
    pub fn rate(&self, base: f64, step: usize, total: usize) -> f64 {
        match *self {
            Schedule::Constant => base,
            Schedule::Cosine { min_lr } => {
                let t = if total <= 1 { 1.0 } else { (step as f64 / (total - 1) as f64).min(1.0) };
                min_lr + 0.5 * (base - min_lr) * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Optimizer state. Gradients passed to [`Optimizer::step`] are descent
/// gradients (of the loss).
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, store: &ParamStore) -> Result<Self> {
        if !(0.0..1.0).contains(&config.beta1) || !(0.0..1.0).contains(&config.beta2) {
            return Err(Error::Config("optimizer betas must lie in [0, 1)".into()));
        }
        if !(config.eps > 0.0) || !(config.weight_decay >= 0.0) {
            return Err(Error::Config("optimizer eps must be > 0 and weight decay >= 0".into()));
        }
        let zeros: Vec<Vec<f64>> = store.params().iter().map(|p| vec![0.0; p.value.len()]).collect();
        Ok(Self {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients, lr: f64) -> Result<()> {
        if grads.bufs.len() != self.m.len() {
            return Err(Error::State("gradient layout does not match the optimizer".into()));
        }
        if lr == 0.0 {
            return Ok(());
        }
        self.t += 1;
        let c = &self.config;
        let b1t = 1.0 - c.beta1.powi(self.t as i32);
        let b2t = 1.0 - c.beta2.powi(self.t as i32);
        let ids: Vec<_> = store.ids().collect();
        for (j, id) in ids.into_iter().enumerate() {
            let w = store.value_mut(id);
            let g = &grads.bufs[j];
            let (m, v) = (&mut self.m[j], &mut self.v[j]);
            for i in 0..w.len() {
                let mut gi = g[i];
                match c.kind {
                    OptimizerKind::Sgd => {
                        w[i] -= lr * (gi + c.weight_decay * w[i]);
                        continue;
                    }
                    OptimizerKind::Adam => gi += c.weight_decay * w[i],
                    OptimizerKind::Adamw => w[i] -= lr * c.weight_decay * w[i],
                }
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
                let mh = m[i] / b1t;
                let vh = v[i] / b2t;
                w[i] -= lr * mh / (vh.sqrt() + c.eps);
            }
        }
        Ok(())
    }
}

/// Exponential moving average of the parameters.
#[derive(Debug, Clone)]
pub struct Ema {
    decay: f64,
    shadow: Vec<Vec<f64>>,
}

impl Ema {
    pub fn new(decay: f64, store: &ParamStore) -> Result<Self> {
        if !(0.0..1.0).contains(&decay) {
            return Err(Error::Config(format!("EMA decay must lie in [0, 1), got {decay}")));
        }
        Ok(Self {
            decay,
            shadow: store.params().iter().map(|p| p.value.clone()).collect(),
        })
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn update(&mut self, store: &ParamStore) {
        let d = self.decay;
        for (s, p) in self.shadow.iter_mut().zip(store.params()) {
            for (a, &b) in s.iter_mut().zip(&p.value) {
                *a = d * *a + (1.0 - d) * b;
            }
        }
    }

    pub fn shadow(&self) -> &[Vec<f64>] {
        &self.shadow
    }

    /// Overwrite the parameter values with the shadow copy.
    pub fn copy_to(&self, store: &mut ParamStore) {
        let ids: Vec<_> = store.ids().collect();
        for (id, s) in ids.into_iter().zip(&self.shadow) {
            store.value_mut(id).copy_from_slice(s);
        }
    }
}
