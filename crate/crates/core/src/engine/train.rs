//! Minibatch training on the two-path leave-one-out surrogate.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diff::Gradients;
use crate::elbo::rloo_gradient;
use crate::engine::optim::{Ema, Optimizer, OptimizerConfig, OptimizerKind, Schedule};
use crate::error::{Error, Result};
use crate::model::LoArmModel;
use crate::rng::RngStream;
use crate::state::DataVector;

fn default_lr() -> f64 {
    1e-3
}
fn default_optimizer() -> OptimizerKind {
    OptimizerKind::Adam
}
fn default_batch() -> usize {
    32
}
fn default_steps() -> usize {
    1000
}
fn default_schedule() -> Schedule {
    Schedule::Constant
}
fn default_log_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub weight_decay: f64,
    /// 0 disables averaging (the shadow tracks the raw weights).
    #[serde(default)]
    pub ema_decay: f64,
    #[serde(default = "default_schedule")]
    pub schedule: Schedule,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Save a checkpoint every this many steps; 0 only saves the final model.
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: default_lr(),
            optimizer: default_optimizer(),
            weight_decay: 0.0,
            ema_decay: 0.0,
            schedule: Schedule::Constant,
            batch_size: default_batch(),
            steps: default_steps(),
            seed: 0,
            checkpoint_every: 0,
            log_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be finite and >= 0, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(Error::Config(format!("ema_decay must lie in [0, 1), got {}", self.ema_decay)));
        }
        if let Schedule::Cosine { min_lr } = self.schedule {
            if !(min_lr >= 0.0 && min_lr <= self.lr) {
                return Err(Error::Config("cosine min_lr must lie in [0, lr]".into()));
            }
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            kind: self.optimizer,
            weight_decay: self.weight_decay,
            ..OptimizerConfig::default()
        }
    }
}

/// Mutable training state that lives next to the model.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub optimizer: Optimizer,
    pub ema: Ema,
    pub step: usize,
}

impl TrainState {
    pub fn new(config: &TrainConfig, model: &LoArmModel) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            optimizer: Optimizer::new(config.optimizer_config(), model.params())?,
            ema: Ema::new(config.ema_decay, model.params())?,
            step: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    /// Mean two-sample ELBO estimate over the batch.
    pub elbo: f64,
    pub grad_norm: f64,
    pub beta: Option<f64>,
    pub lr: f64,
}

/// Batch-mean surrogate gradient (ascent direction) and mean ELBO estimate.
/// Each example gets its own stream split from `rng` in batch order.
pub fn batch_gradient(model: &LoArmModel, batch: &[DataVector], rng: &mut RngStream) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::Domain("empty training batch".into()));
    }
    let streams: Vec<RngStream> = batch.iter().map(|_| rng.split()).collect();
    let results: Vec<Result<(f64, Gradients)>> = batch
        .par_iter()
        .zip(streams)
        .map(|(x, mut r)| {
            let (est, g) = rloo_gradient(model, x, &mut r)?;
            if !est.elbo.is_finite() || !est.surrogate.is_finite() || !g.all_finite() {
                return Err(Error::NonFinite(format!(
                    "step {} F1 {} F2 {} log q {} {}",
                    est.step, est.f1, est.f2, est.log_q1, est.log_q2
                )));
            }
            Ok((est.elbo, g))
        })
        .collect();
    let mut total = Gradients::zeros_like(model.params());
    let mut elbo = 0.0;
    for (x, r) in batch.iter().zip(results) {
        let (e, g) = r.map_err(|err| Error::NonFinite(format!("training example {:?}: {err}", x.tokens())))?;
        elbo += e;
        total.add_assign(&g);
    }
    let n = batch.len() as f64;
    total.scale(1.0 / n);
    Ok((elbo / n, total))
}

/// One optimizer update on a minibatch.
pub fn train_step(
    model: &mut LoArmModel,
    batch: &[DataVector],
    rng: &mut RngStream,
    state: &mut TrainState,
    lr: f64,
) -> Result<StepReport> {
    let (elbo, mut grads) = batch_gradient(model, batch, rng)?;
    let grad_norm = grads.norm();
    grads.scale(-1.0);
    state.optimizer.step(model.params_mut(), &grads, lr)?;
    if !model.params().all_finite() {
        return Err(Error::NonFinite(format!("parameters diverged at step {}", state.step + 1)));
    }
    state.ema.update(model.params());
    state.step += 1;
    Ok(StepReport {
        step: state.step,
        elbo,
        grad_norm,
        beta: model.beta(),
        lr,
    })
}

/// Append-only CSV training log.
pub struct TrainLog {
    out: BufWriter<File>,
}

impl TrainLog {
    pub const HEADER: &'static str = "step,elbo,grad_norm,beta";

    pub fn create(path: &Path) -> Result<Self> {
        let fresh = !path.exists();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        if fresh {
            writeln!(out, "{}", Self::HEADER).map_err(|e| Error::io(path, e))?;
        }
        Ok(Self { out })
    }

    pub fn append(&mut self, r: &StepReport) -> Result<()> {
        let beta = r.beta.map(|b| b.to_string()).unwrap_or_default();
        writeln!(self.out, "{},{},{},{}", r.step, r.elbo, r.grad_norm, beta)
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io("training log", e))
    }
}

/// Full training run on `data`. Batches are drawn uniformly with
/// replacement. With `out` set, writes `train_log.csv`, periodic
/// `checkpoint_<step>.json` files and the final `model.json`. When EMA is
/// enabled the model ends up holding the averaged weights.
pub fn fit(
    model: &mut LoArmModel,
    data: &[DataVector],
    config: &TrainConfig,
    out: Option<&Path>,
) -> Result<Vec<StepReport>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Domain("empty training set".into()));
    }
    let mut state = TrainState::new(config, model)?;
    let mut rng = RngStream::new(config.seed);
    let mut log = match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            Some(TrainLog::create(&dir.join("train_log.csv"))?)
        }
        None => None,
    };
    let mut reports = Vec::with_capacity(config.steps / config.log_every + 1);
    for s in 0..config.steps {
        let batch: Vec<DataVector> = (0..config.batch_size)
            .map(|_| data[rng.below(data.len())].clone())
            .collect();
        let lr = config.schedule.rate(config.lr, s, config.steps);
        let report = train_step(model, &batch, &mut rng, &mut state, lr)?;
        if report.step % config.log_every == 0 || report.step == config.steps {
            if let Some(l) = log.as_mut() {
                l.append(&report)?;
            }
            reports.push(report.clone());
        }
        if let Some(dir) = out {
            if config.checkpoint_every > 0 && report.step % config.checkpoint_every == 0 {
                model.save(&checkpoint_path(dir, report.step))?;
            }
        }
    }
    if config.ema_decay > 0.0 {
        state.ema.copy_to(model.params_mut());
    }
    if let Some(dir) = out {
        model.save(&dir.join("model.json"))?;
    }
    Ok(reports)
}

pub fn checkpoint_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("checkpoint_{step:07}.json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elbo::{ao_arm_gradient_at, draw_paths};
    use crate::model::{ModelConfig, PolicyMode, VariationalMode};
    use crate::state::{DimKind, Layout};

    fn model(policy: PolicyMode, q: VariationalMode) -> LoArmModel {
        let layout = Layout::uniform(3, 2, DimKind::Token).unwrap();
        LoArmModel::new(layout, ModelConfig::new(vec![8], policy, q, 13)).unwrap()
    }

    fn data() -> Vec<DataVector> {
        let layout = Layout::uniform(3, 2, DimKind::Token).unwrap();
        vec![
            DataVector::new(vec![0, 1, 1], &layout).unwrap(),
            DataVector::new(vec![1, 0, 1], &layout).unwrap(),
        ]
    }

    #[test]
    fn zero_rate_keeps_parameters() {
        let mut m = model(PolicyMode::SharedTorso, VariationalMode::Separate);
        let before = m.params().flat_values();
        let cfg = TrainConfig::default();
        let mut st = TrainState::new(&cfg, &m).unwrap();
        let r = train_step(&mut m, &data(), &mut RngStream::new(1), &mut st, 0.0).unwrap();
        assert_eq!(before, m.params().flat_values());
        assert!(r.elbo.is_finite() && r.grad_norm > 0.0);
    }

    #[test]
    fn uniform_update_is_the_any_order_gradient() {
        // with SGD the update is -lr * grad; compare with the any-order loss
        // gradient at the same two paths and step
        let mut m = model(PolicyMode::Uniform, VariationalMode::Uniform);
        let x = data()[0].clone();
        let cfg = TrainConfig { optimizer: OptimizerKind::Sgd, ..Default::default() };
        let mut st = TrainState::new(&cfg, &m).unwrap();

        let mut probe = RngStream::new(9);
        let mut child = probe.split();
        let draw = draw_paths(&m, &x, 2, &mut child).unwrap();
        let mut expect = Gradients::zeros_like(m.params());
        for j in 0..2 {
            let (_, g) = ao_arm_gradient_at(&m, &x, &draw.prefix(j)).unwrap();
            expect.add_assign(&g);
        }
        expect.scale(0.5);

        let before = m.params().flat_values();
        train_step(&mut m, std::slice::from_ref(&x), &mut RngStream::new(9), &mut st, 0.1).unwrap();
        let after = m.params().flat_values();
        for ((b, a), g) in before.iter().zip(&after).zip(expect.flat()) {
            assert!(((a - b) + 0.1 * g).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let m = model(PolicyMode::Uniform, VariationalMode::Uniform);
        for cfg in [
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { ema_decay: 1.0, ..Default::default() },
            TrainConfig { lr: f64::NAN, ..Default::default() },
        ] {
            assert!(TrainState::new(&cfg, &m).is_err());
        }
        let mut m = m;
        let mut st = TrainState::new(&TrainConfig::default(), &m).unwrap();
        assert!(train_step(&mut m, &[], &mut RngStream::new(0), &mut st, 0.1).is_err());
    }

    #[test]
    fn fit_writes_log_and_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = model(PolicyMode::Entropy, VariationalMode::SharedTorso);
        let cfg = TrainConfig { steps: 6, batch_size: 2, checkpoint_every: 3, ..Default::default() };
        let reports = fit(&mut m, &data(), &cfg, Some(dir.path())).unwrap();
        assert_eq!(reports.len(), 6);
        let log = fs::read_to_string(dir.path().join("train_log.csv")).unwrap();
        let lines: Vec<&str> = log.lines().collect();
        assert_eq!(lines[0], TrainLog::HEADER);
        assert_eq!(lines.len(), 7);
        assert!(checkpoint_path(dir.path(), 3).exists());
        assert!(checkpoint_path(dir.path(), 6).exists());
        let back = LoArmModel::load(&dir.path().join("model.json")).unwrap();
        assert_eq!(back.params().flat_values(), m.params().flat_values());
    }
}
