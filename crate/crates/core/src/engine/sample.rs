//! Ancestral sampling from the model policy and classifier.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diff::{categorical_entropy, masked_log_softmax, Tape};
use crate::engine::trace::{OrderTrace, StepKind, TraceStep};
use crate::error::{Error, Result};
use crate::model::LoArmModel;
use crate::rng::RngStream;
use crate::state::{DataVector, MaskedState};

fn default_top_p() -> f64 {
    1.0
}

fn default_samples() -> usize {
    1000
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub record_traces: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            top_p: 1.0,
            samples: default_samples(),
            seed: 0,
            record_traces: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Config(format!("top_p must lie in (0, 1], got {}", self.top_p)));
        }
        if self.samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Keep the smallest set of most probable categories whose mass reaches `p`,
/// then renormalize. Equal probabilities are ordered by ascending index.
pub fn top_p_filter(probs: &[f64], p: f64) -> Vec<f64> {
    if p >= 1.0 {
        return probs.to_vec();
    }
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let mut out = vec![0.0; probs.len()];
    let mut mass = 0.0;
    for &k in &idx {
        out[k] = probs[k];
        mass += probs[k];
        // absorb rounding in the running sum so an exact boundary counts as reached
        if mass >= p - 1e-12 {
            break;
        }
    }
    for v in &mut out {
        *v /= mass;
    }
    out
}

fn softmax(row: &[f64]) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..row.len()).collect();
    Ok(masked_log_softmax(row, &all)?.into_iter().map(f64::exp).collect())
}

fn run(
    model: &LoArmModel,
    top_p: Option<f64>,
    rng: &mut RngStream,
    observer: &mut dyn FnMut(&MaskedState),
) -> Result<(DataVector, OrderTrace)> {
    let layout = model.layout();
    let l = layout.len();
    let mut state = MaskedState::fully_masked(l);
    let mut trace = OrderTrace::default();
    observer(&state);
    for i in 1..=l {
        let masked = state.masked();
        let mut tape = Tape::new(model.params());
        let step = model.step_on(&mut tape, &state)?;
        let lp = model.policy_log_probs_on(&mut tape, &step, &masked)?;
        let probs: Vec<f64> = tape.value(lp).iter().map(|v| v.exp()).collect();
        let j = rng.categorical(&probs);
        let dim = masked[j];

        let (start, len) = layout.output_row(dim);
        let row = softmax(&tape.value(step.classifier)[start..start + len])?;
        let entropy = categorical_entropy(&row)?;
        let value = match top_p {
            Some(p) => rng.categorical(&top_p_filter(&row, p)),
            None => rng.categorical(&row),
        };
        state.unmask(dim, value, layout)?;
        trace.steps.push(TraceStep {
            step: i,
            dim,
            kind: StepKind::classify(layout.kind(dim), value),
            policy_prob: probs[j],
            entropy,
            value,
        });
        observer(&state);
    }
    Ok((state.to_data()?, trace))
}

/// Draw one sample: at every step pick a dimension from the policy, then a
/// value from its (Top-p filtered) classifier row.
pub fn generate(model: &LoArmModel, config: &SamplerConfig, rng: &mut RngStream) -> Result<(DataVector, OrderTrace)> {
    config.validate()?;
    run(model, Some(config.top_p), rng, &mut |_| {})
}

/// As [`generate`], calling `observer` on the initial state and after every unmask.
pub fn generate_observed(
    model: &LoArmModel,
    config: &SamplerConfig,
    rng: &mut RngStream,
    observer: &mut dyn FnMut(&MaskedState),
) -> Result<(DataVector, OrderTrace)> {
    config.validate()?;
    run(model, Some(config.top_p), rng, observer)
}

/// Sampler without any classifier filtering.
pub fn generate_unfiltered(model: &LoArmModel, rng: &mut RngStream) -> Result<(DataVector, OrderTrace)> {
    run(model, None, rng, &mut |_| {})
}

/// `config.samples` draws from per-sample streams split off `config.seed`.
pub fn generate_many(model: &LoArmModel, config: &SamplerConfig) -> Result<Vec<(DataVector, OrderTrace)>> {
    config.validate()?;
    let mut root = RngStream::new(config.seed);
    let streams: Vec<RngStream> = (0..config.samples).map(|_| root.split()).collect();
    streams
        .into_par_iter()
        .map(|mut rng| generate(model, config, &mut rng))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, PolicyMode, VariationalMode};
    use crate::state::{DimKind, Layout};

    #[test]
    fn top_p_examples() {
        let out = top_p_filter(&[0.5, 0.3, 0.2], 0.8);
        assert!((out[0] - 0.625).abs() < 1e-12);
        assert!((out[1] - 0.375).abs() < 1e-12);
        assert_eq!(out[2], 0.0);
        let same = [0.1, 0.2, 0.7];
        assert_eq!(top_p_filter(&same, 1.0), same.to_vec());
        for p in [0.01, 0.5, 0.99, 1.0] {
            assert_eq!(top_p_filter(&[0.0, 1.0, 0.0], p), vec![0.0, 1.0, 0.0]);
        }
        // ties go to the lower index
        assert_eq!(top_p_filter(&[0.25, 0.25, 0.5], 0.6), vec![1.0 / 3.0, 0.0, 2.0 / 3.0]);
    }

    fn model(l: usize, policy: PolicyMode) -> LoArmModel {
        let layout = Layout::uniform(l, 3, DimKind::Token).unwrap();
        LoArmModel::new(layout, ModelConfig::new(vec![8], policy, VariationalMode::Uniform, 3)).unwrap()
    }

    #[test]
    fn single_dimension() {
        let m = model(1, PolicyMode::Uniform);
        let (x, t) = generate(&m, &SamplerConfig::default(), &mut RngStream::new(0)).unwrap();
        assert_eq!(x.len(), 1);
        assert_eq!(t.len(), 1);
        assert_eq!(t.steps[0].policy_prob, 1.0);
    }

    #[test]
    fn traces_are_permutations_and_unfiltered_matches() {
        let m = model(5, PolicyMode::Entropy);
        let cfg = SamplerConfig::default();
        for seed in 0..20 {
            let (x, t) = generate(&m, &cfg, &mut RngStream::new(seed)).unwrap();
            let (y, u) = generate_unfiltered(&m, &mut RngStream::new(seed)).unwrap();
            assert_eq!(x, y);
            assert_eq!(t, u);
            let mut o = t.order();
            o.sort();
            assert_eq!(o, (0..5).collect::<Vec<_>>());
        }
    }

    #[test]
    fn many_is_deterministic() {
        let m = model(4, PolicyMode::Uniform);
        let cfg = SamplerConfig { samples: 16, seed: 5, ..Default::default() };
        assert_eq!(generate_many(&m, &cfg).unwrap(), generate_many(&m, &cfg).unwrap());
        assert!(generate_many(&m, &SamplerConfig { top_p: 0.0, ..cfg }).is_err());
    }
}
