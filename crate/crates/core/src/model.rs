//! Classifier heads, order-policy and variational order logits.
//!
//! One tanh torso reads the flattened one-hot masked state. On top of it sit
//! the classifier head (per-dimension logits over the real categories), an
//! optional policy head and an optional variational head. The variational
//! logits can instead come from a separate, narrower network that reads the
//! fully observed data vector.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diff::{
    masked_log_softmax, Activation, FeedForwardNet, ParamCheckpoint, ParamId, ParamStore, Tape,
    Var,
};
use crate::error::{Error, Result};
use crate::order::PlackettLuce;
use crate::rng::RngStream;
use crate::state::{DataVector, DimKind, Layout, MaskedState};

/// How the model order-policy `p(z_i | z_<i, x_z<i)` is parameterized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyMode {
    /// Logits `-beta * H(p(x_k | state))` with a trained scalar `beta`.
    Entropy,
    /// Extra linear head on the classifier torso.
    SharedTorso,
    Uniform,
    /// Uniform over masked edges until none remain, then uniform over nodes.
    BiasedUniform,
}

/// How the variational logits `g(x)` are parameterized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariationalMode {
    SharedTorso,
    Separate,
    Uniform,
}

impl std::str::FromStr for PolicyMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entropy" => Ok(Self::Entropy),
            "shared-torso" => Ok(Self::SharedTorso),
            "uniform" => Ok(Self::Uniform),
            "biased-uniform" => Ok(Self::BiasedUniform),
            other => Err(Error::Config(format!("unknown policy mode '{other}'"))),
        }
    }
}

impl std::str::FromStr for VariationalMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared-torso" => Ok(Self::SharedTorso),
            "separate" => Ok(Self::Separate),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::Config(format!("unknown variational mode '{other}'"))),
        }
    }
}

fn default_hidden() -> Vec<usize> {
    vec![64]
}

fn default_policy() -> PolicyMode {
    PolicyMode::SharedTorso
}

fn default_q() -> VariationalMode {
    VariationalMode::Separate
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Torso hidden widths; the separate variational net uses half of each.
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_policy")]
    pub policy_mode: PolicyMode,
    #[serde(default = "default_q")]
    pub q_mode: VariationalMode,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::new(default_hidden(), default_policy(), default_q(), 0)
    }
}

impl ModelConfig {
    pub fn new(hidden: Vec<usize>, policy_mode: PolicyMode, q_mode: VariationalMode, seed: u64) -> Self {
        Self {
            hidden,
            policy_mode,
            q_mode,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config(format!("invalid hidden sizes {:?}", self.hidden)));
        }
        if self.policy_mode == PolicyMode::BiasedUniform && self.q_mode != VariationalMode::Uniform {
            return Err(Error::Config(
                "the biased-uniform policy is paired with the same fixed q; set q_mode = uniform".into(),
            ));
        }
        Ok(())
    }
}

/// Tape handles for one evaluation of the torso on a masked state.
#[derive(Debug, Clone, Copy)]
pub struct StepVars {
    pub hidden: Var,
    pub classifier: Var,
}

#[derive(Debug, Clone)]
pub struct LoArmModel {
    config: ModelConfig,
    layout: Layout,
    store: ParamStore,
    torso: FeedForwardNet,
    classifier: (ParamId, ParamId),
    policy_head: Option<(ParamId, ParamId)>,
    beta: Option<ParamId>,
    q_head: Option<(ParamId, ParamId)>,
    q_net: Option<FeedForwardNet>,
    ranks: Option<Vec<u32>>,
}

fn add_head(
    store: &mut ParamStore,
    name: &str,
    out: usize,
    inp: usize,
    rng: &mut RngStream,
) -> Result<(ParamId, ParamId)> {
    let w = store.add_glorot(&format!("{name}.weight"), out, inp, rng)?;
    let b = store.add_zeros(&format!("{name}.bias"), &[out])?;
    Ok((w, b))
}

impl LoArmModel {
    pub fn new(layout: Layout, config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = RngStream::new(config.seed);
        let mut store = ParamStore::new();
        let l = layout.len();
        let mut sizes = vec![layout.input_width()];
        sizes.extend(&config.hidden);
        let torso = FeedForwardNet::new(&mut store, "torso", &sizes, Activation::Tanh, true, &mut rng)?;
        let width = *config.hidden.last().unwrap();
        let classifier = add_head(&mut store, "classifier", layout.output_width(), width, &mut rng)?;
        let policy_head = match config.policy_mode {
            PolicyMode::SharedTorso => Some(add_head(&mut store, "policy", l, width, &mut rng)?),
            _ => None,
        };
        let beta = match config.policy_mode {
            PolicyMode::Entropy => Some(store.add_zeros("beta", &[1])?),
            _ => None,
        };
        let q_head = match config.q_mode {
            VariationalMode::SharedTorso => Some(add_head(&mut store, "q_head", l, width, &mut rng)?),
            _ => None,
        };
        let q_net = match config.q_mode {
            VariationalMode::Separate => {
                let mut qs = vec![layout.input_width()];
                qs.extend(config.hidden.iter().map(|&h| (h / 2).max(1)));
                qs.push(l);
                Some(FeedForwardNet::new(&mut store, "q_net", &qs, Activation::Tanh, false, &mut rng)?)
            }
            _ => None,
        };
        let ranks = match config.policy_mode {
            PolicyMode::BiasedUniform => Some(
                layout
                    .kinds()
                    .iter()
                    .map(|&k| if k == DimKind::Edge { 0 } else { 1 })
                    .collect(),
            ),
            _ => None,
        };
        Ok(Self {
            config,
            layout,
            store,
            torso,
            classifier,
            policy_head,
            beta,
            q_head,
            q_net,
            ranks,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Number of dimensions `L`.
    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn policy_mode(&self) -> PolicyMode {
        self.config.policy_mode
    }

    pub fn q_mode(&self) -> VariationalMode {
        self.config.q_mode
    }

    pub fn torso(&self) -> &FeedForwardNet {
        &self.torso
    }

    pub fn classifier_head(&self) -> (ParamId, ParamId) {
        self.classifier
    }

    pub fn policy_head(&self) -> Option<(ParamId, ParamId)> {
        self.policy_head
    }

    pub fn q_head(&self) -> Option<(ParamId, ParamId)> {
        self.q_head
    }

    pub fn q_net(&self) -> Option<&FeedForwardNet> {
        self.q_net.as_ref()
    }

    pub fn beta_param(&self) -> Option<ParamId> {
        self.beta
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta.map(|b| self.store.value(b)[0])
    }

    /// Priority ranks of the edges-first baseline (edges 0, nodes 1).
    pub fn ranks(&self) -> Option<&[u32]> {
        self.ranks.as_deref()
    }

    /// True when both order distributions are parameter-free and uniform.
    pub fn is_uniform(&self) -> bool {
        self.config.policy_mode == PolicyMode::Uniform && self.config.q_mode == VariationalMode::Uniform
    }

    // ---- tape-level building blocks ----

    pub fn step_on(&self, tape: &mut Tape<'_>, state: &MaskedState) -> Result<StepVars> {
        let input = tape.constant(state.encode(&self.layout)?);
        let hidden = self.torso.forward_on(tape, input)?;
        let classifier = tape.affine(self.classifier.0, self.classifier.1, hidden)?;
        Ok(StepVars { hidden, classifier })
    }

    /// `log p(x_k = targets[j] | state)` for `k = dims[j]`.
    pub fn classifier_log_probs_on(
        &self,
        tape: &mut Tape<'_>,
        step: &StepVars,
        dims: &[usize],
        targets: &[usize],
    ) -> Result<Var> {
        let rows: Vec<(usize, usize, usize)> = dims
            .iter()
            .zip(targets)
            .map(|(&k, &t)| {
                let (start, len) = self.layout.output_row(k);
                (start, len, t)
            })
            .collect();
        tape.row_log_softmax_pick(step.classifier, &rows)
    }

    /// Unnormalized policy logits over `masked` and the positions of
    /// `masked` that have non-zero probability.
    pub fn policy_logits_on(
        &self,
        tape: &mut Tape<'_>,
        step: &StepVars,
        masked: &[usize],
    ) -> Result<(Var, Vec<usize>)> {
        if masked.is_empty() {
            return Err(Error::Domain("policy over an empty masked set".into()));
        }
        let all: Vec<usize> = (0..masked.len()).collect();
        match self.config.policy_mode {
            PolicyMode::Entropy => {
                let rows: Vec<(usize, usize)> = masked.iter().map(|&k| self.layout.output_row(k)).collect();
                let h = tape.row_entropy(step.classifier, &rows)?;
                let beta = tape.param(self.beta.expect("entropy mode has beta"));
                let bh = tape.scale_by(h, beta)?;
                Ok((tape.scale(bh, -1.0), all))
            }
            PolicyMode::SharedTorso => {
                let (w, b) = self.policy_head.expect("shared-torso policy head");
                let h = tape.affine(w, b, step.hidden)?;
                Ok((tape.gather(h, masked)?, all))
            }
            PolicyMode::Uniform => Ok((tape.constant(vec![0.0; masked.len()]), all)),
            PolicyMode::BiasedUniform => {
                let ranks = self.ranks.as_ref().expect("biased mode has ranks");
                let low = masked.iter().map(|&k| ranks[k]).min().unwrap();
                let support = (0..masked.len()).filter(|&j| ranks[masked[j]] == low).collect();
                Ok((tape.constant(vec![0.0; masked.len()]), support))
            }
        }
    }

    /// Normalized policy log-probabilities over `masked` (`-inf` outside the support).
    pub fn policy_log_probs_on(
        &self,
        tape: &mut Tape<'_>,
        step: &StepVars,
        masked: &[usize],
    ) -> Result<Var> {
        let (logits, support) = self.policy_logits_on(tape, step, masked)?;
        tape.masked_log_softmax(logits, &support)
    }

    /// Variational logits `g(x)` of length `L`; a constant zero vector for the
    /// uniform family.
    pub fn variational_logits_on(&self, tape: &mut Tape<'_>, x: &DataVector) -> Result<Var> {
        let l = self.layout.len();
        if x.len() != l {
            return Err(Error::Config(format!("data vector length {} != L = {l}", x.len())));
        }
        match self.config.q_mode {
            VariationalMode::Uniform => Ok(tape.constant(vec![0.0; l])),
            VariationalMode::SharedTorso => {
                let input = tape.constant(MaskedState::from_data(x).encode(&self.layout)?);
                let hidden = self.torso.forward_on(tape, input)?;
                let (w, b) = self.q_head.expect("shared-torso q head");
                tape.affine(w, b, hidden)
            }
            VariationalMode::Separate => {
                let input = tape.constant(MaskedState::from_data(x).encode(&self.layout)?);
                self.q_net.as_ref().expect("separate q net").forward_on(tape, input)
            }
        }
    }

    // ---- value-level API ----

    /// Classifier logits, one row of width `m_k` per dimension.
    pub fn classifier_logits(&self, state: &MaskedState) -> Result<Vec<Vec<f64>>> {
        let mut tape = Tape::new(&self.store);
        let step = self.step_on(&mut tape, state)?;
        let flat = tape.value(step.classifier);
        Ok((0..self.layout.len())
            .map(|k| {
                let (s, n) = self.layout.output_row(k);
                flat[s..s + n].to_vec()
            })
            .collect())
    }

    /// Policy logits over `masked`; positions outside the support are `-inf`.
    pub fn policy_logits(&self, state: &MaskedState, masked: &[usize]) -> Result<Vec<f64>> {
        check_masked(state, masked)?;
        let mut tape = Tape::new(&self.store);
        let step = self.step_on(&mut tape, state)?;
        let (v, support) = self.policy_logits_on(&mut tape, &step, masked)?;
        let mut out = vec![f64::NEG_INFINITY; masked.len()];
        for j in support {
            out[j] = tape.value(v)[j];
        }
        Ok(out)
    }

    pub fn policy_log_probs(&self, state: &MaskedState, masked: &[usize]) -> Result<Vec<f64>> {
        let logits = self.policy_logits(state, masked)?;
        let support: Vec<usize> = (0..logits.len()).filter(|&j| logits[j].is_finite()).collect();
        masked_log_softmax(&logits, &support)
    }

    pub fn variational_logits(&self, x: &DataVector) -> Result<Vec<f64>> {
        let mut tape = Tape::new(&self.store);
        let g = self.variational_logits_on(&mut tape, x)?;
        Ok(tape.value(g).to_vec())
    }

    /// Same as [`Self::variational_logits`] but from a state that must be fully observed.
    pub fn variational_logits_for_state(&self, state: &MaskedState) -> Result<Vec<f64>> {
        if !state.is_complete() {
            return Err(Error::Precondition(
                "variational logits condition on the fully observed data vector".into(),
            ));
        }
        self.variational_logits(&state.to_data()?)
    }

    /// The variational Plackett-Luce order distribution `q(z | x)`.
    pub fn order_distribution(&self, x: &DataVector) -> Result<PlackettLuce> {
        let g = self.variational_logits(x)?;
        match &self.ranks {
            Some(r) => PlackettLuce::with_ranks(g, r.clone()),
            None => Ok(PlackettLuce::new(g)),
        }
    }

    /// Wrap a tape-level `g` value in the matching Plackett-Luce distribution.
    pub fn order_distribution_from(&self, g: Vec<f64>) -> PlackettLuce {
        match &self.ranks {
            Some(r) => PlackettLuce::with_ranks(g, r.clone()).expect("ranks sized to L"),
            None => PlackettLuce::new(g),
        }
    }

    // ---- persistence ----

    pub fn to_checkpoint(&self) -> ModelCheckpoint {
        ModelCheckpoint {
            format_version: MODEL_CHECKPOINT_VERSION,
            config: self.config.clone(),
            vocab: self.layout.sizes().to_vec(),
            kinds: self.layout.kinds().to_vec(),
            params: self.store.to_checkpoint(),
        }
    }

    pub fn from_checkpoint(ckpt: &ModelCheckpoint) -> Result<Self> {
        if ckpt.format_version != MODEL_CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model checkpoint version {}",
                ckpt.format_version
            )));
        }
        let layout = Layout::new(ckpt.vocab.clone(), ckpt.kinds.clone())?;
        let mut model = Self::new(layout, ckpt.config.clone())?;
        model.store.load_checkpoint(&ckpt.params)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_checkpoint()).map_err(|e| Error::Serde(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: ModelCheckpoint = serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))?;
        Self::from_checkpoint(&ckpt)
    }
}

fn check_masked(state: &MaskedState, masked: &[usize]) -> Result<()> {
    if masked.is_empty() {
        return Err(Error::Domain("policy over an empty masked set".into()));
    }
    for &k in masked {
        if k >= state.len() || !state.is_masked(k) {
            return Err(Error::Domain(format!("dimension {k} is not masked in this state")));
        }
    }
    Ok(())
}

pub const MODEL_CHECKPOINT_VERSION: u32 = 1;

/// Model configuration, layout and parameters in one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub config: ModelConfig,
    pub vocab: Vec<usize>,
    pub kinds: Vec<DimKind>,
    pub params: ParamCheckpoint,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn model(policy: PolicyMode, q: VariationalMode, seed: u64) -> LoArmModel {
        let layout = Layout::uniform(3, 2, DimKind::Token).unwrap();
        LoArmModel::new(layout, ModelConfig::new(vec![6], policy, q, seed)).unwrap()
    }

    #[test]
    fn zero_parameters_give_uniform_rows() {
        let mut m = model(PolicyMode::SharedTorso, VariationalMode::Separate, 1);
        m.params_mut().zero_values();
        let rows = m.classifier_logits(&MaskedState::fully_masked(3)).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r == &vec![0.0, 0.0]));
    }

    #[test]
    fn shapes_follow_layout() {
        for (l, v) in [(1, 2), (4, 3), (7, 5)] {
            let layout = Layout::uniform(l, v, DimKind::Token).unwrap();
            let m = LoArmModel::new(
                layout,
                ModelConfig::new(vec![8, 4], PolicyMode::SharedTorso, VariationalMode::SharedTorso, 0),
            )
            .unwrap();
            let rows = m.classifier_logits(&MaskedState::fully_masked(l)).unwrap();
            assert_eq!(rows.len(), l);
            assert!(rows.iter().all(|r| r.len() == v));
            let x = DataVector::new(vec![0; l], m.layout()).unwrap();
            assert_eq!(m.variational_logits(&x).unwrap().len(), l);
        }
    }

    #[test]
    fn entropy_policy_with_zero_beta_is_uniform() {
        let m = model(PolicyMode::Entropy, VariationalMode::Uniform, 3);
        assert_eq!(m.beta(), Some(0.0));
        let lp = m.policy_log_probs(&MaskedState::fully_masked(3), &[0, 1, 2]).unwrap();
        for v in lp {
            assert_abs_diff_eq!(v, -(3f64.ln()), epsilon = 1e-15);
        }
    }

    #[test]
    fn entropy_policy_two_dimension_example() {
        // classifier probs (0.9, 0.1) and (0.5, 0.5), beta = 1
        let layout = Layout::uniform(2, 2, DimKind::Token).unwrap();
        let mut m = LoArmModel::new(
            layout,
            ModelConfig::new(vec![2], PolicyMode::Entropy, VariationalMode::Uniform, 0),
        )
        .unwrap();
        let (w, b) = m.classifier_head();
        let store = m.params_mut();
        store.value_mut(w).fill(0.0);
        store.value_mut(b).copy_from_slice(&[9f64.ln(), 0.0, 0.0, 0.0]);
        let beta = store.find("beta").unwrap();
        store.value_mut(beta)[0] = 1.0;
        let s = MaskedState::fully_masked(2);
        let logits = m.policy_logits(&s, &[0, 1]).unwrap();
        assert_abs_diff_eq!(logits[0], -0.325082973391448, epsilon = 1e-12);
        assert_abs_diff_eq!(logits[1], -(2f64.ln()), epsilon = 1e-12);
        let p: Vec<f64> = m.policy_log_probs(&s, &[0, 1]).unwrap().iter().map(|v| v.exp()).collect();
        assert_abs_diff_eq!(p[0], 0.591, epsilon = 5e-4);
        assert_abs_diff_eq!(p[1], 0.409, epsilon = 5e-4);
    }

    #[test]
    fn biased_policy_exhausts_edges_first() {
        let layout = Layout::graph(3, 2, 3).unwrap();
        let m = LoArmModel::new(
            layout.clone(),
            ModelConfig::new(vec![4], PolicyMode::BiasedUniform, VariationalMode::Uniform, 0),
        )
        .unwrap();
        let s = MaskedState::fully_masked(6);
        let lp = m.policy_log_probs(&s, &s.masked()).unwrap();
        assert_eq!(&lp[..3], &[f64::NEG_INFINITY; 3]);
        for v in &lp[3..] {
            assert_abs_diff_eq!(*v, -(3f64.ln()), epsilon = 1e-15);
        }
        let mut s2 = s.clone();
        for k in 3..6 {
            s2.unmask(k, 0, &layout).unwrap();
        }
        let lp2 = m.policy_log_probs(&s2, &s2.masked()).unwrap();
        for v in lp2 {
            assert_abs_diff_eq!(v, -(3f64.ln()), epsilon = 1e-15);
        }
    }

    #[test]
    fn policy_sums_to_one_in_every_mode() {
        let mut rng = RngStream::new(11);
        for policy in [PolicyMode::Entropy, PolicyMode::SharedTorso, PolicyMode::Uniform] {
            let mut m = model(policy, VariationalMode::Uniform, 5);
            if let Some(b) = m.beta_param() {
                m.params_mut().value_mut(b)[0] = 2.5;
            }
            let lay = m.layout().clone();
            let mut s = MaskedState::fully_masked(3);
            s.unmask(rng.below(3), 1, &lay).unwrap();
            let lp = m.policy_log_probs(&s, &s.masked()).unwrap();
            let total: f64 = lp.iter().map(|v| v.exp()).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn policy_head_perturbation_leaves_classifier_untouched() {
        let mut m = model(PolicyMode::SharedTorso, VariationalMode::SharedTorso, 2);
        let s = MaskedState::fully_masked(3);
        let before_cls = m.classifier_logits(&s).unwrap();
        let before_pol = m.policy_logits(&s, &[0, 1, 2]).unwrap();
        let (w, _) = m.policy_head().unwrap();
        m.params_mut().value_mut(w)[0] += 0.3;
        assert_eq!(m.classifier_logits(&s).unwrap(), before_cls);
        assert_ne!(m.policy_logits(&s, &[0, 1, 2]).unwrap(), before_pol);

        let (tw, _) = m.torso().layers()[0];
        let before_pol = m.policy_logits(&s, &[0, 1, 2]).unwrap();
        // row 0, column 2: the mask slot of dimension 0
        m.params_mut().value_mut(tw)[2] += 0.3;
        assert_ne!(m.classifier_logits(&s).unwrap(), before_cls);
        assert_ne!(m.policy_logits(&s, &[0, 1, 2]).unwrap(), before_pol);
    }

    #[test]
    fn variational_logits_ignore_the_prefix_and_reject_masks() {
        let m = model(PolicyMode::SharedTorso, VariationalMode::SharedTorso, 4);
        let x = DataVector::new(vec![1, 0, 1], m.layout()).unwrap();
        let g = m.variational_logits(&x).unwrap();
        assert_eq!(m.variational_logits_for_state(&MaskedState::from_data(&x)).unwrap(), g);
        let mut s = MaskedState::fully_masked(3);
        s.unmask(0, 1, m.layout()).unwrap();
        assert!(matches!(m.variational_logits_for_state(&s), Err(Error::Precondition(_))));
        let u = model(PolicyMode::Uniform, VariationalMode::Uniform, 4);
        assert_eq!(u.variational_logits(&x).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn policy_rejects_empty_or_unmasked_sets() {
        let m = model(PolicyMode::Uniform, VariationalMode::Uniform, 0);
        let mut s = MaskedState::fully_masked(3);
        assert!(matches!(m.policy_logits(&s, &[]), Err(Error::Domain(_))));
        s.unmask(1, 0, m.layout()).unwrap();
        assert!(matches!(m.policy_logits(&s, &[1]), Err(Error::Domain(_))));
    }

    #[test]
    fn biased_policy_requires_fixed_q() {
        let layout = Layout::graph(3, 2, 3).unwrap();
        let cfg = ModelConfig::new(vec![4], PolicyMode::BiasedUniform, VariationalMode::Separate, 0);
        assert!(matches!(LoArmModel::new(layout, cfg), Err(Error::Config(_))));
    }

    #[test]
    fn model_checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = model(PolicyMode::Entropy, VariationalMode::Separate, 9);
        m.save(&path).unwrap();
        let back = LoArmModel::load(&path).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.config(), m.config());
    }
}
