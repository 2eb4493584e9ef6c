//! The variational objective and its gradient estimator.
//!
//! For an ordered prefix `z_<i` of a fully observed `x`, the inner term
//!
//! ```text
//! F(z_<i, x) = sum_{k masked} q(k | z_<i, x) [log p(k | z_<i, x_z<i) + log p(x_k | x_z<i) - log q(k | z_<i, x)]
//! ```
//!
//! sums over the next dimension exactly. The ELBO is `sum_i E_q[F(z_<i, x)]`;
//! drawing `i` uniformly and scaling by `L` gives an unbiased estimate. The
//! gradient is the two-path leave-one-out estimator obtained by
//! differentiating
//!
//! ```text
//! L/2 * [(log q(z1_<i) - log q(z2_<i)) * stopgrad(F1 - F2) + F1 + F2]
//! ```

use crate::diff::{Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::model::LoArmModel;
use crate::order::Permutation;
use crate::rng::RngStream;
use crate::state::{DataVector, MaskedState, OrderPrefix};

/// One candidate `z_i = dim` inside `F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub dim: usize,
    pub log_policy: f64,
    pub log_classifier: f64,
    pub log_q: f64,
}

/// `F(z_<i, x)` with its per-candidate decomposition (q-support only).
#[derive(Debug, Clone, PartialEq)]
pub struct ElboTerm {
    pub value: f64,
    pub candidates: Vec<Candidate>,
}

/// The shared step index and the truncated variational paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDraw {
    /// 1-based step index `i`.
    pub step: usize,
    pub paths: Vec<Permutation>,
}

impl PathDraw {
    pub fn prefix(&self, path: usize) -> OrderPrefix {
        self.paths[path].prefix(self.step - 1)
    }
}

/// Result of one two-path evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RlooEstimate {
    pub f1: f64,
    pub f2: f64,
    pub delta_f: f64,
    /// Value of the stop-gradient surrogate. Not an ELBO estimate.
    pub surrogate: f64,
    /// Two-sample ELBO estimate `L/2 (F1 + F2)`.
    pub elbo: f64,
    pub log_q1: f64,
    pub log_q2: f64,
    pub step: usize,
}

struct FTermVars {
    value: Var,
    candidates: Vec<Candidate>,
}

fn f_term_on(
    model: &LoArmModel,
    tape: &mut Tape<'_>,
    x: &DataVector,
    prefix: &OrderPrefix,
    g: Var,
) -> Result<FTermVars> {
    let state = MaskedState::mask_with_prefix(x, prefix)?;
    let masked = prefix.complement();
    if masked.is_empty() {
        return Err(Error::Domain("prefix covers every dimension; no masked dims remain".into()));
    }
    let step = model.step_on(tape, &state)?;
    let targets: Vec<usize> = masked.iter().map(|&k| x.get(k)).collect();
    let lc = model.classifier_log_probs_on(tape, &step, &masked, &targets)?;
    let lp = model.policy_log_probs_on(tape, &step, &masked)?;

    let q_support: Vec<usize> = match model.ranks() {
        None => (0..masked.len()).collect(),
        Some(r) => {
            let low = masked.iter().map(|&k| r[k]).min().unwrap();
            (0..masked.len()).filter(|&j| r[masked[j]] == low).collect()
        }
    };
    let gm = tape.gather(g, &masked)?;
    let lq = tape.masked_log_softmax(gm, &q_support)?;

    let a = tape.gather(lq, &q_support)?;
    let bp = tape.gather(lp, &q_support)?;
    let bc = tape.gather(lc, &q_support)?;
    let joint = tape.add(bp, bc)?;
    let ratio = tape.sub(joint, a)?;
    let w = tape.exp(a);
    let prod = tape.mul(w, ratio)?;
    let value = tape.sum(prod);

    let candidates = q_support
        .iter()
        .map(|&j| Candidate {
            dim: masked[j],
            log_policy: tape.value(lp)[j],
            log_classifier: tape.value(lc)[j],
            log_q: tape.value(lq)[j],
        })
        .collect();
    if !tape.scalar(value).is_finite() {
        return Err(Error::NonFinite(format!(
            "F is not finite at prefix {:?}; policy support must cover the q support",
            prefix.indices()
        )));
    }
    Ok(FTermVars { value, candidates })
}

/// Exact inner expectation `F(z_<i, x)`.
pub fn f_term(model: &LoArmModel, x: &DataVector, prefix: &OrderPrefix) -> Result<ElboTerm> {
    let mut tape = Tape::new(model.params());
    let g = model.variational_logits_on(&mut tape, x)?;
    let f = f_term_on(model, &mut tape, x, prefix, g)?;
    Ok(ElboTerm {
        value: tape.scalar(f.value),
        candidates: f.candidates,
    })
}

/// `F(z_<i, x)` and its gradient with respect to every parameter.
pub fn f_term_gradient(model: &LoArmModel, x: &DataVector, prefix: &OrderPrefix) -> Result<(f64, Gradients)> {
    let mut tape = Tape::new(model.params());
    let g = model.variational_logits_on(&mut tape, x)?;
    let f = f_term_on(model, &mut tape, x, prefix, g)?;
    let grads = tape.backward(f.value)?;
    Ok((tape.scalar(f.value), grads))
}

/// Sample `n_paths` full permutations from `q(. | x)`, then the shared step
/// `i ~ Uniform{1..L}`.
pub fn draw_paths(model: &LoArmModel, x: &DataVector, n_paths: usize, rng: &mut RngStream) -> Result<PathDraw> {
    let q = model.order_distribution(x)?;
    let paths = (0..n_paths).map(|_| q.sample(rng)).collect();
    let step = rng.below(x.len()) + 1;
    Ok(PathDraw { step, paths })
}

/// `L * mean_j F(z^j_<i, x)` for a given draw.
pub fn stochastic_elbo_at(model: &LoArmModel, x: &DataVector, draw: &PathDraw) -> Result<f64> {
    let mut tape = Tape::new(model.params());
    let g = model.variational_logits_on(&mut tape, x)?;
    let mut total = 0.0;
    for j in 0..draw.paths.len() {
        let f = f_term_on(model, &mut tape, x, &draw.prefix(j), g)?;
        total += tape.scalar(f.value);
    }
    Ok(x.len() as f64 * total / draw.paths.len() as f64)
}

/// Unbiased ELBO estimate from one or two variational paths.
pub fn stochastic_elbo(model: &LoArmModel, x: &DataVector, rng: &mut RngStream, n_paths: usize) -> Result<f64> {
    if !(1..=2).contains(&n_paths) {
        return Err(Error::Config(format!("n_paths must be 1 or 2, got {n_paths}")));
    }
    let draw = draw_paths(model, x, n_paths, rng)?;
    stochastic_elbo_at(model, x, &draw)
}

fn rloo_tape<'p>(
    model: &'p LoArmModel,
    x: &DataVector,
    draw: &PathDraw,
) -> Result<(Tape<'p>, Var, RlooEstimate)> {
    if draw.paths.len() != 2 {
        return Err(Error::Config("the leave-one-out estimator needs exactly two paths".into()));
    }
    let l = x.len() as f64;
    let mut tape = Tape::new(model.params());
    let g = model.variational_logits_on(&mut tape, x)?;
    let (p1, p2) = (draw.prefix(0), draw.prefix(1));
    let f1 = f_term_on(model, &mut tape, x, &p1, g)?.value;
    let f2 = f_term_on(model, &mut tape, x, &p2, g)?.value;
    let (lq1, lq2) = match model.ranks() {
        None => (
            tape.prefix_log_prob(g, p1.indices())?,
            tape.prefix_log_prob(g, p2.indices())?,
        ),
        Some(_) => {
            // parameter-free ranked q
            let q = model.order_distribution_from(tape.value(g).to_vec());
            let a = q.prefix_log_prob(p1.indices())?;
            let b = q.prefix_log_prob(p2.indices())?;
            (tape.constant(vec![a]), tape.constant(vec![b]))
        }
    };
    let (v1, v2) = (tape.scalar(f1), tape.scalar(f2));
    let delta = tape.constant(vec![v1 - v2]);
    let dlq = tape.sub(lq1, lq2)?;
    let score = tape.mul(dlq, delta)?;
    let fs = tape.add(f1, f2)?;
    let inner = tape.add(score, fs)?;
    let surrogate = tape.scale(inner, l / 2.0);
    let est = RlooEstimate {
        f1: v1,
        f2: v2,
        delta_f: v1 - v2,
        surrogate: tape.scalar(surrogate),
        elbo: l / 2.0 * (v1 + v2),
        log_q1: tape.scalar(lq1),
        log_q2: tape.scalar(lq2),
        step: draw.step,
    };
    Ok((tape, surrogate, est))
}

/// Surrogate and its gradient (to be ascended) for a given draw.
pub fn rloo_gradient_at(model: &LoArmModel, x: &DataVector, draw: &PathDraw) -> Result<(RlooEstimate, Gradients)> {
    let (tape, out, est) = rloo_tape(model, x, draw)?;
    let grads = tape.backward(out)?;
    Ok((est, grads))
}

/// Draw two paths and a shared step, return the surrogate and its gradient.
pub fn rloo_gradient(model: &LoArmModel, x: &DataVector, rng: &mut RngStream) -> Result<(RlooEstimate, Gradients)> {
    let draw = draw_paths(model, x, 2, rng)?;
    rloo_gradient_at(model, x, &draw)
}

/// Value-only version of [`rloo_gradient`].
pub fn rloo_surrogate(model: &LoArmModel, x: &DataVector, rng: &mut RngStream) -> Result<RlooEstimate> {
    let draw = draw_paths(model, x, 2, rng)?;
    Ok(rloo_tape(model, x, &draw)?.2)
}

fn require_uniform(model: &LoArmModel) -> Result<()> {
    if !model.is_uniform() {
        return Err(Error::Config(
            "the any-order loss needs uniform policy and uniform variational modes".into(),
        ));
    }
    Ok(())
}

/// `-(L / (L - i + 1)) sum_{k masked} log p(x_k | x_z<i)` at a given prefix.
pub fn ao_arm_loss_at(model: &LoArmModel, x: &DataVector, prefix: &OrderPrefix) -> Result<f64> {
    require_uniform(model)?;
    let masked = prefix.complement();
    if masked.is_empty() {
        return Err(Error::Domain("prefix covers every dimension".into()));
    }
    let state = MaskedState::mask_with_prefix(x, prefix)?;
    let rows = model.classifier_logits(&state)?;
    let mut total = 0.0;
    for &k in &masked {
        let lp = crate::diff::masked_log_softmax(&rows[k], &(0..rows[k].len()).collect::<Vec<_>>())?;
        total += lp[x.get(k)];
    }
    Ok(-(x.len() as f64) / masked.len() as f64 * total)
}

/// Any-order baseline loss at a uniformly drawn `(i, z_<i)`, drawn exactly
/// as [`stochastic_elbo`] with one path draws it.
pub fn ao_arm_loss(model: &LoArmModel, x: &DataVector, rng: &mut RngStream) -> Result<f64> {
    require_uniform(model)?;
    let draw = draw_paths(model, x, 1, rng)?;
    ao_arm_loss_at(model, x, &draw.prefix(0))
}

/// Gradient of the any-order loss (to be descended) at a given prefix.
pub fn ao_arm_gradient_at(model: &LoArmModel, x: &DataVector, prefix: &OrderPrefix) -> Result<(f64, Gradients)> {
    require_uniform(model)?;
    let masked = prefix.complement();
    let state = MaskedState::mask_with_prefix(x, prefix)?;
    let mut tape = Tape::new(model.params());
    let step = model.step_on(&mut tape, &state)?;
    let targets: Vec<usize> = masked.iter().map(|&k| x.get(k)).collect();
    let lc = model.classifier_log_probs_on(&mut tape, &step, &masked, &targets)?;
    let s = tape.sum(lc);
    let loss = tape.scale(s, -(x.len() as f64) / masked.len() as f64);
    let grads = tape.backward(loss)?;
    Ok((tape.scalar(loss), grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::masked_log_softmax;
    use crate::model::{ModelConfig, PolicyMode, VariationalMode};
    use crate::state::{DimKind, Layout};
    use approx::assert_abs_diff_eq;

    fn model(l: usize, m: usize, p: PolicyMode, q: VariationalMode, seed: u64) -> LoArmModel {
        let layout = Layout::uniform(l, m, DimKind::Token).unwrap();
        LoArmModel::new(layout, ModelConfig::new(vec![5], p, q, seed)).unwrap()
    }

    fn cls_logp(model: &LoArmModel, state: &MaskedState, k: usize, v: usize) -> f64 {
        let rows = model.classifier_logits(state).unwrap();
        let all: Vec<usize> = (0..rows[k].len()).collect();
        masked_log_softmax(&rows[k], &all).unwrap()[v]
    }

    #[test]
    fn last_step_reduces_to_classifier_term() {
        for (p, q) in [
            (PolicyMode::SharedTorso, VariationalMode::Separate),
            (PolicyMode::Entropy, VariationalMode::SharedTorso),
            (PolicyMode::Uniform, VariationalMode::Uniform),
        ] {
            let m = model(3, 2, p, q, 21);
            let x = DataVector::new(vec![1, 0, 1], m.layout()).unwrap();
            let prefix = OrderPrefix::new(vec![2, 0], 3).unwrap();
            let f = f_term(&m, &x, &prefix).unwrap();
            let state = MaskedState::mask_with_prefix(&x, &prefix).unwrap();
            assert_abs_diff_eq!(f.value, cls_logp(&m, &state, 1, 0), epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_modes_average_the_classifier_terms() {
        let m = model(4, 3, PolicyMode::Uniform, VariationalMode::Uniform, 2);
        let x = DataVector::new(vec![2, 0, 1, 1], m.layout()).unwrap();
        let prefix = OrderPrefix::new(vec![3], 4).unwrap();
        let state = MaskedState::mask_with_prefix(&x, &prefix).unwrap();
        let expect: f64 = [0, 1, 2].iter().map(|&k| cls_logp(&m, &state, k, x.get(k))).sum::<f64>() / 3.0;
        assert_abs_diff_eq!(f_term(&m, &x, &prefix).unwrap().value, expect, epsilon = 1e-12);
    }

    #[test]
    fn f_term_matches_brute_force_candidate_loop() {
        let m = model(3, 2, PolicyMode::SharedTorso, VariationalMode::Separate, 13);
        let x = DataVector::new(vec![0, 1, 1], m.layout()).unwrap();
        // 1-based prefix (2)
        let prefix = OrderPrefix::new(vec![1], 3).unwrap();
        let state = MaskedState::mask_with_prefix(&x, &prefix).unwrap();
        let g = m.variational_logits(&x).unwrap();
        let masked = [0usize, 2];
        let h = m.policy_logits(&state, &masked).unwrap();
        let (zq, zp) = (
            masked.iter().map(|&k| g[k].exp()).sum::<f64>(),
            h.iter().map(|v| v.exp()).sum::<f64>(),
        );
        let mut expect = 0.0;
        for (j, &k) in masked.iter().enumerate() {
            let q = g[k].exp() / zq;
            let p = h[j].exp() / zp;
            expect += q * (p.ln() + cls_logp(&m, &state, k, x.get(k)) - q.ln());
        }
        let f = f_term(&m, &x, &prefix).unwrap();
        assert_abs_diff_eq!(f.value, expect, epsilon = 1e-12);
        assert_eq!(f.candidates.len(), 2);
    }

    #[test]
    fn full_prefix_is_rejected() {
        let m = model(2, 2, PolicyMode::Uniform, VariationalMode::Uniform, 0);
        let x = DataVector::new(vec![0, 1], m.layout()).unwrap();
        let full = OrderPrefix::new(vec![0, 1], 2).unwrap();
        assert!(matches!(f_term(&m, &x, &full), Err(Error::Domain(_))));
    }

    #[test]
    fn length_one_estimate_is_deterministic() {
        let m = model(1, 3, PolicyMode::SharedTorso, VariationalMode::SharedTorso, 1);
        let x = DataVector::new(vec![2], m.layout()).unwrap();
        let expect = cls_logp(&m, &MaskedState::fully_masked(1), 0, 2);
        let mut rng = RngStream::new(0);
        for n in [1, 2] {
            for _ in 0..5 {
                assert_eq!(stochastic_elbo(&m, &x, &mut rng, n).unwrap(), expect);
            }
        }
    }

    #[test]
    fn uniform_estimate_is_negative_ao_arm_loss() {
        let m = model(4, 3, PolicyMode::Uniform, VariationalMode::Uniform, 7);
        let x = DataVector::new(vec![0, 2, 2, 1], m.layout()).unwrap();
        let mut rng = RngStream::new(3);
        for _ in 0..50 {
            let mut r2 = rng.clone();
            let e = stochastic_elbo(&m, &x, &mut rng, 1).unwrap();
            let l = ao_arm_loss(&m, &x, &mut r2).unwrap();
            assert!((e + l).abs() <= 1e-12, "{e} vs {l}");
        }
    }

    #[test]
    fn ao_arm_loss_boundaries() {
        let m = model(3, 2, PolicyMode::Uniform, VariationalMode::Uniform, 4);
        let x = DataVector::new(vec![1, 1, 0], m.layout()).unwrap();
        let empty = OrderPrefix::empty(3);
        let all = MaskedState::fully_masked(3);
        let expect: f64 = -(0..3).map(|k| cls_logp(&m, &all, k, x.get(k))).sum::<f64>();
        assert_abs_diff_eq!(ao_arm_loss_at(&m, &x, &empty).unwrap(), expect, epsilon = 1e-12);
        let p = OrderPrefix::new(vec![0, 2], 3).unwrap();
        let s = MaskedState::mask_with_prefix(&x, &p).unwrap();
        assert_abs_diff_eq!(
            ao_arm_loss_at(&m, &x, &p).unwrap(),
            -3.0 * cls_logp(&m, &s, 1, 1),
            epsilon = 1e-12
        );
        let lo = model(3, 2, PolicyMode::SharedTorso, VariationalMode::Uniform, 4);
        assert!(matches!(ao_arm_loss_at(&lo, &x, &p), Err(Error::Config(_))));
    }

    #[test]
    fn identical_paths_give_zero_score_term() {
        let m = model(4, 2, PolicyMode::SharedTorso, VariationalMode::Separate, 5);
        let x = DataVector::new(vec![1, 0, 0, 1], m.layout()).unwrap();
        let p = Permutation::new(vec![2, 0, 3, 1]).unwrap();
        let draw = PathDraw {
            step: 3,
            paths: vec![p.clone(), p],
        };
        let (est, _) = rloo_gradient_at(&m, &x, &draw).unwrap();
        assert_eq!(est.delta_f, 0.0);
        assert_eq!(est.surrogate, est.elbo);
        assert_eq!(est.f1, est.f2);
    }

    #[test]
    fn delta_f_is_antisymmetric() {
        let m = model(4, 2, PolicyMode::Entropy, VariationalMode::SharedTorso, 5);
        let x = DataVector::new(vec![1, 0, 0, 1], m.layout()).unwrap();
        let a = Permutation::new(vec![2, 0, 3, 1]).unwrap();
        let b = Permutation::new(vec![1, 3, 0, 2]).unwrap();
        let d1 = PathDraw { step: 3, paths: vec![a.clone(), b.clone()] };
        let d2 = PathDraw { step: 3, paths: vec![b, a] };
        let (e1, _) = rloo_gradient_at(&m, &x, &d1).unwrap();
        let (e2, _) = rloo_gradient_at(&m, &x, &d2).unwrap();
        assert_eq!(e1.delta_f, -e2.delta_f);
        assert_abs_diff_eq!(e1.elbo, 2.0 * (e1.f1 + e1.f2), epsilon = 1e-15);
        assert_abs_diff_eq!(e1.surrogate, e2.surrogate, epsilon = 1e-12);
    }

    #[test]
    fn uniform_q_gradient_is_pathwise_only() {
        let m = model(3, 2, PolicyMode::SharedTorso, VariationalMode::Uniform, 6);
        let x = DataVector::new(vec![1, 0, 1], m.layout()).unwrap();
        let a = Permutation::new(vec![0, 1, 2]).unwrap();
        let b = Permutation::new(vec![2, 1, 0]).unwrap();
        let draw = PathDraw { step: 2, paths: vec![a, b] };
        let (est, grads) = rloo_gradient_at(&m, &x, &draw).unwrap();
        assert_eq!(est.log_q1, -(3f64.ln()));
        assert_eq!(est.log_q1, est.log_q2);

        // pathwise gradient of L/2 (F1 + F2) built independently
        let mut tape = Tape::new(m.params());
        let g = tape.constant(vec![0.0; 3]);
        let f1 = f_term_on(&m, &mut tape, &x, &draw.prefix(0), g).unwrap().value;
        let f2 = f_term_on(&m, &mut tape, &x, &draw.prefix(1), g).unwrap().value;
        let s = tape.add(f1, f2).unwrap();
        let s = tape.scale(s, 1.5);
        let expect = tape.backward(s).unwrap();
        for (a, b) in grads.flat().iter().zip(expect.flat()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_surrogate_gradient_matches_ao_arm_gradient() {
        let m = model(4, 3, PolicyMode::Uniform, VariationalMode::Uniform, 8);
        let x = DataVector::new(vec![0, 2, 1, 1], m.layout()).unwrap();
        let p = Permutation::new(vec![3, 1, 0, 2]).unwrap();
        let draw = PathDraw { step: 2, paths: vec![p.clone(), p] };
        let (_, g) = rloo_gradient_at(&m, &x, &draw).unwrap();
        let (_, ga) = ao_arm_gradient_at(&m, &x, &draw.prefix(0)).unwrap();
        for (a, b) in g.flat().iter().zip(ga.flat()) {
            assert_abs_diff_eq!(*a, -b, epsilon = 1e-12);
        }
    }

    #[test]
    fn biased_mode_estimate_is_finite() {
        let layout = Layout::graph(3, 2, 3).unwrap();
        let m = LoArmModel::new(
            layout.clone(),
            ModelConfig::new(vec![4], PolicyMode::BiasedUniform, VariationalMode::Uniform, 0),
        )
        .unwrap();
        let x = DataVector::new(vec![0, 1, 1, 1, 0, 2], &layout).unwrap();
        let mut rng = RngStream::new(1);
        for _ in 0..50 {
            let draw = draw_paths(&m, &x, 2, &mut rng).unwrap();
            for j in 0..2 {
                let head = &draw.paths[j].order()[..3];
                assert!(head.iter().all(|&k| k >= 3));
            }
            let (est, grads) = rloo_gradient_at(&m, &x, &draw).unwrap();
            assert!(est.elbo.is_finite() && grads.all_finite());
        }
    }
}
