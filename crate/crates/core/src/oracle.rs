//! Brute-force references for tiny instances.
//!
//! Everything here enumerates orders exactly in log-space and refuses when
//! `L` exceeds [`MAX_ENUM_LEN`]. The per-state quantities come from the
//! value-level model API; the estimators in [`crate::elbo`] are not used.

use std::collections::HashMap;

use crate::diff::{log_sum_exp, masked_log_softmax, Gradients};
use crate::error::{Error, Result};
use crate::model::LoArmModel;
use crate::order::PlackettLuce;
use crate::state::{DataVector, MaskedState};

/// Largest `L` for exact enumeration (720 permutations).
pub const MAX_ENUM_LEN: usize = 6;
/// Largest `L` for finite-difference gradients.
pub const MAX_FD_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerationReport {
    pub log_likelihood: f64,
    pub elbo: f64,
    /// `log_likelihood - elbo`, non-negative up to rounding.
    pub gap: f64,
    pub permutations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    ExactElbo,
    ExactLogLikelihood,
}

/// Model quantities at the state revealing exactly the set `mask` of dims.
struct SetEval {
    /// Masked dims, ascending.
    masked: Vec<usize>,
    log_policy: Vec<f64>,
    log_classifier: Vec<f64>,
}

fn check_len(x: &DataVector, limit: usize) -> Result<()> {
    if x.len() > limit {
        return Err(Error::TooLarge {
            len: x.len(),
            limit,
        });
    }
    Ok(())
}

struct Enumerator<'a> {
    model: &'a LoArmModel,
    x: &'a DataVector,
    cache: HashMap<u32, SetEval>,
}

impl<'a> Enumerator<'a> {
    fn new(model: &'a LoArmModel, x: &'a DataVector) -> Self {
        Self {
            model,
            x,
            cache: HashMap::new(),
        }
    }

    fn eval(&mut self, set: u32) -> Result<&SetEval> {
        if !self.cache.contains_key(&set) {
            let l = self.x.len();
            let mut state = MaskedState::fully_masked(l);
            for k in 0..l {
                if set & (1 << k) != 0 {
                    state.unmask(k, self.x.get(k), self.model.layout())?;
                }
            }
            let masked = state.masked();
            let log_policy = self.model.policy_log_probs(&state, &masked)?;
            let rows = self.model.classifier_logits(&state)?;
            let log_classifier = masked
                .iter()
                .map(|&k| {
                    let all: Vec<usize> = (0..rows[k].len()).collect();
                    masked_log_softmax(&rows[k], &all).map(|lp| lp[self.x.get(k)])
                })
                .collect::<Result<Vec<_>>>()?;
            self.cache.insert(
                set,
                SetEval {
                    masked,
                    log_policy,
                    log_classifier,
                },
            );
        }
        Ok(&self.cache[&set])
    }

    /// `log sum_z p(z, x)` by summing over subsets: the log-mass of reaching
    /// each revealed set through every order.
    fn log_likelihood(&mut self) -> Result<f64> {
        let l = self.x.len();
        let full = (1u32 << l) - 1;
        let mut alpha = vec![f64::NEG_INFINITY; 1 << l];
        alpha[0] = 0.0;
        for set in 0..full {
            if alpha[set as usize] == f64::NEG_INFINITY {
                continue;
            }
            let a = alpha[set as usize];
            let ev = self.eval(set)?;
            let steps: Vec<(usize, f64)> = ev
                .masked
                .iter()
                .enumerate()
                .map(|(j, &k)| (k, a + ev.log_policy[j] + ev.log_classifier[j]))
                .collect();
            for (k, v) in steps {
                let next = (set | (1 << k)) as usize;
                alpha[next] = log_sum_exp(&[alpha[next], v]);
            }
        }
        Ok(alpha[full as usize])
    }

    /// `F` at the revealed set, summed exactly over the next dimension.
    fn f_value(&mut self, set: u32, q: &PlackettLuce) -> Result<f64> {
        let ev = self.eval(set)?;
        let support = q.support(&ev.masked);
        let mut total = 0.0;
        for (j, &k) in ev.masked.iter().enumerate() {
            if !support.contains(&k) {
                continue;
            }
            let lq = q.factor_log_prob(&ev.masked, k)?;
            total += lq.exp() * (ev.log_policy[j] + ev.log_classifier[j] - lq);
        }
        Ok(total)
    }

    /// `sum_i sum_{z_<i} q(z_<i | x) F(z_<i, x)` over every ordered prefix.
    fn elbo(&mut self, q: &PlackettLuce) -> Result<f64> {
        let l = self.x.len();
        let mut f_cache: HashMap<u32, f64> = HashMap::new();
        let mut total = 0.0;
        // stack of (revealed set, remaining dims, log q of the ordered prefix)
        let mut stack = vec![(0u32, (0..l).collect::<Vec<_>>(), 0.0f64)];
        while let Some((set, remaining, lq)) = stack.pop() {
            if remaining.is_empty() {
                continue;
            }
            let f = match f_cache.get(&set) {
                Some(&f) => f,
                None => {
                    let f = self.f_value(set, q)?;
                    f_cache.insert(set, f);
                    f
                }
            };
            total += lq.exp() * f;
            for &k in &remaining {
                let step = q.factor_log_prob(&remaining, k)?;
                if step == f64::NEG_INFINITY {
                    continue;
                }
                let rest: Vec<usize> = remaining.iter().copied().filter(|&r| r != k).collect();
                stack.push((set | (1 << k), rest, lq + step));
            }
        }
        Ok(total)
    }
}

/// `log p(x) = log sum_z prod_i p(z_i | z_<i, x_z<i) p(x_z_i | x_z<i)`.
pub fn exact_log_likelihood(model: &LoArmModel, x: &DataVector) -> Result<f64> {
    check_len(x, MAX_ENUM_LEN)?;
    Enumerator::new(model, x).log_likelihood()
}

/// Exact ELBO by enumerating every ordered prefix under `q(. | x)`.
pub fn exact_elbo(model: &LoArmModel, x: &DataVector) -> Result<f64> {
    check_len(x, MAX_ENUM_LEN)?;
    let q = model.order_distribution(x)?;
    Enumerator::new(model, x).elbo(&q)
}

pub fn enumerate(model: &LoArmModel, x: &DataVector) -> Result<EnumerationReport> {
    check_len(x, MAX_ENUM_LEN)?;
    let q = model.order_distribution(x)?;
    let mut e = Enumerator::new(model, x);
    let log_likelihood = e.log_likelihood()?;
    let elbo = e.elbo(&q)?;
    Ok(EnumerationReport {
        log_likelihood,
        elbo,
        gap: log_likelihood - elbo,
        permutations: (1..=x.len() as u64).product(),
    })
}

pub fn exact_objective(model: &LoArmModel, x: &DataVector, objective: Objective) -> Result<f64> {
    let v = match objective {
        Objective::ExactElbo => exact_elbo(model, x)?,
        Objective::ExactLogLikelihood => exact_log_likelihood(model, x)?,
    };
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("{objective:?} evaluated to {v}")));
    }
    Ok(v)
}

/// Central finite differences of an exact objective w.r.t. every parameter.
pub fn fd_gradient(model: &LoArmModel, x: &DataVector, objective: Objective, eps: f64) -> Result<Gradients> {
    check_len(x, MAX_FD_LEN)?;
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Domain(format!("finite-difference step {eps} outside [1e-7, 1e-3]")));
    }
    let mut work = model.clone();
    let mut grads = Gradients::zeros_like(model.params());
    for id in model.params().ids() {
        for i in 0..model.params().value(id).len() {
            let orig = model.params().value(id)[i];
            work.params_mut().value_mut(id)[i] = orig + eps;
            let up = exact_objective(&work, x, objective)?;
            work.params_mut().value_mut(id)[i] = orig - eps;
            let down = exact_objective(&work, x, objective)?;
            work.params_mut().value_mut(id)[i] = orig;
            grads.bufs[id.index()][i] = (up - down) / (2.0 * eps);
        }
    }
    Ok(grads)
}
