//! Distributions over generation orders.
//!
//! The variational order distribution is a Plackett-Luce model over static
//! logits `g`: each step picks `k` among the remaining dimensions with
//! probability `exp(g_k) / sum_{k' remaining} exp(g_k')`. Full permutations
//! are drawn in one shot with Gumbel-top-k. An optional priority rank per
//! dimension restricts every step to the lowest-ranked remaining group, which
//! is how the edges-first baseline is expressed.

use crate::diff::log_sum_exp;
use crate::error::{Error, Result};
use crate::model::LoArmModel;
use crate::rng::RngStream;
use crate::state::{MaskedState, OrderPrefix};

/// A full ordering `z_1..z_L` with its inverse.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    order: Vec<usize>,
    position: Vec<usize>,
}

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut position = vec![usize::MAX; n];
        for (i, &k) in order.iter().enumerate() {
            if k >= n || position[k] != usize::MAX {
                return Err(Error::Domain(format!("{order:?} is not a permutation")));
            }
            position[k] = i;
        }
        Ok(Self { order, position })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
            position: (0..n).collect(),
        }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// 0-based position at which dimension `k` is generated.
    pub fn position_of(&self, k: usize) -> usize {
        self.position[k]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// First `len` entries as an [`OrderPrefix`].
    pub fn prefix(&self, len: usize) -> OrderPrefix {
        OrderPrefix::new(self.order[..len.min(self.order.len())].to_vec(), self.order.len())
            .expect("prefix of a permutation is valid")
    }
}

/// `log [exp(g_k) / sum_{k' in remaining} exp(g_k')]`.
pub fn pl_factor_log_prob(g: &[f64], remaining: &[usize], k: usize) -> Result<f64> {
    if !remaining.contains(&k) {
        return Err(Error::Domain(format!("dimension {k} is not in the remaining set")));
    }
    if let Some(&bad) = remaining.iter().find(|&&r| r >= g.len()) {
        return Err(Error::Domain(format!("remaining index {bad} out of range")));
    }
    let vals: Vec<f64> = remaining.iter().map(|&r| g[r]).collect();
    Ok(g[k] - log_sum_exp(&vals))
}

/// Log-probability of the ordered `prefix` under Plackett-Luce logits `g`.
pub fn prefix_log_prob(g: &[f64], prefix: &[usize]) -> Result<f64> {
    let n = g.len();
    let mut remaining = vec![true; n];
    let mut total = 0.0;
    for &z in prefix {
        if z >= n {
            return Err(Error::Domain(format!("index {z} out of range for L = {n}")));
        }
        if !remaining[z] {
            return Err(Error::Domain(format!("index {z} repeated in prefix")));
        }
        let vals: Vec<f64> = (0..n).filter(|&k| remaining[k]).map(|k| g[k]).collect();
        total += g[z] - log_sum_exp(&vals);
        remaining[z] = false;
    }
    Ok(total)
}

/// Gumbel-top-k: argsort of `g_k + Gumbel(0, 1)` descending, ties to the lower index.
pub fn sample_permutation(g: &[f64], rng: &mut RngStream) -> Permutation {
    PlackettLuce::new(g.to_vec()).sample(rng)
}

/// Plackett-Luce model with optional priority groups.
#[derive(Debug, Clone, PartialEq)]
pub struct PlackettLuce {
    logits: Vec<f64>,
    ranks: Option<Vec<u32>>,
}

impl PlackettLuce {
    pub fn new(logits: Vec<f64>) -> Self {
        Self {
            logits,
            ranks: None,
        }
    }

    /// Every step is restricted to the remaining dimensions of lowest rank.
    pub fn with_ranks(logits: Vec<f64>, ranks: Vec<u32>) -> Result<Self> {
        if ranks.len() != logits.len() {
            return Err(Error::Config("one rank per dimension required".into()));
        }
        Ok(Self {
            logits,
            ranks: Some(ranks),
        })
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn ranks(&self) -> Option<&[u32]> {
        self.ranks.as_deref()
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    /// Dimensions of `remaining` that can be chosen next.
    pub fn support(&self, remaining: &[usize]) -> Vec<usize> {
        match &self.ranks {
            None => remaining.to_vec(),
            Some(r) => {
                let low = remaining.iter().map(|&k| r[k]).min();
                remaining.iter().copied().filter(|&k| Some(r[k]) == low).collect()
            }
        }
    }

    pub fn factor_log_prob(&self, remaining: &[usize], k: usize) -> Result<f64> {
        let support = self.support(remaining);
        if !support.contains(&k) && remaining.contains(&k) {
            return Ok(f64::NEG_INFINITY);
        }
        pl_factor_log_prob(&self.logits, &support, k)
    }

    pub fn prefix_log_prob(&self, prefix: &[usize]) -> Result<f64> {
        if self.ranks.is_none() {
            return prefix_log_prob(&self.logits, prefix);
        }
        let check = OrderPrefix::new(prefix.to_vec(), self.logits.len())?;
        let mut remaining: Vec<usize> = (0..self.logits.len()).collect();
        let mut total = 0.0;
        for &z in check.indices() {
            total += self.factor_log_prob(&remaining, z)?;
            remaining.retain(|&k| k != z);
        }
        Ok(total)
    }

    pub fn sample(&self, rng: &mut RngStream) -> Permutation {
        let mut keyed: Vec<(u32, f64, usize)> = self
            .logits
            .iter()
            .enumerate()
            .map(|(k, &g)| {
                let rank = self.ranks.as_ref().map_or(0, |r| r[k]);
                (rank, g + rng.gumbel(), k)
            })
            .collect();
        keyed.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then(b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal))
                .then(a.2.cmp(&b.2))
        });
        Permutation::new(keyed.into_iter().map(|t| t.2).collect()).expect("argsort is a permutation")
    }
}

/// Draw the next dimension from the model order-policy at `state`.
/// Returns the dimension and the policy probability it was drawn with.
pub fn sample_next_policy(
    model: &LoArmModel,
    state: &MaskedState,
    rng: &mut RngStream,
) -> Result<(usize, f64)> {
    let masked = state.masked();
    if masked.is_empty() {
        return Err(Error::State("no masked dimension left to choose".into()));
    }
    let logp = model.policy_log_probs(state, &masked)?;
    let probs: Vec<f64> = logp.iter().map(|v| v.exp()).collect();
    let j = rng.categorical(&probs);
    Ok((masked[j], probs[j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::collections::HashMap;

    fn g3() -> Vec<f64> {
        vec![0.0, 2f64.ln(), 3f64.ln()]
    }

    #[test]
    fn factor_examples() {
        assert_eq!(pl_factor_log_prob(&[5.0, 1.0], &[1], 1).unwrap(), 0.0);
        assert_abs_diff_eq!(
            pl_factor_log_prob(&[0.7; 5], &[0, 2, 3, 4], 3).unwrap(),
            -(4f64.ln()),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            pl_factor_log_prob(&g3(), &[0, 1, 2], 2).unwrap(),
            (3.0f64 / 6.0).ln(),
            epsilon = 1e-15
        );
        assert!(matches!(pl_factor_log_prob(&g3(), &[0, 1], 2), Err(Error::Domain(_))));
    }

    #[test]
    fn prefix_examples() {
        assert_eq!(prefix_log_prob(&g3(), &[]).unwrap(), 0.0);
        let uniform = prefix_log_prob(&[0.0; 5], &[4, 1, 0, 3, 2]).unwrap();
        assert_abs_diff_eq!(uniform, -(120f64.ln()), epsilon = 1e-12);
        // 1-based prefix (3, 1)
        let p = prefix_log_prob(&g3(), &[2, 0]).unwrap();
        assert_abs_diff_eq!(p, (3.0f64 / 6.0).ln() + (1.0f64 / 3.0).ln(), epsilon = 1e-15);
        assert!(matches!(prefix_log_prob(&g3(), &[1, 1]), Err(Error::Domain(_))));
    }

    #[test]
    fn prefix_probabilities_sum_to_one_by_enumeration() {
        fn walk(g: &[f64], prefix: &mut Vec<usize>, depth: usize, acc: &mut f64) {
            if prefix.len() == depth {
                *acc += prefix_log_prob(g, prefix).unwrap().exp();
                return;
            }
            for k in 0..g.len() {
                if !prefix.contains(&k) {
                    prefix.push(k);
                    walk(g, prefix, depth, acc);
                    prefix.pop();
                }
            }
        }
        let mut rng = RngStream::new(17);
        for l in 1..=5 {
            let g: Vec<f64> = (0..l).map(|_| 3.0 * (rng.open01() - 0.5)).collect();
            for depth in 0..=l {
                let mut acc = 0.0;
                walk(&g, &mut Vec::new(), depth, &mut acc);
                assert_abs_diff_eq!(acc, 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn uniform_logits_give_falling_factorial() {
        let l = 6;
        let prefix = [5, 0, 2];
        let expect: f64 = (1..=prefix.len()).map(|j| -((l - j + 1) as f64).ln()).sum();
        assert_abs_diff_eq!(prefix_log_prob(&[0.0; 6], &prefix).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn single_element_and_dominated_logit() {
        let mut rng = RngStream::new(1);
        assert_eq!(sample_permutation(&[0.3], &mut rng).order(), &[0]);
        let mut g = vec![0.0; 4];
        g[0] = 1000.0;
        let hits = (0..10_000)
            .filter(|_| sample_permutation(&g, &mut rng).order()[0] == 0)
            .count();
        assert!(hits as f64 / 1e4 > 0.999);
    }

    #[test]
    fn gumbel_top_k_matches_plackett_luce_law() {
        let g = g3();
        let mut rng = RngStream::new(2024);
        let n = 100_000;
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for _ in 0..n {
            *counts.entry(sample_permutation(&g, &mut rng).order().to_vec()).or_default() += 1;
        }
        let perms = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut tv = 0.0;
        let mut total = 0.0;
        for p in perms {
            let exact = prefix_log_prob(&g, &p).unwrap().exp();
            total += exact;
            let emp = *counts.get(&p.to_vec()).unwrap_or(&0) as f64 / n as f64;
            tv += 0.5 * (exact - emp).abs();
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(prefix_log_prob(&g, &[2, 1, 0]).unwrap().exp(), 1.0 / 3.0, epsilon = 1e-12);
        assert!(tv < 0.01, "tv = {tv}");
    }

    #[test]
    fn ranked_model_takes_low_rank_group_first() {
        let pl = PlackettLuce::with_ranks(vec![0.0; 5], vec![1, 1, 0, 0, 0]).unwrap();
        let mut rng = RngStream::new(4);
        for _ in 0..200 {
            let p = pl.sample(&mut rng);
            let mut head = p.order()[..3].to_vec();
            head.sort();
            assert_eq!(head, vec![2, 3, 4]);
        }
        let lp = pl.prefix_log_prob(&[3, 2, 4, 1, 0]).unwrap();
        assert_abs_diff_eq!(lp, -(6f64.ln()) - 2f64.ln(), epsilon = 1e-12);
        assert_eq!(pl.prefix_log_prob(&[0]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn permutation_inverse_is_consistent() {
        let mut rng = RngStream::new(8);
        for _ in 0..100 {
            let p = sample_permutation(&[0.1, -0.3, 2.0, 0.0, 0.5, 1.0, -1.0], &mut rng);
            for k in 0..p.len() {
                assert_eq!(p.order()[p.position_of(k)], k);
            }
        }
        assert!(Permutation::new(vec![0, 0]).is_err());
    }
}
