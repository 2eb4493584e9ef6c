//! Small typed graphs under a connectivity-plus-valence grammar.
//!
//! Node types carry a valence; edge types 1 and 2 are single and double
//! bonds of that order, 0 is no-edge. A graph is valid iff its real edges
//! connect every node and no node's summed bond order exceeds its valence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::state::{DataVector, GraphDim, GraphRecord, GraphState, Layout, NO_EDGE};

pub const EDGE_VOCAB: usize = 3;

fn default_nodes() -> usize {
    4
}
fn default_valences() -> Vec<usize> {
    vec![4, 3, 2]
}
fn default_type_weights() -> Vec<f64> {
    vec![0.5, 0.3, 0.2]
}
fn default_extra_edge() -> f64 {
    0.5
}
fn default_double() -> f64 {
    0.25
}

/// Valence table; node type `t` may carry total bond order `valences[t]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphGrammar {
    pub valences: Vec<usize>,
}

impl GraphGrammar {
    pub fn node_vocab(&self) -> usize {
        self.valences.len()
    }

    pub fn check_record(&self, g: &GraphRecord) -> bool {
        let n = g.n_nodes();
        if g.node_types.iter().any(|&t| t >= self.valences.len()) {
            return false;
        }
        let mut load = vec![0; n];
        let mut adj = vec![Vec::new(); n];
        for &(a, b, t) in &g.edges {
            load[a] += t;
            load[b] += t;
            adj[a].push(b);
            adj[b].push(a);
        }
        if (0..n).any(|a| load[a] > self.valences[g.node_types[a]]) {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(a) = stack.pop() {
            for &b in &adj[a] {
                if !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Grammar check on a fully unmasked graph over its active nodes.
    pub fn validity_check(&self, g: &GraphState) -> Result<bool> {
        let slots: Vec<usize> = (0..g.n_max()).filter(|&a| g.active()[a]).collect();
        let pos = |a: usize| slots.iter().position(|&s| s == a).expect("active slot");
        let mut node_types = vec![0; slots.len()];
        let mut edges = Vec::new();
        for (k, d) in g.map().entries().iter().enumerate() {
            let v = g
                .cell(k)
                .ok_or_else(|| Error::Precondition(format!("graph dimension {k} is still masked")))?;
            match *d {
                GraphDim::Node(a) => node_types[pos(a)] = v,
                GraphDim::Edge(a, b) if v != NO_EDGE => edges.push((pos(a), pos(b), v)),
                GraphDim::Edge(..) => {}
            }
        }
        Ok(GraphRecord::new(node_types, edges).is_ok_and(|r| self.check_record(&r)))
    }

    pub fn check_data(&self, x: &DataVector, n: usize) -> bool {
        GraphRecord::from_data(x, n).is_ok_and(|r| self.check_record(&r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyGraphSpec {
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// Valence per node type (carbon-, nitrogen-, oxygen-like by default).
    #[serde(default = "default_valences")]
    pub valences: Vec<usize>,
    /// Node type proposal weights.
    #[serde(default = "default_type_weights")]
    pub type_weights: Vec<f64>,
    /// Probability of adding one edge beyond the spanning tree.
    #[serde(default = "default_extra_edge")]
    pub extra_edge_prob: f64,
    /// Probability that a proposed bond is double.
    #[serde(default = "default_double")]
    pub double_prob: f64,
}

impl Default for ToyGraphSpec {
    fn default() -> Self {
        Self {
            nodes: default_nodes(),
            valences: default_valences(),
            type_weights: default_type_weights(),
            extra_edge_prob: default_extra_edge(),
            double_prob: default_double(),
        }
    }
}

const MAX_ATTEMPTS: usize = 100_000;

impl ToyGraphSpec {
    pub fn grammar(&self) -> GraphGrammar {
        GraphGrammar {
            valences: self.valences.clone(),
        }
    }

    pub fn layout(&self) -> Result<Layout> {
        Layout::graph(self.nodes, self.valences.len(), EDGE_VOCAB)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(Error::Config("toy graphs need at least 2 nodes".into()));
        }
        if self.valences.len() < 2 || self.valences.contains(&0) {
            return Err(Error::Config("need at least two node types with positive valence".into()));
        }
        if self.type_weights.len() != self.valences.len()
            || self.type_weights.iter().any(|&w| !(w >= 0.0))
            || !(self.type_weights.iter().sum::<f64>() > 0.0)
        {
            return Err(Error::Config("type_weights must be non-negative, one per node type".into()));
        }
        for p in [self.extra_edge_prob, self.double_prob] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    fn propose(&self, rng: &mut RngStream) -> Result<GraphRecord> {
        let n = self.nodes;
        let types: Vec<usize> = (0..n).map(|_| rng.categorical(&self.type_weights)).collect();
        let mut labels: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            labels.swap(i, rng.below(i + 1));
        }
        let bond = |rng: &mut RngStream| if rng.bernoulli(self.double_prob) { 2 } else { 1 };
        let mut edges = Vec::new();
        for i in 1..n {
            let j = rng.below(i);
            edges.push((labels[i], labels[j], bond(rng)));
        }
        if rng.bernoulli(self.extra_edge_prob) {
            let mut free = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if !edges.iter().any(|e| (e.0 == a && e.1 == b) || (e.0 == b && e.1 == a)) {
                        free.push((a, b));
                    }
                }
            }
            if !free.is_empty() {
                let (a, b) = free[rng.below(free.len())];
                edges.push((a, b, bond(rng)));
            }
        }
        GraphRecord::new(types, edges)
    }
}

/// Rejection sampler: random labelled spanning tree, optional extra edge,
/// random bond orders and node types, kept only when the grammar holds.
pub fn gen_toy_graphs(spec: &ToyGraphSpec, count: usize, rng: &mut RngStream) -> Result<Vec<GraphRecord>> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::Config("count must be at least 1".into()));
    }
    let grammar = spec.grammar();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut found = None;
        for _ in 0..MAX_ATTEMPTS {
            let g = spec.propose(rng)?;
            if grammar.check_record(&g) {
                found = Some(g);
                break;
            }
        }
        out.push(found.ok_or_else(|| {
            Error::Config(format!("no valid graph found in {MAX_ATTEMPTS} proposals; check valences"))
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::MaskedState;

    fn grammar() -> GraphGrammar {
        ToyGraphSpec::default().grammar()
    }

    #[test]
    fn hand_built_chain() {
        // C = C - O with a double bond on the first pair
        let chain = GraphRecord::new(vec![0, 0, 2], vec![(0, 1, 2), (1, 2, 1)]).unwrap();
        assert!(grammar().check_record(&chain));
        let cut = GraphRecord::new(vec![0, 0, 2], vec![(0, 1, 2)]).unwrap();
        assert!(!grammar().check_record(&cut));
        // oxygen with two double bonds exceeds valence 2
        let over = GraphRecord::new(vec![0, 2, 0], vec![(0, 1, 2), (1, 2, 2)]).unwrap();
        assert!(!grammar().check_record(&over));
    }

    #[test]
    fn empty_graph_and_two_nodes() {
        let layout = Layout::graph(3, 3, EDGE_VOCAB).unwrap();
        let x = DataVector::new(vec![0, 1, 2, 0, 0, 0], &layout).unwrap();
        assert!(!grammar().check_data(&x, 3));
        let spec = ToyGraphSpec { nodes: 2, ..Default::default() };
        for g in gen_toy_graphs(&spec, 50, &mut RngStream::new(3)).unwrap() {
            assert_eq!(g.edges.len(), 1);
        }
    }

    #[test]
    fn validity_on_states() {
        let layout = Layout::graph(3, 3, EDGE_VOCAB).unwrap();
        let chain = GraphRecord::new(vec![0, 0, 2], vec![(0, 1, 2), (1, 2, 1)]).unwrap();
        let x = chain.to_data(&layout).unwrap();
        let full = GraphState::from_flat(&MaskedState::from_data(&x), vec![true; 3]).unwrap();
        assert!(grammar().validity_check(&full).unwrap());
        let partial = GraphState::masked(vec![true; 3]).unwrap();
        assert!(matches!(grammar().validity_check(&partial), Err(Error::Precondition(_))));
        // a padded slot is ignored
        let padded = GraphState::from_flat(&MaskedState::from_data(&x), vec![true, false, true, true]).unwrap();
        assert!(grammar().validity_check(&padded).unwrap());
    }

    #[test]
    fn generator_contract() {
        let spec = ToyGraphSpec::default();
        let a = gen_toy_graphs(&spec, 500, &mut RngStream::new(11)).unwrap();
        assert_eq!(a, gen_toy_graphs(&spec, 500, &mut RngStream::new(11)).unwrap());
        let layout = spec.layout().unwrap();
        assert_eq!(layout.len(), 10);
        for g in &a {
            assert!(spec.grammar().check_record(g));
            let x = g.to_data(&layout).unwrap();
            assert_eq!(&GraphRecord::from_data(&x, 4).unwrap(), g);
        }
    }
}
