use super::{DataVector, Layout, MaskedState};
use crate::error::{Error, Result};

/// Edge category reserved for "no bond" in the dense adjacency.
pub const NO_EDGE: usize = 0;

/// What a flat graph dimension addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphDim {
    Node(usize),
    /// Unordered pair `(a, b)` with `a < b`.
    Edge(usize, usize),
}

/// Bijection between flat dimensions and node slots / unordered node pairs.
///
/// Order: active node slots ascending, then pairs `(a, b)`, `a < b`, in
/// row-major order over the strict upper triangle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatIndexMap {
    entries: Vec<GraphDim>,
}

impl FlatIndexMap {
    pub fn new(n_active: usize) -> Result<Self> {
        let slots: Vec<usize> = (0..n_active).collect();
        Self::for_slots(&slots)
    }

    /// Map over an explicit ascending list of active node slots.
    pub fn for_slots(slots: &[usize]) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::Domain("a graph needs at least one active node".into()));
        }
        if slots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("active slots must be strictly ascending".into()));
        }
        let mut entries: Vec<GraphDim> = slots.iter().map(|&a| GraphDim::Node(a)).collect();
        for (i, &a) in slots.iter().enumerate() {
            for &b in &slots[i + 1..] {
                entries.push(GraphDim::Edge(a, b));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self, k: usize) -> GraphDim {
        self.entries[k]
    }

    pub fn entries(&self) -> &[GraphDim] {
        &self.entries
    }

    pub fn index_of(&self, d: GraphDim) -> Option<usize> {
        let d = match d {
            GraphDim::Edge(a, b) if a > b => GraphDim::Edge(b, a),
            other => other,
        };
        self.entries.iter().position(|&e| e == d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenseCell {
    Value(usize),
    Mask,
    /// Diagonal or a row/column of an inactive (padding) node.
    Pad,
}

/// Materialized node vector and dense `n_max x n_max` adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseGraph {
    pub nodes: Vec<DenseCell>,
    pub adjacency: Vec<Vec<DenseCell>>,
}

impl DenseGraph {
    pub fn is_symmetric(&self) -> bool {
        let n = self.adjacency.len();
        (0..n).all(|a| (0..n).all(|b| self.adjacency[a][b] == self.adjacency[b][a]))
    }
}

/// Graph `(H_n, H_e, H_m)`: node cells, strict-upper-triangle edge cells over
/// `n_max` slots, and the attention mask of active slots. Each edge is stored
/// once; the dense adjacency mirrors it on materialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphState {
    n_max: usize,
    active: Vec<bool>,
    nodes: Vec<Option<usize>>,
    edges: Vec<Option<usize>>,
    map: FlatIndexMap,
}

fn pair_slot(n_max: usize, a: usize, b: usize) -> usize {
    // row-major strict upper triangle
    a * (2 * n_max - a - 1) / 2 + (b - a - 1)
}

impl GraphState {
    /// Fully masked graph with the given attention mask.
    pub fn masked(active: Vec<bool>) -> Result<Self> {
        let n_max = active.len();
        let slots: Vec<usize> = (0..n_max).filter(|&a| active[a]).collect();
        let map = FlatIndexMap::for_slots(&slots)?;
        Ok(Self {
            n_max,
            active,
            nodes: vec![None; n_max],
            edges: vec![None; n_max * n_max.saturating_sub(1) / 2],
            map,
        })
    }

    /// Build from a flat state whose dimensions follow `FlatIndexMap` over
    /// the active slots.
    pub fn from_flat(state: &MaskedState, active: Vec<bool>) -> Result<Self> {
        let mut g = Self::masked(active)?;
        if state.len() != g.map.len() {
            return Err(Error::Config(format!(
                "flat state has {} dimensions, graph view expects {}",
                state.len(),
                g.map.len()
            )));
        }
        for k in 0..state.len() {
            if let Some(v) = state.get(k) {
                g.set(k, Some(v));
            }
        }
        Ok(g)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn map(&self) -> &FlatIndexMap {
        &self.map
    }

    /// Number of flat dimensions `L = n + n(n-1)/2` over active nodes.
    pub fn flat_len(&self) -> usize {
        self.map.len()
    }

    fn set(&mut self, k: usize, v: Option<usize>) {
        match self.map.dim(k) {
            GraphDim::Node(a) => self.nodes[a] = v,
            GraphDim::Edge(a, b) => self.edges[pair_slot(self.n_max, a, b)] = v,
        }
    }

    pub fn cell(&self, k: usize) -> Option<usize> {
        match self.map.dim(k) {
            GraphDim::Node(a) => self.nodes[a],
            GraphDim::Edge(a, b) => self.edges[pair_slot(self.n_max, a, b)],
        }
    }

    /// Unmask flat dimension `k`; for an edge this fills both `(a, b)` and
    /// `(b, a)` of the materialized adjacency.
    pub fn unmask(&mut self, k: usize, value: usize) -> Result<()> {
        if k >= self.map.len() {
            return Err(Error::Domain(format!("flat dimension {k} out of range")));
        }
        if self.cell(k).is_some() {
            return Err(Error::State(format!("flat dimension {k} is already unmasked")));
        }
        self.set(k, Some(value));
        Ok(())
    }

    pub fn to_flat(&self) -> MaskedState {
        let mut s = MaskedState::fully_masked(self.map.len());
        for k in 0..self.map.len() {
            s.cells[k] = self.cell(k);
        }
        s
    }

    pub fn dense(&self) -> DenseGraph {
        let n = self.n_max;
        let cell = |v: Option<usize>| v.map_or(DenseCell::Mask, DenseCell::Value);
        let nodes = (0..n)
            .map(|a| if self.active[a] { cell(self.nodes[a]) } else { DenseCell::Pad })
            .collect();
        let mut adjacency = vec![vec![DenseCell::Pad; n]; n];
        for a in 0..n {
            for b in a + 1..n {
                if self.active[a] && self.active[b] {
                    let c = cell(self.edges[pair_slot(n, a, b)]);
                    adjacency[a][b] = c;
                    adjacency[b][a] = c;
                }
            }
        }
        DenseGraph { nodes, adjacency }
    }
}

/// A complete graph: node types plus real edges `(a, b, type)`, `a < b`,
/// `type != NO_EDGE`, sorted. Omitted pairs are no-edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GraphRecord {
    pub node_types: Vec<usize>,
    pub edges: Vec<(usize, usize, usize)>,
}

impl GraphRecord {
    pub fn new(node_types: Vec<usize>, mut edges: Vec<(usize, usize, usize)>) -> Result<Self> {
        let n = node_types.len();
        if n == 0 {
            return Err(Error::Input("graph without nodes".into()));
        }
        for e in edges.iter_mut() {
            if e.0 > e.1 {
                *e = (e.1, e.0, e.2);
            }
            if e.0 == e.1 || e.1 >= n {
                return Err(Error::Input(format!("invalid edge ({}, {})", e.0, e.1)));
            }
            if e.2 == NO_EDGE {
                return Err(Error::Input("explicit no-edge entries are not stored".into()));
            }
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1) {
            return Err(Error::Input("duplicate edge".into()));
        }
        Ok(Self { node_types, edges })
    }

    pub fn n_nodes(&self) -> usize {
        self.node_types.len()
    }

    pub fn edge_type(&self, a: usize, b: usize) -> usize {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.edges
            .iter()
            .find(|e| e.0 == a && e.1 == b)
            .map_or(NO_EDGE, |e| e.2)
    }

    pub fn to_data(&self, layout: &Layout) -> Result<DataVector> {
        let map = FlatIndexMap::new(self.n_nodes())?;
        let tokens = map
            .entries()
            .iter()
            .map(|d| match *d {
                GraphDim::Node(a) => self.node_types[a],
                GraphDim::Edge(a, b) => self.edge_type(a, b),
            })
            .collect();
        DataVector::new(tokens, layout)
    }

    /// Inverse of [`GraphRecord::to_data`] for `n` nodes.
    pub fn from_data(x: &DataVector, n: usize) -> Result<Self> {
        let map = FlatIndexMap::new(n)?;
        if map.len() != x.len() {
            return Err(Error::Input(format!(
                "vector of length {} is not a {n}-node graph",
                x.len()
            )));
        }
        let mut node_types = vec![0; n];
        let mut edges = Vec::new();
        for (k, d) in map.entries().iter().enumerate() {
            match *d {
                GraphDim::Node(a) => node_types[a] = x.get(k),
                GraphDim::Edge(a, b) if x.get(k) != NO_EDGE => edges.push((a, b, x.get(k))),
                GraphDim::Edge(..) => {}
            }
        }
        Self::new(node_types, edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::DimKind;

    #[test]
    fn index_map_small_cases() {
        let m1 = FlatIndexMap::new(1).unwrap();
        assert_eq!(m1.entries(), &[GraphDim::Node(0)]);

        let m3 = FlatIndexMap::new(3).unwrap();
        assert_eq!(
            m3.entries(),
            &[
                GraphDim::Node(0),
                GraphDim::Node(1),
                GraphDim::Node(2),
                GraphDim::Edge(0, 1),
                GraphDim::Edge(0, 2),
                GraphDim::Edge(1, 2),
            ]
        );

        let m4 = FlatIndexMap::new(4).unwrap();
        assert_eq!(m4.len(), 10);
        for k in 0..10 {
            assert_eq!(m4.index_of(m4.dim(k)), Some(k));
        }
        assert_eq!(m4.index_of(GraphDim::Edge(3, 1)), m4.index_of(GraphDim::Edge(1, 3)));
    }

    #[test]
    fn dimension_count_matches_formula() {
        for n in 1..9 {
            assert_eq!(FlatIndexMap::new(n).unwrap().len(), n + n * (n - 1) / 2);
        }
    }

    #[test]
    fn unmasking_an_edge_fills_both_halves() {
        let mut g = GraphState::masked(vec![true; 3]).unwrap();
        let k = g.map().index_of(GraphDim::Edge(0, 2)).unwrap();
        g.unmask(k, 2).unwrap();
        let d = g.dense();
        assert_eq!(d.adjacency[0][2], DenseCell::Value(2));
        assert_eq!(d.adjacency[2][0], DenseCell::Value(2));
        assert!(d.is_symmetric());
        assert!(matches!(g.unmask(k, 1), Err(Error::State(_))));
    }

    #[test]
    fn padding_nodes_are_excluded() {
        let g = GraphState::masked(vec![true, false, true, true]).unwrap();
        assert_eq!(g.n_active(), 3);
        assert_eq!(g.flat_len(), 6);
        assert_eq!(g.map().dim(3), GraphDim::Edge(0, 2));
        let d = g.dense();
        assert_eq!(d.nodes[1], DenseCell::Pad);
        assert!(d.adjacency[1].iter().all(|&c| c == DenseCell::Pad));
        assert_eq!(d.adjacency[0][3], DenseCell::Mask);
    }

    #[test]
    fn record_round_trips_through_flat_vector() {
        let lay = Layout::graph(4, 3, 3).unwrap();
        assert_eq!(lay.kind(0), DimKind::Node);
        assert_eq!(lay.kind(9), DimKind::Edge);
        let r = GraphRecord::new(vec![0, 1, 2, 0], vec![(2, 1, 2), (0, 1, 1), (2, 3, 1)]).unwrap();
        let x = r.to_data(&lay).unwrap();
        assert_eq!(x.tokens(), &[0, 1, 2, 0, 1, 0, 0, 2, 0, 1]);
        assert_eq!(GraphRecord::from_data(&x, 4).unwrap(), r);
        let g = GraphState::from_flat(&MaskedState::from_data(&x), vec![true; 4]).unwrap();
        assert_eq!(g.to_flat(), MaskedState::from_data(&x));
    }
}
