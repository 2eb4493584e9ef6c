//! Token vectors, the mask category, order prefixes and the dense graph view.
//!
//! Dimension indices are 0-based throughout the crate.

mod graph;
mod graph_file;

pub use graph::{DenseCell, DenseGraph, FlatIndexMap, GraphDim, GraphRecord, GraphState};
pub use graph::NO_EDGE;
pub use graph_file::{format_graph_line, parse_graph_line, read_graph_file, write_graph_file};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a flat dimension represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimKind {
    Token,
    Pixel,
    Node,
    Edge,
}

/// Per-dimension vocabulary sizes and the offsets of each dimension inside
/// the one-hot network input (width `m_k + 1`, MASK last) and the classifier
/// output (width `m_k`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    sizes: Vec<usize>,
    kinds: Vec<DimKind>,
    in_offsets: Vec<usize>,
    out_offsets: Vec<usize>,
    input_width: usize,
    output_width: usize,
}

impl Layout {
    pub fn new(sizes: Vec<usize>, kinds: Vec<DimKind>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Config("a data vector needs at least one dimension".into()));
        }
        if sizes.len() != kinds.len() {
            return Err(Error::Config("sizes and kinds differ in length".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::Config("vocabulary sizes must be positive".into()));
        }
        let mut in_offsets = Vec::with_capacity(sizes.len());
        let mut out_offsets = Vec::with_capacity(sizes.len());
        let (mut i, mut o) = (0, 0);
        for &m in &sizes {
            in_offsets.push(i);
            out_offsets.push(o);
            i += m + 1;
            o += m;
        }
        Ok(Self {
            sizes,
            kinds,
            in_offsets,
            out_offsets,
            input_width: i,
            output_width: o,
        })
    }

    pub fn uniform(len: usize, vocab: usize, kind: DimKind) -> Result<Self> {
        Self::new(vec![vocab; len], vec![kind; len])
    }

    /// Flat layout for graphs with `n` active nodes: node slots first, then
    /// the strict upper triangle in row-major order.
    pub fn graph(n: usize, node_vocab: usize, edge_vocab: usize) -> Result<Self> {
        let pairs = n * n.saturating_sub(1) / 2;
        let mut sizes = vec![node_vocab; n];
        sizes.extend(std::iter::repeat(edge_vocab).take(pairs));
        let mut kinds = vec![DimKind::Node; n];
        kinds.extend(std::iter::repeat(DimKind::Edge).take(pairs));
        Self::new(sizes, kinds)
    }

    /// Number of dimensions `L`.
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn vocab(&self, k: usize) -> usize {
        self.sizes[k]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn kind(&self, k: usize) -> DimKind {
        self.kinds[k]
    }

    pub fn kinds(&self) -> &[DimKind] {
        &self.kinds
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn output_width(&self) -> usize {
        self.output_width
    }

    /// `(start, len)` of dimension `k` inside the classifier output.
    pub fn output_row(&self, k: usize) -> (usize, usize) {
        (self.out_offsets[k], self.sizes[k])
    }

    pub fn input_offset(&self, k: usize) -> usize {
        self.in_offsets[k]
    }
}

/// A fully observed data vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DataVector(Vec<usize>);

impl DataVector {
    pub fn new(tokens: Vec<usize>, layout: &Layout) -> Result<Self> {
        if tokens.len() != layout.len() {
            return Err(Error::Input(format!(
                "data vector has {} tokens, layout expects {}",
                tokens.len(),
                layout.len()
            )));
        }
        for (k, &t) in tokens.iter().enumerate() {
            if t >= layout.vocab(k) {
                return Err(Error::Input(format!(
                    "token {t} at dimension {k} outside vocabulary of size {}",
                    layout.vocab(k)
                )));
            }
        }
        Ok(Self(tokens))
    }

    pub fn tokens(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> usize {
        self.0[k]
    }
}

/// Partially generated state: `None` is the MASK category.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskedState {
    cells: Vec<Option<usize>>,
}

impl MaskedState {
    pub fn fully_masked(len: usize) -> Self {
        Self {
            cells: vec![None; len],
        }
    }

    pub fn from_data(x: &DataVector) -> Self {
        Self {
            cells: x.tokens().iter().map(|&t| Some(t)).collect(),
        }
    }

    /// Reveal the dimensions in `prefix`, mask everything else.
    pub fn mask_with_prefix(x: &DataVector, prefix: &OrderPrefix) -> Result<Self> {
        if prefix.dims() != x.len() {
            return Err(Error::Domain(format!(
                "prefix over {} dimensions applied to a vector of length {}",
                prefix.dims(),
                x.len()
            )));
        }
        let mut cells = vec![None; x.len()];
        for &k in prefix.indices() {
            cells[k] = Some(x.get(k));
        }
        Ok(Self { cells })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, k: usize) -> Option<usize> {
        self.cells[k]
    }

    pub fn cells(&self) -> &[Option<usize>] {
        &self.cells
    }

    pub fn is_masked(&self, k: usize) -> bool {
        self.cells[k].is_none()
    }

    /// Masked dimensions in ascending order.
    pub fn masked(&self) -> Vec<usize> {
        (0..self.cells.len()).filter(|&k| self.cells[k].is_none()).collect()
    }

    pub fn unmasked(&self) -> Vec<usize> {
        (0..self.cells.len()).filter(|&k| self.cells[k].is_some()).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(Option::is_some)
    }

    /// Replace MASK at `index` by `value`.
    pub fn unmask(&mut self, index: usize, value: usize, layout: &Layout) -> Result<()> {
        if index >= self.cells.len() {
            return Err(Error::Domain(format!("dimension {index} out of range")));
        }
        if self.cells[index].is_some() {
            return Err(Error::State(format!("dimension {index} is already unmasked")));
        }
        if value >= layout.vocab(index) {
            return Err(Error::Domain(format!(
                "value {value} outside vocabulary of size {} at dimension {index}",
                layout.vocab(index)
            )));
        }
        self.cells[index] = Some(value);
        Ok(())
    }

    pub fn to_data(&self) -> Result<DataVector> {
        self.cells
            .iter()
            .map(|c| c.ok_or_else(|| Error::State("state still has masked dimensions".into())))
            .collect::<Result<Vec<_>>>()
            .map(DataVector)
    }

    /// One-hot encoding, `m_k + 1` slots per dimension with MASK in the last slot.
    pub fn encode(&self, layout: &Layout) -> Result<Vec<f64>> {
        if self.cells.len() != layout.len() {
            return Err(Error::Config(format!(
                "state has {} dimensions, layout {}",
                self.cells.len(),
                layout.len()
            )));
        }
        let mut out = vec![0.0; layout.input_width()];
        for (k, c) in self.cells.iter().enumerate() {
            let m = layout.vocab(k);
            let slot = match *c {
                Some(t) if t < m => t,
                Some(t) => {
                    return Err(Error::Input(format!("token {t} outside vocabulary at {k}")))
                }
                None => m,
            };
            out[layout.input_offset(k) + slot] = 1.0;
        }
        Ok(out)
    }
}

/// Ordered distinct dimensions `z_1..z_{i-1}` already generated.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OrderPrefix {
    indices: Vec<usize>,
    dims: usize,
}

impl OrderPrefix {
    pub fn new(indices: Vec<usize>, dims: usize) -> Result<Self> {
        let mut seen = vec![false; dims];
        for &k in &indices {
            if k >= dims {
                return Err(Error::Domain(format!("index {k} out of range for L = {dims}")));
            }
            if seen[k] {
                return Err(Error::Domain(format!("index {k} repeated in prefix")));
            }
            seen[k] = true;
        }
        Ok(Self { indices, dims })
    }

    pub fn empty(dims: usize) -> Self {
        Self {
            indices: Vec::new(),
            dims,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Total number of dimensions `L`.
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// The 1-based step index `i` this prefix leads into.
    pub fn step(&self) -> usize {
        self.indices.len() + 1
    }

    /// Remaining dimensions `z_{>=i}` in ascending order.
    pub fn complement(&self) -> Vec<usize> {
        let mut in_prefix = vec![false; self.dims];
        for &k in &self.indices {
            in_prefix[k] = true;
        }
        (0..self.dims).filter(|&k| !in_prefix[k]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layout4() -> Layout {
        Layout::uniform(4, 3, DimKind::Token).unwrap()
    }

    #[test]
    fn mask_with_prefix_examples() {
        let lay = layout4();
        let x = DataVector::new(vec![2, 0, 1, 1], &lay).unwrap();
        let empty = MaskedState::mask_with_prefix(&x, &OrderPrefix::empty(4)).unwrap();
        assert_eq!(empty, MaskedState::fully_masked(4));
        let full = OrderPrefix::new(vec![3, 1, 0, 2], 4).unwrap();
        assert_eq!(full.step(), 5);
        assert_eq!(MaskedState::mask_with_prefix(&x, &full).unwrap().to_data().unwrap(), x);
        // 1-based prefix (3, 1) is (2, 0) here
        let p = OrderPrefix::new(vec![2, 0], 4).unwrap();
        let s = MaskedState::mask_with_prefix(&x, &p).unwrap();
        assert_eq!(s.cells(), &[Some(2), None, Some(1), None]);
    }

    #[test]
    fn prefix_rejects_bad_indices() {
        assert!(matches!(OrderPrefix::new(vec![4], 4), Err(Error::Domain(_))));
        assert!(matches!(OrderPrefix::new(vec![1, 1], 4), Err(Error::Domain(_))));
    }

    #[test]
    fn unmask_examples() {
        let lay = Layout::uniform(2, 2, DimKind::Token).unwrap();
        let mut s = MaskedState::fully_masked(2);
        s.unmask(0, 0, &lay).unwrap();
        assert_eq!(s.cells(), &[Some(0), None]);
        assert!(matches!(s.unmask(0, 1, &lay), Err(Error::State(_))));
        assert!(matches!(s.unmask(1, 2, &lay), Err(Error::Domain(_))));
    }

    #[test]
    fn encode_puts_mask_in_last_slot() {
        let lay = Layout::new(vec![2, 3], vec![DimKind::Node, DimKind::Edge]).unwrap();
        let mut s = MaskedState::fully_masked(2);
        assert_eq!(s.encode(&lay).unwrap(), vec![0., 0., 1., 0., 0., 0., 1.]);
        s.unmask(1, 1, &lay).unwrap();
        assert_eq!(s.encode(&lay).unwrap(), vec![0., 0., 1., 0., 1., 0., 0.]);
    }

    proptest! {
        #[test]
        fn unmasking_the_complement_restores_x(
            tokens in proptest::collection::vec(0usize..3, 1..8),
            seed in any::<u64>(),
            cut in 0usize..8,
        ) {
            let l = tokens.len();
            let lay = Layout::uniform(l, 3, DimKind::Token).unwrap();
            let x = DataVector::new(tokens, &lay).unwrap();
            let mut rng = crate::rng::RngStream::new(seed);
            let mut order: Vec<usize> = (0..l).collect();
            for i in (1..l).rev() {
                order.swap(i, rng.below(i + 1));
            }
            let cut = cut.min(l);
            let prefix = OrderPrefix::new(order[..cut].to_vec(), l).unwrap();
            let mut s = MaskedState::mask_with_prefix(&x, &prefix).unwrap();
            prop_assert_eq!(s.masked(), prefix.complement());
            for &k in order[cut..].iter().rev() {
                s.unmask(k, x.get(k), &lay).unwrap();
            }
            prop_assert_eq!(s.to_data().unwrap(), x);
        }

        #[test]
        fn one_hot_has_exactly_one_hot_entry_per_dimension(
            cells in proptest::collection::vec(proptest::option::of(0usize..4), 1..10),
        ) {
            let lay = Layout::uniform(cells.len(), 4, DimKind::Token).unwrap();
            let s = MaskedState { cells: cells.clone() };
            let enc = s.encode(&lay).unwrap();
            for k in 0..cells.len() {
                let slots = &enc[lay.input_offset(k)..lay.input_offset(k) + 5];
                prop_assert_eq!(slots.iter().sum::<f64>(), 1.0);
                prop_assert_eq!(slots[4] == 1.0, cells[k].is_none());
            }
        }
    }
}
