//! Binary grids with a fixed all-zero border and a patterned interior.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::state::{DataVector, DimKind, Layout};

fn default_side() -> usize {
    5
}
fn default_noise() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BorderGridSpec {
    #[serde(default = "default_side")]
    pub side: usize,
    /// Probability of flipping each interior cell after the pattern is drawn.
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Interior patterns, row-major over the `(side-2)^2` interior cells.
    /// Empty means the built-in set (needs `side = 5`).
    #[serde(default)]
    pub patterns: Vec<Vec<usize>>,
    /// Mixture weights; empty means uniform.
    #[serde(default)]
    pub weights: Vec<f64>,
}

impl Default for BorderGridSpec {
    fn default() -> Self {
        Self {
            side: 5,
            noise: default_noise(),
            patterns: Vec::new(),
            weights: Vec::new(),
        }
    }
}

/// Plus, ring, diagonal cross and checker on a 3x3 interior.
pub fn builtin_patterns() -> Vec<Vec<usize>> {
    vec![
        vec![0, 1, 0, 1, 1, 1, 0, 1, 0],
        vec![1, 1, 1, 1, 0, 1, 1, 1, 1],
        vec![1, 0, 1, 0, 1, 0, 1, 0, 1],
        vec![0, 0, 0, 1, 1, 1, 0, 0, 0],
    ]
}

impl BorderGridSpec {
    pub const CATEGORIES: usize = 2;

    pub fn len(&self) -> usize {
        self.side * self.side
    }

    pub fn is_empty(&self) -> bool {
        self.side == 0
    }

    pub fn interior_len(&self) -> usize {
        self.side.saturating_sub(2).pow(2)
    }

    pub fn layout(&self) -> Result<Layout> {
        Layout::uniform(self.len(), Self::CATEGORIES, DimKind::Pixel)
    }

    pub fn is_border(&self, k: usize) -> bool {
        let (r, c) = (k / self.side, k % self.side);
        r == 0 || c == 0 || r + 1 == self.side || c + 1 == self.side
    }

    pub fn interior_cells(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| !self.is_border(k)).collect()
    }

    pub fn border_cells(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.is_border(k)).collect()
    }

    /// Resolved `(patterns, normalized weights)`.
    pub fn mixture(&self) -> Result<(Vec<Vec<usize>>, Vec<f64>)> {
        if self.side < 3 {
            return Err(Error::Config(format!("grid side must be at least 3, got {}", self.side)));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::Config(format!("noise must lie in [0, 1], got {}", self.noise)));
        }
        let patterns = if self.patterns.is_empty() {
            if self.side != 5 {
                return Err(Error::Config("built-in patterns need side = 5; give patterns explicitly".into()));
            }
            builtin_patterns()
        } else {
            self.patterns.clone()
        };
        for p in &patterns {
            if p.len() != self.interior_len() || p.iter().any(|&v| v >= Self::CATEGORIES) {
                return Err(Error::Config(format!(
                    "each pattern needs {} binary cells",
                    self.interior_len()
                )));
            }
        }
        let weights = if self.weights.is_empty() {
            vec![1.0; patterns.len()]
        } else {
            self.weights.clone()
        };
        if weights.len() != patterns.len() || weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Config("pattern weights must be non-negative, one per pattern".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Config("pattern weights sum to zero".into()));
        }
        Ok((patterns, weights.iter().map(|w| w / total).collect()))
    }

    /// True when every border cell is 0.
    pub fn border_rule_holds(&self, x: &DataVector) -> bool {
        x.len() == self.len() && self.border_cells().iter().all(|&k| x.get(k) == 0)
    }
}

pub fn gen_border_grid(spec: &BorderGridSpec, count: usize, rng: &mut RngStream) -> Result<Vec<DataVector>> {
    if count == 0 {
        return Err(Error::Config("count must be at least 1".into()));
    }
    let (patterns, weights) = spec.mixture()?;
    let layout = spec.layout()?;
    let interior = spec.interior_cells();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let p = &patterns[rng.categorical(&weights)];
        let mut cells = vec![0; spec.len()];
        for (j, &k) in interior.iter().enumerate() {
            let flip = spec.noise > 0.0 && rng.bernoulli(spec.noise);
            cells[k] = if flip { 1 - p[j] } else { p[j] };
        }
        out.push(DataVector::new(cells, &layout)?);
    }
    Ok(out)
}
