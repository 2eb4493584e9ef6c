use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Handle to one parameter array inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

/// Named real-valued parameter arrays, each paired with a gradient buffer of
/// the same shape.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, shape: &[usize], value: Vec<f64>) -> Result<ParamId> {
        let size: usize = shape.iter().product();
        if size != value.len() {
            return Err(Error::Config(format!(
                "parameter {name}: shape {shape:?} holds {size} values, got {}",
                value.len()
            )));
        }
        if self.params.iter().any(|p| p.name == name) {
            return Err(Error::Config(format!("duplicate parameter name {name}")));
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("parameter {name} has non-finite values")));
        }
        self.params.push(Param {
            name: name.to_string(),
            shape: shape.to_vec(),
            grad: vec![0.0; size],
            value,
        });
        Ok(ParamId(self.params.len() - 1))
    }

    /// Glorot-uniform initialized matrix of shape `rows x cols`.
    pub fn add_glorot(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        rng: &mut RngStream,
    ) -> Result<ParamId> {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        let value = (0..rows * cols)
            .map(|_| a * (2.0 * rng.open01() - 1.0))
            .collect();
        self.add(name, &[rows, cols], value)
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize]) -> Result<ParamId> {
        self.add(name, shape, vec![0.0; shape.iter().product()])
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].grad
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Set every parameter value to zero.
    pub fn zero_values(&mut self) {
        for p in &mut self.params {
            p.value.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Add `grads` into the gradient buffers.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (p, g) in self.params.iter_mut().zip(&grads.bufs) {
            for (a, b) in p.grad.iter_mut().zip(g) {
                *a += b;
            }
        }
    }

    /// Snapshot of the gradient buffers.
    pub fn gradients(&self) -> Gradients {
        Gradients {
            bufs: self.params.iter().map(|p| p.grad.clone()).collect(),
        }
    }

    /// All parameter values concatenated in store order.
    pub fn flat_values(&self) -> Vec<f64> {
        self.params.iter().flat_map(|p| p.value.iter().copied()).collect()
    }

    pub fn set_flat_values(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_scalars() {
            return Err(Error::Config(format!(
                "expected {} values, got {}",
                self.num_scalars(),
                flat.len()
            )));
        }
        let mut off = 0;
        for p in &mut self.params {
            let n = p.value.len();
            p.value.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Map a flat scalar index back to `(param, offset)`.
    pub fn locate(&self, mut flat: usize) -> Option<(ParamId, usize)> {
        for (i, p) in self.params.iter().enumerate() {
            if flat < p.value.len() {
                return Some((ParamId(i), flat));
            }
            flat -= p.value.len();
        }
        None
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.iter().all(|v| v.is_finite()))
    }

    pub fn to_checkpoint(&self) -> ParamCheckpoint {
        ParamCheckpoint {
            format_version: CHECKPOINT_VERSION,
            params: self
                .params
                .iter()
                .map(|p| NamedArray {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    data: p.value.clone(),
                })
                .collect(),
        }
    }

    /// Overwrite values from a checkpoint with identical names and shapes.
    pub fn load_checkpoint(&mut self, ckpt: &ParamCheckpoint) -> Result<()> {
        ckpt.check_version()?;
        if ckpt.params.len() != self.params.len() {
            return Err(Error::Config(format!(
                "checkpoint has {} parameters, model has {}",
                ckpt.params.len(),
                self.params.len()
            )));
        }
        for (p, a) in self.params.iter_mut().zip(&ckpt.params) {
            if p.name != a.name || p.shape != a.shape {
                return Err(Error::Config(format!(
                    "checkpoint entry {} {:?} does not match parameter {} {:?}",
                    a.name, a.shape, p.name, p.shape
                )));
            }
            if a.data.len() != p.value.len() {
                return Err(Error::Config(format!("checkpoint entry {} has wrong length", a.name)));
            }
            p.value.copy_from_slice(&a.data);
        }
        Ok(())
    }
}

/// Gradient buffers shaped like a [`ParamStore`], detached from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub bufs: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self {
            bufs: store.params.iter().map(|p| vec![0.0; p.value.len()]).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.bufs[id.0]
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.bufs.iter_mut().zip(&other.bufs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.bufs.iter_mut().flatten().for_each(|x| *x *= c);
    }

    pub fn flat(&self) -> Vec<f64> {
        self.bufs.iter().flatten().copied().collect()
    }

    pub fn norm(&self) -> f64 {
        self.bufs.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.bufs.iter().flatten().all(|x| x.is_finite())
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Versioned name -> array map. Serialized as JSON; floats round-trip exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCheckpoint {
    pub format_version: u32,
    pub params: Vec<NamedArray>,
}

impl ParamCheckpoint {
    fn check_version(&self) -> Result<()> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint format version {} (expected {CHECKPOINT_VERSION})",
                self.format_version
            )));
        }
        for a in &self.params {
            if a.shape.iter().product::<usize>() != a.data.len() {
                return Err(Error::Config(format!(
                    "checkpoint entry {} declares shape {:?} but holds {} values",
                    a.name,
                    a.shape,
                    a.data.len()
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Serde(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Self = serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))?;
        ckpt.check_version()?;
        Ok(ckpt)
    }
}
