use serde::{Deserialize, Serialize};

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Tanh,
    Identity,
}

/// Dense layers `sizes[0] -> sizes[1] -> ... -> sizes[n]`, with the
/// activation applied between layers. When `activate_output` is set the
/// activation is also applied after the last layer (used for torsos whose
/// output feeds further heads).
#[derive(Debug, Clone)]
pub struct FeedForwardNet {
    sizes: Vec<usize>,
    layers: Vec<(ParamId, ParamId)>,
    activation: Activation,
    activate_output: bool,
}

impl FeedForwardNet {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        sizes: &[usize],
        activation: Activation,
        activate_output: bool,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("{name}: invalid layer sizes {sizes:?}")));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (l, pair) in sizes.windows(2).enumerate() {
            let w = store.add_glorot(&format!("{name}.{l}.weight"), pair[1], pair[0], rng)?;
            let b = store.add_zeros(&format!("{name}.{l}.bias"), &[pair[1]])?;
            layers.push((w, b));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            layers,
            activation,
            activate_output,
        })
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// `(weight, bias)` handles per layer; weights are `[out, in]` row-major.
    pub fn layers(&self) -> &[(ParamId, ParamId)] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn activates_output(&self) -> bool {
        self.activate_output
    }

    fn activate(&self, tape: &mut Tape<'_>, h: Var) -> Var {
        match self.activation {
            Activation::Tanh => tape.tanh(h),
            Activation::Identity => h,
        }
    }

    /// Record the forward pass of `x` on `tape`.
    pub fn forward_on(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let width = tape.value(x).len();
        if width != self.input_width() {
            return Err(Error::Config(format!(
                "net expects input width {}, got {width}",
                self.input_width()
            )));
        }
        let mut h = x;
        let last = self.layers.len() - 1;
        for (l, &(w, b)) in self.layers.iter().enumerate() {
            h = tape.affine(w, b, h)?;
            if l < last || self.activate_output {
                h = self.activate(tape, h);
            }
        }
        Ok(h)
    }

    /// Evaluate on a plain input vector.
    pub fn forward(&self, store: &ParamStore, input: &[f64]) -> Result<Vec<f64>> {
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite network input".into()));
        }
        let mut tape = Tape::new(store);
        let x = tape.constant(input.to_vec());
        let y = self.forward_on(&mut tape, x)?;
        Ok(tape.value(y).to_vec())
    }
}
