//! Minimal reverse-mode differentiation over dense `f64` vectors.

mod net;
mod params;
mod tape;

pub use net::{Activation, FeedForwardNet};
pub use params::{Gradients, NamedArray, Param, ParamCheckpoint, ParamId, ParamStore, CHECKPOINT_VERSION};
pub use tape::{categorical_entropy, log_sum_exp, masked_log_softmax, Tape, Var};
