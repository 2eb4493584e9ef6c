//! Learning-order autoregressive models over discrete data.
//!
//! An autoregressive model whose generation order is itself learned: at every
//! step an order-policy picks which masked dimension to fill next, and a
//! per-dimension classifier fills it. Training maximizes a variational lower
//! bound with a Plackett-Luce posterior over orders and a two-path
//! leave-one-out score-function gradient. Small instances can be checked
//! against exact enumeration in [`oracle`].

pub mod config;
pub mod data;
pub mod diff;
pub mod elbo;
pub mod engine;
pub mod error;
pub mod model;
pub mod oracle;
pub mod order;
pub mod rng;
pub mod state;
pub mod verify;

pub use error::{Error, Result};
pub use model::{LoArmModel, ModelConfig, PolicyMode, VariationalMode};
pub use rng::RngStream;
pub use state::{DataVector, Layout, MaskedState, OrderPrefix};
