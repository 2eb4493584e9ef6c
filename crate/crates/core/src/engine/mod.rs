//! Training loop, ancestral sampling and order-trace analysis.

pub mod optim;
pub mod sample;
pub mod trace;
pub mod train;

pub use optim::{Ema, Optimizer, OptimizerConfig, OptimizerKind, Schedule};
pub use sample::{generate, generate_many, generate_observed, generate_unfiltered, top_p_filter, SamplerConfig};
pub use trace::{compress_labels, compress_trace, consistency_rate, consistency_rate_of, OrderTrace, StepKind, TraceStep};
pub use train::{batch_gradient, fit, train_step, StepReport, TrainConfig, TrainLog, TrainState};
