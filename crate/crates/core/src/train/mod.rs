//! Gradients, optimizer, metrics and the training loop.

mod adam;
mod backward;
mod metrics;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use backward::{backward, Gradients};
pub use metrics::{macro_f1, micro_f1};
pub use trainer::{
    evaluate, frozen_tensors, train, EpochRecord, Evaluation, Splits, TrainHyper, TrainOutcome,
    TrainReport,
};
