//! Optimizers, the mini-batch training loop and epoch selection.

mod optim;
mod trainer;

pub use optim::{AdamState, Optimizer, OptimizerKind, RmsPropState};
pub use trainer::{
    assemble_batch, evaluate, history_csv, train, EpochRecord, EpochSelection, Evaluation, Sample,
    TrainConfig, TrainOutcome,
};
