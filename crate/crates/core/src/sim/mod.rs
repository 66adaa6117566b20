//! Desk-scale training simulator.
//!
//! A synthetic many-point regression task with injected outlier points is
//! fitted by a linear model with full-batch gradient descent, using a
//! warmup + step-decay learning-rate schedule. The regression head is
//! trained with either robust loss and an auxiliary logistic head supplies
//! a second loss group, so both weighting modes can be compared. Sweeping
//! the base learning rate shows which configurations keep training stable.

mod schedule;
mod sweep;
mod task;
mod train;

pub use schedule::lr_at;
pub use sweep::{divergence_sweep, SweepRow, SweepTable, Variant};
pub use task::{SyntheticTask, TaskParams};
pub use train::{
    train, IterRecord, Model, Objective, ObjectiveEval, Outcome, TrainConfig, TrainResult,
    Weighting, CLS_TERM, TERM_NAMES, U_TERM, V_TERM,
};
