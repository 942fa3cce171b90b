//! The pre-training loop: batch planning, the summed objective, Adam
//! updates, and resumable state.

mod batch;
mod config;
mod trainer;

pub use batch::{plan_batch, LossTerms, PlannedExample, PretrainBatch};
pub use config::{Objectives, SchemeMix, TrainConfig};
pub use trainer::{epoch_batches, LossReport, Trainer};
