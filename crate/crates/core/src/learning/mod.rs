//! Max-margin learning of mixtures of information measures.
//!
//! The parameter vector `Θ` lists, per component, its weight followed by the
//! internal parameters the component actually uses under the task's mode.

mod model;
mod train;

pub use model::{EpochRecord, MixtureModel, ModelMetadata, ParamSlot, TrainingExample};
pub use train::{
    example_loss, finite_diff_check, hinge_loss, leave_one_out, loss_augmented_inference, margin_value, mixture_eval,
    summarize, train, write_trace_csv, ExampleLoss, FdEntry, FdReport, LooFold, LooReport, MarginLoss, TrainConfig,
};

#[cfg(test)]
mod tests;
