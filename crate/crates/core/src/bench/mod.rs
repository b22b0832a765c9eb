//! Evaluation metrics, synthetic data and behavior studies.

pub mod instances;
pub mod oracle;
pub mod metrics;
pub mod synth;
pub mod tasks;

pub use metrics::{rouge_q, vrouge};
pub use synth::{behavior_metrics, synth_generate, BehaviorReport, Study, SyntheticConfig, SyntheticInstance};
