//! Submodular information measures (mutual information, conditional gain and
//! conditional mutual information) over several function families, a greedy
//! maximizer for targeted summarization, and a max-margin learner for
//! mixtures of measures.

pub mod bench;
pub mod data;
pub mod error;
pub mod functions;
pub mod instance;
pub mod kernel;
pub mod learning;
pub mod optimizer;

pub use data::{AuxRole, AuxiliarySet, Collection, ConceptUniverse, GroundSet, ItemRecord};
pub use error::{Error, Result};
pub use functions::{Concave, Family, FunctionSpec, MeasureMode};
pub use instance::{ConceptData, Context};
pub use kernel::{Metric, SimilarityKernel};
pub use optimizer::{Flavor, GreedyOptions, Selection};
