//! Fine-grained factual inconsistency detection for summaries.
//!
//! Documents and summaries are broken into semantic frames, each frame is
//! pooled into a fact vector from a transformer encoder, summary facts attend
//! over document facts, and a sigmoid head scores four error types. The
//! attention mass each document fact receives ranks it as a highlight.

pub mod attention;
pub mod autodiff;
pub mod checkpoint;
pub mod classifier;
pub mod cli;
pub mod data;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod params;
pub mod srl;
pub mod synthetic;
pub mod text;
pub mod training;
pub mod types;

pub use error::{Error, Result};
pub use model::{DocContext, Example, FactModel, Inference, ModelConfig};
pub use types::{ErrorType, LabelVector, Sample, SemanticFrame};
