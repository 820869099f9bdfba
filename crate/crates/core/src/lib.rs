//! Multi-modal neural code search for C functions.
//!
//! A function is viewed three ways (its token stream, its binarized syntax
//! tree and its simplified control-flow graph), each encoded by its own
//! network, pooled with attention, and fused into a vector that lives in the
//! same space as encoded natural-language descriptions. Queries are answered
//! by cosine similarity.

pub mod config;
pub mod dataset;
pub mod encoders;
pub mod frontend;
pub mod fusion;
pub mod modalities;
pub mod model;
pub mod real;
pub mod retrieval;
pub mod synthetic;
pub mod tensor;
pub mod training;

pub use config::{Hyperparams, Modality, ModelConfig, Precision, ScoreKind};
pub use dataset::{CorpusRecord, ExtractedRecord};
pub use encoders::{EncoderOutput, Vocabulary};
pub use frontend::{DescriptionSequence, RawAst, SourceUnit, TokenSequence};
pub use fusion::AttentionReport;
pub use modalities::{BinaryAst, Cfg, EdgeType};
pub use model::{Model, Vocabularies};
pub use real::Real;
pub use retrieval::{EvalReport, QueryResult, RetrievalIndex};
pub use tensor::{ParameterSet, Tape, Tensor};
pub use training::{TrainStats, TrainingTriple};
