//! Benchmark engine for enzyme-reaction retrieval: corpus IO, alignment
//! kernels, leakage-controlled splits, negative mining, graph/point-cloud
//! encoders, a trainable pair scorer with exact reverse-mode gradients, and
//! ranking evaluation.

pub mod align;
pub mod chemgraph;
pub mod dataio;
pub mod encode;
pub mod evalrank;
pub mod mat;
pub mod model;
pub mod splitgen;
pub mod synth;

pub use align::{AlignParams, SimilarityMetric, TopKTable};
pub use chemgraph::{Fingerprint, MolGraph};
pub use dataio::{Corpus, EnzymeRecord, PairSet, ReactionRecord, SplitManifest, TensorFile};
pub use encode::{FrameSet, NodeStates};
pub use evalrank::{Direction, LabelMatrix, MetricsReport, ScoreMatrix};
pub use mat::Mat;
pub use model::{ModelConfig, ModelError, ModelParams, Tape};
pub use splitgen::NegativeSet;
