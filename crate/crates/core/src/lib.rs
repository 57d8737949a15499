//! Soft-failure detection for robot simulation runs.
//!
//! A scalar noise-pressure estimate is derived from joint velocities
//! ([`noise`]), cut into labelled blocks ([`dataset`]), turned into
//! spectro-temporal feature vectors ([`preprocess`]) and classified with a
//! one-vs-rest kernel SVM trained by SMO ([`svm`]). [`eval`] computes the
//! detection metrics and runs hyperparameter grid searches, and [`synth`]
//! generates labelled synthetic traces with injected defects.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod noise;
pub mod preprocess;
pub mod svm;
pub mod synth;

mod numeric;

pub use dataset::{AnnotatedBlock, Annotation, Dataset, DatasetRole, FailureLabel};
pub use error::{Error, Result};
pub use eval::{EvaluationReport, GridSearchResult, HyperGrid};
pub use noise::{ColumnSpec, JointTrajectory, NoiseTrace};
pub use preprocess::{FeatureExtractor, FeatureVector, PreprocessConfig};
pub use svm::{BinarySvm, Kernel, MultiClassSvm, SolverOptions};
