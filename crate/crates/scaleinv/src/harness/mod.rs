//! Experiment harness: data ingestion, baseline learners, invariance
//! checking, experiment configs, and report emission for the CLI.

pub mod baselines;
pub mod bench;
pub mod data;
pub mod experiment;
pub mod invariance;

pub use baselines::{OgdLearner, ZeroPredictor};
pub use experiment::{run_experiment, AnyLearner, ExperimentConfig, RunReport};
pub use invariance::{invariance_check, TransformKind};
