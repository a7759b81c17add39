//! Library surface of the `geosynth` command-line tool: configuration
//! parsing and the pipeline stages, kept callable so the stages can be
//! driven programmatically (and tested) without spawning the binary.

pub mod config;
pub mod pipeline;

pub use config::{PipelineConfig, Synthesizer};
pub use pipeline::{
    run_pipeline, stage_cluster, stage_evaluate_risk, stage_evaluate_utility, stage_synthesize,
};
