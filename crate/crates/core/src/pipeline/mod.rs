//! Configuration-driven orchestration: ingestion and validation, the
//! end-to-end run, synthetic scenario generation and export.

mod config;
mod export;
mod load;
mod run;
mod scenario;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{
    DatesConfig, EvidenceConfig, InputPaths, LexiconOverrides, NetworkConfig, PresenceConfig, RegionConfig, RunConfig,
    SegmentConfig, SocialConfig,
};
pub use export::{export, flood_extent_geojson, pretty, request_line, ExportFormat, ALL_FORMATS};
pub use load::{load_inputs, validate_inputs, Datasets, FileReport, ValidationReport, MAX_REJECT_SHARE};
pub use run::{
    run, run_with, stage_network, stage_presence, stage_proxies, stage_segment, EventReport, NetworkOutput,
    NetworkSummary, PresenceOutput, ProxyOutput, RunOutput, RunReport, SegmentOutput, SegmentationReport, StationRef,
    Transition, ZMapRef,
};
pub use scenario::{generate_scenario, GeneratedScenario, InjectedEvent, ScenarioSpec};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("missing input `{input}`: {}", path.display())]
    MissingInput { input: String, path: PathBuf },
    #[error("corrupt input `{input}`: {rejected} of {rows} rows rejected")]
    CorruptInput {
        input: String,
        rejected: usize,
        rows: usize,
    },
    #[error("invalid input `{input}`: {reason}")]
    InvalidInput { input: String, reason: String },
    #[error("config: {0}")]
    Config(String),
    #[error("cannot write {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("geo: {0}")]
    Geo(#[from] crate::geo::GeoError),
    #[error("presence: {0}")]
    Presence(#[from] crate::presence::PresenceError),
    #[error("social: {0}")]
    Social(#[from] crate::social::SocialError),
    #[error("rainfall: {0}")]
    Rainfall(#[from] crate::rainfall::RainfallError),
    #[error("detect: {0}")]
    Detect(#[from] crate::detect::DetectError),
    #[error("netdyn: {0}")]
    Net(#[from] crate::netdyn::NetError),
}

impl PipelineError {
    /// Whether the failure is about the inputs or config rather than the run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            PipelineError::MissingInput { .. }
                | PipelineError::CorruptInput { .. }
                | PipelineError::InvalidInput { .. }
                | PipelineError::Config(_)
        )
    }
}
