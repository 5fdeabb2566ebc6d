//! Multi-source flood detection and impact quantification.
//!
//! Rainfall, social-media posts, anonymized phone-presence aggregates,
//! hydrography polygons, elevation and population rasters are turned into
//! daily proxy series; peaks in those series are detected, classified
//! against rainfall, and pushed through an escalation machine that emits
//! requests for higher-granularity data together with the evidence that
//! justifies them.

pub mod dates;
pub mod detect;
pub mod geo;
pub mod ingest;
pub mod netdyn;
pub(crate) mod num;
pub mod pipeline;
pub mod presence;
pub mod rainfall;
pub mod social;

pub use dates::DateRange;
pub use detect::{DataRequest, DetectionEvent, EscalationStage, FloodClass};
pub use geo::{BoundingBox, GeoPoint, RasterGrid, RingPolygon};
pub use pipeline::{RunConfig, RunReport, ScenarioSpec};
pub use presence::PresenceRecord;
pub use social::{Gender, ProxySeries, SocialPost};
