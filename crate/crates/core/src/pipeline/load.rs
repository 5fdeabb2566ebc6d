//! Input ingestion and per-file validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PipelineError, RunConfig};
use crate::geo::{geojson, HydroLayer, RasterGrid};
use crate::ingest::{Loaded, RowRejection};
use crate::presence::{PresenceRecord, PresenceStore};
use crate::rainfall::RainfallStore;
use crate::social::{Corpus, SocialPost};

/// Files whose rejected-row share exceeds this fail validation.
pub const MAX_REJECT_SHARE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileReport {
    pub input: String,
    /// Path as written in the config.
    pub path: String,
    pub rows: usize,
    pub accepted: usize,
    pub rejected: Vec<RowRejection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub files: Vec<FileReport>,
}

impl ValidationReport {
    pub fn total_rejected(&self) -> usize {
        self.files.iter().map(|f| f.rejected.len()).sum()
    }
}

/// Everything the run consumes, parsed and validated.
#[derive(Debug, Clone)]
pub struct Datasets {
    pub posts: Vec<SocialPost>,
    pub presence: Vec<PresenceRecord>,
    pub rainfall: RainfallStore,
    pub hydro: Option<(HydroLayer, HydroLayer)>,
    pub dem: Option<RasterGrid>,
    pub population: Option<RasterGrid>,
}

fn read(cfg: &RunConfig, input: &str, rel: &str) -> Result<String, PipelineError> {
    let path = cfg.resolve(rel);
    std::fs::read_to_string(&path).map_err(|_| PipelineError::MissingInput {
        input: input.to_string(),
        path,
    })
}

fn invalid(input: &str, reason: impl ToString) -> PipelineError {
    PipelineError::InvalidInput {
        input: input.to_string(),
        reason: reason.to_string(),
    }
}

fn account<T>(report: &mut ValidationReport, input: &str, rel: &str, loaded: &Loaded<T>) -> Result<(), PipelineError> {
    report.files.push(FileReport {
        input: input.to_string(),
        path: rel.to_string(),
        rows: loaded.rows,
        accepted: loaded.accepted(),
        rejected: loaded.rejected.clone(),
    });
    if loaded.rows > 0 && loaded.rejected.len() as f64 > MAX_REJECT_SHARE * loaded.rows as f64 {
        return Err(PipelineError::CorruptInput {
            input: input.to_string(),
            rejected: loaded.rejected.len(),
            rows: loaded.rows,
        });
    }
    Ok(())
}

fn whole_file(report: &mut ValidationReport, input: &str, rel: &str, rows: usize) {
    report.files.push(FileReport {
        input: input.to_string(),
        path: rel.to_string(),
        rows,
        accepted: rows,
        rejected: Vec::new(),
    });
}

fn hydro_layer(cfg: &RunConfig, input: &str, rel: &str, date: chrono::NaiveDate) -> Result<HydroLayer, PipelineError> {
    let polygons = geojson::parse_polygons(&read(cfg, input, rel)?).map_err(|e| invalid(input, e))?;
    let id = Path::new(rel)
        .file_stem()
        .map_or_else(|| rel.to_string(), |s| s.to_string_lossy().into_owned());
    Ok(HydroLayer { id, date, polygons })
}

fn raster(cfg: &RunConfig, input: &str, rel: &str) -> Result<RasterGrid, PipelineError> {
    RasterGrid::from_ascii_grid(&read(cfg, input, rel)?).map_err(|e| invalid(input, e))
}

/// Parse every configured input, recording row accounting as it goes.
pub fn load_inputs(cfg: &RunConfig) -> Result<(Datasets, ValidationReport), PipelineError> {
    let mut report = ValidationReport::default();
    let inputs = &cfg.inputs;

    let posts = Corpus::from_jsonl(&read(cfg, "posts", &inputs.posts)?);
    account(&mut report, "posts", &inputs.posts, &posts)?;

    let presence =
        PresenceStore::from_csv(&read(cfg, "presence", &inputs.presence)?).map_err(|e| invalid("presence", e))?;
    account(&mut report, "presence", &inputs.presence, &presence)?;

    let stations_text = read(cfg, "stations", &inputs.stations)?;
    let rainfall_text = read(cfg, "rainfall", &inputs.rainfall)?;
    let (stations, rain_rows) =
        RainfallStore::from_csv(&stations_text, &rainfall_text).map_err(|e| invalid("rainfall", e))?;
    account(&mut report, "stations", &inputs.stations, &stations)?;
    account(&mut report, "rainfall", &inputs.rainfall, &rain_rows)?;

    let hydro = match (&inputs.hydro_pre, &inputs.hydro_post) {
        (Some(pre), Some(post)) => {
            let pre_date = cfg.segment.pre_date.expect("checked with the config");
            let post_date = cfg.segment.post_date.expect("checked with the config");
            let pre_layer = hydro_layer(cfg, "hydro_pre", pre, pre_date)?;
            whole_file(&mut report, "hydro_pre", pre, pre_layer.polygons.len());
            let post_layer = hydro_layer(cfg, "hydro_post", post, post_date)?;
            whole_file(&mut report, "hydro_post", post, post_layer.polygons.len());
            Some((pre_layer, post_layer))
        }
        _ => None,
    };
    let dem = match &inputs.dem {
        Some(rel) => {
            let r = raster(cfg, "dem", rel)?;
            whole_file(&mut report, "dem", rel, r.nrows);
            Some(r)
        }
        None => None,
    };
    let population = match &inputs.population {
        Some(rel) => {
            let r = raster(cfg, "population", rel)?;
            whole_file(&mut report, "population", rel, r.nrows);
            Some(r)
        }
        None => None,
    };

    Ok((
        Datasets {
            posts: posts.data.posts().to_vec(),
            presence: presence.data.records(),
            rainfall: stations.data,
            hydro,
            dem,
            population,
        },
        report,
    ))
}

pub fn validate_inputs(cfg: &RunConfig) -> Result<ValidationReport, PipelineError> {
    load_inputs(cfg).map(|(_, r)| r)
}
