//! Run configuration, read from a single TOML file.
//!
//! ```toml
//! seed = 7
//!
//! [inputs]                       # paths are relative to this file
//! posts = "posts.jsonl"
//! presence = "presence.csv"
//! stations = "stations.csv"
//! rainfall = "rainfall.csv"
//! hydro_pre = "hydro_pre.geojson"    # optional, with hydro_post
//! hydro_post = "hydro_post.geojson"
//! dem = "dem.asc"                    # optional
//! population = "population.asc"      # optional
//!
//! [region]
//! bbox = [40.0, -3.8, 40.1, -3.6]    # min_lat, min_lon, max_lat, max_lon
//! # polygon = [[lat, lon], ...]      # alternative to bbox
//!
//! [dates]
//! start = "2014-08-01"
//! end = "2014-10-29"
//! ```
//!
//! Every other section is optional and falls back to the defaults of the
//! owning component: `[social]`, `[lexicons.awareness]`,
//! `[lexicons.damage]`, `[presence]`, `[detect]`, `[classify]`,
//! `[escalate]`, `[evidence]`, `[network]` and `[segment]`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::detect::{ClassifyConfig, EscalationConfig, PeakConfig};
use crate::geo::{BoundingBox, GeoPoint, Region, RingPolygon};
use crate::presence::HourInterval;
use crate::social::{Lexicon, Lexicons};
use crate::DateRange;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub posts: String,
    pub presence: String,
    pub stations: String,
    pub rainfall: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hydro_pre: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hydro_post: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dem: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Vec<[f64; 2]>>,
}

impl RegionConfig {
    pub fn to_region(&self) -> Result<Region, PipelineError> {
        let bad = |e: crate::geo::GeoError| PipelineError::Config(format!("region: {e}"));
        match (&self.bbox, &self.polygon) {
            (Some([a, b, c, d]), None) => Ok(Region::BoundingBox(BoundingBox::new(*a, *b, *c, *d).map_err(bad)?)),
            (None, Some(ring)) => {
                let pts = ring
                    .iter()
                    .map(|[lat, lon]| GeoPoint::new(*lat, *lon))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(bad)?;
                Ok(Region::Polygon(RingPolygon::simple(pts).map_err(bad)?))
            }
            _ => Err(PipelineError::Config(
                "region needs exactly one of `bbox` or `polygon`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatesConfig {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SocialConfig {
    pub language: String,
    /// Social-media users in the region, the numerator of the census factor.
    pub social_users: f64,
    /// Count only geotagged posts inside the region bbox.
    pub geo_filter: bool,
}

impl Default for SocialConfig {
    fn default() -> Self {
        Self {
            language: "en".into(),
            social_users: 1.0,
            geo_filter: true,
        }
    }
}

/// Per-language keyword lists replacing the built-in ones.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconOverrides {
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub awareness: BTreeMap<String, Vec<String>>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub damage: BTreeMap<String, Vec<String>>,
}

impl LexiconOverrides {
    pub fn apply(&self) -> Lexicons {
        let mut lex = Lexicons::default();
        let set = |l: &mut Lexicon, m: &BTreeMap<String, Vec<String>>| {
            for (lang, words) in m {
                l.set_language(lang, words);
            }
        };
        set(&mut lex.awareness, &self.awareness);
        set(&mut lex.damage, &self.damage);
        lex
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresenceConfig {
    /// Hours `[start, end)` averaged into the dynamic census.
    pub census_start: u8,
    pub census_end: u8,
    /// Hours `[start, end)` left out of hourly event windows.
    pub night_start: u8,
    pub night_end: u8,
}

impl Default for PresenceConfig {
    fn default() -> Self {
        Self {
            census_start: HourInterval::EVENING.start,
            census_end: HourInterval::EVENING.end,
            night_start: HourInterval::NIGHT.start,
            night_end: HourInterval::NIGHT.end,
        }
    }
}

impl PresenceConfig {
    pub fn census(&self) -> Result<HourInterval, PipelineError> {
        HourInterval::new(self.census_start, self.census_end).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn night(&self) -> Result<HourInterval, PipelineError> {
        HourInterval::new(self.night_start, self.night_end).map_err(|e| PipelineError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvidenceConfig {
    /// Matching posts within `event ± window_days` form the evidence.
    pub window_days: u32,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        Self { window_days: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub enabled: bool,
    pub k: usize,
    pub n_init: usize,
    pub max_iter: usize,
    pub normalize: bool,
    /// Build the network from keyword-matching posts only.
    pub only_matching: bool,
    /// Profiling interval; the run's date range when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<NaiveDate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub end: Option<NaiveDate>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            k: 4,
            n_init: 10,
            max_iter: 100,
            normalize: false,
            only_matching: true,
            start: None,
            end: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    /// Analysis cell edge in metres.
    pub cell_size: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pre_date: Option<NaiveDate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub post_date: Option<NaiveDate>,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            cell_size: 1.0,
            pre_date: None,
            post_date: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub inputs: InputPaths,
    pub region: RegionConfig,
    pub dates: DatesConfig,
    #[serde(default)]
    pub social: SocialConfig,
    #[serde(default)]
    pub lexicons: LexiconOverrides,
    #[serde(default)]
    pub presence: PresenceConfig,
    #[serde(default)]
    pub detect: PeakConfig,
    #[serde(default)]
    pub classify: ClassifyConfig,
    #[serde(default)]
    pub escalate: EscalationConfig,
    #[serde(default)]
    pub evidence: EvidenceConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub segment: SegmentConfig,
    /// Directory that relative input paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|_| PipelineError::MissingInput {
            input: "config".into(),
            path: path.to_path_buf(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.base_dir.join(rel)
    }

    pub fn range(&self) -> Result<DateRange, PipelineError> {
        DateRange::new(self.dates.start, self.dates.end).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn network_range(&self) -> Result<DateRange, PipelineError> {
        let r = self.range()?;
        DateRange::new(self.network.start.unwrap_or(r.start), self.network.end.unwrap_or(r.end))
            .map_err(|e| PipelineError::Config(format!("network interval: {e}")))
    }

    fn check(&self) -> Result<(), PipelineError> {
        self.range()?;
        self.region.to_region()?;
        self.presence.census()?;
        self.presence.night()?;
        self.network_range()?;
        self.detect
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if !(self.social.social_users.is_finite() && self.social.social_users > 0.0) {
            return Err(PipelineError::Config("social.social_users must be positive".into()));
        }
        if !(self.segment.cell_size.is_finite() && self.segment.cell_size > 0.0) {
            return Err(PipelineError::Config("segment.cell_size must be positive".into()));
        }
        if self.network.k == 0 || self.network.n_init == 0 || self.network.max_iter == 0 {
            return Err(PipelineError::Config(
                "network k, n_init and max_iter must be positive".into(),
            ));
        }
        if self.inputs.hydro_pre.is_some() != self.inputs.hydro_post.is_some() {
            return Err(PipelineError::Config("hydro_pre and hydro_post go together".into()));
        }
        if self.inputs.hydro_pre.is_some() && (self.segment.pre_date.is_none() || self.segment.post_date.is_none()) {
            return Err(PipelineError::Config(
                "hydrography inputs need segment.pre_date and segment.post_date".into(),
            ));
        }
        let langs = self.lexicons.apply();
        for (kind, lex) in [("awareness", &langs.awareness), ("damage", &langs.damage)] {
            if lex.keywords(&self.social.language).is_none() {
                return Err(PipelineError::Config(format!(
                    "no {kind} lexicon for language `{}`",
                    self.social.language
                )));
            }
        }
        Ok(())
    }
}
