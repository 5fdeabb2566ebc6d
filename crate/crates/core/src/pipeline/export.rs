//! Writing a run to disk: JSON report, text summary, CSV series, GeoJSON
//! layers and JSON Lines data requests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::run::hourly_zmap_file;
use super::{PipelineError, RunOutput};
use crate::detect::{DataRequest, RequestRegion};
use crate::geo::{geojson, FloodExtent};
use crate::netdyn::{aggregates_to_csv, clusters_to_csv, edges_to_csv};
use crate::presence::{daily_to_csv, hourly_to_csv, weekly_to_csv, DaySeries, HourlySeries};
use crate::rainfall::rainfall_to_csv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Json,
    Text,
    Csv,
    GeoJson,
    Jsonl,
}

pub const ALL_FORMATS: [ExportFormat; 5] = [
    ExportFormat::Json,
    ExportFormat::Text,
    ExportFormat::Csv,
    ExportFormat::GeoJson,
    ExportFormat::Jsonl,
];

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "text" | "txt" => Ok(Self::Text),
            "csv" => Ok(Self::Csv),
            "geojson" => Ok(Self::GeoJson),
            "jsonl" => Ok(Self::Jsonl),
            other => Err(format!("unknown export format `{other}`")),
        }
    }
}

fn region_geometry(r: &RequestRegion) -> Value {
    match r {
        RequestRegion::Hull(h) => geojson::polygon_geometry(h),
        RequestRegion::BoundingBox(b) => geojson::bbox_geometry(b),
    }
}

/// One JSON Lines record for a data request.
pub fn request_line(r: &DataRequest) -> String {
    let v = json!({
        "kind": r.kind,
        "region": region_geometry(&r.region),
        "window": {"start": r.window.start, "end": r.window.end},
        "event": r.event,
        "evidence": r.evidence,
    });
    v.to_string()
}

fn census_csv(c: &DaySeries) -> String {
    let mut s = String::from("date,value\n");
    for e in &c.entries {
        let _ = writeln!(s, "{},{}", e.date, e.value);
    }
    s
}

/// One feature per flooded analysis cell.
pub fn flood_extent_geojson(extent: Option<&FloodExtent>) -> Value {
    let Some(ext) = extent else {
        return geojson::feature_collection(Vec::new());
    };
    let features = ext
        .mask
        .iter()
        .map(|&i| {
            let mut props = Map::new();
            props.insert("cell".into(), i.into());
            props.insert(
                "area_m2".into(),
                (ext.analysis_cell_size * ext.analysis_cell_size).into(),
            );
            geojson::feature(geojson::ring_geometry(&ext.grid.cell_ring(i)), props)
        })
        .collect();
    geojson::feature_collection(features)
}

fn spatial_proxies_geojson(out: &RunOutput) -> Value {
    let mut features = Vec::new();
    for e in &out.report.events {
        let Some(sp) = &e.evidence.spatial else { continue };
        let props = |shape: &str| {
            let mut m = Map::new();
            m.insert("event_date".into(), e.event.date.to_string().into());
            m.insert("shape".into(), shape.into());
            m.insert("distinct_users".into(), e.evidence.social.distinct_users.into());
            m
        };
        features.push(geojson::feature(geojson::bbox_geometry(&sp.bbox), props("bbox")));
        if let Some(h) = &sp.hull {
            features.push(geojson::feature(geojson::polygon_geometry(h), props("hull")));
        }
    }
    geojson::feature_collection(features)
}

/// Pretty JSON with a trailing newline.
pub fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json serializes") + "\n"
}

/// Files for `formats`, as (relative name, contents), in a fixed order.
fn render(out: &RunOutput, formats: &[ExportFormat]) -> Vec<(String, String)> {
    let has = |f| formats.contains(&f);
    let mut files = Vec::new();
    if has(ExportFormat::Json) {
        files.push(("report.json".into(), out.report.to_json()));
    }
    if has(ExportFormat::Text) {
        files.push(("summary.txt".into(), out.report.summary()));
    }
    if has(ExportFormat::Jsonl) {
        let lines: String = out.report.requests.iter().map(|r| request_line(r) + "\n").collect();
        files.push(("requests.jsonl".into(), lines));
    }
    if has(ExportFormat::Csv) {
        let p = &out.proxies;
        for s in [&p.total, &p.awareness, &p.damage, &p.normalized] {
            files.push((format!("series_{}.csv", s.name), s.to_csv()));
        }
        files.push(("series_census.csv".into(), census_csv(&p.census)));
        files.push((
            "rainfall.csv".into(),
            rainfall_to_csv(std::slice::from_ref(&out.rainfall)),
        ));
        files.push(("rainfall_profile.csv".into(), out.rainfall_profile.to_csv()));
        let pr = &out.presence;
        files.push(("presence_daily.csv".into(), daily_to_csv(&pr.daily, &pr.locations)));
        files.push(("presence_weekly.csv".into(), weekly_to_csv(&pr.weekly)));
        let hourly: Vec<HourlySeries> = pr.hourly.iter().flat_map(|(_, s, _)| s.iter().cloned()).collect();
        files.push(("presence_hourly.csv".into(), hourly_to_csv(&hourly)));
        let (edges, clusters, aggregates) = match &out.network {
            Some(n) => (
                edges_to_csv(&n.network.edges),
                clusters_to_csv(&n.network.nodes, &n.profiles),
                aggregates_to_csv(&n.profiles),
            ),
            None => (edges_to_csv(&[]), clusters_to_csv(&[], &[]), aggregates_to_csv(&[])),
        };
        files.push(("network_edges.csv".into(), edges));
        files.push(("network_clusters.csv".into(), clusters));
        files.push(("network_aggregates.csv".into(), aggregates));
    }
    if has(ExportFormat::GeoJson) {
        files.push((
            "zmap_daily.geojson".into(),
            pretty(&out.presence.daily_zmap.to_geojson()),
        ));
        for (w, _, z) in &out.presence.hourly {
            files.push((hourly_zmap_file(w), pretty(&z.to_geojson())));
        }
        files.push((
            "flood_extent.geojson".into(),
            pretty(&flood_extent_geojson(out.extent.as_ref())),
        ));
        files.push(("spatial_proxies.geojson".into(), pretty(&spatial_proxies_geojson(out))));
    }
    files
}

/// Write the requested formats into `dir`, returning the paths written.
pub fn export(out: &RunOutput, dir: &Path, formats: &[ExportFormat]) -> Result<Vec<PathBuf>, PipelineError> {
    let io = |path: &Path, e: std::io::Error| PipelineError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    for (name, body) in render(out, formats) {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
