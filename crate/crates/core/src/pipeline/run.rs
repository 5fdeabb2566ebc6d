//! End-to-end run: proxies, detection, classification, escalation, then
//! the optional segmentation and network stages.

use std::collections::BTreeMap;

use chrono::{Datelike, Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{load_inputs, Datasets, PipelineError, RunConfig, ValidationReport};
use crate::detect::{
    classify_flood, detect_peaks, DataRequest, DetectionEvent, EscalationInput, EscalationStage, Escalator, FloodClass,
    RequestKind,
};
use crate::geo::{
    affected_population, drape_layer_stats, flood_extent, river_rise, ElevationStats, FloodExtent, FloodExtentSummary,
    GeoError, GeoPoint, Region, RiverRise,
};
use crate::netdyn::{build_network, profile_kind, KMeansConfig, KindProfile, Network, NodeKind};
use crate::presence::{
    aggregate_daily_interval, aggregate_weekly, antenna_locations, census_series, hourly_event_window, DaySeries,
    HourlySeries, PresenceRecord, WeekSeries, ZMap,
};
use crate::rainfall::{haversine_km, historic_profile, nearest_station, HistoricProfile, RainfallSeries};
use crate::social::{
    awareness_series, daily_counts, damage_series, keyword_filter, normalize_awareness, EvidenceBundle, ProxySeries,
    SocialPost,
};
use crate::DateRange;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationRef {
    pub id: String,
    pub distance_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    pub event: DetectionEvent,
    pub class: FloodClass,
    pub evidence: EvidenceBundle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub date: NaiveDate,
    pub input: String,
    pub from: EscalationStage,
    pub to: EscalationStage,
    pub requests: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationReport {
    pub extent: FloodExtentSummary,
    pub pre_elevation: Option<ElevationStats>,
    pub post_elevation: Option<ElevationStats>,
    pub river_rise: Option<RiverRise>,
    pub affected_population: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZMapRef {
    pub file: String,
    pub window: DateRange,
    pub antennas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub interval: DateRange,
    pub nodes: usize,
    pub edges: usize,
    pub profiles: Vec<KindProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub range: DateRange,
    pub region: Region,
    pub validation: ValidationReport,
    pub posts_in_region: usize,
    pub station: Option<StationRef>,
    pub events: Vec<EventReport>,
    pub transitions: Vec<Transition>,
    pub final_stage: EscalationStage,
    pub requests: Vec<DataRequest>,
    pub segmentation: Option<SegmentationReport>,
    pub zmaps: Vec<ZMapRef>,
    pub network: Option<NetworkSummary>,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn reached(&self, stage: EscalationStage) -> bool {
        self.transitions.iter().any(|t| t.to == stage)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn summary(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(s, "run {} .. {} (seed {})", self.range.start, self.range.end, self.seed);
        for f in &self.validation.files {
            let _ = writeln!(
                s,
                "  input {:<10} {:>7} rows, {:>7} accepted, {} rejected",
                f.input,
                f.rows,
                f.accepted,
                f.rejected.len()
            );
        }
        let _ = writeln!(s, "posts in region: {}", self.posts_in_region);
        match &self.station {
            Some(st) => {
                let _ = writeln!(s, "rain gauge: {} ({:.1} km from region centre)", st.id, st.distance_km);
            }
            None => {
                let _ = writeln!(s, "rain gauge: none");
            }
        }
        let _ = writeln!(s, "events: {}", self.events.len());
        for e in &self.events {
            let lag = e
                .class
                .rainfall_lag_days
                .map_or_else(String::new, |l| format!(", rain lag {l:+} d"));
            let _ = writeln!(
                s,
                "  {}  z={}  value={:.6}  {:?}{lag}  users={}  geotagged={}",
                e.event.date,
                crate::num::display(e.event.z_peak),
                e.event.proxy_value,
                e.class.kind,
                e.evidence.social.distinct_users,
                e.evidence.spatial.is_some()
            );
        }
        let _ = writeln!(s, "escalation:");
        for t in &self.transitions {
            let _ = writeln!(
                s,
                "  {}  {:?} -> {:?} on {} ({} requests)",
                t.date, t.from, t.to, t.input, t.requests
            );
        }
        let _ = writeln!(s, "final stage: {:?}", self.final_stage);
        let _ = writeln!(s, "data requests: {}", self.requests.len());
        for r in &self.requests {
            let _ = writeln!(
                s,
                "  {:?} {} .. {} for event {}",
                r.kind, r.window.start, r.window.end, r.event.date
            );
        }
        if let Some(seg) = &self.segmentation {
            let _ = writeln!(
                s,
                "flood extent: {:.1} m2 over {} cells of {} m",
                seg.extent.area_m2, seg.extent.cells, seg.extent.analysis_cell_size
            );
            if let Some(r) = &seg.river_rise {
                let _ = writeln!(
                    s,
                    "  elevation change: mean {:+.2}, min {:+.2}, max {:+.2}",
                    r.d_mean, r.d_min, r.d_max
                );
            }
            if let Some(p) = seg.affected_population {
                let _ = writeln!(s, "  affected population: {p:.1}");
            }
        }
        for z in &self.zmaps {
            let _ = writeln!(s, "z-map {} ({} antennas)", z.file, z.antennas);
        }
        if let Some(n) = &self.network {
            let _ = writeln!(s, "network: {} nodes, {} edges", n.nodes, n.edges);
            for p in &n.profiles {
                let _ = writeln!(
                    s,
                    "  {:?}: {} nodes, {} links, {} clusters (f {} / m {} / u {})",
                    p.kind,
                    p.nodes,
                    p.links,
                    p.clusters.len(),
                    p.female,
                    p.male,
                    p.unknown
                );
            }
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct ProxyOutput {
    pub region_posts: Vec<SocialPost>,
    pub matching: Vec<SocialPost>,
    pub total: ProxySeries,
    pub awareness: ProxySeries,
    pub damage: ProxySeries,
    pub normalized: ProxySeries,
    pub census: DaySeries,
}

#[derive(Debug, Clone)]
pub struct SegmentOutput {
    pub extent: FloodExtent,
    pub report: SegmentationReport,
}

#[derive(Debug, Clone, Default)]
pub struct PresenceOutput {
    pub locations: BTreeMap<String, GeoPoint>,
    pub daily: Vec<DaySeries>,
    pub weekly: Vec<WeekSeries>,
    pub daily_zmap: ZMap,
    /// One hourly window per event that reached escalation.
    pub hourly: Vec<(DateRange, Vec<HourlySeries>, ZMap)>,
}

#[derive(Debug, Clone)]
pub struct NetworkOutput {
    pub interval: DateRange,
    pub network: Network,
    pub profiles: Vec<KindProfile>,
}

/// The report plus the bulk artifacts that exports are written from.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub proxies: ProxyOutput,
    pub rainfall: RainfallSeries,
    pub rainfall_profile: HistoricProfile,
    pub presence: PresenceOutput,
    pub extent: Option<FloodExtent>,
    pub network: Option<NetworkOutput>,
}

fn region_posts(cfg: &RunConfig, region: &Region, posts: &[SocialPost]) -> Vec<SocialPost> {
    posts
        .iter()
        .filter(|p| !cfg.social.geo_filter || p.geo.is_some_and(|g| region.contains(g)))
        .cloned()
        .collect()
}

fn region_presence(region: &Region, records: &[PresenceRecord], range: &DateRange) -> Vec<PresenceRecord> {
    records
        .iter()
        .filter(|r| range.contains(r.date) && region.contains(r.location))
        .cloned()
        .collect()
}

pub fn stage_proxies(cfg: &RunConfig, data: &Datasets) -> Result<ProxyOutput, PipelineError> {
    let region = cfg.region.to_region()?;
    let range = cfg.range()?;
    let lexicons = cfg.lexicons.apply();
    let lang = cfg.social.language.as_str();
    let posts = region_posts(cfg, &region, &data.posts);
    let total = daily_counts("total", &posts, None, range);
    let awareness = awareness_series(&posts, &lexicons, lang, None, range)?;
    let damage = damage_series(&posts, &lexicons, lang, None, range)?;
    let census = census_series(&data.presence, &region, range, cfg.presence.census()?);
    let normalized = normalize_awareness(&awareness, &total, cfg.social.social_users, &census)?;
    let matching = keyword_filter(&posts, &lexicons.awareness, lang)?;
    Ok(ProxyOutput {
        region_posts: posts,
        matching,
        total,
        awareness,
        damage,
        normalized,
        census,
    })
}

fn drape_or_note(
    polys: &[crate::geo::RingPolygon],
    dem: &crate::geo::RasterGrid,
    what: &str,
    notes: &mut Vec<String>,
) -> Result<Option<ElevationStats>, PipelineError> {
    match drape_layer_stats(polys, dem) {
        Ok(s) => Ok(Some(s)),
        Err(GeoError::NoElevationCoverage) => {
            notes.push(format!("DEM does not cover the {what} layer"));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn stage_segment(
    cfg: &RunConfig,
    data: &Datasets,
    notes: &mut Vec<String>,
) -> Result<Option<SegmentOutput>, PipelineError> {
    let Some((pre, post)) = &data.hydro else {
        return Ok(None);
    };
    let extent = flood_extent(pre, post, cfg.segment.cell_size)?;
    let (pre_elevation, post_elevation) = match &data.dem {
        Some(dem) => (
            drape_or_note(&pre.polygons, dem, "pre-event", notes)?,
            drape_or_note(&post.polygons, dem, "post-event", notes)?,
        ),
        None => (None, None),
    };
    let rise = match (&pre_elevation, &post_elevation) {
        (Some(a), Some(b)) => Some(river_rise(a, b)),
        _ => None,
    };
    let population = match &data.population {
        Some(pop) => match affected_population(&extent, pop) {
            Ok(v) => Some(v),
            Err(GeoError::NoPopulationCoverage) => {
                notes.push("population raster does not cover the flood extent".into());
                None
            }
            Err(e) => return Err(e.into()),
        },
        None => None,
    };
    Ok(Some(SegmentOutput {
        report: SegmentationReport {
            extent: extent.summary(),
            pre_elevation,
            post_elevation,
            river_rise: rise,
            affected_population: population,
        },
        extent,
    }))
}

/// Daily and weekly presence in the region, its z-map, and one hourly
/// window per hourly-presence request.
pub fn stage_presence(
    cfg: &RunConfig,
    data: &Datasets,
    requests: &[DataRequest],
) -> Result<PresenceOutput, PipelineError> {
    let region = cfg.region.to_region()?;
    let range = cfg.range()?;
    let records = region_presence(&region, &data.presence, &range);
    let locations = antenna_locations(&records);
    let daily = aggregate_daily_interval(&records, cfg.presence.census()?);
    let weekly = daily.iter().map(aggregate_weekly).collect();
    let daily_zmap = ZMap::from_daily(&daily, &locations);
    let night = cfg.presence.night()?;
    let mut hourly = Vec::new();
    for r in requests.iter().filter(|r| r.kind == RequestKind::HourlyPresenceWindow) {
        let inside: Vec<PresenceRecord> = data
            .presence
            .iter()
            .filter(|p| region.contains(p.location))
            .cloned()
            .collect();
        let span = (r.event.date - r.window.start).num_days() as u32;
        let series = hourly_event_window(&inside, r.event.date, span, night);
        let z = ZMap::from_hourly(&series, &antenna_locations(&inside));
        hourly.push((r.window, series, z));
    }
    Ok(PresenceOutput {
        locations,
        daily,
        weekly,
        daily_zmap,
        hourly,
    })
}

pub fn stage_network(cfg: &RunConfig, proxies: &ProxyOutput) -> Result<Option<NetworkOutput>, PipelineError> {
    if !cfg.network.enabled {
        return Ok(None);
    }
    let interval = cfg.network_range()?;
    let posts = if cfg.network.only_matching {
        &proxies.matching
    } else {
        &proxies.region_posts
    };
    let network = build_network(posts, &interval);
    let km = KMeansConfig {
        k: cfg.network.k,
        seed: cfg.seed,
        max_iter: cfg.network.max_iter,
        n_init: cfg.network.n_init,
        normalize: cfg.network.normalize,
    };
    let mut profiles = Vec::new();
    for kind in [NodeKind::Poster, NodeKind::Target] {
        if let Some(p) = profile_kind(&network, &interval, kind, &km)? {
            profiles.push(p);
        }
    }
    Ok(Some(NetworkOutput {
        interval,
        network,
        profiles,
    }))
}

struct Driver {
    machine: Escalator,
    transitions: Vec<Transition>,
    requests: Vec<DataRequest>,
}

impl Driver {
    fn feed(&mut self, input: EscalationInput, label: &str, date: NaiveDate) -> Result<(), PipelineError> {
        let from = self.machine.stage();
        let (next, reqs) = self.machine.step(&input, date)?;
        if next.stage() != from || !reqs.is_empty() {
            self.transitions.push(Transition {
                date,
                input: label.to_string(),
                from,
                to: next.stage(),
                requests: reqs.len(),
            });
        }
        self.requests.extend(reqs);
        self.machine = next;
        Ok(())
    }
}

/// Run on already loaded datasets.
pub fn run_with(cfg: &RunConfig, data: &Datasets, validation: ValidationReport) -> Result<RunOutput, PipelineError> {
    let region = cfg.region.to_region()?;
    let range = cfg.range()?;
    let mut notes = Vec::new();

    let proxies = stage_proxies(cfg, data)?;
    let events = detect_peaks(&proxies.normalized, &cfg.detect)?;
    if proxies.census.entries.is_empty() {
        notes.push("no antenna inside the region reports in the census hours".into());
    }

    let centre = region.bbox().center();
    let station = nearest_station(data.rainfall.stations(), centre).ok();
    let rainfall = station
        .and_then(|s| data.rainfall.series(&s.id).cloned())
        .unwrap_or_else(|| RainfallSeries::empty(station.map_or("", |s| s.id.as_str())));
    if station.is_none() {
        notes.push("no rain gauge available; every event classifies as overflow".into());
    }

    let window = u64::from(cfg.evidence.window_days);
    let mut reports = Vec::new();
    for e in &events {
        let near = DateRange::around(e.date, window);
        let posts: Vec<SocialPost> = proxies
            .matching
            .iter()
            .filter(|p| near.contains(p.date()))
            .cloned()
            .collect();
        reports.push(EventReport {
            event: e.clone(),
            class: classify_flood(e, &rainfall, &cfg.classify),
            evidence: EvidenceBundle::from_posts(e.date, e.z_peak, &posts),
        });
    }

    let mut driver = Driver {
        machine: Escalator::new(cfg.escalate, range.start),
        transitions: Vec::new(),
        requests: Vec::new(),
    };
    let by_date: BTreeMap<NaiveDate, &EventReport> = reports.iter().map(|r| (r.event.date, r)).collect();
    let mut last_detection: Option<NaiveDate> = None;
    for day in range.days() {
        if let Some(r) = by_date.get(&day) {
            driver.feed(EscalationInput::Detection(r.event.clone()), "detection", day)?;
            last_detection = Some(day);
            driver.feed(EscalationInput::Evidence(r.evidence.clone()), "evidence", day)?;
            if driver.machine.stage() == EscalationStage::Escalated {
                // requested hourly data is part of the input bundle
                driver.feed(EscalationInput::DataRegistered, "data_registered", day)?;
            }
        } else if driver.machine.stage() == EscalationStage::Monitoring {
            let quiet = last_detection.map_or(0, |d| (day - d).num_days()) as u32;
            driver.feed(EscalationInput::Quiescent { days: quiet }, "quiescent", day)?;
            if driver.machine.stage() == EscalationStage::Evaluation {
                driver.feed(EscalationInput::ReportIssued, "report_issued", day)?;
            }
        }
    }

    let segment = stage_segment(cfg, data, &mut notes)?;
    let presence = stage_presence(cfg, data, &driver.requests)?;
    let network = stage_network(cfg, &proxies)?;

    let years: Vec<i32> = {
        let mut y: Vec<i32> = rainfall.entries.iter().map(|e| e.date.year()).collect();
        y.dedup();
        y
    };
    let rainfall_profile = historic_profile(&rainfall, &years);

    let mut zmaps = vec![ZMapRef {
        file: "zmap_daily.geojson".into(),
        window: range,
        antennas: presence.daily_zmap.antennas.len(),
    }];
    for (w, _, z) in &presence.hourly {
        zmaps.push(ZMapRef {
            file: hourly_zmap_file(w),
            window: *w,
            antennas: z.antennas.len(),
        });
    }

    let report = RunReport {
        seed: cfg.seed,
        range,
        region,
        validation,
        posts_in_region: proxies.region_posts.len(),
        station: station.map(|s| StationRef {
            id: s.id.clone(),
            distance_km: haversine_km(s.location, centre),
        }),
        events: reports,
        transitions: driver.transitions,
        final_stage: driver.machine.stage(),
        requests: driver.requests,
        segmentation: segment.as_ref().map(|s| s.report.clone()),
        zmaps,
        network: network.as_ref().map(|n| NetworkSummary {
            interval: n.interval,
            nodes: n.network.nodes.len(),
            edges: n.network.edges.len(),
            profiles: n.profiles.clone(),
        }),
        notes,
    };
    Ok(RunOutput {
        report,
        proxies,
        rainfall,
        rainfall_profile,
        presence,
        extent: segment.map(|s| s.extent),
        network,
    })
}

pub(crate) fn hourly_zmap_file(window: &DateRange) -> String {
    let centre = window.start + Days::new((window.num_days() as u64).saturating_sub(1) / 2);
    format!("zmap_hourly_{centre}.geojson")
}

/// Load, validate and run.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, PipelineError> {
    let (data, validation) = load_inputs(cfg)?;
    run_with(cfg, &data, validation)
}
