//! Seeded synthetic datasets for exercising the whole chain.
//!
//! Each channel draws from its own ChaCha8 stream derived from the one
//! seed, so adding posts does not shift the rainfall draws and vice versa.
//! Baseline counts are Poisson around the configured rates; an injected
//! event multiplies the rate of its channels by `m` on the event day and by
//! `1 + (m - 1) / 2` on the day before and after.

use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::config::{DatesConfig, InputPaths, RegionConfig, SegmentConfig, SocialConfig};
use super::{PipelineError, RunConfig};
use crate::detect::FloodKind;
use crate::geo::{geojson, GeoPoint, RasterGrid, RingPolygon, METERS_PER_DEGREE};
use crate::presence::{records_to_csv, PresenceRecord};
use crate::rainfall::{rainfall_to_csv, stations_to_csv, RainDay, RainfallSeries, Station};
use crate::social::{Gender, Lexicons, SocialPost};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectedEvent {
    /// Zero-based day index into the scenario.
    pub day: u32,
    pub kind: FloodKind,
    pub rain: f64,
    pub posts: f64,
    pub presence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub start: NaiveDate,
    pub days: u32,
    /// min_lat, min_lon, max_lat, max_lon
    pub region: [f64; 4],
    pub language: String,
    pub posts_per_day: f64,
    /// Baseline share of posts carrying an awareness keyword.
    pub flood_share: f64,
    pub damage_share: f64,
    pub users: usize,
    pub mention_prob: f64,
    pub retweet_prob: f64,
    /// Mean rainfall on a wet day; zero gives an identically dry record.
    pub rain_mm_per_day: f64,
    pub wet_day_prob: f64,
    pub stations: usize,
    pub antennas: usize,
    /// Mean hourly presence per antenna in daytime hours.
    pub presence_per_antenna: f64,
    /// Also write hydrography, DEM and population layers.
    pub hydro: bool,
    pub events: Vec<InjectedEvent>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            start: NaiveDate::from_ymd_opt(2014, 8, 1).expect("valid date"),
            days: 90,
            region: [40.38, -3.75, 40.46, -3.63],
            language: "en".into(),
            posts_per_day: 200.0,
            flood_share: 0.1,
            damage_share: 0.02,
            users: 400,
            mention_prob: 0.3,
            retweet_prob: 0.2,
            rain_mm_per_day: 4.0,
            wet_day_prob: 0.3,
            stations: 3,
            antennas: 9,
            presence_per_antenna: 400.0,
            hydro: false,
            events: Vec::new(),
        }
    }
}

impl ScenarioSpec {
    /// Rain and social surge on day 40 of 90, with hydrography layers.
    pub fn golden_torrential() -> Self {
        Self {
            seed: 9,
            hydro: true,
            events: vec![InjectedEvent {
                day: 40,
                kind: FloodKind::Torrential,
                rain: 10.0,
                posts: 10.0,
                presence: 1.0,
            }],
            ..Self::default()
        }
    }

    /// Social surge on day 25 of 60 with no rain at all.
    pub fn golden_overflow() -> Self {
        Self {
            seed: 7,
            days: 60,
            rain_mm_per_day: 0.0,
            events: vec![InjectedEvent {
                day: 25,
                kind: FloodKind::Overflow,
                rain: 1.0,
                posts: 10.0,
                presence: 1.0,
            }],
            ..Self::default()
        }
    }

    /// Baseline only.
    pub fn golden_quiet() -> Self {
        Self {
            seed: 1,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        let spec: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.days == 0 {
            return bad("scenario needs at least one day".into());
        }
        for e in &self.events {
            if e.day >= self.days {
                return bad(format!("event day {} outside 0..{}", e.day, self.days));
            }
            if !([e.rain, e.posts, e.presence].iter().all(|m| m.is_finite() && *m > 0.0)) {
                return bad(format!("event on day {} has a non-positive multiplier", e.day));
            }
        }
        let shares = self.flood_share + self.damage_share;
        if !(0.0..=1.0).contains(&self.flood_share) || !(0.0..=1.0).contains(&self.damage_share) || shares > 1.0 {
            return bad("post shares must lie in [0, 1] and sum to at most 1".into());
        }
        for (name, p) in [
            ("mention_prob", self.mention_prob),
            ("retweet_prob", self.retweet_prob),
            ("wet_day_prob", self.wet_day_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        for (name, v) in [
            ("posts_per_day", self.posts_per_day),
            ("rain_mm_per_day", self.rain_mm_per_day),
            ("presence_per_antenna", self.presence_per_antenna),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a non-negative number"));
            }
        }
        if self.users == 0 || self.antennas == 0 || self.stations == 0 {
            return bad("users, antennas and stations must be positive".into());
        }
        let [a, b, c, d] = self.region;
        crate::geo::BoundingBox::new(a, b, c, d).map_err(|e| PipelineError::Config(format!("region: {e}")))?;
        if Lexicons::default().awareness.keywords(&self.language).is_none() {
            return bad(format!("no built-in lexicon for `{}`", self.language));
        }
        Ok(())
    }

    fn date(&self, day: u32) -> NaiveDate {
        self.start + Days::new(u64::from(day))
    }

    /// Rate multiplier for `channel` on `day`.
    fn multiplier(&self, day: u32, channel: impl Fn(&InjectedEvent) -> Option<f64>) -> f64 {
        let mut m = 1.0;
        for e in &self.events {
            let Some(x) = channel(e) else { continue };
            let dist = e.day.abs_diff(day);
            if dist == 0 {
                m *= x;
            } else if dist == 1 {
                m *= 1.0 + (x - 1.0) / 2.0;
            }
        }
        m
    }

    fn rain_multiplier(&self, day: u32) -> f64 {
        self.multiplier(day, |e| (e.kind == FloodKind::Torrential).then_some(e.rain))
    }

    fn is_rain_event(&self, day: u32) -> bool {
        self.events
            .iter()
            .any(|e| e.kind == FloodKind::Torrential && e.day.abs_diff(day) <= 1)
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedScenario {
    pub config_path: PathBuf,
    pub config: RunConfig,
    pub files: Vec<PathBuf>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng) as u64
}

fn round(v: f64, digits: i32) -> f64 {
    let f = 10f64.powi(digits);
    (v * f).round() / f
}

const FILLERS: [&str; 8] = [
    "today", "downtown", "again", "look", "now", "street", "photo", "friends",
];

fn text_with(rng: &mut ChaCha8Rng, keyword: Option<&str>) -> String {
    let mut words: Vec<&str> = (0..rng.random_range(2..5))
        .map(|_| FILLERS[rng.random_range(0..FILLERS.len())])
        .collect();
    if let Some(k) = keyword {
        let at = rng.random_range(0..=words.len());
        words.insert(at, k);
    }
    words.join(" ")
}

fn generate_posts(spec: &ScenarioSpec) -> Vec<SocialPost> {
    let mut rng = stream(spec.seed, 1);
    let lex = Lexicons::default();
    let language = spec.language.as_str();
    let aware: Vec<&String> = lex.awareness.keywords(language).expect("validated").iter().collect();
    let damage: Vec<&String> = lex
        .damage
        .keywords(language)
        .map(|k| k.iter().collect())
        .unwrap_or_default();
    let genders: Vec<Gender> = (0..spec.users)
        .map(|_| match rng.random::<f64>() {
            x if x < 0.4 => Gender::Female,
            x if x < 0.85 => Gender::Male,
            _ => Gender::Unknown,
        })
        .collect();
    let [min_lat, min_lon, max_lat, max_lon] = spec.region;
    let other_share = 1.0 - spec.flood_share - spec.damage_share;
    let mut posts = Vec::new();
    for day in 0..spec.days {
        let m = spec.multiplier(day, |e| Some(e.posts));
        let n_flood = poisson(&mut rng, spec.posts_per_day * spec.flood_share * m);
        let n_damage = poisson(&mut rng, spec.posts_per_day * spec.damage_share * m);
        let n_other = poisson(&mut rng, spec.posts_per_day * other_share);
        let date = spec.date(day);
        let kinds = std::iter::repeat_n(0u8, n_flood as usize)
            .chain(std::iter::repeat_n(1u8, n_damage as usize))
            .chain(std::iter::repeat_n(2u8, n_other as usize));
        for kind in kinds {
            let keyword = match kind {
                0 => Some(aware[rng.random_range(0..aware.len())].as_str()),
                1 if !damage.is_empty() => Some(damage[rng.random_range(0..damage.len())].as_str()),
                _ => None,
            };
            let mut text = text_with(&mut rng, keyword);
            let author = rng.random_range(0..spec.users);
            if rng.random::<f64>() < spec.mention_prob {
                text.push_str(&format!(" @user{}", rng.random_range(0..spec.users)));
            }
            if rng.random::<f64>() < spec.retweet_prob {
                text = format!("RT @user{} {text}", rng.random_range(0..spec.users));
            }
            let secs = rng.random_range(0..86_400u32);
            let ts = Utc.from_utc_datetime(
                &date
                    .and_hms_opt(secs / 3600, secs / 60 % 60, secs % 60)
                    .expect("valid time"),
            );
            let lat = round(rng.random_range(min_lat..max_lat), 6);
            let lon = round(rng.random_range(min_lon..max_lon), 6);
            posts.push(SocialPost {
                id: format!("p{}", posts.len() + 1),
                timestamp: ts,
                text,
                author_id: format!("user{author}"),
                gender: genders[author],
                geo: GeoPoint::new(lat, lon).ok(),
                platform: "twitter".into(),
            });
        }
    }
    posts
}

fn generate_rain(spec: &ScenarioSpec, stations: &[Station]) -> Vec<RainfallSeries> {
    let mut rng = stream(spec.seed, 2);
    stations
        .iter()
        .map(|s| {
            let entries = (0..spec.days)
                .map(|day| {
                    let wet = rng.random::<f64>() < spec.wet_day_prob;
                    let draw: f64 = -rng.random::<f64>().max(1e-12).ln();
                    let jitter: f64 = rng.random_range(0.75..1.25);
                    let mm = if spec.rain_mm_per_day == 0.0 {
                        0.0
                    } else if spec.is_rain_event(day) {
                        spec.rain_mm_per_day * spec.rain_multiplier(day) * jitter
                    } else if wet {
                        spec.rain_mm_per_day * draw
                    } else {
                        0.0
                    };
                    RainDay {
                        date: spec.date(day),
                        mm: round(mm, 1),
                    }
                })
                .collect();
            RainfallSeries {
                station_id: s.id.clone(),
                entries,
            }
        })
        .collect()
}

fn generate_presence(spec: &ScenarioSpec) -> Vec<PresenceRecord> {
    let mut rng = stream(spec.seed, 3);
    let [min_lat, min_lon, max_lat, max_lon] = spec.region;
    let sites: Vec<GeoPoint> = (0..spec.antennas)
        .map(|_| {
            GeoPoint::new(
                round(rng.random_range(min_lat..max_lat), 6),
                round(rng.random_range(min_lon..max_lon), 6),
            )
            .expect("inside region")
        })
        .collect();
    let mut out = Vec::new();
    for (i, site) in sites.iter().enumerate() {
        for day in 0..spec.days {
            let m = spec.multiplier(day, |e| Some(e.presence));
            for hour in 0u8..24 {
                let diurnal = if (1..8).contains(&hour) { 0.5 } else { 1.0 };
                let count = poisson(&mut rng, spec.presence_per_antenna * diurnal * m) as f64;
                out.push(
                    PresenceRecord::new(format!("A{:02}", i + 1), *site, spec.date(day), hour, count)
                        .expect("valid record"),
                );
            }
        }
    }
    out
}

fn generate_stations(spec: &ScenarioSpec) -> Vec<Station> {
    let [min_lat, min_lon, max_lat, max_lon] = spec.region;
    let (clat, clon) = ((min_lat + max_lat) / 2.0, (min_lon + max_lon) / 2.0);
    (0..spec.stations)
        .map(|i| {
            let off = 0.01 + 0.15 * i as f64;
            Station {
                id: format!("S{}", i + 1),
                location: GeoPoint::new(round(clat + off, 6), round(clon - off / 2.0, 6)).expect("valid station"),
                name: Some(format!("Gauge {}", i + 1)),
            }
        })
        .collect()
}

/// River band before the event and a wider band after, both 600 m long,
/// centred on the region, with a valley-shaped DEM and uniform population.
fn hydro_layers(spec: &ScenarioSpec) -> (String, String, String, String) {
    let [min_lat, min_lon, max_lat, max_lon] = spec.region;
    let c = GeoPoint::new((min_lat + max_lat) / 2.0, (min_lon + max_lon) / 2.0).expect("valid centre");
    let dlat = |m: f64| m / METERS_PER_DEGREE;
    let dlon = |m: f64| m / (METERS_PER_DEGREE * c.lat.to_radians().cos());
    let band = |half_height: f64| {
        let pts = [(-1.0, -1.0), (-1.0, 1.0), (1.0, 1.0), (1.0, -1.0)]
            .iter()
            .map(|(sy, sx)| GeoPoint::new(c.lat + sy * dlat(half_height), c.lon + sx * dlon(300.0)).expect("valid"))
            .collect();
        RingPolygon::simple(pts).expect("rectangle")
    };
    let layer = |p: RingPolygon| {
        let fc = geojson::feature_collection(vec![geojson::feature(
            geojson::polygon_geometry(&p),
            serde_json::Map::new(),
        )]);
        serde_json::to_string_pretty(&fc).expect("json") + "\n"
    };
    let cell = 0.0005;
    let n = 41usize;
    let origin = GeoPoint::new(c.lat + cell * n as f64 / 2.0, c.lon - cell * n as f64 / 2.0).expect("valid origin");
    let dem = RasterGrid::from_fn(origin, cell, n, n, |r, _| {
        let centre = origin.lat - cell * (r as f64 + 0.5);
        round(100.0 + 20_000.0 * (centre - c.lat).abs(), 3)
    })
    .expect("valid dem");
    let pcell = 0.002;
    let pn = 11usize;
    let porigin = GeoPoint::new(c.lat + pcell * pn as f64 / 2.0, c.lon - pcell * pn as f64 / 2.0).expect("valid");
    let pop = RasterGrid::from_fn(porigin, pcell, pn, pn, |_, _| 50.0).expect("valid population");
    (
        layer(band(50.0)),
        layer(band(150.0)),
        dem.to_ascii_grid(),
        pop.to_ascii_grid(),
    )
}

/// Write the scenario's datasets and a matching `config.toml` into `dir`.
pub fn generate_scenario(spec: &ScenarioSpec, dir: &Path) -> Result<GeneratedScenario, PipelineError> {
    spec.validate()?;
    let io = |path: &Path, e: std::io::Error| PipelineError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut files = Vec::new();
    let mut write = |name: &str, body: String| -> Result<(), PipelineError> {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| io(&path, e))?;
        files.push(path);
        Ok(())
    };

    let posts = generate_posts(spec);
    write("posts.jsonl", posts.iter().map(|p| p.to_json_line() + "\n").collect())?;
    write("presence.csv", records_to_csv(&generate_presence(spec)))?;
    let stations = generate_stations(spec);
    write("stations.csv", stations_to_csv(&stations))?;
    write("rainfall.csv", rainfall_to_csv(&generate_rain(spec, &stations)))?;

    let end = spec.date(spec.days - 1);
    let mut inputs = InputPaths {
        posts: "posts.jsonl".into(),
        presence: "presence.csv".into(),
        stations: "stations.csv".into(),
        rainfall: "rainfall.csv".into(),
        hydro_pre: None,
        hydro_post: None,
        dem: None,
        population: None,
    };
    let mut segment = SegmentConfig {
        cell_size: 5.0,
        ..SegmentConfig::default()
    };
    if spec.hydro {
        let (pre, post, dem, pop) = hydro_layers(spec);
        write("hydro_pre.geojson", pre)?;
        write("hydro_post.geojson", post)?;
        write("dem.asc", dem)?;
        write("population.asc", pop)?;
        inputs.hydro_pre = Some("hydro_pre.geojson".into());
        inputs.hydro_post = Some("hydro_post.geojson".into());
        inputs.dem = Some("dem.asc".into());
        inputs.population = Some("population.asc".into());
        let event_day = spec.events.first().map_or(spec.days - 1, |e| e.day);
        segment.pre_date = Some(spec.start);
        segment.post_date = Some(
            spec.date((event_day + 1).min(spec.days - 1))
                .max(spec.start + Days::new(1)),
        );
    }
    write("scenario.toml", spec.to_toml())?;

    let toml_text = format!(
        "seed = {}\n\n{}",
        spec.seed,
        toml::to_string_pretty(&ConfigSkeleton {
            inputs,
            region: RegionConfig {
                bbox: Some(spec.region),
                polygon: None,
            },
            dates: DatesConfig { start: spec.start, end },
            social: SocialConfig {
                language: spec.language.clone(),
                social_users: spec.users as f64,
                geo_filter: true,
            },
            segment,
        })
        .expect("config serializes")
    );
    let config_path = dir.join("config.toml");
    write("config.toml", toml_text.clone())?;
    let config = RunConfig::from_toml_str(&toml_text, dir)?;
    Ok(GeneratedScenario {
        config_path,
        config,
        files,
    })
}

/// The keys a generated config sets; everything else keeps its default.
#[derive(Serialize)]
struct ConfigSkeleton {
    inputs: InputPaths,
    region: RegionConfig,
    dates: DatesConfig,
    social: SocialConfig,
    segment: SegmentConfig,
}
