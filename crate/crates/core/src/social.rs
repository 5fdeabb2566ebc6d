//! Social-post ingestion and the awareness, total and damage proxies.
//!
//! A proxy is a daily count of posts, optionally restricted to a bounding
//! box and to posts matching a keyword lexicon. The awareness proxy can be
//! normalized by the phone-presence census:
//!
//! ```text
//! normalized_t = (flood_t / total_t) * (social_users / census_t)
//! ```

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::geo::{convex_hull, BoundingBox, GeoPoint, RingPolygon};
use crate::ingest::{Loaded, RowRejection};
use crate::presence::DaySeries;
use crate::DateRange;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SocialError {
    #[error("lexicon has no language `{0}`")]
    UnknownLanguage(String),
    #[error("invalid date range {start}..{end}")]
    InvalidRange { start: NaiveDate, end: NaiveDate },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("duplicate post id `{0}`")]
    DuplicatePost(String),
    #[error("invalid post: {0}")]
    InvalidPost(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    #[serde(rename = "f")]
    Female,
    #[serde(rename = "m")]
    Male,
    #[serde(rename = "u")]
    Unknown,
}

impl Gender {
    pub fn code(self) -> &'static str {
        match self {
            Gender::Female => "f",
            Gender::Male => "m",
            Gender::Unknown => "u",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialPost {
    pub id: String,
    pub timestamp: DateTime<Utc>,
    pub text: String,
    pub author_id: String,
    pub gender: Gender,
    pub geo: Option<GeoPoint>,
    pub platform: String,
}

impl SocialPost {
    /// Calendar date of the post in UTC.
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }
}

/// Wire shape of one JSON Lines record.
#[derive(Debug, Serialize, Deserialize)]
struct PostLine {
    id: String,
    ts: String,
    text: String,
    author: String,
    gender: Gender,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lon: Option<f64>,
    platform: String,
}

/// ISO-8601 timestamp with offset, or a naive one taken as UTC.
pub fn parse_timestamp(ts: &str) -> Result<DateTime<Utc>, String> {
    if let Ok(t) = DateTime::parse_from_rfc3339(ts) {
        return Ok(t.with_timezone(&Utc));
    }
    NaiveDateTime::parse_from_str(ts, "%Y-%m-%dT%H:%M:%S%.f")
        .or_else(|_| NaiveDateTime::parse_from_str(ts, "%Y-%m-%d %H:%M:%S%.f"))
        .map(|n| n.and_utc())
        .map_err(|e| format!("bad ts `{ts}`: {e}"))
}

impl SocialPost {
    pub fn from_json_line(line: &str) -> Result<Self, SocialError> {
        let raw: PostLine = serde_json::from_str(line).map_err(|e| SocialError::InvalidPost(e.to_string()))?;
        let timestamp = parse_timestamp(&raw.ts).map_err(SocialError::InvalidPost)?;
        let geo = match (raw.lat, raw.lon) {
            (Some(lat), Some(lon)) => {
                Some(GeoPoint::new(lat, lon).map_err(|e| SocialError::InvalidPost(e.to_string()))?)
            }
            (None, None) => None,
            _ => return Err(SocialError::InvalidPost("lat and lon must appear together".into())),
        };
        Ok(Self {
            id: raw.id,
            timestamp,
            text: raw.text,
            author_id: raw.author,
            gender: raw.gender,
            geo,
            platform: raw.platform,
        })
    }

    pub fn to_json_line(&self) -> String {
        let raw = PostLine {
            id: self.id.clone(),
            ts: self.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            text: self.text.clone(),
            author: self.author_id.clone(),
            gender: self.gender,
            lat: self.geo.map(|g| g.lat),
            lon: self.geo.map(|g| g.lon),
            platform: self.platform.clone(),
        };
        serde_json::to_string(&raw).expect("post serializes")
    }
}

/// Append-only post collection keyed by id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    posts: Vec<SocialPost>,
    ids: HashSet<String>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, post: SocialPost) -> Result<(), SocialError> {
        if !self.ids.insert(post.id.clone()) {
            return Err(SocialError::DuplicatePost(post.id));
        }
        self.posts.push(post);
        Ok(())
    }

    pub fn posts(&self) -> &[SocialPost] {
        &self.posts
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    /// Parse JSON Lines; blank lines are ignored and not counted.
    pub fn from_jsonl(text: &str) -> Loaded<Self> {
        let mut corpus = Self::new();
        let mut rejected = Vec::new();
        let mut rows = 0;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            rows += 1;
            let res = SocialPost::from_json_line(line).and_then(|p| corpus.insert(p));
            if let Err(e) = res {
                rejected.push(RowRejection {
                    line: i + 1,
                    reason: e.to_string(),
                });
            }
        }
        Loaded {
            data: corpus,
            rows,
            rejected,
        }
    }

    pub fn to_jsonl(&self) -> String {
        self.posts.iter().map(|p| p.to_json_line() + "\n").collect()
    }
}

fn normalize(text: &str) -> String {
    let lowered: String = text.nfc().collect::<String>().to_lowercase();
    lowered.nfc().collect()
}

/// Keyword sets per language code, stored NFC-normalized and lowercased.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Lexicon {
    languages: BTreeMap<String, BTreeSet<String>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_language<S: AsRef<str>>(mut self, lang: &str, words: impl IntoIterator<Item = S>) -> Self {
        self.set_language(lang, words);
        self
    }

    /// Replace the keyword set of `lang`. Empty sets are not stored.
    pub fn set_language<S: AsRef<str>>(&mut self, lang: &str, words: impl IntoIterator<Item = S>) {
        let set: BTreeSet<String> = words
            .into_iter()
            .map(|w| normalize(w.as_ref().trim()))
            .filter(|w| !w.is_empty())
            .collect();
        if set.is_empty() {
            self.languages.remove(lang);
        } else {
            self.languages.insert(lang.to_string(), set);
        }
    }

    pub fn keywords(&self, lang: &str) -> Option<&BTreeSet<String>> {
        self.languages.get(lang)
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.languages.keys().map(String::as_str)
    }

    pub fn default_awareness() -> Self {
        Self::new()
            .with_language("en", ["flood", "weather", "rain", "water", "river"])
            .with_language("es", ["inundación", "clima", "tiempo", "lluvia", "agua", "río"])
            .with_language("fr", ["inondation", "météo", "pluie", "eau", "rivière", "fleuve"])
    }

    pub fn default_damage() -> Self {
        Self::new()
            .with_language("en", ["insurance", "property", "damage"])
            .with_language("es", ["seguro", "propiedad", "daño", "daños"])
            .with_language("fr", ["assurance", "propriété", "dommage", "dommages", "dégâts"])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LexiconKind {
    Awareness,
    Damage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicons {
    pub awareness: Lexicon,
    pub damage: Lexicon,
}

impl Default for Lexicons {
    fn default() -> Self {
        Self {
            awareness: Lexicon::default_awareness(),
            damage: Lexicon::default_damage(),
        }
    }
}

impl Lexicons {
    pub fn get(&self, kind: LexiconKind) -> &Lexicon {
        match kind {
            LexiconKind::Awareness => &self.awareness,
            LexiconKind::Damage => &self.damage,
        }
    }
}

/// Whole-word containment: the keyword must be bounded by non-letters (or
/// the text edges) on both sides. Both arguments must already be normalized.
fn contains_word(text: &str, word: &str) -> bool {
    text.match_indices(word).any(|(i, m)| {
        let before = text[..i].chars().next_back();
        let after = text[i + m.len()..].chars().next();
        !before.is_some_and(char::is_alphabetic) && !after.is_some_and(char::is_alphabetic)
    })
}

pub fn matches_any(text: &str, keywords: &BTreeSet<String>) -> bool {
    let norm = normalize(text);
    keywords.iter().any(|k| contains_word(&norm, k))
}

/// Posts containing at least one keyword of `language` as a whole word,
/// case-insensitively after NFC normalization.
pub fn keyword_filter(posts: &[SocialPost], lexicon: &Lexicon, language: &str) -> Result<Vec<SocialPost>, SocialError> {
    let keywords = lexicon
        .keywords(language)
        .ok_or_else(|| SocialError::UnknownLanguage(language.to_string()))?;
    Ok(posts
        .iter()
        .filter(|p| matches_any(&p.text, keywords))
        .cloned()
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyEntry {
    pub date: NaiveDate,
    pub value: f64,
    #[serde(default)]
    pub missing_denominator: bool,
}

/// Day-indexed signal with strictly increasing dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxySeries {
    pub name: String,
    pub entries: Vec<ProxyEntry>,
}

impl ProxySeries {
    pub fn from_values(name: impl Into<String>, start: NaiveDate, values: &[f64]) -> Self {
        Self {
            name: name.into(),
            entries: values
                .iter()
                .zip(start.iter_days())
                .map(|(&value, date)| ProxyEntry {
                    date,
                    value,
                    missing_denominator: false,
                })
                .collect(),
        }
    }

    pub fn get(&self, date: NaiveDate) -> Option<&ProxyEntry> {
        self.entries
            .binary_search_by_key(&date, |e| e.date)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    /// `date,value,flag` with `flag` either empty or `missing_denominator`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,value,flag\n");
        for e in &self.entries {
            let flag = if e.missing_denominator {
                "missing_denominator"
            } else {
                ""
            };
            writeln!(out, "{},{},{flag}", e.date, e.value).unwrap();
        }
        out
    }
}

/// Per-date post counts over `range`; with a bbox, only geotagged posts
/// inside it count.
pub fn daily_counts(name: &str, posts: &[SocialPost], bbox: Option<&BoundingBox>, range: DateRange) -> ProxySeries {
    let mut counts = vec![0usize; range.num_days()];
    for p in posts {
        let Some(offset) = range.offset(p.date()) else {
            continue;
        };
        let accepted = match (bbox, p.geo) {
            (None, _) => true,
            (Some(b), Some(g)) => b.contains(g),
            (Some(_), None) => false,
        };
        if accepted {
            counts[offset] += 1;
        }
    }
    let values: Vec<f64> = counts.into_iter().map(|c| c as f64).collect();
    ProxySeries::from_values(name, range.start, &values)
}

pub fn date_range(start: NaiveDate, end: NaiveDate) -> Result<DateRange, SocialError> {
    DateRange::new(start, end).map_err(|e| SocialError::InvalidRange {
        start: e.start,
        end: e.end,
    })
}

fn proxy_series(
    name: &str,
    posts: &[SocialPost],
    lexicon: &Lexicon,
    lang: &str,
    bbox: Option<&BoundingBox>,
    range: DateRange,
) -> Result<ProxySeries, SocialError> {
    let matching = keyword_filter(posts, lexicon, lang)?;
    Ok(daily_counts(name, &matching, bbox, range))
}

pub fn awareness_series(
    posts: &[SocialPost],
    lexicons: &Lexicons,
    lang: &str,
    bbox: Option<&BoundingBox>,
    range: DateRange,
) -> Result<ProxySeries, SocialError> {
    proxy_series("awareness", posts, &lexicons.awareness, lang, bbox, range)
}

pub fn damage_series(
    posts: &[SocialPost],
    lexicons: &Lexicons,
    lang: &str,
    bbox: Option<&BoundingBox>,
    range: DateRange,
) -> Result<ProxySeries, SocialError> {
    proxy_series("damage", posts, &lexicons.damage, lang, bbox, range)
}

/// Census-normalized awareness over the dates of `flood`. Dates with a zero
/// or missing total or census are emitted as 0 and flagged.
pub fn normalize_awareness(
    flood: &ProxySeries,
    total: &ProxySeries,
    social_users: f64,
    census: &DaySeries,
) -> Result<ProxySeries, SocialError> {
    if !(social_users.is_finite() && social_users > 0.0) {
        return Err(SocialError::InvalidParameter(format!(
            "social_users must be positive, got {social_users}"
        )));
    }
    let entries = flood
        .entries
        .iter()
        .map(|f| {
            let total_t = total.get(f.date).map(|e| e.value).filter(|v| *v > 0.0);
            let census_t = census.get(f.date).filter(|v| *v > 0.0);
            match (total_t, census_t) {
                (Some(t), Some(c)) => ProxyEntry {
                    date: f.date,
                    value: (f.value / t) * (social_users / c),
                    missing_denominator: false,
                },
                _ => ProxyEntry {
                    date: f.date,
                    value: 0.0,
                    missing_denominator: true,
                },
            }
        })
        .collect();
    Ok(ProxySeries {
        name: "normalized_awareness".into(),
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialProxy {
    pub bbox: BoundingBox,
    pub hull: Option<RingPolygon>,
}

/// Extent of geotagged posts; `None` when no post is geotagged.
pub fn spatial_proxy(posts: &[SocialPost]) -> Option<SpatialProxy> {
    let points: Vec<GeoPoint> = posts.iter().filter_map(|p| p.geo).collect();
    let bbox = BoundingBox::from_points(&points)?;
    Some(SpatialProxy {
        bbox,
        hull: convex_hull(&points).ok(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GenderHistogram {
    pub female: usize,
    pub male: usize,
    pub unknown: usize,
}

impl GenderHistogram {
    pub fn add(&mut self, g: Gender) {
        match g {
            Gender::Female => self.female += 1,
            Gender::Male => self.male += 1,
            Gender::Unknown => self.unknown += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.female + self.male + self.unknown
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SocialProxy {
    pub distinct_users: usize,
    pub genders: GenderHistogram,
}

/// Distinct authors and their genders (taken from each author's first post).
pub fn social_proxy(posts: &[SocialPost]) -> SocialProxy {
    let mut seen = HashSet::new();
    let mut genders = GenderHistogram::default();
    for p in posts {
        if seen.insert(p.author_id.as_str()) {
            genders.add(p.gender);
        }
    }
    SocialProxy {
        distinct_users: seen.len(),
        genders,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalEvidence {
    pub event_date: NaiveDate,
    #[serde(with = "crate::num")]
    pub z_peak: f64,
}

/// Temporal, spatial and social proxies attached to escalation requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceBundle {
    pub temporal: TemporalEvidence,
    pub spatial: Option<SpatialProxy>,
    pub social: SocialProxy,
}

impl EvidenceBundle {
    pub fn from_posts(event_date: NaiveDate, z_peak: f64, matching: &[SocialPost]) -> Self {
        Self {
            temporal: TemporalEvidence { event_date, z_peak },
            spatial: spatial_proxy(matching),
            social: social_proxy(matching),
        }
    }

    /// All three proxies are present.
    pub fn is_complete(&self) -> bool {
        self.spatial.is_some() && self.social.distinct_users > 0
    }
}
