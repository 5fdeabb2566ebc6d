//! Multi-resolution aggregation of anonymized antenna presence counts.
//!
//! Records are hourly person counts per antenna. Daily values are either an
//! evening-interval sum or a mean over observed hours, weekly values average
//! the daily ones per ISO week, and the hourly event window drops night
//! hours. Missing observations stay missing; nothing is imputed as zero.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{geojson, GeoPoint, Region};
use crate::ingest::{csv_records, field, Loaded, RowRejection};
use crate::DateRange;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PresenceError {
    #[error("duplicate presence record for antenna `{antenna_id}` at {date} hour {hour}")]
    Duplicate {
        antenna_id: String,
        date: NaiveDate,
        hour: u8,
    },
    #[error("invalid presence record: {0}")]
    InvalidRecord(String),
    #[error("invalid hour interval [{start}, {end})")]
    InvalidInterval { start: u8, end: u8 },
    #[error("z-score of an empty series")]
    EmptySeries,
    #[error("no antenna with data inside the region on {0}")]
    NoAntennaCoverage(NaiveDate),
    #[error("presence CSV: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresenceRecord {
    pub antenna_id: String,
    pub location: GeoPoint,
    pub date: NaiveDate,
    pub hour: u8,
    pub count: f64,
}

impl PresenceRecord {
    pub fn new(
        antenna_id: impl Into<String>,
        location: GeoPoint,
        date: NaiveDate,
        hour: u8,
        count: f64,
    ) -> Result<Self, PresenceError> {
        if hour > 23 {
            return Err(PresenceError::InvalidRecord(format!("hour {hour} outside 0..=23")));
        }
        if !(count.is_finite() && count >= 0.0) {
            return Err(PresenceError::InvalidRecord(format!("count {count}")));
        }
        Ok(Self {
            antenna_id: antenna_id.into(),
            location,
            date,
            hour,
            count,
        })
    }
}

/// Append-only record store keyed by (antenna, date, hour). A second record
/// for an existing key is rejected and the first one kept.
#[derive(Debug, Clone, Default)]
pub struct PresenceStore {
    records: BTreeMap<(String, NaiveDate, u8), PresenceRecord>,
}

impl PresenceStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, rec: PresenceRecord) -> Result<(), PresenceError> {
        let key = (rec.antenna_id.clone(), rec.date, rec.hour);
        if self.records.contains_key(&key) {
            return Err(PresenceError::Duplicate {
                antenna_id: rec.antenna_id,
                date: rec.date,
                hour: rec.hour,
            });
        }
        self.records.insert(key, rec);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records ordered by (antenna, date, hour).
    pub fn records(&self) -> Vec<PresenceRecord> {
        self.records.values().cloned().collect()
    }

    /// Load `antenna_id,lat,lon,date,hour,count`.
    pub fn from_csv(text: &str) -> Result<Loaded<Self>, PresenceError> {
        let rows =
            csv_records(text, &["antenna_id", "lat", "lon", "date", "hour", "count"]).map_err(PresenceError::Csv)?;
        let mut store = Self::new();
        let mut rejected = Vec::new();
        let n = rows.len();
        for (line, rec) in rows {
            let parsed = rec.and_then(|r| {
                let lat = field::<f64>(&r, 1, "lat")?;
                let lon = field::<f64>(&r, 2, "lon")?;
                let location = GeoPoint::new(lat, lon).map_err(|e| e.to_string())?;
                let date = field::<NaiveDate>(&r, 3, "date")?;
                let hour = field::<u8>(&r, 4, "hour")?;
                let count = field::<f64>(&r, 5, "count")?;
                PresenceRecord::new(&r[0], location, date, hour, count).map_err(|e| e.to_string())
            });
            match parsed.and_then(|p| store.insert(p).map_err(|e| e.to_string())) {
                Ok(()) => {}
                Err(reason) => rejected.push(RowRejection { line, reason }),
            }
        }
        Ok(Loaded {
            data: store,
            rows: n,
            rejected,
        })
    }
}

pub fn records_to_csv(records: &[PresenceRecord]) -> String {
    let mut out = String::from("antenna_id,lat,lon,date,hour,count\n");
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.antenna_id, r.location.lat, r.location.lon, r.date, r.hour, r.count
        )
        .unwrap();
    }
    out
}

/// First observed location per antenna.
pub fn antenna_locations(records: &[PresenceRecord]) -> BTreeMap<String, GeoPoint> {
    let mut out = BTreeMap::new();
    for r in records {
        out.entry(r.antenna_id.clone()).or_insert(r.location);
    }
    out
}

/// Half-open hour-of-day interval `[start, end)`, `0 <= start < end <= 24`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourInterval {
    pub start: u8,
    pub end: u8,
}

impl HourInterval {
    /// Evening cumulation window, hour buckets 20..=23.
    pub const EVENING: HourInterval = HourInterval { start: 20, end: 24 };
    /// Night hours dropped from hourly windows (buckets 1..=7).
    pub const NIGHT: HourInterval = HourInterval { start: 1, end: 8 };
    pub const FULL_DAY: HourInterval = HourInterval { start: 0, end: 24 };

    pub fn new(start: u8, end: u8) -> Result<Self, PresenceError> {
        if start >= end || end > 24 {
            return Err(PresenceError::InvalidInterval { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, hour: u8) -> bool {
        hour >= self.start && hour < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayValue {
    pub date: NaiveDate,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySeries {
    pub antenna_id: String,
    pub entries: Vec<DayValue>,
}

impl DaySeries {
    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.entries
            .binary_search_by_key(&date, |e| e.date)
            .ok()
            .map(|i| self.entries[i].value)
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }
}

fn group_by_day(records: &[PresenceRecord]) -> BTreeMap<&str, BTreeMap<NaiveDate, Vec<&PresenceRecord>>> {
    let mut out: BTreeMap<&str, BTreeMap<NaiveDate, Vec<&PresenceRecord>>> = BTreeMap::new();
    for r in records {
        out.entry(r.antenna_id.as_str())
            .or_default()
            .entry(r.date)
            .or_default()
            .push(r);
    }
    out
}

fn to_series(
    grouped: BTreeMap<&str, BTreeMap<NaiveDate, Vec<&PresenceRecord>>>,
    reduce: impl Fn(&[&PresenceRecord]) -> Option<f64>,
) -> Vec<DaySeries> {
    grouped
        .into_iter()
        .filter_map(|(antenna, days)| {
            let entries: Vec<DayValue> = days
                .into_iter()
                .filter_map(|(date, recs)| reduce(&recs).map(|value| DayValue { date, value }))
                .collect();
            (!entries.is_empty()).then(|| DaySeries {
                antenna_id: antenna.to_string(),
                entries,
            })
        })
        .collect()
}

/// Per antenna and date, the sum of counts whose hour lies in `interval`.
/// Dates without an in-interval record are absent.
pub fn aggregate_daily_interval(records: &[PresenceRecord], interval: HourInterval) -> Vec<DaySeries> {
    to_series(group_by_day(records), |recs| {
        let inside: Vec<f64> = recs
            .iter()
            .filter(|r| interval.contains(r.hour))
            .map(|r| r.count)
            .collect();
        (!inside.is_empty()).then(|| inside.iter().sum())
    })
}

/// Per antenna and date, the mean over observed hours.
pub fn aggregate_daily_mean(records: &[PresenceRecord]) -> Vec<DaySeries> {
    to_series(group_by_day(records), |recs| {
        Some(recs.iter().map(|r| r.count).sum::<f64>() / recs.len() as f64)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeekValue {
    pub iso_year: i32,
    pub week: u32,
    pub value: f64,
    pub observed_days: u32,
    /// Fewer than seven observed days.
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekSeries {
    pub antenna_id: String,
    pub entries: Vec<WeekValue>,
}

/// Mean of daily values per ISO-8601 week.
pub fn aggregate_weekly(daily: &DaySeries) -> WeekSeries {
    let mut weeks: BTreeMap<(i32, u32), Vec<f64>> = BTreeMap::new();
    for e in &daily.entries {
        let w = e.date.iso_week();
        weeks.entry((w.year(), w.week())).or_default().push(e.value);
    }
    let entries = weeks
        .into_iter()
        .map(|((iso_year, week), vals)| {
            let observed_days = vals.len() as u32;
            WeekValue {
                iso_year,
                week,
                value: vals.iter().sum::<f64>() / vals.len() as f64,
                observed_days,
                partial: observed_days < 7,
            }
        })
        .collect();
    WeekSeries {
        antenna_id: daily.antenna_id.clone(),
        entries,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourSlot {
    pub date: NaiveDate,
    pub hour: u8,
    /// `None` when no record exists for the slot.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlySeries {
    pub antenna_id: String,
    pub slots: Vec<HourSlot>,
}

/// Hourly slots for `event_day ± span` days without the `night` hours, for
/// every antenna with at least one record in the window.
pub fn hourly_event_window(
    records: &[PresenceRecord],
    event_day: NaiveDate,
    span: u32,
    night: HourInterval,
) -> Vec<HourlySeries> {
    let window = DateRange::around(event_day, u64::from(span));
    let mut by_antenna: BTreeMap<&str, BTreeMap<(NaiveDate, u8), f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| window.contains(r.date)) {
        by_antenna
            .entry(r.antenna_id.as_str())
            .or_default()
            .insert((r.date, r.hour), r.count);
    }
    by_antenna
        .into_iter()
        .map(|(antenna, counts)| {
            let slots = window
                .days()
                .flat_map(|date| (0u8..24).map(move |hour| (date, hour)))
                .filter(|(_, hour)| !night.contains(*hour))
                .map(|(date, hour)| HourSlot {
                    date,
                    hour,
                    value: counts.get(&(date, hour)).copied(),
                })
                .collect();
            HourlySeries {
                antenna_id: antenna.to_string(),
                slots,
            }
        })
        .collect()
}

/// Standard scores with the population standard deviation; a constant
/// series maps to all zeros.
pub fn zscore(series: &[f64]) -> Result<Vec<f64>, PresenceError> {
    if series.is_empty() {
        return Err(PresenceError::EmptySeries);
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd == 0.0 || !sd.is_finite() {
        return Ok(vec![0.0; series.len()]);
    }
    Ok(series.iter().map(|x| (x - mean) / sd).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZValue {
    /// Time-bin label (ISO date, or date plus hour).
    pub t: String,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaZ {
    pub antenna_id: String,
    pub location: GeoPoint,
    pub values: Vec<ZValue>,
}

/// Per-antenna z-score series for map rendering.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ZMap {
    pub antennas: Vec<AntennaZ>,
}

impl ZMap {
    pub fn from_daily(series: &[DaySeries], locations: &BTreeMap<String, GeoPoint>) -> Self {
        let antennas = series
            .iter()
            .filter_map(|s| {
                let location = *locations.get(&s.antenna_id)?;
                let z = zscore(&s.values()).ok()?;
                let values = s
                    .entries
                    .iter()
                    .zip(z)
                    .map(|(e, z)| ZValue {
                        t: e.date.to_string(),
                        z,
                    })
                    .collect();
                Some(AntennaZ {
                    antenna_id: s.antenna_id.clone(),
                    location,
                    values,
                })
            })
            .collect();
        Self { antennas }
    }

    /// Z-scores over the observed slots of each hourly series.
    pub fn from_hourly(series: &[HourlySeries], locations: &BTreeMap<String, GeoPoint>) -> Self {
        let antennas = series
            .iter()
            .filter_map(|s| {
                let location = *locations.get(&s.antenna_id)?;
                let observed: Vec<&HourSlot> = s.slots.iter().filter(|h| h.value.is_some()).collect();
                let vals: Vec<f64> = observed.iter().filter_map(|h| h.value).collect();
                let z = zscore(&vals).ok()?;
                let values = observed
                    .iter()
                    .zip(z)
                    .map(|(h, z)| ZValue {
                        t: format!("{}T{:02}", h.date, h.hour),
                        z,
                    })
                    .collect();
                Some(AntennaZ {
                    antenna_id: s.antenna_id.clone(),
                    location,
                    values,
                })
            })
            .collect();
        Self { antennas }
    }

    /// One point feature per (antenna, time bin) with `{antenna_id, t, z}`.
    pub fn to_geojson(&self) -> serde_json::Value {
        let mut features = Vec::new();
        for a in &self.antennas {
            for v in &a.values {
                let mut props = serde_json::Map::new();
                props.insert("antenna_id".into(), a.antenna_id.clone().into());
                props.insert("t".into(), v.t.clone().into());
                props.insert("z".into(), v.z.into());
                features.push(geojson::feature(geojson::point_geometry(a.location), props));
            }
        }
        geojson::feature_collection(features)
    }
}

/// Mean evening-interval presence over antennas inside `region` on `date`.
pub fn dynamic_census(
    records: &[PresenceRecord],
    region: &Region,
    date: NaiveDate,
    interval: HourInterval,
) -> Result<f64, PresenceError> {
    let inside: Vec<PresenceRecord> = records
        .iter()
        .filter(|r| r.date == date && region.contains(r.location))
        .cloned()
        .collect();
    let daily = aggregate_daily_interval(&inside, interval);
    let values: Vec<f64> = daily.iter().filter_map(|s| s.get(date)).collect();
    if values.is_empty() {
        return Err(PresenceError::NoAntennaCoverage(date));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Dynamic census per date over `range`; dates without coverage are absent.
pub fn census_series(
    records: &[PresenceRecord],
    region: &Region,
    range: DateRange,
    interval: HourInterval,
) -> DaySeries {
    let inside: Vec<PresenceRecord> = records
        .iter()
        .filter(|r| range.contains(r.date) && region.contains(r.location))
        .cloned()
        .collect();
    let daily = aggregate_daily_interval(&inside, interval);
    let mut per_day: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for s in &daily {
        for e in &s.entries {
            per_day.entry(e.date).or_default().push(e.value);
        }
    }
    DaySeries {
        antenna_id: "census".into(),
        entries: per_day
            .into_iter()
            .map(|(date, v)| DayValue {
                date,
                value: v.iter().sum::<f64>() / v.len() as f64,
            })
            .collect(),
    }
}

pub fn daily_to_csv(series: &[DaySeries], locations: &BTreeMap<String, GeoPoint>) -> String {
    let mut out = String::from("antenna_id,lat,lon,date,value\n");
    for s in series {
        let loc = locations.get(&s.antenna_id);
        let (lat, lon) = loc.map_or((String::new(), String::new()), |p| {
            (p.lat.to_string(), p.lon.to_string())
        });
        for e in &s.entries {
            writeln!(out, "{},{lat},{lon},{},{}", s.antenna_id, e.date, e.value).unwrap();
        }
    }
    out
}

pub fn weekly_to_csv(series: &[WeekSeries]) -> String {
    let mut out = String::from("antenna_id,iso_year,week,value,observed_days,partial\n");
    for s in series {
        for w in &s.entries {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                s.antenna_id, w.iso_year, w.week, w.value, w.observed_days, w.partial
            )
            .unwrap();
        }
    }
    out
}

pub fn hourly_to_csv(series: &[HourlySeries]) -> String {
    let mut out = String::from("antenna_id,date,hour,count\n");
    for s in series {
        for h in &s.slots {
            let v = h.value.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{v}", s.antenna_id, h.date, h.hour).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::BoundingBox;
    use chrono::Days;
    use proptest::prelude::*;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2014, 9, d).unwrap()
    }

    fn loc() -> GeoPoint {
        GeoPoint::new(43.6, 3.88).unwrap()
    }

    fn rec(antenna: &str, date: NaiveDate, hour: u8, count: f64) -> PresenceRecord {
        PresenceRecord::new(antenna, loc(), date, hour, count).unwrap()
    }

    #[test]
    fn evening_interval_sums() {
        let recs: Vec<_> = (0..24).map(|h| rec("a", day(1), h, 5.0)).collect();
        let s = aggregate_daily_interval(&recs, HourInterval::EVENING);
        assert_eq!(
            s[0].entries,
            vec![DayValue {
                date: day(1),
                value: 20.0
            }]
        );

        let recs = vec![
            rec("a", day(1), 20, 3.0),
            rec("a", day(1), 21, 7.0),
            rec("a", day(1), 19, 100.0),
        ];
        assert_eq!(
            aggregate_daily_interval(&recs, HourInterval::EVENING)[0].entries[0].value,
            10.0
        );

        let only_19 = vec![rec("a", day(1), 19, 100.0)];
        assert!(aggregate_daily_interval(&only_19, HourInterval::EVENING).is_empty());
        assert!(aggregate_daily_interval(&[], HourInterval::EVENING).is_empty());
    }

    #[test]
    fn daily_mean() {
        let recs: Vec<_> = (0..24).map(|h| rec("a", day(1), h, 5.0)).collect();
        assert_eq!(aggregate_daily_mean(&recs)[0].entries[0].value, 5.0);
        let recs: Vec<_> = (0..24).map(|h| rec("a", day(1), h, f64::from(h))).collect();
        assert_eq!(aggregate_daily_mean(&recs)[0].entries[0].value, 11.5);
        let recs = vec![rec("a", day(1), 3, 7.0)];
        assert_eq!(aggregate_daily_mean(&recs)[0].entries[0].value, 7.0);
    }

    fn series(vals: &[(u32, f64)]) -> DaySeries {
        DaySeries {
            antenna_id: "a".into(),
            entries: vals
                .iter()
                .map(|&(d, value)| DayValue { date: day(d), value })
                .collect(),
        }
    }

    #[test]
    fn weekly_means() {
        // 2014-09-01 is a Monday
        let full = aggregate_weekly(&series(&(1..=7).map(|d| (d, 3.0)).collect::<Vec<_>>()));
        assert_eq!(full.entries.len(), 1);
        assert_eq!(full.entries[0].value, 3.0);
        assert!(!full.entries[0].partial);

        let ramp = aggregate_weekly(&series(&(1..=7).map(|d| (d, f64::from(d))).collect::<Vec<_>>()));
        assert_eq!(ramp.entries[0].value, 4.0);

        let sparse = aggregate_weekly(&series(&[(2, 2.0), (4, 4.0), (6, 6.0)]));
        assert_eq!(sparse.entries[0].value, 4.0);
        assert!(sparse.entries[0].partial);
        assert_eq!(sparse.entries[0].observed_days, 3);
        assert_eq!((sparse.entries[0].iso_year, sparse.entries[0].week), (2014, 36));
    }

    #[test]
    fn hourly_window_drops_night() {
        let recs: Vec<_> = (1..=14)
            .flat_map(|d| (0..24).map(move |h| (d, h)))
            .map(|(d, h)| rec("a", day(d), h, 1.0))
            .collect();
        let w = hourly_event_window(&recs, day(7), 3, HourInterval::NIGHT);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].slots.len(), 119);
        assert!(w[0]
            .slots
            .iter()
            .all(|s| !(1..=7).contains(&s.hour) && s.value.is_some()));

        let edge = vec![
            rec("a", day(7), 0, 1.0),
            rec("a", day(7), 8, 2.0),
            rec("a", day(7), 1, 9.0),
        ];
        let w = hourly_event_window(&edge, day(7), 0, HourInterval::NIGHT);
        let present: Vec<u8> = w[0]
            .slots
            .iter()
            .filter(|s| s.value.is_some())
            .map(|s| s.hour)
            .collect();
        assert_eq!(present, vec![0, 8]);
        assert_eq!(w[0].slots.len(), 17);
    }

    #[test]
    fn zscore_examples() {
        assert_eq!(zscore(&[2.0, 2.0, 2.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(zscore(&[7.0]).unwrap(), vec![0.0]);
        assert_eq!(zscore(&[]).unwrap_err(), PresenceError::EmptySeries);
        let z = zscore(&[1.0, 2.0, 3.0]).unwrap();
        let expect = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((z[0] + 1.2247).abs() < 1e-3 && z[1].abs() < 1e-12 && (z[2] - 1.2247).abs() < 1e-3);
        assert!((z[2] - expect).abs() < 1e-12);
    }

    #[test]
    fn census_over_region() {
        let other = GeoPoint::new(10.0, 10.0).unwrap();
        let recs = vec![
            rec("a", day(1), 20, 100.0),
            rec("b", day(1), 21, 200.0),
            PresenceRecord::new("c", other, day(1), 20, 1e6).unwrap(),
        ];
        let region = Region::BoundingBox(BoundingBox::new(43.0, 3.0, 44.0, 4.0).unwrap());
        assert_eq!(
            dynamic_census(&recs, &region, day(1), HourInterval::EVENING).unwrap(),
            150.0
        );
        assert_eq!(
            dynamic_census(&recs[..1], &region, day(1), HourInterval::EVENING).unwrap(),
            100.0
        );
        let empty = Region::BoundingBox(BoundingBox::new(-1.0, -1.0, 0.0, 0.0).unwrap());
        assert_eq!(
            dynamic_census(&recs, &empty, day(1), HourInterval::EVENING).unwrap_err(),
            PresenceError::NoAntennaCoverage(day(1))
        );
        let range = DateRange::new(day(1), day(3)).unwrap();
        let cs = census_series(&recs, &region, range, HourInterval::EVENING);
        assert_eq!(
            cs.entries,
            vec![DayValue {
                date: day(1),
                value: 150.0
            }]
        );
    }

    #[test]
    fn store_rejects_duplicates() {
        let mut store = PresenceStore::new();
        store.insert(rec("a", day(1), 3, 1.0)).unwrap();
        assert!(matches!(
            store.insert(rec("a", day(1), 3, 9.0)),
            Err(PresenceError::Duplicate { .. })
        ));
        assert_eq!(store.records()[0].count, 1.0);
    }

    #[test]
    fn csv_load_keeps_first_duplicate() {
        let text = "antenna_id,lat,lon,date,hour,count\n\
                    a,43.6,3.88,2014-09-01,20,5\n\
                    a,43.6,3.88,2014-09-01,20,9\n\
                    b,43.6,3.88,2014-09-01,24,1\n\
                    c,43.6,3.88,2014-09-01,2,x\n";
        let loaded = PresenceStore::from_csv(text).unwrap();
        assert_eq!(loaded.rows, 4);
        assert_eq!(loaded.accepted(), 1);
        assert_eq!(
            loaded.rejected.iter().map(|r| r.line).collect::<Vec<_>>(),
            vec![3, 4, 5]
        );
        assert!(loaded.rejected[0].reason.contains("duplicate"));
        assert_eq!(loaded.data.records()[0].count, 5.0);
        let back = PresenceStore::from_csv(&records_to_csv(&loaded.data.records())).unwrap();
        assert_eq!(back.data.records(), loaded.data.records());
    }

    #[test]
    fn bad_header_is_an_error() {
        assert!(matches!(
            PresenceStore::from_csv("a,b\n1,2\n"),
            Err(PresenceError::Csv(_))
        ));
    }

    #[test]
    fn zmap_geojson_points() {
        let recs: Vec<_> = (1..=3).map(|d| rec("a", day(d), 20, f64::from(d))).collect();
        let daily = aggregate_daily_interval(&recs, HourInterval::EVENING);
        let zmap = ZMap::from_daily(&daily, &antenna_locations(&recs));
        let fc = zmap.to_geojson();
        assert_eq!(geojson::check_feature_collection(&fc).unwrap(), 3);
        assert_eq!(fc["features"][0]["properties"]["t"], "2014-09-01");
    }

    fn arb_series() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3f64..1e3, 2..200)
    }

    proptest! {
        #[test]
        fn zscore_is_standardized(xs in arb_series()) {
            let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - xs.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assume!(spread > 1e-6);
            let z = zscore(&xs).unwrap();
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((sd - 1.0).abs() < 1e-9);
        }

        #[test]
        fn zscore_affine_invariant(xs in arb_series(), a in 0.01f64..100.0, b in -1e3f64..1e3) {
            let z = zscore(&xs).unwrap();
            let moved: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            let zm = zscore(&moved).unwrap();
            for (p, q) in z.iter().zip(&zm) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }

        #[test]
        fn full_day_interval_is_24_means(counts in prop::collection::vec(0.0f64..500.0, 24)) {
            let recs: Vec<_> = counts.iter().enumerate().map(|(h, c)| rec("a", day(2), h as u8, *c)).collect();
            let full = aggregate_daily_interval(&recs, HourInterval::FULL_DAY)[0].entries[0].value;
            let mean = aggregate_daily_mean(&recs)[0].entries[0].value;
            prop_assert!((full - 24.0 * mean).abs() <= 1e-9 * full.max(1.0));
        }

        #[test]
        fn census_permutation_invariant(vals in prop::collection::vec(0.0f64..1e4, 1..20), seed in any::<u64>()) {
            let recs: Vec<_> = vals.iter().enumerate().map(|(i, v)| rec(&format!("ant{i}"), day(1), 21, *v)).collect();
            let mut shuffled = recs.clone();
            let n = shuffled.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            let region = Region::BoundingBox(BoundingBox::new(43.0, 3.0, 44.0, 4.0).unwrap());
            let a = dynamic_census(&recs, &region, day(1), HourInterval::EVENING).unwrap();
            let b = dynamic_census(&shuffled, &region, day(1), HourInterval::EVENING).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn weekly_constant_never_partial(c in 0.0f64..1e4, weeks in 1u32..4) {
            let start = NaiveDate::from_ymd_opt(2014, 9, 1).unwrap();
            let entries = (0..7 * weeks).map(|i| DayValue { date: start + Days::new(u64::from(i)), value: c }).collect();
            let w = aggregate_weekly(&DaySeries { antenna_id: "a".into(), entries });
            prop_assert_eq!(w.entries.len(), weeks as usize);
            for e in &w.entries {
                prop_assert!((e.value - c).abs() <= 1e-9 * c.max(1.0));
                prop_assert!(!e.partial);
            }
        }
    }
}
