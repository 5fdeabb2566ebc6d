//! Station rainfall store with closest-station lookup and yearly profiles.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoPoint;
use crate::ingest::{csv_records, field, Loaded, RowRejection};
use crate::DateRange;

pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RainfallError {
    #[error("no stations available")]
    NoStations,
    #[error("invalid date range {start}..{end}")]
    InvalidRange { start: NaiveDate, end: NaiveDate },
    #[error("duplicate station id `{0}`")]
    DuplicateStation(String),
    #[error("invalid rainfall row: {0}")]
    InvalidRow(String),
    #[error("rainfall CSV: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: String,
    pub location: GeoPoint,
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RainDay {
    pub date: NaiveDate,
    pub mm: f64,
}

/// Daily rainfall at one station; gaps are simply absent dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RainfallSeries {
    pub station_id: String,
    pub entries: Vec<RainDay>,
}

impl RainfallSeries {
    pub fn empty(station_id: impl Into<String>) -> Self {
        Self {
            station_id: station_id.into(),
            entries: Vec::new(),
        }
    }

    pub fn slice(&self, range: DateRange) -> Self {
        Self {
            station_id: self.station_id.clone(),
            entries: self
                .entries
                .iter()
                .filter(|e| range.contains(e.date))
                .copied()
                .collect(),
        }
    }
}

pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (la1, la2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = la2 - la1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Closest station by great-circle distance; ties go to the smallest id.
pub fn nearest_station(stations: &[Station], point: GeoPoint) -> Result<&Station, RainfallError> {
    stations
        .iter()
        .min_by(|a, b| {
            haversine_km(a.location, point)
                .total_cmp(&haversine_km(b.location, point))
                .then_with(|| a.id.cmp(&b.id))
        })
        .ok_or(RainfallError::NoStations)
}

/// Stations plus their series. Read-only once loaded.
#[derive(Debug, Clone, Default)]
pub struct RainfallStore {
    stations: Vec<Station>,
    series: BTreeMap<String, RainfallSeries>,
}

impl RainfallStore {
    pub fn new(stations: Vec<Station>, series: Vec<RainfallSeries>) -> Result<Self, RainfallError> {
        let mut seen = std::collections::HashSet::new();
        for s in &stations {
            if !seen.insert(s.id.as_str()) {
                return Err(RainfallError::DuplicateStation(s.id.clone()));
            }
        }
        let series = series.into_iter().map(|s| (s.station_id.clone(), s)).collect();
        Ok(Self { stations, series })
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn series(&self, station_id: &str) -> Option<&RainfallSeries> {
        self.series.get(station_id)
    }

    /// Nearest station's series restricted to `[start, end]`, gaps preserved.
    pub fn query(&self, start: NaiveDate, end: NaiveDate, point: GeoPoint) -> Result<RainfallSeries, RainfallError> {
        let range = DateRange::new(start, end).map_err(|e| RainfallError::InvalidRange {
            start: e.start,
            end: e.end,
        })?;
        let station = nearest_station(&self.stations, point)?;
        Ok(self
            .series
            .get(&station.id)
            .map(|s| s.slice(range))
            .unwrap_or_else(|| RainfallSeries::empty(&station.id)))
    }

    /// `id,lat,lon,name` stations and `station_id,date,mm` observations.
    pub fn from_csv(stations_csv: &str, rainfall_csv: &str) -> Result<(Loaded<Self>, Loaded<()>), RainfallError> {
        let rows = csv_records(stations_csv, &["id", "lat", "lon", "name"]).map_err(RainfallError::Csv)?;
        let n_stations = rows.len();
        let mut stations = Vec::new();
        let mut station_rejects = Vec::new();
        let mut ids = std::collections::HashSet::new();
        for (line, rec) in rows {
            let parsed = rec.and_then(|r| {
                let lat = field::<f64>(&r, 1, "lat")?;
                let lon = field::<f64>(&r, 2, "lon")?;
                let location = GeoPoint::new(lat, lon).map_err(|e| e.to_string())?;
                if !ids.insert(r[0].to_string()) {
                    return Err(format!("duplicate station id `{}`", &r[0]));
                }
                let name = (!r[3].is_empty()).then(|| r[3].to_string());
                Ok(Station {
                    id: r[0].to_string(),
                    location,
                    name,
                })
            });
            match parsed {
                Ok(s) => stations.push(s),
                Err(reason) => station_rejects.push(RowRejection { line, reason }),
            }
        }

        let rows = csv_records(rainfall_csv, &["station_id", "date", "mm"]).map_err(RainfallError::Csv)?;
        let n_rain = rows.len();
        let mut by_station: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
        let mut rain_rejects = Vec::new();
        for (line, rec) in rows {
            let parsed = rec.and_then(|r| {
                let date = field::<NaiveDate>(&r, 1, "date")?;
                let mm = field::<f64>(&r, 2, "mm")?;
                if !(mm.is_finite() && mm >= 0.0) {
                    return Err(format!("rainfall {mm} mm"));
                }
                let entry = by_station.entry(r[0].to_string()).or_default();
                if entry.contains_key(&date) {
                    return Err(format!("duplicate date {date} for station `{}`", &r[0]));
                }
                entry.insert(date, mm);
                Ok(())
            });
            if let Err(reason) = parsed {
                rain_rejects.push(RowRejection { line, reason });
            }
        }
        let series = by_station
            .into_iter()
            .map(|(station_id, days)| RainfallSeries {
                station_id,
                entries: days.into_iter().map(|(date, mm)| RainDay { date, mm }).collect(),
            })
            .collect();
        let store = Self::new(stations, series)?;
        Ok((
            Loaded {
                data: store,
                rows: n_stations,
                rejected: station_rejects,
            },
            Loaded {
                data: (),
                rows: n_rain,
                rejected: rain_rejects,
            },
        ))
    }
}

pub fn stations_to_csv(stations: &[Station]) -> String {
    let mut out = String::from("id,lat,lon,name\n");
    for s in stations {
        writeln!(
            out,
            "{},{},{},{}",
            s.id,
            s.location.lat,
            s.location.lon,
            s.name.as_deref().unwrap_or("")
        )
        .unwrap();
    }
    out
}

pub fn rainfall_to_csv(series: &[RainfallSeries]) -> String {
    let mut out = String::from("station_id,date,mm\n");
    for s in series {
        for e in &s.entries {
            writeln!(out, "{},{},{}", s.station_id, e.date, e.mm).unwrap();
        }
    }
    out
}

pub const PROFILE_DAYS: usize = 365;

/// Rows per requested year, 365 day-of-year columns (Feb 29 dropped).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoricProfile {
    pub years: Vec<i32>,
    pub rows: Vec<Vec<Option<f64>>>,
}

/// 1-based day of year on a 365-day calendar, `None` for Feb 29.
pub fn profile_day(date: NaiveDate) -> Option<usize> {
    let leap = NaiveDate::from_ymd_opt(date.year(), 2, 29).is_some();
    let ordinal = date.ordinal() as usize;
    if !leap || ordinal < 60 {
        Some(ordinal)
    } else if ordinal == 60 {
        None
    } else {
        Some(ordinal - 1)
    }
}

pub fn historic_profile(series: &RainfallSeries, years: &[i32]) -> HistoricProfile {
    let mut rows = vec![vec![None; PROFILE_DAYS]; years.len()];
    for e in &series.entries {
        let Some(row) = years.iter().position(|y| *y == e.date.year()) else {
            continue;
        };
        if let Some(doy) = profile_day(e.date) {
            rows[row][doy - 1] = Some(e.mm);
        }
    }
    HistoricProfile {
        years: years.to_vec(),
        rows,
    }
}

impl HistoricProfile {
    /// `year,day_of_year,mm`; gaps are written with an empty `mm`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("year,day_of_year,mm\n");
        for (year, row) in self.years.iter().zip(&self.rows) {
            for (i, v) in row.iter().enumerate() {
                let mm = v.map(|v| v.to_string()).unwrap_or_default();
                writeln!(out, "{year},{},{mm}", i + 1).unwrap();
            }
        }
        out
    }
}
