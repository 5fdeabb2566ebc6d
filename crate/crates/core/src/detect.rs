//! Peak detection on proxy series, torrential/overflow classification and
//! the escalation machine that turns detections into data requests.
//!
//! The detector scores each day against a rolling baseline of the previous
//! `window` valid observations:
//!
//! ```text
//! z_t = (x_t - mean(x[t-w..t])) / sd(x[t-w..t])      (population sd)
//! ```
//!
//! and fires when `z_t >= z*`, `x_t` is a local maximum over its calendar
//! neighbours, and the previous event is more than `refractory` days back.
//! A perfectly flat baseline has no spread; any rise above it scores +inf and
//! anything else scores 0, which keeps the score invariant under positive
//! affine rescaling of the series.

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{BoundingBox, RingPolygon};
use crate::rainfall::RainfallSeries;
use crate::social::{EvidenceBundle, ProxySeries};
use crate::DateRange;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no transition from {stage:?} on {input}")]
    InvalidTransition { stage: EscalationStage, input: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeakConfig {
    pub window: usize,
    pub z: f64,
    pub refractory: u32,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self {
            window: 14,
            z: 3.0,
            refractory: 5,
        }
    }
}

impl PeakConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        if self.window < 3 {
            return Err(DetectError::InvalidParameter(format!(
                "baseline window must be >= 3 days, got {}",
                self.window
            )));
        }
        if !(self.z.is_finite() && self.z > 0.0) {
            return Err(DetectError::InvalidParameter(format!(
                "z threshold must be positive, got {}",
                self.z
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub date: NaiveDate,
    #[serde(with = "crate::num")]
    pub z_peak: f64,
    pub proxy_value: f64,
    pub source_series: String,
}

/// Score of `x` against `baseline`.
pub fn baseline_z(x: f64, baseline: &[f64]) -> f64 {
    let n = baseline.len() as f64;
    if baseline.iter().all(|v| *v == baseline[0]) {
        return if x > baseline[0] { f64::INFINITY } else { 0.0 };
    }
    let mean = baseline.iter().sum::<f64>() / n;
    let sd = (baseline.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    (x - mean) / sd
}

pub fn detect_peaks(series: &ProxySeries, cfg: &PeakConfig) -> Result<Vec<DetectionEvent>, DetectError> {
    cfg.validate()?;
    // flagged dates are neither scored nor part of any baseline
    let valid: Vec<(NaiveDate, f64)> = series
        .entries
        .iter()
        .filter(|e| !e.missing_denominator)
        .map(|e| (e.date, e.value))
        .collect();
    let value_on = |d: NaiveDate| valid.binary_search_by_key(&d, |v| v.0).ok().map(|i| valid[i].1);
    let mut events: Vec<DetectionEvent> = Vec::new();
    let baseline: Vec<f64> = valid.iter().map(|v| v.1).collect();
    for i in cfg.window..valid.len() {
        let (date, x) = valid[i];
        if let Some(last) = events.last() {
            if (date - last.date).num_days() <= i64::from(cfg.refractory) {
                continue;
            }
        }
        let z = baseline_z(x, &baseline[i - cfg.window..i]);
        if z < cfg.z {
            continue;
        }
        let prev = date.checked_sub_days(Days::new(1)).and_then(value_on);
        let next = date.checked_add_days(Days::new(1)).and_then(value_on);
        if prev.is_some_and(|p| p > x) || next.is_some_and(|n| n > x) {
            continue;
        }
        events.push(DetectionEvent {
            date,
            z_peak: z,
            proxy_value: x,
            source_series: series.name.clone(),
        });
    }
    Ok(events)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloodKind {
    Torrential,
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloodClass {
    pub kind: FloodKind,
    /// Rain-peak date minus event date, when torrential.
    pub rainfall_lag_days: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub tolerance_days: u32,
    pub rain_z: f64,
    pub window: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            tolerance_days: 2,
            rain_z: 3.0,
            window: 14,
        }
    }
}

/// Torrential when a rainfall peak lies within `±tolerance_days` of the
/// event; overflow otherwise. A rainfall peak is a local maximum scoring
/// `z >= rain_z` against the same kind of baseline the detector uses. Among
/// several candidates the highest score wins, then the smallest lag.
pub fn classify_flood(event: &DetectionEvent, rain: &RainfallSeries, cfg: &ClassifyConfig) -> FloodClass {
    let overflow = FloodClass {
        kind: FloodKind::Overflow,
        rainfall_lag_days: None,
    };
    let values: Vec<f64> = rain.entries.iter().map(|e| e.mm).collect();
    let tol = i64::from(cfg.tolerance_days);
    let mut best: Option<(f64, i64)> = None;
    for (i, e) in rain.entries.iter().enumerate() {
        let lag = (e.date - event.date).num_days();
        if lag.abs() > tol || i < cfg.window.max(1) {
            continue;
        }
        let z = baseline_z(e.mm, &values[i - cfg.window.max(1)..i]);
        if z < cfg.rain_z {
            continue;
        }
        let neighbour_higher = [i.checked_sub(1), Some(i + 1)]
            .into_iter()
            .flatten()
            .filter_map(|j| rain.entries.get(j))
            .any(|n| (n.date - e.date).num_days().abs() == 1 && n.mm > e.mm);
        if neighbour_higher {
            continue;
        }
        let better = match best {
            None => true,
            Some((bz, bl)) => z > bz || (z == bz && lag.abs() < bl.abs()),
        };
        if better {
            best = Some((z, lag));
        }
    }
    match best {
        Some((_, lag)) => FloodClass {
            kind: FloodKind::Torrential,
            rainfall_lag_days: Some(lag),
        },
        None => overflow,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EscalationStage {
    Idle,
    Warning,
    Escalated,
    Monitoring,
    Evaluation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscalationState {
    pub stage: EscalationStage,
    pub entered_at: NaiveDate,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EscalationInput {
    Detection(DetectionEvent),
    Evidence(EvidenceBundle),
    /// Requested high-granularity data has been received.
    DataRegistered,
    /// Days elapsed without a new detection.
    Quiescent {
        days: u32,
    },
    ReportIssued,
}

impl EscalationInput {
    fn label(&self) -> &'static str {
        match self {
            EscalationInput::Detection(_) => "detection",
            EscalationInput::Evidence(_) => "evidence",
            EscalationInput::DataRegistered => "data_registered",
            EscalationInput::Quiescent { .. } => "quiescent",
            EscalationInput::ReportIssued => "report_issued",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    HourlyPresenceWindow,
    SatelliteTasking,
    SocioeconomicData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestRegion {
    BoundingBox(BoundingBox),
    Hull(RingPolygon),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRequest {
    pub kind: RequestKind,
    pub region: RequestRegion,
    pub window: DateRange,
    pub event: DetectionEvent,
    pub evidence: EvidenceBundle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EscalationConfig {
    pub quiescence_days: u32,
    pub hourly_span_days: u32,
    pub satellite_days: u32,
}

impl Default for EscalationConfig {
    fn default() -> Self {
        Self {
            quiescence_days: 14,
            hourly_span_days: 3,
            satellite_days: 14,
        }
    }
}

/// Sequential escalation reducer.
///
/// ```text
/// IDLE --detection--> WARNING --complete evidence--> ESCALATED
///   ^                  |   ^                             |
///   |          partial |   | detection (from any stage)  | data registered
///   |         evidence v   |                             v
///   +--report-- EVALUATION <--quiescent >= Q-- MONITORING
/// ```
///
/// Entering ESCALATED emits the hourly-presence and satellite requests;
/// entering EVALUATION emits the socioeconomic request. Nothing else emits.
#[derive(Debug, Clone, PartialEq)]
pub struct Escalator {
    pub config: EscalationConfig,
    pub state: EscalationState,
    pub event: Option<DetectionEvent>,
    pub evidence: Option<EvidenceBundle>,
}

impl Escalator {
    pub fn new(config: EscalationConfig, at: NaiveDate) -> Self {
        Self {
            config,
            state: EscalationState {
                stage: EscalationStage::Idle,
                entered_at: at,
            },
            event: None,
            evidence: None,
        }
    }

    pub fn stage(&self) -> EscalationStage {
        self.state.stage
    }

    fn enter(&self, stage: EscalationStage, at: NaiveDate) -> Self {
        let mut next = self.clone();
        if stage != self.state.stage {
            next.state = EscalationState { stage, entered_at: at };
        }
        next
    }

    fn request(&self, kind: RequestKind, window: DateRange) -> DataRequest {
        let evidence = self.evidence.clone().expect("requests need evidence");
        let spatial = evidence
            .spatial
            .as_ref()
            .expect("complete evidence has a spatial proxy");
        let region = match &spatial.hull {
            Some(h) => RequestRegion::Hull(h.clone()),
            None => RequestRegion::BoundingBox(spatial.bbox),
        };
        DataRequest {
            kind,
            region,
            window,
            event: self.event.clone().expect("requests need an event"),
            evidence,
        }
    }

    /// Pure transition; `self` is left untouched.
    pub fn step(&self, input: &EscalationInput, at: NaiveDate) -> Result<(Self, Vec<DataRequest>), DetectError> {
        use EscalationStage::*;
        let invalid = || DetectError::InvalidTransition {
            stage: self.state.stage,
            input: input.label().to_string(),
        };
        match (self.state.stage, input) {
            (_, EscalationInput::Detection(e)) => {
                let mut next = self.enter(Warning, at);
                next.event = Some(e.clone());
                next.evidence = None;
                Ok((next, Vec::new()))
            }
            (Warning, EscalationInput::Evidence(b)) => {
                let event = self.event.as_ref().ok_or_else(invalid)?;
                if b.temporal.event_date != event.date {
                    return Err(invalid());
                }
                let mut next = self.clone();
                next.evidence = Some(b.clone());
                if !b.is_complete() {
                    return Ok((next, Vec::new()));
                }
                let mut next = next.enter(Escalated, at);
                next.evidence = Some(b.clone());
                let span = u64::from(self.config.hourly_span_days);
                let hourly = DateRange::around(event.date, span);
                let satellite = DateRange {
                    start: event.date,
                    end: event.date + Days::new(u64::from(self.config.satellite_days)),
                };
                let requests = vec![
                    next.request(RequestKind::HourlyPresenceWindow, hourly),
                    next.request(RequestKind::SatelliteTasking, satellite),
                ];
                Ok((next, requests))
            }
            (Escalated, EscalationInput::DataRegistered) => Ok((self.enter(Monitoring, at), Vec::new())),
            (Monitoring, EscalationInput::Quiescent { days }) => {
                if *days < self.config.quiescence_days {
                    return Ok((self.clone(), Vec::new()));
                }
                let next = self.enter(Evaluation, at);
                let event_date = self.event.as_ref().ok_or_else(invalid)?.date;
                let window = DateRange {
                    start: event_date,
                    end: at.max(event_date),
                };
                let req = next.request(RequestKind::SocioeconomicData, window);
                Ok((next, vec![req]))
            }
            (Evaluation, EscalationInput::ReportIssued) => {
                let mut next = self.enter(Idle, at);
                next.event = None;
                next.evidence = None;
                Ok((next, Vec::new()))
            }
            _ => Err(invalid()),
        }
    }
}

/// Free-function form of [`Escalator::step`].
pub fn escalate(
    machine: &Escalator,
    input: &EscalationInput,
    at: NaiveDate,
) -> Result<(Escalator, Vec<DataRequest>), DetectError> {
    machine.step(input, at)
}
