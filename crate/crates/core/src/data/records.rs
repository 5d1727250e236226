use std::fmt;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

/// Station identifier as it appears in the input files.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationId(pub String);

impl StationId {
    pub fn new(s: impl Into<String>) -> Self {
        StationId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for StationId {
    fn from(s: &str) -> Self {
        StationId(s.to_owned())
    }
}

/// Line identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LineId(pub String);

impl LineId {
    pub fn new(s: impl Into<String>) -> Self {
        LineId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LineId {
    fn from(s: &str) -> Self {
        LineId(s.to_owned())
    }
}

/// Travel direction along a line's station sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// In the order the line's stations are listed.
    Up,
    /// Against the listed order.
    Down,
}

impl Direction {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "up" => Some(Direction::Up),
            "down" => Some(Direction::Down),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

/// Train movement event type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AvlEvent {
    Arrival,
    Departure,
}

impl AvlEvent {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "arrival" => Some(AvlEvent::Arrival),
            "departure" => Some(AvlEvent::Departure),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            AvlEvent::Arrival => "arrival",
            AvlEvent::Departure => "departure",
        }
    }
}

/// One smart-card trip: paired tap-in / tap-out transactions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripRecord {
    pub card_id: String,
    pub origin: StationId,
    pub dest: StationId,
    pub tap_in: NaiveDateTime,
    pub tap_out: NaiveDateTime,
}

impl TripRecord {
    /// Journey time in minutes.
    pub fn journey_minutes(&self) -> f64 {
        (self.tap_out - self.tap_in).num_seconds() as f64 / 60.0
    }
}

/// One train movement event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AvlRecord {
    pub train_id: String,
    pub service_id: String,
    pub station: StationId,
    pub line: LineId,
    pub direction: Direction,
    pub event: AvlEvent,
    pub time: NaiveDateTime,
}

/// Incident type in the official log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncidentType {
    Primary,
    Secondary,
}

impl IncidentType {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "primary" => Some(IncidentType::Primary),
            "secondary" => Some(IncidentType::Secondary),
            _ => None,
        }
    }
}

/// One row of the official incident log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidentLogRecord {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub station: StationId,
    pub line: LineId,
    pub cause: String,
    pub incident_type: IncidentType,
}

/// Hourly city-level weather observation.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherRecord {
    pub hour: NaiveDateTime,
    pub temperature_c: f64,
    pub wind_kmh: f64,
    pub rain_mmh: f64,
}

/// Mega-event category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Concert,
    Sports,
    Exhibition,
}

impl EventKind {
    pub const ALL: [EventKind; 3] = [EventKind::Concert, EventKind::Sports, EventKind::Exhibition];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "concert" => Some(EventKind::Concert),
            "sports" => Some(EventKind::Sports),
            "exhibition" => Some(EventKind::Exhibition),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Concert => "concert",
            EventKind::Sports => "sports",
            EventKind::Exhibition => "exhibition",
        }
    }
}

/// One city-wide mega-event on a calendar day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub date: NaiveDate,
    pub kind: EventKind,
}

/// A passenger who tapped in but left the system without completing the trip.
///
/// Real smart-card data cannot label these; the simulator can, which is what
/// lets the travel-speed measure honour its exclusion rule in tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbandonmentRecord {
    pub card_id: String,
    pub origin: StationId,
    pub tap_in: NaiveDateTime,
    /// Station where the passenger gave up waiting.
    pub station: StationId,
    pub time: NaiveDateTime,
}
