//! Deterministic metro-day simulator.
//!
//! Produces paired disrupted/undisrupted datasets from the same seed: the
//! pair shares every passenger arrival and differs only through the injected
//! service halt, so elementwise panel differences are the ground-truth
//! effects the estimator is validated against.

mod emit;
mod sim;

pub use emit::{write_dataset, SimOutput};
pub use sim::{ground_truth, simulate_all, simulate_day, DayOutput, GroundTruth, ManifestRow};

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::data::{
    EdgeSpec, IntervalGrid, LineSpec, RollingStock, StationSpec, Topology,
};
use crate::{Error, Result};

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimStation {
    pub id: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimLine {
    pub id: String,
    /// Station ids in track order.
    pub stations: Vec<String>,
    /// Track length of each consecutive segment, km.
    pub edges_km: Vec<f64>,
    pub headway_min: f64,
    pub speed_kmh: f64,
    pub dwell_secs: u32,
    pub seats: u32,
    pub floor_area_m2: f64,
    /// First and last terminus dispatch, "HH:MM".
    pub first_dispatch: String,
    pub last_dispatch: String,
}

/// A time-of-day demand multiplier window, "HH:MM" to "HH:MM".
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileWindow {
    pub from: String,
    pub to: String,
    pub mult: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemandSpec {
    /// Base expected passengers per OD pair per interval at multiplier 1.
    pub scale: f64,
    pub origin_weights: BTreeMap<String, f64>,
    pub dest_weights: BTreeMap<String, f64>,
    /// Multiplier on OD pairs that need more than one line.
    pub cross_line_factor: f64,
    /// Stations with zero demand to or from other lines.
    #[serde(default)]
    pub isolated_stations: Vec<String>,
    /// When a destination is listed, only the named origins send trips to it.
    #[serde(default)]
    pub dest_origin_whitelist: BTreeMap<String, Vec<String>>,
    /// Off-window demand multiplier.
    pub base_profile: f64,
    pub profile: Vec<ProfileWindow>,
    /// No arrivals after this time, "HH:MM".
    pub demand_end: String,
    /// Monday..Friday multipliers.
    pub weekday_mult: [f64; 5],
    pub temp_coeff: f64,
    pub temp_ref_c: f64,
    pub rain_coeff: f64,
    pub wind_coeff: f64,
    /// Concert, sports, exhibition demand multipliers (additive, e.g. 0.08).
    pub event_mult: [f64; 3],
    pub event_prob: [f64; 3],
    /// Multiplicative per-cell noise scale on expected demand.
    #[serde(default)]
    pub noise_scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeatherSpec {
    pub temp_range_c: (f64, f64),
    pub wind_range_kmh: (f64, f64),
    pub rain_max_mmh: f64,
    pub dry_probability: f64,
    /// Intra-day temperature swing amplitude.
    #[serde(default = "default_one")]
    pub diurnal_amplitude_c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalendarSpec {
    pub start_date: NaiveDate,
    /// Number of consecutive weekdays simulated (weekends skipped).
    pub n_weekdays: usize,
    #[serde(default)]
    pub holidays: Vec<NaiveDate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectionSpec {
    pub station: String,
    pub day: NaiveDate,
    /// "HH:MM" wall-clock start.
    pub start: String,
    pub duration_min: f64,
    /// Seconds between released trains once the halt lifts.
    #[serde(default = "default_release_secs")]
    pub release_separation_secs: u32,
}

fn default_release_secs() -> u32 {
    60
}

/// Full simulator specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSpec {
    pub seed: u64,
    pub stations: Vec<SimStation>,
    pub lines: Vec<SimLine>,
    pub demand: DemandSpec,
    pub weather: WeatherSpec,
    pub calendar: CalendarSpec,
    /// Minutes a passenger waits on a platform before leaving the system.
    pub patience_min: f64,
    pub disruption: Option<InjectionSpec>,
}

pub(crate) fn parse_clock_sec(s: &str) -> Result<i64> {
    let mut it = s.split(':');
    if let (Some(h), Some(m)) = (it.next(), it.next()) {
        if let (Ok(h), Ok(m)) = (h.parse::<i64>(), m.parse::<i64>()) {
            if it.next().is_none() && h <= 24 && m < 60 {
                return Ok(h * 3600 + m * 60);
            }
        }
    }
    Err(Error::Simulation(format!("bad clock time {s:?}")))
}

impl SimSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: SimSpec =
            toml::from_str(s).map_err(|e| Error::Simulation(format!("spec parse: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("spec serializes")
    }

    /// The simulated service days, weekends skipped, in order.
    pub fn service_days(&self) -> Vec<NaiveDate> {
        let mut days = Vec::with_capacity(self.calendar.n_weekdays);
        let mut d = self.calendar.start_date;
        while days.len() < self.calendar.n_weekdays {
            if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
                days.push(d);
            }
            d = d.succ_opt().expect("date range");
        }
        days
    }

    pub fn validate(&self) -> Result<()> {
        if self.stations.is_empty() || self.lines.is_empty() {
            return Err(Error::Simulation("no stations or lines".into()));
        }
        let station_ids: Vec<&str> = self.stations.iter().map(|s| s.id.as_str()).collect();
        for line in &self.lines {
            if line.stations.len() < 2 {
                return Err(Error::Simulation(format!("line {} too short", line.id)));
            }
            if line.edges_km.len() != line.stations.len() - 1 {
                return Err(Error::Simulation(format!(
                    "line {}: {} stations need {} edges, got {}",
                    line.id,
                    line.stations.len(),
                    line.stations.len() - 1,
                    line.edges_km.len()
                )));
            }
            for s in &line.stations {
                if !station_ids.contains(&s.as_str()) {
                    return Err(Error::Simulation(format!(
                        "line {} references unknown station {s}",
                        line.id
                    )));
                }
            }
            if line.headway_min <= 0.0 || line.speed_kmh <= 0.0 {
                return Err(Error::Simulation(format!(
                    "line {}: headway and speed must be positive",
                    line.id
                )));
            }
            if line.edges_km.iter().any(|&km| km <= 0.0) {
                return Err(Error::Simulation(format!("line {}: non-positive edge", line.id)));
            }
            if parse_clock_sec(&line.first_dispatch)? >= parse_clock_sec(&line.last_dispatch)? {
                return Err(Error::Simulation(format!(
                    "line {}: first dispatch not before last",
                    line.id
                )));
            }
        }
        if self.demand.scale < 0.0 {
            return Err(Error::Simulation("negative demand scale".into()));
        }
        if self.patience_min <= 0.0 {
            return Err(Error::Simulation("patience must be positive".into()));
        }
        parse_clock_sec(&self.demand.demand_end)?;
        for w in &self.demand.profile {
            parse_clock_sec(&w.from)?;
            parse_clock_sec(&w.to)?;
            if w.mult < 0.0 {
                return Err(Error::Simulation("negative profile multiplier".into()));
            }
        }
        if let Some(inj) = &self.disruption {
            if inj.duration_min < 5.0 {
                return Err(Error::Simulation(
                    "injected disruptions must last at least five minutes".into(),
                ));
            }
            if !station_ids.contains(&inj.station.as_str()) {
                return Err(Error::Simulation(format!("unknown injection station {}", inj.station)));
            }
            if !self.service_days().contains(&inj.day) {
                return Err(Error::Simulation(format!(
                    "injection day {} is not a simulated service day",
                    inj.day
                )));
            }
            parse_clock_sec(&inj.start)?;
        }
        Ok(())
    }

    /// The topology the simulator advertises to the estimation pipeline.
    pub fn topology(&self) -> Result<Topology> {
        let stations = self
            .stations
            .iter()
            .map(|s| StationSpec {
                id: s.id.as_str().into(),
                name: s.name.clone(),
                lat: s.lat,
                lon: s.lon,
            })
            .collect();
        let mut edges = Vec::new();
        let mut lines = Vec::new();
        let mut rolling = Vec::new();
        for line in &self.lines {
            for (i, km) in line.edges_km.iter().enumerate() {
                edges.push(EdgeSpec {
                    from: line.stations[i].as_str().into(),
                    to: line.stations[i + 1].as_str().into(),
                    line: line.id.as_str().into(),
                    km: *km,
                });
            }
            lines.push(LineSpec {
                id: line.id.as_str().into(),
                stations: line.stations.iter().map(|s| s.as_str().into()).collect(),
            });
            rolling.push(RollingStock {
                line: line.id.as_str().into(),
                seats: line.seats,
                floor_area_m2: line.floor_area_m2,
            });
        }
        Topology::new(stations, edges, lines, rolling, IntervalGrid::standard())
    }
}

/// The desk-scale default: two lines, ten stations, one interchange, a
/// 14-weekday calendar with a 27-minute evening halt at the A1 terminus on
/// 2019-03-11, leaving 13 clean donor days.
pub fn default_spec() -> SimSpec {
    let station = |id: &str, name: &str, lat: f64, lon: f64| SimStation {
        id: id.into(),
        name: name.into(),
        lat,
        lon,
    };
    let stations = vec![
        station("A1", "Astor Terminus", 22.265, 114.240),
        station("A2", "Abbey Park", 22.272, 114.226),
        station("A3", "Arden Cross", 22.280, 114.212),
        station("A4", "Alder Gate", 22.287, 114.194),
        station("A5", "Apex Hill", 22.293, 114.176),
        station("A6", "Avon End", 22.300, 114.156),
        station("B1", "Birch Quay", 22.302, 114.232),
        station("B2", "Bay Lane", 22.292, 114.222),
        station("B3", "Briar Town", 22.268, 114.200),
        station("B4", "Branch Halt", 22.256, 114.188),
    ];
    let lines = vec![
        SimLine {
            id: "L1".into(),
            stations: ["A1", "A2", "A3", "A4", "A5", "A6"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            edges_km: vec![2.2, 1.6, 2.8, 2.8, 3.0],
            headway_min: 4.0,
            speed_kmh: 40.0,
            dwell_secs: 30,
            seats: 40,
            floor_area_m2: 60.0,
            first_dispatch: "06:00".into(),
            last_dispatch: "23:30".into(),
        },
        SimLine {
            id: "L2".into(),
            stations: ["B1", "B2", "A3", "B3", "B4"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            edges_km: vec![1.1, 1.4, 1.3, 1.7],
            headway_min: 5.0,
            speed_kmh: 40.0,
            dwell_secs: 30,
            seats: 40,
            floor_area_m2: 60.0,
            first_dispatch: "06:00".into(),
            last_dispatch: "23:30".into(),
        },
    ];
    let origin_weights: BTreeMap<String, f64> = [
        ("A1", 4.0),
        ("A2", 1.2),
        ("A3", 2.0),
        ("A4", 1.0),
        ("A5", 1.0),
        ("A6", 1.6),
        ("B1", 1.2),
        ("B2", 0.8),
        ("B3", 0.8),
        ("B4", 1.0),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let dest_weights: BTreeMap<String, f64> = [
        ("A1", 2.5),
        ("A2", 1.0),
        ("A3", 1.4),
        ("A4", 1.0),
        ("A5", 1.0),
        ("A6", 1.4),
        ("B1", 1.0),
        ("B2", 0.8),
        ("B3", 0.8),
        ("B4", 1.0),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let mut dest_origin_whitelist = BTreeMap::new();
    // Keeps every pre-disruption entrant clear of the halt window: only
    // short inbound feeds reach the A1 terminus.
    dest_origin_whitelist.insert("A1".to_string(), vec!["A2".to_string(), "A3".to_string()]);
    SimSpec {
        seed: 20190311,
        stations,
        lines,
        demand: DemandSpec {
            scale: 7.8,
            origin_weights,
            dest_weights,
            cross_line_factor: 0.4,
            isolated_stations: vec!["B4".to_string()],
            dest_origin_whitelist,
            base_profile: 0.3,
            profile: vec![
                ProfileWindow {
                    from: "06:30".into(),
                    to: "07:30".into(),
                    mult: 0.6,
                },
                ProfileWindow {
                    from: "07:30".into(),
                    to: "09:30".into(),
                    mult: 1.0,
                },
                ProfileWindow {
                    from: "09:30".into(),
                    to: "17:00".into(),
                    mult: 0.5,
                },
                ProfileWindow {
                    from: "17:00".into(),
                    to: "19:30".into(),
                    mult: 1.2,
                },
                ProfileWindow {
                    from: "19:30".into(),
                    to: "21:30".into(),
                    mult: 0.6,
                },
            ],
            demand_end: "23:00".into(),
            weekday_mult: [1.06, 1.0, 0.97, 1.02, 1.1],
            temp_coeff: -0.006,
            temp_ref_c: 21.0,
            rain_coeff: -0.03,
            wind_coeff: -0.0005,
            event_mult: [0.08, 0.05, 0.06],
            event_prob: [0.25, 0.2, 0.2],
            noise_scale: 0.02,
        },
        weather: WeatherSpec {
            temp_range_c: (15.0, 27.0),
            wind_range_kmh: (4.0, 44.0),
            rain_max_mmh: 4.0,
            dry_probability: 0.55,
            diurnal_amplitude_c: 1.2,
        },
        calendar: CalendarSpec {
            start_date: NaiveDate::from_ymd_opt(2019, 3, 4).unwrap(),
            n_weekdays: 14,
            holidays: vec![],
        },
        patience_min: 10.0,
        disruption: Some(InjectionSpec {
            station: "A1".into(),
            day: NaiveDate::from_ymd_opt(2019, 3, 11).unwrap(),
            start: "17:41".into(),
            duration_min: 27.0,
            release_separation_secs: 60,
        }),
    }
}
