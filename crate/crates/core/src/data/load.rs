use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, NaiveDateTime, Weekday};

use super::records::{
    AbandonmentRecord, AvlEvent, AvlRecord, Direction, EventKind, EventRecord, IncidentLogRecord,
    IncidentType, StationId, TripRecord,
};
use super::tables::{Calendar, Dataset, DayInfo, EventTable, WeatherTable};
use super::topology::Topology;
use crate::data::records::WeatherRecord;
use crate::{Error, Result};

const TIMESTAMP_FMT: &str = "%Y-%m-%dT%H:%M:%S";
const DATE_FMT: &str = "%Y-%m-%d";

/// Plausibility band for weather validation.
const TEMP_BAND_C: (f64, f64) = (-10.0, 50.0);

/// A rejected input row.
#[derive(Debug, Clone)]
pub struct RowReject {
    /// 1-based data row number (excluding the header).
    pub row: u64,
    pub reason: String,
}

/// Ingestion outcome for one table.
#[derive(Debug, Clone)]
pub struct TableReport {
    pub name: String,
    pub rows_read: usize,
    pub rows_accepted: usize,
    pub rejects: Vec<RowReject>,
}

impl TableReport {
    fn new(name: &str) -> Self {
        TableReport {
            name: name.to_string(),
            rows_read: 0,
            rows_accepted: 0,
            rejects: Vec::new(),
        }
    }

    fn reject(&mut self, row: u64, reason: impl Into<String>) {
        self.rejects.push(RowReject {
            row,
            reason: reason.into(),
        });
    }
}

/// Row counts and rejections for every loaded table.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub tables: Vec<TableReport>,
}

impl ValidationReport {
    pub fn total_rejected(&self) -> usize {
        self.tables.iter().map(|t| t.rejects.len()).sum()
    }

    pub fn table(&self, name: &str) -> Option<&TableReport> {
        self.tables.iter().find(|t| t.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.tables {
            writeln!(
                f,
                "{}: {} rows read, {} accepted, {} rejected",
                t.name,
                t.rows_read,
                t.rows_accepted,
                t.rejects.len()
            )?;
            for r in t.rejects.iter().take(20) {
                writeln!(f, "  row {}: {}", r.row, r.reason)?;
            }
            if t.rejects.len() > 20 {
                writeln!(f, "  ... and {} more", t.rejects.len() - 20)?;
            }
        }
        Ok(())
    }
}

/// Parsed `manifest` file: key=value lines naming the input files.
///
/// Required keys: `trips`, `avl`, `incidents`, `weather`, `events`,
/// `topology`. Optional keys: `calendar`, `abandonments`. Relative paths are
/// resolved against the manifest's directory. Lines starting with `#` are
/// comments.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub trips: PathBuf,
    pub avl: PathBuf,
    pub incidents: PathBuf,
    pub weather: PathBuf,
    pub events: PathBuf,
    pub topology: PathBuf,
    pub calendar: Option<PathBuf>,
    pub abandonments: Option<PathBuf>,
}

impl Manifest {
    pub fn parse(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut map: BTreeMap<String, PathBuf> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Manifest(format!("line {}: expected key=value", lineno + 1))
            })?;
            let value = value.trim().trim_matches('"');
            map.insert(key.trim().to_string(), base.join(value));
        }
        let take = |map: &BTreeMap<String, PathBuf>, key: &str| -> Result<PathBuf> {
            map.get(key)
                .cloned()
                .ok_or_else(|| Error::Manifest(format!("missing key {key}")))
        };
        let manifest = Manifest {
            trips: take(&map, "trips")?,
            avl: take(&map, "avl")?,
            incidents: take(&map, "incidents")?,
            weather: take(&map, "weather")?,
            events: take(&map, "events")?,
            topology: take(&map, "topology")?,
            calendar: map.get("calendar").cloned(),
            abandonments: map.get("abandonments").cloned(),
        };
        for (name, p) in [
            ("trips", &manifest.trips),
            ("avl", &manifest.avl),
            ("incidents", &manifest.incidents),
            ("weather", &manifest.weather),
            ("events", &manifest.events),
            ("topology", &manifest.topology),
        ] {
            if !p.exists() {
                return Err(Error::Manifest(format!("{name} file {} not found", p.display())));
            }
        }
        Ok(manifest)
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::schema(path.display().to_string(), e.to_string()))
}

fn check_header(path: &Path, rdr: &mut csv::Reader<std::fs::File>, expected: &[&str]) -> Result<()> {
    let headers = rdr
        .headers()
        .map_err(|e| Error::schema(path.display().to_string(), e.to_string()))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::schema(
            path.display().to_string(),
            format!("header {:?}, expected {:?}", got.join(","), expected.join(",")),
        ));
    }
    Ok(())
}

fn parse_ts(s: &str) -> std::result::Result<NaiveDateTime, String> {
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FMT).map_err(|_| format!("bad timestamp {s:?}"))
}

fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, DATE_FMT).map_err(|_| format!("bad date {s:?}"))
}

fn parse_f64(s: &str, field: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("bad {field} {s:?}"))
}

macro_rules! reject_or {
    ($report:expr, $row:expr, $expr:expr) => {
        match $expr {
            Ok(v) => v,
            Err(reason) => {
                $report.reject($row, reason);
                continue;
            }
        }
    };
}

fn load_trips(
    path: &Path,
    topo: &Topology,
    calendar: Option<&Calendar>,
    report: &mut TableReport,
) -> Result<Vec<TripRecord>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &["card_id", "origin", "dest", "tap_in", "tap_out"])?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i as u64 + 1;
        report.rows_read += 1;
        let rec = reject_or!(report, row, rec.map_err(|e| e.to_string()));
        if rec.len() != 5 {
            report.reject(row, format!("expected 5 fields, got {}", rec.len()));
            continue;
        }
        let tap_in = reject_or!(report, row, parse_ts(&rec[3]));
        let tap_out = reject_or!(report, row, parse_ts(&rec[4]));
        let origin = StationId::new(&rec[1]);
        let dest = StationId::new(&rec[2]);
        if tap_out <= tap_in {
            report.reject(row, "tap_out is not after tap_in");
            continue;
        }
        if origin == dest {
            report.reject(row, "origin equals destination");
            continue;
        }
        if topo.station_idx(&origin).is_none() {
            report.reject(row, format!("unknown origin {origin}"));
            continue;
        }
        if topo.station_idx(&dest).is_none() {
            report.reject(row, format!("unknown destination {dest}"));
            continue;
        }
        if topo
            .grid
            .interval_of_sec(chrono::Timelike::num_seconds_from_midnight(&tap_in.time()))
            .is_none()
        {
            report.reject(row, "tap_in outside service hours");
            continue;
        }
        if let Some(cal) = calendar {
            if !cal.contains(tap_in.date()) {
                report.reject(row, format!("day {} not in calendar", tap_in.date()));
                continue;
            }
        }
        out.push(TripRecord {
            card_id: rec[0].to_string(),
            origin,
            dest,
            tap_in,
            tap_out,
        });
        report.rows_accepted += 1;
    }
    Ok(out)
}

fn load_avl(path: &Path, topo: &Topology, report: &mut TableReport) -> Result<Vec<AvlRecord>> {
    let mut rdr = reader(path)?;
    check_header(
        path,
        &mut rdr,
        &["train_id", "service_id", "station", "line", "direction", "event", "time"],
    )?;
    let mut rows: Vec<(u64, AvlRecord)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i as u64 + 1;
        report.rows_read += 1;
        let rec = reject_or!(report, row, rec.map_err(|e| e.to_string()));
        if rec.len() != 7 {
            report.reject(row, format!("expected 7 fields, got {}", rec.len()));
            continue;
        }
        let station = StationId::new(&rec[2]);
        let line = super::records::LineId::new(&rec[3]);
        let direction = match Direction::parse(&rec[4]) {
            Some(d) => d,
            None => {
                report.reject(row, format!("bad direction {:?}", &rec[4]));
                continue;
            }
        };
        let event = match AvlEvent::parse(&rec[5]) {
            Some(e) => e,
            None => {
                report.reject(row, format!("bad event {:?}", &rec[5]));
                continue;
            }
        };
        let time = reject_or!(report, row, parse_ts(&rec[6]));
        if !topo.station_on_line(&station, &line) {
            report.reject(row, format!("station {station} is not on line {line}"));
            continue;
        }
        rows.push((
            row,
            AvlRecord {
                train_id: rec[0].to_string(),
                service_id: rec[1].to_string(),
                station,
                line,
                direction,
                event,
                time,
            },
        ));
    }

    // Per-run consistency: sorted by time, a run's stations must progress
    // monotonically along the line in its direction.
    let mut groups: BTreeMap<(String, String, NaiveDate), Vec<usize>> = BTreeMap::new();
    for (i, (_, r)) in rows.iter().enumerate() {
        groups
            .entry((r.train_id.clone(), r.service_id.clone(), r.time.date()))
            .or_default()
            .push(i);
    }
    let mut bad = vec![false; rows.len()];
    for idxs in groups.values() {
        let mut ordered: Vec<usize> = idxs.clone();
        ordered.sort_by_key(|&i| (rows[i].1.time, i));
        let mut ok = true;
        let mut prev_pos: Option<usize> = None;
        for &i in &ordered {
            let r = &rows[i].1;
            let line = &topo.lines[topo.line_idx(&r.line).expect("validated")];
            let pos = line
                .stations
                .iter()
                .position(|s| s == &r.station)
                .expect("validated");
            let pos = match r.direction {
                Direction::Up => pos,
                Direction::Down => line.stations.len() - 1 - pos,
            };
            if let Some(p) = prev_pos {
                if pos < p {
                    ok = false;
                    break;
                }
            }
            prev_pos = Some(pos);
        }
        if !ok {
            for &i in idxs {
                bad[i] = true;
            }
        }
    }
    let mut out = Vec::new();
    for (i, (row, r)) in rows.into_iter().enumerate() {
        if bad[i] {
            report.reject(row, "run has a non-monotone station sequence");
        } else {
            out.push(r);
            report.rows_accepted += 1;
        }
    }
    Ok(out)
}

fn load_incidents(
    path: &Path,
    topo: &Topology,
    report: &mut TableReport,
) -> Result<Vec<IncidentLogRecord>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &["start", "end", "station", "line", "cause", "type"])?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i as u64 + 1;
        report.rows_read += 1;
        let rec = reject_or!(report, row, rec.map_err(|e| e.to_string()));
        let start = reject_or!(report, row, parse_ts(&rec[0]));
        let end = reject_or!(report, row, parse_ts(&rec[1]));
        if end <= start {
            report.reject(row, "end is not after start");
            continue;
        }
        let station = StationId::new(&rec[2]);
        let line = super::records::LineId::new(&rec[3]);
        if !topo.station_on_line(&station, &line) {
            report.reject(row, format!("station {station} is not on line {line}"));
            continue;
        }
        let incident_type = match IncidentType::parse(&rec[5]) {
            Some(t) => t,
            None => {
                report.reject(row, format!("bad type {:?}", &rec[5]));
                continue;
            }
        };
        out.push(IncidentLogRecord {
            start,
            end,
            station,
            line,
            cause: rec[4].to_string(),
            incident_type,
        });
        report.rows_accepted += 1;
    }
    Ok(out)
}

fn load_weather(path: &Path, report: &mut TableReport) -> Result<Vec<WeatherRecord>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &["hour", "temperature_c", "wind_kmh", "rain_mmh"])?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i as u64 + 1;
        report.rows_read += 1;
        let rec = reject_or!(report, row, rec.map_err(|e| e.to_string()));
        let hour = reject_or!(report, row, parse_ts(&rec[0]));
        let temperature_c = reject_or!(report, row, parse_f64(&rec[1], "temperature"));
        let wind_kmh = reject_or!(report, row, parse_f64(&rec[2], "wind speed"));
        let rain_mmh = reject_or!(report, row, parse_f64(&rec[3], "rain"));
        if temperature_c < TEMP_BAND_C.0 || temperature_c > TEMP_BAND_C.1 {
            report.reject(row, format!("temperature {temperature_c} outside plausibility band"));
            continue;
        }
        if wind_kmh < 0.0 {
            report.reject(row, "negative wind speed");
            continue;
        }
        if rain_mmh < 0.0 {
            report.reject(row, "negative rain");
            continue;
        }
        out.push(WeatherRecord {
            hour,
            temperature_c,
            wind_kmh,
            rain_mmh,
        });
        report.rows_accepted += 1;
    }
    Ok(out)
}

fn load_events(path: &Path, report: &mut TableReport) -> Result<Vec<EventRecord>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &["date", "kind"])?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i as u64 + 1;
        report.rows_read += 1;
        let rec = reject_or!(report, row, rec.map_err(|e| e.to_string()));
        let date = reject_or!(report, row, parse_date(&rec[0]));
        let kind = match EventKind::parse(&rec[1]) {
            Some(k) => k,
            None => {
                report.reject(row, format!("bad event kind {:?}", &rec[1]));
                continue;
            }
        };
        out.push(EventRecord { date, kind });
        report.rows_accepted += 1;
    }
    Ok(out)
}

fn parse_weekday(s: &str) -> Option<Weekday> {
    match s {
        "Mon" => Some(Weekday::Mon),
        "Tue" => Some(Weekday::Tue),
        "Wed" => Some(Weekday::Wed),
        "Thu" => Some(Weekday::Thu),
        "Fri" => Some(Weekday::Fri),
        "Sat" => Some(Weekday::Sat),
        "Sun" => Some(Weekday::Sun),
        _ => None,
    }
}

fn load_calendar(path: &Path, report: &mut TableReport) -> Result<Vec<DayInfo>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &["date", "weekday", "holiday", "complete"])?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i as u64 + 1;
        report.rows_read += 1;
        let rec = reject_or!(report, row, rec.map_err(|e| e.to_string()));
        let date = reject_or!(report, row, parse_date(&rec[0]));
        let weekday = match parse_weekday(&rec[1]) {
            Some(w) => w,
            None => {
                report.reject(row, format!("bad weekday {:?}", &rec[1]));
                continue;
            }
        };
        if weekday != date.weekday() {
            report.reject(row, format!("weekday {:?} does not match {date}", &rec[1]));
            continue;
        }
        let holiday = &rec[2] == "true";
        let complete = &rec[3] == "true";
        out.push(DayInfo {
            date,
            weekday,
            holiday,
            complete,
        });
        report.rows_accepted += 1;
    }
    Ok(out)
}

fn load_abandonments(
    path: &Path,
    topo: &Topology,
    report: &mut TableReport,
) -> Result<Vec<AbandonmentRecord>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &["card_id", "origin", "tap_in", "station", "time"])?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i as u64 + 1;
        report.rows_read += 1;
        let rec = reject_or!(report, row, rec.map_err(|e| e.to_string()));
        let origin = StationId::new(&rec[1]);
        let station = StationId::new(&rec[3]);
        if topo.station_idx(&origin).is_none() || topo.station_idx(&station).is_none() {
            report.reject(row, "unknown station");
            continue;
        }
        let tap_in = reject_or!(report, row, parse_ts(&rec[2]));
        let time = reject_or!(report, row, parse_ts(&rec[4]));
        out.push(AbandonmentRecord {
            card_id: rec[0].to_string(),
            origin,
            tap_in,
            station,
            time,
        });
        report.rows_accepted += 1;
    }
    Ok(out)
}

/// Load and validate a full dataset from a manifest file.
///
/// Invalid rows are rejected (with row number and reason in the report), not
/// repaired. Loading the same files twice yields identical tables.
pub fn load_dataset(manifest_path: &Path) -> Result<(Dataset, ValidationReport)> {
    let manifest = Manifest::parse(manifest_path)?;
    let topology = Topology::from_json_file(&manifest.topology)?;
    let mut report = ValidationReport::default();

    let provided_calendar = match &manifest.calendar {
        Some(path) => {
            let mut c = TableReport::new("calendar");
            let days = load_calendar(path, &mut c)?;
            report.tables.push(c);
            Some(Calendar::new(days))
        }
        None => None,
    };

    let mut t = TableReport::new("trips");
    let trips = load_trips(&manifest.trips, &topology, provided_calendar.as_ref(), &mut t)?;
    let mut a = TableReport::new("avl");
    let avl = load_avl(&manifest.avl, &topology, &mut a)?;
    let mut inc = TableReport::new("incidents");
    let incidents = load_incidents(&manifest.incidents, &topology, &mut inc)?;
    let mut w = TableReport::new("weather");
    let weather_rows = load_weather(&manifest.weather, &mut w)?;
    let mut e = TableReport::new("events");
    let event_rows = load_events(&manifest.events, &mut e)?;

    let calendar = provided_calendar.unwrap_or_else(|| {
        Calendar::derive(
            trips
                .iter()
                .map(|tr| tr.tap_in.date())
                .collect::<std::collections::BTreeSet<_>>(),
        )
    });

    let abandonments = match &manifest.abandonments {
        Some(path) => {
            let mut ab = TableReport::new("abandonments");
            let rows = load_abandonments(path, &topology, &mut ab)?;
            report.tables.push(ab);
            rows
        }
        None => Vec::new(),
    };

    report.tables.push(t);
    report.tables.push(a);
    report.tables.push(inc);
    report.tables.push(w);
    report.tables.push(e);
    report.tables.sort_by(|x, y| x.name.cmp(&y.name));

    let dataset = Dataset {
        trips,
        avl,
        incidents,
        weather: WeatherTable::new(&weather_rows),
        events: EventTable::new(&event_rows),
        topology,
        calendar,
        abandonments,
    };
    Ok((dataset, report))
}
