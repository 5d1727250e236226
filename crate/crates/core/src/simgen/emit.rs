use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};

use super::sim::{DayOutput, GroundTruth};
use crate::data::{DayInfo, Topology};
use crate::outcomes::Outcome;
use crate::{Error, Result};

/// A full simulated calendar ready for emission or in-memory analysis.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub topology: Topology,
    pub calendar: Vec<DayInfo>,
    pub days: Vec<DayOutput>,
}

const TS: &str = "%Y-%m-%dT%H:%M:%S";

fn ts(t: NaiveDateTime) -> String {
    t.format(TS).to_string()
}

fn date_str(d: NaiveDate) -> String {
    d.format("%Y-%m-%d").to_string()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::schema(path.display().to_string(), e.to_string()))
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

macro_rules! row {
    ($w:expr, $path:expr, [$($field:expr),+ $(,)?]) => {
        $w.write_record([$(AsRef::<str>::as_ref(&$field)),+])
            .map_err(|e| Error::schema($path.display().to_string(), e.to_string()))?
    };
}

/// Write the dataset files, the analysis manifest, and the ground-truth
/// sidecars into `dir`. Returns the manifest path.
pub fn write_dataset(
    out: &SimOutput,
    ground: Option<&GroundTruth>,
    dir: &Path,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("trips.csv");
    let mut w = writer(&path)?;
    row!(w, path, ["card_id", "origin", "dest", "tap_in", "tap_out"]);
    for day in &out.days {
        for t in &day.trips {
            row!(
                w,
                path,
                [
                    t.card_id,
                    t.origin.as_str(),
                    t.dest.as_str(),
                    ts(t.tap_in),
                    ts(t.tap_out)
                ]
            );
        }
    }
    finish(w, &path)?;

    let path = dir.join("avl.csv");
    let mut w = writer(&path)?;
    row!(
        w,
        path,
        ["train_id", "service_id", "station", "line", "direction", "event", "time"]
    );
    for day in &out.days {
        for r in &day.avl {
            row!(
                w,
                path,
                [
                    r.train_id,
                    r.service_id,
                    r.station.as_str(),
                    r.line.as_str(),
                    r.direction.as_str(),
                    r.event.as_str(),
                    ts(r.time)
                ]
            );
        }
    }
    finish(w, &path)?;

    let path = dir.join("incidents.csv");
    let mut w = writer(&path)?;
    row!(w, path, ["start", "end", "station", "line", "cause", "type"]);
    for day in &out.days {
        if let Some(inc) = &day.incident {
            let kind = match inc.incident_type {
                crate::data::IncidentType::Primary => "primary",
                crate::data::IncidentType::Secondary => "secondary",
            };
            row!(
                w,
                path,
                [
                    ts(inc.start),
                    ts(inc.end),
                    inc.station.as_str(),
                    inc.line.as_str(),
                    inc.cause,
                    kind
                ]
            );
        }
    }
    finish(w, &path)?;

    let path = dir.join("weather.csv");
    let mut w = writer(&path)?;
    row!(w, path, ["hour", "temperature_c", "wind_kmh", "rain_mmh"]);
    for day in &out.days {
        for r in &day.weather {
            row!(
                w,
                path,
                [
                    ts(r.hour),
                    format!("{}", r.temperature_c),
                    format!("{}", r.wind_kmh),
                    format!("{}", r.rain_mmh)
                ]
            );
        }
    }
    finish(w, &path)?;

    let path = dir.join("events.csv");
    let mut w = writer(&path)?;
    row!(w, path, ["date", "kind"]);
    for day in &out.days {
        for e in &day.events {
            row!(w, path, [date_str(e.date), e.kind.as_str()]);
        }
    }
    finish(w, &path)?;

    let path = dir.join("calendar.csv");
    let mut w = writer(&path)?;
    row!(w, path, ["date", "weekday", "holiday", "complete"]);
    for d in &out.calendar {
        let weekday = match d.weekday {
            chrono::Weekday::Mon => "Mon",
            chrono::Weekday::Tue => "Tue",
            chrono::Weekday::Wed => "Wed",
            chrono::Weekday::Thu => "Thu",
            chrono::Weekday::Fri => "Fri",
            chrono::Weekday::Sat => "Sat",
            chrono::Weekday::Sun => "Sun",
        };
        row!(
            w,
            path,
            [
                date_str(d.date),
                weekday,
                format!("{}", d.holiday),
                format!("{}", d.complete)
            ]
        );
    }
    finish(w, &path)?;

    let path = dir.join("abandonments.csv");
    let mut w = writer(&path)?;
    row!(w, path, ["card_id", "origin", "tap_in", "station", "time"]);
    for day in &out.days {
        for a in &day.abandonments {
            row!(
                w,
                path,
                [
                    a.card_id,
                    a.origin.as_str(),
                    ts(a.tap_in),
                    a.station.as_str(),
                    ts(a.time)
                ]
            );
        }
    }
    finish(w, &path)?;

    let path = dir.join("topology.json");
    std::fs::write(&path, out.topology.to_json_string()).map_err(|e| Error::io(&path, e))?;

    // Ground-truth sidecars (not part of the analysis manifest).
    let path = dir.join("injection_log.csv");
    let mut w = writer(&path)?;
    row!(w, path, ["station", "line", "day", "start", "end", "duration_min"]);
    for day in &out.days {
        if let Some(inc) = &day.incident {
            let dur = (inc.end - inc.start).num_seconds() as f64 / 60.0;
            row!(
                w,
                path,
                [
                    inc.station.as_str(),
                    inc.line.as_str(),
                    date_str(inc.start.date()),
                    ts(inc.start),
                    ts(inc.end),
                    format!("{dur}")
                ]
            );
        }
    }
    finish(w, &path)?;

    let manifest_day = out
        .days
        .iter()
        .find(|d| d.incident.is_some())
        .or(out.days.first());
    let path = dir.join("manifests.csv");
    let mut w = writer(&path)?;
    row!(
        w,
        path,
        ["day", "card_id", "train_id", "board", "alight", "board_time", "alight_time"]
    );
    if let Some(day) = manifest_day {
        for m in &day.manifests {
            row!(
                w,
                path,
                [
                    date_str(day.date),
                    m.card_id,
                    m.train_id,
                    m.board.as_str(),
                    m.alight.as_str(),
                    ts(m.board_time),
                    ts(m.alight_time)
                ]
            );
        }
    }
    finish(w, &path)?;

    if let Some(gt) = ground {
        let path = dir.join("ground_truth.csv");
        let mut w = writer(&path)?;
        row!(w, path, ["station", "day", "interval", "outcome", "true_effect"]);
        for m in Outcome::ALL {
            for (a, station) in gt.stations.iter().enumerate() {
                for t in 1..=gt.t_len {
                    let value = gt
                        .effect(a, m, t)
                        .map(|v| format!("{v}"))
                        .unwrap_or_default();
                    row!(
                        w,
                        path,
                        [
                            station.as_str(),
                            date_str(gt.day),
                            format!("{t}"),
                            m.name(),
                            value
                        ]
                    );
                }
            }
        }
        finish(w, &path)?;
    }

    let manifest_path = dir.join("manifest.toml");
    let manifest = "\
trips = \"trips.csv\"\n\
avl = \"avl.csv\"\n\
incidents = \"incidents.csv\"\n\
weather = \"weather.csv\"\n\
events = \"events.csv\"\n\
topology = \"topology.json\"\n\
calendar = \"calendar.csv\"\n\
abandonments = \"abandonments.csv\"\n";
    std::fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}
