//! Disruption log construction, the binary treatment grid, and the donor
//! pool of fully undisrupted days.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::data::{
    AvlRecord, Calendar, Direction, IncidentLogRecord, IntervalGrid, LineId, StationId,
};
use crate::{Error, Result};

/// Where a disruption record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisruptionSource {
    IncidentLog,
    AvlDetected,
    Merged,
}

impl DisruptionSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            DisruptionSource::IncidentLog => "incident_log",
            DisruptionSource::AvlDetected => "avl_detected",
            DisruptionSource::Merged => "merged",
        }
    }
}

/// A service disruption of at least five minutes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisruptionRecord {
    pub station: StationId,
    pub line: LineId,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub source: DisruptionSource,
}

impl DisruptionRecord {
    pub fn day(&self) -> NaiveDate {
        self.start.date()
    }

    pub fn duration_min(&self) -> f64 {
        (self.end - self.start).num_seconds() as f64 / 60.0
    }

    /// Time overlap with another record, in seconds.
    fn overlaps(&self, other: &DisruptionRecord) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// Configuration of the simplified headway-gap detector.
#[derive(Debug, Clone)]
pub struct ThresholdConfig {
    /// A gap is abnormal when it exceeds `multiplier` times the scheduled
    /// headway.
    pub multiplier: f64,
    /// Gaps shorter than this are ignored (minutes).
    pub min_duration_min: f64,
    pub scheduled_headway_min: BTreeMap<LineId, f64>,
}

impl ThresholdConfig {
    pub fn new(scheduled_headway_min: BTreeMap<LineId, f64>) -> Self {
        ThresholdConfig {
            multiplier: 3.0,
            min_duration_min: 5.0,
            scheduled_headway_min,
        }
    }
}

/// Detect service gaps from AVL data.
///
/// Within each (line, direction, station, date) event stream, a gap between
/// consecutive train events that exceeds `multiplier` times the scheduled
/// headway and lasts at least five minutes becomes a candidate. Overlapping
/// candidates on the same line collapse into one record anchored at the
/// station whose gap started first.
pub fn detect_from_avl(avl: &[AvlRecord], cfg: &ThresholdConfig) -> Result<Vec<DisruptionRecord>> {
    let mut streams: BTreeMap<(LineId, Direction, StationId, NaiveDate), Vec<NaiveDateTime>> =
        BTreeMap::new();
    for r in avl {
        streams
            .entry((r.line.clone(), r.direction, r.station.clone(), r.time.date()))
            .or_default()
            .push(r.time);
    }

    let mut candidates: Vec<DisruptionRecord> = Vec::new();
    for ((line, _dir, station, _date), mut times) in streams {
        let sched = *cfg
            .scheduled_headway_min
            .get(&line)
            .ok_or_else(|| Error::MissingHeadway(line.to_string()))?;
        times.sort();
        for w in times.windows(2) {
            let gap_min = (w[1] - w[0]).num_seconds() as f64 / 60.0;
            if gap_min > cfg.multiplier * sched && gap_min >= cfg.min_duration_min {
                candidates.push(DisruptionRecord {
                    station: station.clone(),
                    line: line.clone(),
                    start: w[0],
                    end: w[1],
                    source: DisruptionSource::AvlDetected,
                });
            }
        }
    }

    // Cluster overlapping candidates per line; keep the earliest-starting
    // station's own gap as the record.
    candidates.sort_by(|a, b| (&a.line, a.start, &a.station).cmp(&(&b.line, b.start, &b.station)));
    let mut out: Vec<DisruptionRecord> = Vec::new();
    let mut cluster: Option<(DisruptionRecord, NaiveDateTime)> = None; // (anchor, cluster end)
    for cand in candidates {
        match &mut cluster {
            Some((anchor, cluster_end)) if anchor.line == cand.line && cand.start <= *cluster_end => {
                *cluster_end = (*cluster_end).max(cand.end);
            }
            _ => {
                if let Some((anchor, _)) = cluster.take() {
                    out.push(anchor);
                }
                let end = cand.end;
                cluster = Some((cand, end));
            }
        }
    }
    if let Some((anchor, _)) = cluster {
        out.push(anchor);
    }
    out.sort_by(|a, b| (a.start, &a.station).cmp(&(b.start, &b.station)));
    Ok(out)
}

/// Combine AVL-detected gaps with the official incident log.
///
/// Records on the same station and line that overlap in time merge into one
/// spanning record; merged records lose their original source tag. Records
/// shorter than five minutes are excluded.
pub fn merge_logs(
    avl_detected: &[DisruptionRecord],
    incidents: &[IncidentLogRecord],
) -> Vec<DisruptionRecord> {
    let mut all: Vec<DisruptionRecord> = avl_detected.to_vec();
    all.extend(incidents.iter().map(|inc| DisruptionRecord {
        station: inc.station.clone(),
        line: inc.line.clone(),
        start: inc.start,
        end: inc.end,
        source: DisruptionSource::IncidentLog,
    }));

    let mut groups: BTreeMap<(StationId, LineId), Vec<DisruptionRecord>> = BTreeMap::new();
    for r in all {
        groups.entry((r.station.clone(), r.line.clone())).or_default().push(r);
    }

    let mut out: Vec<DisruptionRecord> = Vec::new();
    for (_, mut records) in groups {
        records.sort_by_key(|r| (r.start, r.end));
        let mut merged: Vec<DisruptionRecord> = Vec::new();
        for r in records {
            match merged.last_mut() {
                Some(prev) if prev.overlaps(&r) => {
                    let was_identical = prev.start == r.start && prev.end == r.end
                        && prev.source == r.source;
                    prev.start = prev.start.min(r.start);
                    prev.end = prev.end.max(r.end);
                    if !was_identical || prev.source != r.source {
                        prev.source = DisruptionSource::Merged;
                    }
                }
                _ => merged.push(r),
            }
        }
        out.extend(merged);
    }
    out.retain(|r| r.duration_min() >= 5.0);
    out.sort_by(|a, b| (a.start, &a.station).cmp(&(b.start, &b.station)));
    out
}

/// Treatment start interval of a disruption record.
///
/// The record-level five-minute rule has already excluded minor events, so
/// treatment starts in the interval containing the disruption's start time
/// (clamped into service hours). Equivalently: the first of the day's
/// intervals whose overlap with the record is positive.
pub fn treatment_start_interval(record: &DisruptionRecord, grid: &IntervalGrid) -> Result<usize> {
    if record.duration_min() < 5.0 {
        return Err(Error::Estimation(format!(
            "disruption at {} lasted {:.1} min; records shorter than five minutes are excluded",
            record.station,
            record.duration_min()
        )));
    }
    let start_sec = record.start.time().num_seconds_from_midnight();
    let end_sec = if record.end.date() > record.start.date() {
        grid.end_sec
    } else {
        record.end.time().num_seconds_from_midnight()
    };
    if end_sec <= grid.start_sec || start_sec >= grid.end_sec {
        return Err(Error::Estimation(format!(
            "disruption at {} lies outside service hours",
            record.station
        )));
    }
    let clamped = start_sec.max(grid.start_sec);
    grid.interval_of_sec(clamped)
        .ok_or_else(|| Error::Estimation("disruption start outside service hours".into()))
}

/// Binary treatment grid W over (station, day, interval).
///
/// The treated station carries W = 1 from the treatment start interval to
/// the end of its day; all other cells are 0. Spillover-affected stations
/// keep W = 0 and receive effects through the spillover estimator.
#[derive(Debug, Clone)]
pub struct TreatmentAssignment {
    w: Vec<bool>,
    n_days: usize,
    t_len: usize,
    pub station: usize,
    pub day: usize,
    pub t_start: usize,
}

impl TreatmentAssignment {
    pub fn w(&self, a: usize, d: usize, t: usize) -> bool {
        self.w[(a * self.n_days + d) * self.t_len + (t - 1)]
    }
}

/// Build the treatment grid for one disruption.
pub fn assign_treatment(
    record: &DisruptionRecord,
    grid: &IntervalGrid,
    stations: &[StationId],
    days: &[NaiveDate],
) -> Result<TreatmentAssignment> {
    let t_start = treatment_start_interval(record, grid)?;
    let station = stations
        .iter()
        .position(|s| s == &record.station)
        .ok_or_else(|| Error::UnknownStation(record.station.to_string()))?;
    let day = days
        .iter()
        .position(|d| *d == record.day())
        .ok_or_else(|| Error::Estimation(format!("day {} not in panel", record.day())))?;
    let t_len = grid.len();
    let mut w = vec![false; stations.len() * days.len() * t_len];
    for t in t_start..=t_len {
        w[(station * days.len() + day) * t_len + (t - 1)] = true;
    }
    Ok(TreatmentAssignment {
        w,
        n_days: days.len(),
        t_len,
        station,
        day,
        t_start,
    })
}

/// The J fully undisrupted weekdays backing every synthetic control.
#[derive(Debug, Clone)]
pub struct DonorPool {
    /// Chronologically ordered donor days.
    pub days: Vec<NaiveDate>,
    /// Set when the target day carries more than one disruption: only the
    /// joint impact is identified.
    pub warning: Option<String>,
}

impl DonorPool {
    pub fn j(&self) -> usize {
        self.days.len()
    }
}

/// All complete non-holiday weekdays with zero disruptions anywhere in the
/// network, excluding the target day.
pub fn build_donor_pool(
    log: &[DisruptionRecord],
    calendar: &Calendar,
    target: &DisruptionRecord,
) -> Result<DonorPool> {
    let disrupted_days: BTreeSet<NaiveDate> = log.iter().map(|r| r.day()).collect();
    let days: Vec<NaiveDate> = calendar
        .days()
        .iter()
        .filter(|d| d.is_analysis_day())
        .map(|d| d.date)
        .filter(|d| !disrupted_days.contains(d) && *d != target.day())
        .collect();
    if days.len() < 2 {
        return Err(Error::DonorPoolTooSmall { found: days.len() });
    }
    let others_on_target_day = log
        .iter()
        .filter(|r| r.day() == target.day() && (r.station != target.station || r.start != target.start))
        .count();
    let warning = (others_on_target_day > 0).then(|| {
        format!(
            "{} further disruption(s) on {}; estimates capture their joint impact",
            others_on_target_day,
            target.day()
        )
    });
    Ok(DonorPool { days, warning })
}
