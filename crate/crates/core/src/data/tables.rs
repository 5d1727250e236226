use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate, Timelike, Weekday};

use super::grid::IntervalGrid;
use super::records::{
    AbandonmentRecord, AvlRecord, EventKind, EventRecord, IncidentLogRecord, TripRecord,
    WeatherRecord,
};
use super::topology::Topology;

/// One service day in the calendar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayInfo {
    pub date: NaiveDate,
    pub weekday: Weekday,
    pub holiday: bool,
    /// False when parts of the network are missing from the data feed.
    pub complete: bool,
}

impl DayInfo {
    pub fn is_weekday(&self) -> bool {
        !matches!(self.weekday, Weekday::Sat | Weekday::Sun)
    }

    /// A day usable for analysis: a complete, non-holiday weekday.
    pub fn is_analysis_day(&self) -> bool {
        self.is_weekday() && !self.holiday && self.complete
    }
}

/// Ordered list of service days.
#[derive(Debug, Clone, Default)]
pub struct Calendar {
    days: Vec<DayInfo>,
    index: BTreeMap<NaiveDate, usize>,
}

impl Calendar {
    pub fn new(mut days: Vec<DayInfo>) -> Self {
        days.sort_by_key(|d| d.date);
        days.dedup_by_key(|d| d.date);
        let index = days.iter().enumerate().map(|(i, d)| (d.date, i)).collect();
        Calendar { days, index }
    }

    /// Derive a calendar from observed dates: weekday from the date itself,
    /// no holidays, all days complete.
    pub fn derive(dates: impl IntoIterator<Item = NaiveDate>) -> Self {
        let days = dates
            .into_iter()
            .map(|date| DayInfo {
                date,
                weekday: date.weekday(),
                holiday: false,
                complete: true,
            })
            .collect();
        Calendar::new(days)
    }

    pub fn days(&self) -> &[DayInfo] {
        &self.days
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.index.get(&date).copied()
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.index.contains_key(&date)
    }
}

/// Hourly weather, replicated onto the interval grid as a step function:
/// every 15-minute interval takes its containing hour's value.
#[derive(Debug, Clone, Default)]
pub struct WeatherTable {
    by_hour: BTreeMap<(NaiveDate, u32), [f64; 3]>,
}

impl WeatherTable {
    pub fn new(records: &[WeatherRecord]) -> Self {
        let by_hour = records
            .iter()
            .map(|r| {
                (
                    (r.hour.date(), r.hour.time().hour()),
                    [r.temperature_c, r.wind_kmh, r.rain_mmh],
                )
            })
            .collect();
        WeatherTable { by_hour }
    }

    pub fn is_empty(&self) -> bool {
        self.by_hour.is_empty()
    }

    /// `[temperature, wind, rain]` for interval `t` of `date`.
    pub fn value_at(&self, date: NaiveDate, t: usize, grid: &IntervalGrid) -> Option<[f64; 3]> {
        let (start, _) = grid.span_sec(t);
        self.by_hour.get(&(date, start / 3600)).copied()
    }

    /// Expand one day onto the interval grid (weather is station-invariant,
    /// so one row per interval). Missing hours yield `None` entries.
    pub fn expand_to_intervals(
        &self,
        date: NaiveDate,
        grid: &IntervalGrid,
    ) -> Vec<Option<[f64; 3]>> {
        (1..=grid.len())
            .map(|t| self.value_at(date, t, grid))
            .collect()
    }
}

/// Per-day mega-event dummies.
#[derive(Debug, Clone, Default)]
pub struct EventTable {
    by_date: BTreeMap<NaiveDate, [bool; 3]>,
}

impl EventTable {
    pub fn new(records: &[EventRecord]) -> Self {
        let mut by_date: BTreeMap<NaiveDate, [bool; 3]> = BTreeMap::new();
        for r in records {
            let flags = by_date.entry(r.date).or_default();
            match r.kind {
                EventKind::Concert => flags[0] = true,
                EventKind::Sports => flags[1] = true,
                EventKind::Exhibition => flags[2] = true,
            }
        }
        EventTable { by_date }
    }

    /// `[concert, sports, exhibition]` flags for a date.
    pub fn flags(&self, date: NaiveDate) -> [bool; 3] {
        self.by_date.get(&date).copied().unwrap_or([false; 3])
    }

    pub fn any(&self, date: NaiveDate) -> bool {
        self.flags(date).iter().any(|&f| f)
    }
}

/// Everything the estimator consumes, validated and immutable.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub trips: Vec<TripRecord>,
    pub avl: Vec<AvlRecord>,
    pub incidents: Vec<IncidentLogRecord>,
    pub weather: WeatherTable,
    pub events: EventTable,
    pub topology: Topology,
    pub calendar: Calendar,
    /// Simulator-labelled abandonments; absent on real data.
    pub abandonments: Vec<AbandonmentRecord>,
}

impl Dataset {
    pub fn grid(&self) -> &IntervalGrid {
        &self.topology.grid
    }
}
