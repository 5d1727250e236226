//! The five service-quality outcome measures per (station, day, interval).
//!
//! Ridership counts are zero when no trips qualify; the mean-valued measures
//! (journey time, speed, density) are missing when undefined, except that a
//! fully closed origin station with labelled abandonments and zero completed
//! trips yields an average speed of zero.

use std::collections::BTreeMap;

use chrono::{NaiveDate, Timelike};

use crate::data::{AbandonmentRecord, Dataset, IntervalGrid, StationId, TripRecord};
use crate::network::{assign_passengers, AssignConfig, AssignmentResult, NetworkGraph};
use crate::Result;

/// The five outcome measures, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    EntryRidership,
    ExitRidership,
    AvgJourneyTime,
    AvgSpeed,
    CrowdingDensity,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [
        Outcome::EntryRidership,
        Outcome::ExitRidership,
        Outcome::AvgJourneyTime,
        Outcome::AvgSpeed,
        Outcome::CrowdingDensity,
    ];

    pub fn index(&self) -> usize {
        match self {
            Outcome::EntryRidership => 0,
            Outcome::ExitRidership => 1,
            Outcome::AvgJourneyTime => 2,
            Outcome::AvgSpeed => 3,
            Outcome::CrowdingDensity => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Outcome::EntryRidership => "entry_ridership",
            Outcome::ExitRidership => "exit_ridership",
            Outcome::AvgJourneyTime => "avg_journey_time",
            Outcome::AvgSpeed => "avg_speed",
            Outcome::CrowdingDensity => "crowding_density",
        }
    }

    /// Human-facing label used in the report tables.
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::EntryRidership => "Entry ridership",
            Outcome::ExitRidership => "Exit ridership",
            Outcome::AvgJourneyTime => "Ave journey time",
            Outcome::AvgSpeed => "Ave speed",
            Outcome::CrowdingDensity => "Crowding density",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Outcome::ALL.into_iter().find(|o| o.name() == s)
    }
}

/// Dense (station, day, interval) x outcome panel. Missing cells are NaN
/// internally and `None` through the accessors.
#[derive(Debug, Clone)]
pub struct OutcomePanel {
    pub stations: Vec<StationId>,
    pub days: Vec<NaiveDate>,
    pub t_len: usize,
    data: Vec<f64>,
    station_index: BTreeMap<StationId, usize>,
    day_index: BTreeMap<NaiveDate, usize>,
}

impl OutcomePanel {
    pub fn new(stations: Vec<StationId>, days: Vec<NaiveDate>, t_len: usize) -> Self {
        let station_index = stations.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let day_index = days.iter().copied().enumerate().map(|(i, d)| (d, i)).collect();
        let data = vec![f64::NAN; 5 * stations.len() * days.len() * t_len];
        OutcomePanel {
            stations,
            days,
            t_len,
            data,
            station_index,
            day_index,
        }
    }

    fn offset(&self, a: usize, d: usize, t: usize, m: Outcome) -> usize {
        debug_assert!(t >= 1 && t <= self.t_len);
        ((m.index() * self.stations.len() + a) * self.days.len() + d) * self.t_len + (t - 1)
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    pub fn station_idx(&self, id: &StationId) -> Option<usize> {
        self.station_index.get(id).copied()
    }

    pub fn day_idx(&self, date: NaiveDate) -> Option<usize> {
        self.day_index.get(&date).copied()
    }

    pub fn get(&self, a: usize, d: usize, t: usize, m: Outcome) -> Option<f64> {
        let v = self.data[self.offset(a, d, t, m)];
        if v.is_nan() {
            None
        } else {
            Some(v)
        }
    }

    pub fn set(&mut self, a: usize, d: usize, t: usize, m: Outcome, v: Option<f64>) {
        let off = self.offset(a, d, t, m);
        self.data[off] = v.unwrap_or(f64::NAN);
    }

    /// Full interval series (length T, NaN = missing) for one station-day.
    pub fn series(&self, a: usize, d: usize, m: Outcome) -> &[f64] {
        let start = self.offset(a, d, 1, m);
        &self.data[start..start + self.t_len]
    }

    /// Mean of the series over the given 1-based intervals, skipping missing
    /// cells; `None` when every cell is missing.
    pub fn mean_over(&self, a: usize, d: usize, m: Outcome, intervals: &[usize]) -> Option<f64> {
        let series = self.series(a, d, m);
        let mut sum = 0.0;
        let mut n = 0usize;
        for &t in intervals {
            let v = series[t - 1];
            if !v.is_nan() {
                sum += v;
                n += 1;
            }
        }
        if n == 0 {
            None
        } else {
            Some(sum / n as f64)
        }
    }
}

/// Count of trips entering station `a` during interval `t` of day `d`.
pub fn entry_ridership(
    trips: &[TripRecord],
    grid: &IntervalGrid,
    a: &StationId,
    d: NaiveDate,
    t: usize,
) -> u64 {
    trips
        .iter()
        .filter(|tr| {
            tr.origin == *a
                && tr.tap_in.date() == d
                && grid.interval_of_sec(tr.tap_in.time().num_seconds_from_midnight()) == Some(t)
        })
        .count() as u64
}

/// Count of trips exiting station `a` during interval `t` of day `d`.
pub fn exit_ridership(
    trips: &[TripRecord],
    grid: &IntervalGrid,
    a: &StationId,
    d: NaiveDate,
    t: usize,
) -> u64 {
    trips
        .iter()
        .filter(|tr| {
            tr.dest == *a
                && tr.tap_out.date() == d
                && grid.interval_of_sec(tr.tap_out.time().num_seconds_from_midnight()) == Some(t)
        })
        .count() as u64
}

/// Mean journey time in minutes over trips entering `a` during `t`, or
/// `None` when no trip qualifies.
pub fn avg_journey_time(
    trips: &[TripRecord],
    grid: &IntervalGrid,
    a: &StationId,
    d: NaiveDate,
    t: usize,
) -> Option<f64> {
    let mut values: Vec<f64> = trips
        .iter()
        .filter(|tr| {
            tr.origin == *a
                && tr.tap_in.date() == d
                && grid.interval_of_sec(tr.tap_in.time().num_seconds_from_midnight()) == Some(t)
        })
        .map(|tr| tr.journey_minutes())
        .collect();
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean travel speed (km/h) of completed trips entering `a` during `t`.
///
/// Abandoning passengers are not in the trip table, so they are excluded
/// automatically; when labels show that passengers entered but none could
/// complete, the station counts as closed and the speed is zero.
pub fn avg_speed(
    trips: &[TripRecord],
    graph: &NetworkGraph,
    topo: &crate::data::Topology,
    abandonments: &[AbandonmentRecord],
    a: &StationId,
    d: NaiveDate,
    t: usize,
) -> Result<Option<f64>> {
    let grid = &topo.grid;
    let mut values: Vec<f64> = Vec::new();
    for tr in trips {
        if tr.origin == *a
            && tr.tap_in.date() == d
            && grid.interval_of_sec(tr.tap_in.time().num_seconds_from_midnight()) == Some(t)
        {
            let o = topo.station_idx(&tr.origin).expect("validated");
            let dd = topo.station_idx(&tr.dest).expect("validated");
            let km = graph.shortest_distance(o, dd)?;
            values.push(km / (tr.journey_minutes() / 60.0));
        }
    }
    if !values.is_empty() {
        values.sort_by(f64::total_cmp);
        return Ok(Some(values.iter().sum::<f64>() / values.len() as f64));
    }
    let entered_but_lost = abandonments.iter().any(|ab| {
        ab.origin == *a
            && ab.tap_in.date() == d
            && grid.interval_of_sec(ab.tap_in.time().num_seconds_from_midnight()) == Some(t)
    });
    Ok(if entered_but_lost { Some(0.0) } else { None })
}

/// Mean standing density over trains departing `a` during `t`:
/// `max(on_board - seats, 0) / floor_area` on the segment leaving `a`.
pub fn crowding_density(
    assignment: &AssignmentResult,
    topo: &crate::data::Topology,
    a: &StationId,
    d: NaiveDate,
    t: usize,
) -> Option<f64> {
    let a_idx = topo.station_idx(a)?;
    let grid = &topo.grid;
    let mut values: Vec<f64> = Vec::new();
    for load in &assignment.loads {
        for (si, seg) in load.segments.iter().enumerate() {
            if seg.from == a_idx
                && seg.departure.date() == d
                && grid.interval_of_sec(seg.departure.time().num_seconds_from_midnight()) == Some(t)
            {
                values.push(load.density(si));
            }
        }
    }
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Build the full panel in one pass over the tables.
///
/// Values are accumulated per cell and reduced in a sorted order, so the
/// result does not depend on input row order.
pub fn build_panel(
    dataset: &Dataset,
    graph: &NetworkGraph,
    assignment: &AssignmentResult,
) -> Result<OutcomePanel> {
    let topo = &dataset.topology;
    let grid = &topo.grid;
    let stations: Vec<StationId> = topo.stations.iter().map(|s| s.id.clone()).collect();
    let days: Vec<NaiveDate> = dataset.calendar.days().iter().map(|d| d.date).collect();
    let mut panel = OutcomePanel::new(stations, days, grid.len());

    let a_len = panel.n_stations();
    let d_len = panel.n_days();
    let t_len = panel.t_len;
    let cell = |a: usize, d: usize, t: usize| (a * d_len + d) * t_len + (t - 1);

    let mut entries = vec![0u64; a_len * d_len * t_len];
    let mut exits = vec![0u64; a_len * d_len * t_len];
    let mut jt: Vec<Vec<f64>> = vec![Vec::new(); a_len * d_len * t_len];
    let mut speed: Vec<Vec<f64>> = vec![Vec::new(); a_len * d_len * t_len];
    let mut density: Vec<Vec<f64>> = vec![Vec::new(); a_len * d_len * t_len];
    let mut abandoned = vec![0u64; a_len * d_len * t_len];

    for tr in &dataset.trips {
        let o = topo.station_idx(&tr.origin).expect("validated");
        let dd = topo.station_idx(&tr.dest).expect("validated");
        let day_in = panel.day_idx(tr.tap_in.date()).expect("trip day in calendar");
        let t_in = grid
            .interval_of_sec(tr.tap_in.time().num_seconds_from_midnight())
            .expect("validated tap_in");
        let c_in = cell(o, day_in, t_in);
        entries[c_in] += 1;
        jt[c_in].push(tr.journey_minutes());
        let km = graph.shortest_distance(o, dd)?;
        speed[c_in].push(km / (tr.journey_minutes() / 60.0));

        // Exits keyed on tap-out; trips ending outside service hours or on a
        // day not in the calendar contribute no exit.
        if let Some(day_out) = panel.day_idx(tr.tap_out.date()) {
            if let Some(t_out) =
                grid.interval_of_sec(tr.tap_out.time().num_seconds_from_midnight())
            {
                exits[cell(dd, day_out, t_out)] += 1;
            }
        }
    }

    for ab in &dataset.abandonments {
        let o = match topo.station_idx(&ab.origin) {
            Some(o) => o,
            None => continue,
        };
        let Some(day) = panel.day_idx(ab.tap_in.date()) else { continue };
        let Some(t) = grid.interval_of_sec(ab.tap_in.time().num_seconds_from_midnight()) else {
            continue;
        };
        abandoned[cell(o, day, t)] += 1;
    }

    for load in &assignment.loads {
        for (si, seg) in load.segments.iter().enumerate() {
            let Some(day) = panel.day_idx(seg.departure.date()) else { continue };
            let Some(t) =
                grid.interval_of_sec(seg.departure.time().num_seconds_from_midnight())
            else {
                continue;
            };
            density[cell(seg.from, day, t)].push(load.density(si));
        }
    }

    let sorted_mean = |mut v: Vec<f64>| -> Option<f64> {
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(v.into_iter().sum::<f64>() / n as f64)
    };

    for a in 0..a_len {
        for d in 0..d_len {
            for t in 1..=t_len {
                let c = cell(a, d, t);
                panel.set(a, d, t, Outcome::EntryRidership, Some(entries[c] as f64));
                panel.set(a, d, t, Outcome::ExitRidership, Some(exits[c] as f64));
                panel.set(a, d, t, Outcome::AvgJourneyTime, sorted_mean(std::mem::take(&mut jt[c])));
                let sp = match sorted_mean(std::mem::take(&mut speed[c])) {
                    Some(v) => Some(v),
                    None if abandoned[c] > 0 => Some(0.0),
                    None => None,
                };
                panel.set(a, d, t, Outcome::AvgSpeed, sp);
                panel.set(
                    a,
                    d,
                    t,
                    Outcome::CrowdingDensity,
                    sorted_mean(std::mem::take(&mut density[c])),
                );
            }
        }
    }
    Ok(panel)
}

/// Convenience wrapper: run assignment, then build the panel.
pub fn build_panel_full(
    dataset: &Dataset,
    graph: &NetworkGraph,
    cfg: AssignConfig,
) -> Result<(OutcomePanel, AssignmentResult)> {
    let assignment = assign_passengers(&dataset.trips, &dataset.avl, graph, &dataset.topology, cfg)?;
    let panel = build_panel(dataset, graph, &assignment)?;
    Ok((panel, assignment))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{
        Calendar, EdgeSpec, EventTable, IntervalGrid, LineId, LineSpec, RollingStock, StationSpec,
        Topology, WeatherTable,
    };
    use chrono::NaiveDateTime;

    fn ts(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S").unwrap()
    }

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn topo() -> Topology {
        let stations = ["A", "B", "C"]
            .iter()
            .map(|s| StationSpec {
                id: (*s).into(),
                name: s.to_string(),
                lat: 0.0,
                lon: 0.0,
            })
            .collect();
        Topology::new(
            stations,
            vec![
                EdgeSpec {
                    from: "A".into(),
                    to: "B".into(),
                    line: "L1".into(),
                    km: 3.0,
                },
                EdgeSpec {
                    from: "B".into(),
                    to: "C".into(),
                    line: "L1".into(),
                    km: 3.0,
                },
            ],
            vec![LineSpec {
                id: "L1".into(),
                stations: vec!["A".into(), "B".into(), "C".into()],
            }],
            vec![RollingStock {
                line: "L1".into(),
                seats: 300,
                floor_area_m2: 100.0,
            }],
            IntervalGrid::standard(),
        )
        .unwrap()
    }

    fn trip(o: &str, d: &str, tap_in: &str, tap_out: &str) -> TripRecord {
        TripRecord {
            card_id: "c".into(),
            origin: o.into(),
            dest: d.into(),
            tap_in: ts(tap_in),
            tap_out: ts(tap_out),
        }
    }

    #[test]
    fn ridership_separates_directions() {
        let grid = IntervalGrid::standard();
        let d = date("2019-03-11");
        // Three trips enter A and two exit A in interval 33 (14:00-14:15).
        let trips = vec![
            trip("A", "B", "2019-03-11T14:01:00", "2019-03-11T14:20:00"),
            trip("A", "C", "2019-03-11T14:05:00", "2019-03-11T14:30:00"),
            trip("A", "B", "2019-03-11T14:14:59", "2019-03-11T14:31:00"),
            trip("B", "A", "2019-03-11T13:50:00", "2019-03-11T14:02:00"),
            trip("C", "A", "2019-03-11T13:55:00", "2019-03-11T14:10:00"),
        ];
        let t = grid.interval_of(ts("2019-03-11T14:00:00")).unwrap();
        assert_eq!(entry_ridership(&trips, &grid, &"A".into(), d, t), 3);
        assert_eq!(exit_ridership(&trips, &grid, &"A".into(), d, t), 2);
        assert_eq!(entry_ridership(&trips, &grid, &"A".into(), d, t + 1), 0);
    }

    #[test]
    fn journey_time_means() {
        let grid = IntervalGrid::standard();
        let d = date("2019-03-11");
        let trips = vec![
            trip("A", "B", "2019-03-11T09:00:00", "2019-03-11T09:10:00"),
            trip("A", "C", "2019-03-11T09:05:00", "2019-03-11T09:25:00"),
        ];
        let t = grid.interval_of(ts("2019-03-11T09:00:00")).unwrap();
        assert_eq!(avg_journey_time(&trips, &grid, &"A".into(), d, t), Some(15.0));
        assert_eq!(avg_journey_time(&trips, &grid, &"A".into(), d, t + 1), None);
        let one = vec![trip("A", "B", "2019-03-11T09:00:00", "2019-03-11T09:25:00")];
        assert_eq!(avg_journey_time(&one, &grid, &"A".into(), d, t), Some(25.0));
    }

    #[test]
    fn speed_is_distance_over_time() {
        let topo = topo();
        let graph = NetworkGraph::build(&topo).unwrap();
        let d = date("2019-03-11");
        // 6 km in 15 minutes -> 24 km/h.
        let trips = vec![trip("A", "C", "2019-03-11T09:00:00", "2019-03-11T09:15:00")];
        let t = topo.grid.interval_of(ts("2019-03-11T09:00:00")).unwrap();
        let v = avg_speed(&trips, &graph, &topo, &[], &"A".into(), d, t).unwrap();
        assert_eq!(v, Some(24.0));
    }

    #[test]
    fn fully_closed_station_has_zero_speed() {
        let topo = topo();
        let graph = NetworkGraph::build(&topo).unwrap();
        let d = date("2019-03-11");
        let abandonments = vec![AbandonmentRecord {
            card_id: "c".into(),
            origin: "A".into(),
            tap_in: ts("2019-03-11T09:00:30"),
            station: "A".into(),
            time: ts("2019-03-11T09:20:30"),
        }];
        let t = topo.grid.interval_of(ts("2019-03-11T09:00:00")).unwrap();
        let v = avg_speed(&[], &graph, &topo, &abandonments, &"A".into(), d, t).unwrap();
        assert_eq!(v, Some(0.0));
        // Without the label the cell is simply missing.
        let v = avg_speed(&[], &graph, &topo, &[], &"A".into(), d, t).unwrap();
        assert_eq!(v, None);
    }

    fn dataset_with(trips: Vec<TripRecord>, avl: Vec<crate::data::AvlRecord>) -> Dataset {
        Dataset {
            trips,
            avl,
            incidents: vec![],
            weather: WeatherTable::new(&[]),
            events: EventTable::new(&[]),
            topology: topo(),
            calendar: Calendar::derive([date("2019-03-11")]),
            abandonments: vec![],
        }
    }

    fn avl_event(train: &str, station: &str, event: &str, time: &str) -> crate::data::AvlRecord {
        crate::data::AvlRecord {
            train_id: train.into(),
            service_id: train.into(),
            station: station.into(),
            line: LineId::new("L1"),
            direction: crate::data::Direction::Up,
            event: crate::data::AvlEvent::parse(event).unwrap(),
            time: ts(time),
        }
    }

    #[test]
    fn crowding_density_formula_fixtures() {
        // 350 aboard, 300 seats, 100 m^2 -> 0.5; at or below seats -> 0.
        let topo = topo();
        let graph = NetworkGraph::build(&topo).unwrap();
        let avl = vec![
            avl_event("T1", "A", "departure", "2019-03-11T09:00:00"),
            avl_event("T1", "B", "arrival", "2019-03-11T09:04:30"),
            avl_event("T1", "B", "departure", "2019-03-11T09:05:00"),
            avl_event("T1", "C", "arrival", "2019-03-11T09:09:30"),
        ];
        let mut trips: Vec<TripRecord> = (0..350)
            .map(|i| TripRecord {
                card_id: format!("c{i}"),
                origin: "A".into(),
                dest: "B".into(),
                tap_in: ts("2019-03-11T08:55:00"),
                tap_out: ts("2019-03-11T09:05:30"),
            })
            .collect();
        trips.extend((0..50).map(|i| TripRecord {
            card_id: format!("d{i}"),
            origin: "B".into(),
            dest: "C".into(),
            tap_in: ts("2019-03-11T09:01:00"),
            tap_out: ts("2019-03-11T09:10:30"),
        }));
        let ds = dataset_with(trips, avl);
        let assignment =
            assign_passengers(&ds.trips, &ds.avl, &graph, &ds.topology, AssignConfig::default())
                .unwrap();
        let d = date("2019-03-11");
        let t = topo.grid.interval_of(ts("2019-03-11T09:00:00")).unwrap();
        // Segment A->B carries 350: density (350-300)/100 = 0.5.
        assert_eq!(
            crowding_density(&assignment, &ds.topology, &"A".into(), d, t),
            Some(0.5)
        );
        // Segment B->C carries 50 standee-free passengers: density 0.
        assert_eq!(
            crowding_density(&assignment, &ds.topology, &"B".into(), d, t),
            Some(0.0)
        );
        assert_eq!(crowding_density(&assignment, &ds.topology, &"C".into(), d, t), None);
    }

    #[test]
    fn panel_matches_per_measure_oracles_and_is_order_independent() {
        let topo = topo();
        let graph = NetworkGraph::build(&topo).unwrap();
        let avl = vec![
            avl_event("T1", "A", "departure", "2019-03-11T09:00:00"),
            avl_event("T1", "B", "arrival", "2019-03-11T09:04:30"),
            avl_event("T1", "B", "departure", "2019-03-11T09:05:00"),
            avl_event("T1", "C", "arrival", "2019-03-11T09:09:30"),
        ];
        let trips = vec![
            trip("A", "B", "2019-03-11T08:57:00", "2019-03-11T09:04:40"),
            trip("A", "C", "2019-03-11T08:58:00", "2019-03-11T09:09:40"),
            trip("B", "C", "2019-03-11T09:01:00", "2019-03-11T09:09:50"),
        ];
        let ds = dataset_with(trips.clone(), avl.clone());
        let (panel, assignment) =
            build_panel_full(&ds, &graph, AssignConfig::default()).unwrap();

        let d = date("2019-03-11");
        let a = panel.station_idx(&"A".into()).unwrap();
        let b = panel.station_idx(&"B".into()).unwrap();
        let dd = panel.day_idx(d).unwrap();
        let grid = &topo.grid;
        for t in [12, 13, 14] {
            assert_eq!(
                panel.get(a, dd, t, Outcome::EntryRidership),
                Some(entry_ridership(&ds.trips, grid, &"A".into(), d, t) as f64)
            );
            assert_eq!(
                panel.get(b, dd, t, Outcome::ExitRidership),
                Some(exit_ridership(&ds.trips, grid, &"B".into(), d, t) as f64)
            );
            assert_eq!(
                panel.get(a, dd, t, Outcome::AvgJourneyTime),
                avg_journey_time(&ds.trips, grid, &"A".into(), d, t)
            );
            assert_eq!(
                panel.get(a, dd, t, Outcome::AvgSpeed),
                avg_speed(&ds.trips, &graph, &topo, &[], &"A".into(), d, t).unwrap()
            );
            assert_eq!(
                panel.get(a, dd, t, Outcome::CrowdingDensity),
                crowding_density(&assignment, &ds.topology, &"A".into(), d, t)
            );
        }

        // Shuffled input rows produce a bit-identical panel.
        let mut shuffled = ds.clone();
        shuffled.trips.reverse();
        shuffled.avl.reverse();
        let (panel2, _) = build_panel_full(&shuffled, &graph, AssignConfig::default()).unwrap();
        for m in Outcome::ALL {
            for t in 1..=panel.t_len {
                for st in 0..panel.n_stations() {
                    assert_eq!(panel.get(st, dd, t, m), panel2.get(st, dd, t, m));
                }
            }
        }
    }

    #[test]
    fn empty_trips_yield_zero_ridership_and_missing_means() {
        let topo = topo();
        let graph = NetworkGraph::build(&topo).unwrap();
        let ds = dataset_with(vec![], vec![]);
        let mut ds = ds;
        ds.calendar = Calendar::derive([date("2019-03-11")]);
        let (panel, _) = build_panel_full(&ds, &graph, AssignConfig::default()).unwrap();
        let dd = panel.day_idx(date("2019-03-11")).unwrap();
        assert_eq!(panel.get(0, dd, 10, Outcome::EntryRidership), Some(0.0));
        assert_eq!(panel.get(0, dd, 10, Outcome::ExitRidership), Some(0.0));
        assert_eq!(panel.get(0, dd, 10, Outcome::AvgJourneyTime), None);
        assert_eq!(panel.get(0, dd, 10, Outcome::AvgSpeed), None);
        assert_eq!(panel.get(0, dd, 10, Outcome::CrowdingDensity), None);
    }

    #[test]
    fn entry_totals_conserve_trip_count() {
        let topo = topo();
        let graph = NetworkGraph::build(&topo).unwrap();
        let trips = vec![
            trip("A", "B", "2019-03-11T08:57:00", "2019-03-11T09:04:40"),
            trip("B", "C", "2019-03-11T12:00:00", "2019-03-11T12:09:00"),
            trip("C", "A", "2019-03-11T23:50:00", "2019-03-12T00:08:00"),
        ];
        let ds = dataset_with(trips, vec![]);
        let (panel, _) = build_panel_full(&ds, &graph, AssignConfig::default()).unwrap();
        let dd = panel.day_idx(date("2019-03-11")).unwrap();
        let mut entries = 0.0;
        let mut exits = 0.0;
        for a in 0..panel.n_stations() {
            for t in 1..=panel.t_len {
                entries += panel.get(a, dd, t, Outcome::EntryRidership).unwrap();
                exits += panel.get(a, dd, t, Outcome::ExitRidership).unwrap();
            }
        }
        assert_eq!(entries, 3.0);
        // The trip ending past 24:00 contributes no exit cell.
        assert_eq!(exits, 2.0);
    }
}
