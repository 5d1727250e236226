use std::collections::BTreeMap;

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};

use super::graph::{NetworkGraph, PathLeg};
use crate::data::{AvlEvent, AvlRecord, Direction, Topology, TripRecord};
use crate::Result;

/// One stop of a train run, in travel order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunStop {
    pub station: usize,
    pub arrival: Option<NaiveDateTime>,
    pub departure: Option<NaiveDateTime>,
}

/// One directional run of a train, reconstructed from AVL events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainRun {
    pub train_id: String,
    pub service_id: String,
    pub date: NaiveDate,
    pub line: usize,
    pub direction: Direction,
    pub stops: Vec<RunStop>,
}

impl TrainRun {
    pub fn stop_index(&self, station: usize) -> Option<usize> {
        self.stops.iter().position(|s| s.station == station)
    }
}

/// Group AVL events into runs keyed by (train, service, date) and order each
/// run's stops by time.
pub fn extract_runs(avl: &[AvlRecord], topo: &Topology) -> Vec<TrainRun> {
    let mut groups: BTreeMap<(String, String, NaiveDate), Vec<usize>> = BTreeMap::new();
    for (i, r) in avl.iter().enumerate() {
        groups
            .entry((r.train_id.clone(), r.service_id.clone(), r.time.date()))
            .or_default()
            .push(i);
    }
    let mut runs = Vec::with_capacity(groups.len());
    for ((train_id, service_id, date), mut idxs) in groups {
        idxs.sort_by_key(|&i| (avl[i].time, matches!(avl[i].event, AvlEvent::Departure), i));
        let first = &avl[idxs[0]];
        let line = match topo.line_idx(&first.line) {
            Some(l) => l,
            None => continue,
        };
        let direction = first.direction;
        let mut stops: Vec<RunStop> = Vec::new();
        for &i in &idxs {
            let r = &avl[i];
            let station = match topo.station_idx(&r.station) {
                Some(s) => s,
                None => continue,
            };
            if stops.last().map(|s| s.station) != Some(station) {
                stops.push(RunStop {
                    station,
                    arrival: None,
                    departure: None,
                });
            }
            let stop = stops.last_mut().unwrap();
            match r.event {
                AvlEvent::Arrival => stop.arrival = Some(r.time),
                AvlEvent::Departure => stop.departure = Some(r.time),
            }
        }
        runs.push(TrainRun {
            train_id,
            service_id,
            date,
            line,
            direction,
            stops,
        });
    }
    runs
}

/// On-board count per inter-station segment of one run.
#[derive(Debug, Clone)]
pub struct LoadSegment {
    pub from: usize,
    pub to: usize,
    pub departure: NaiveDateTime,
    pub arrival: Option<NaiveDateTime>,
    pub on_board: u32,
}

/// Per-run passenger load with the rolling stock needed by the crowding
/// measure.
#[derive(Debug, Clone)]
pub struct TrainLoad {
    pub run: usize,
    pub seats: f64,
    pub floor_area_m2: f64,
    pub segments: Vec<LoadSegment>,
}

impl TrainLoad {
    /// Standing density on the segment departing the given stop index.
    pub fn density(&self, segment: usize) -> f64 {
        let standees = (self.segments[segment].on_board as f64 - self.seats).max(0.0);
        standees / self.floor_area_m2
    }
}

/// One ridden leg of an assigned trip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LegAssignment {
    pub run: usize,
    pub board: usize,
    pub alight: usize,
    pub board_departure: NaiveDateTime,
    pub alight_arrival: NaiveDateTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripAssignment {
    pub legs: Vec<LegAssignment>,
}

/// Gate-to-platform and transfer walking times.
#[derive(Debug, Clone, Copy)]
pub struct AssignConfig {
    pub access_secs: i64,
    pub transfer_secs: i64,
}

impl Default for AssignConfig {
    fn default() -> Self {
        AssignConfig {
            access_secs: 0,
            transfer_secs: 0,
        }
    }
}

/// Output of passenger-to-train assignment.
#[derive(Debug, Clone)]
pub struct AssignmentResult {
    pub runs: Vec<TrainRun>,
    pub loads: Vec<TrainLoad>,
    /// Parallel to the trips slice; `None` when no feasible train existed.
    pub assignments: Vec<Option<TripAssignment>>,
    /// (trip index, reason) for every unassigned trip.
    pub unassigned: Vec<(usize, String)>,
}

/// Assign each trip to train legs along its shortest path.
///
/// For every leg the passenger boards the earliest run departing the boarding
/// station at or after their platform-arrival time: tap-in plus access time
/// for the first leg, the previous train's arrival plus transfer time for
/// later legs.
pub fn assign_passengers(
    trips: &[TripRecord],
    avl: &[AvlRecord],
    graph: &NetworkGraph,
    topo: &Topology,
    cfg: AssignConfig,
) -> Result<AssignmentResult> {
    let runs = extract_runs(avl, topo);

    // (line, direction, station) -> departures sorted by time.
    let mut departures: BTreeMap<(usize, Direction, usize), Vec<(NaiveDateTime, usize, usize)>> =
        BTreeMap::new();
    for (ri, run) in runs.iter().enumerate() {
        for (si, stop) in run.stops.iter().enumerate() {
            if let Some(dep) = stop.departure {
                departures
                    .entry((run.line, run.direction, stop.station))
                    .or_default()
                    .push((dep, ri, si));
            }
        }
    }
    for v in departures.values_mut() {
        v.sort();
    }

    // Shortest-path legs per OD pair, computed once.
    let mut leg_cache: BTreeMap<(usize, usize), Vec<PathLeg>> = BTreeMap::new();

    let mut boardings: Vec<Vec<(usize, usize)>> = vec![Vec::new(); runs.len()];
    let mut assignments: Vec<Option<TripAssignment>> = Vec::with_capacity(trips.len());
    let mut unassigned: Vec<(usize, String)> = Vec::new();

    'trips: for (ti, trip) in trips.iter().enumerate() {
        let o = topo.station_idx(&trip.origin).expect("validated origin");
        let d = topo.station_idx(&trip.dest).expect("validated destination");
        let legs = match leg_cache.entry((o, d)) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(graph.path_legs(topo, o, d)?)
            }
        };

        let mut ready = trip.tap_in + TimeDelta::seconds(cfg.access_secs);
        let mut rode: Vec<LegAssignment> = Vec::new();
        for (li, leg) in legs.iter().enumerate() {
            let Some(cands) = departures.get(&(leg.line, leg.direction, leg.board())) else {
                assignments.push(None);
                unassigned.push((ti, format!("no service at station index {}", leg.board())));
                continue 'trips;
            };
            let start = cands.partition_point(|(dep, _, _)| *dep < ready);
            let mut chosen = None;
            for &(dep, ri, si) in &cands[start..] {
                if dep.date() != trip.tap_in.date() {
                    break;
                }
                let run = &runs[ri];
                let Some(ai) = run.stop_index(leg.alight()) else { continue };
                if ai <= si {
                    continue;
                }
                let Some(arr) = run.stops[ai].arrival else { continue };
                chosen = Some(LegAssignment {
                    run: ri,
                    board: si,
                    alight: ai,
                    board_departure: dep,
                    alight_arrival: arr,
                });
                break;
            }
            let Some(leg_assignment) = chosen else {
                assignments.push(None);
                unassigned.push((ti, format!("no feasible train for leg {li} after {ready}")));
                continue 'trips;
            };
            ready = leg_assignment.alight_arrival + TimeDelta::seconds(cfg.transfer_secs);
            rode.push(leg_assignment);
        }
        for leg in &rode {
            boardings[leg.run].push((leg.board, leg.alight));
        }
        assignments.push(Some(TripAssignment { legs: rode }));
    }

    // Segment-level on-board counts via boarding/alighting difference arrays.
    let mut loads = Vec::with_capacity(runs.len());
    for (ri, run) in runs.iter().enumerate() {
        let stock = topo
            .rolling_stock_for(&topo.lines[run.line].id)
            .ok_or_else(|| crate::Error::Topology(format!(
                "no rolling stock for line {}",
                topo.lines[run.line].id
            )))?;
        let mut delta = vec![0i64; run.stops.len() + 1];
        for &(board, alight) in &boardings[ri] {
            delta[board] += 1;
            delta[alight] -= 1;
        }
        let mut on_board = 0i64;
        let mut segments = Vec::new();
        for si in 0..run.stops.len().saturating_sub(1) {
            on_board += delta[si];
            debug_assert!(on_board >= 0);
            if let Some(dep) = run.stops[si].departure {
                segments.push(LoadSegment {
                    from: run.stops[si].station,
                    to: run.stops[si + 1].station,
                    departure: dep,
                    arrival: run.stops[si + 1].arrival,
                    on_board: on_board as u32,
                });
            }
        }
        loads.push(TrainLoad {
            run: ri,
            seats: stock.seats as f64,
            floor_area_m2: stock.floor_area_m2,
            segments,
        });
    }

    Ok(AssignmentResult {
        runs,
        loads,
        assignments,
        unassigned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{EdgeSpec, IntervalGrid, LineSpec, RollingStock, StationSpec, StationId, LineId};

    fn ts(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S").unwrap()
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
                    km: 2.0,
                },
                EdgeSpec {
                    from: "B".into(),
                    to: "C".into(),
                    line: "L1".into(),
                    km: 2.0,
                },
            ],
            vec![LineSpec {
                id: "L1".into(),
                stations: vec!["A".into(), "B".into(), "C".into()],
            }],
            vec![RollingStock {
                line: "L1".into(),
                seats: 40,
                floor_area_m2: 60.0,
            }],
            IntervalGrid::standard(),
        )
        .unwrap()
    }

    fn avl_run(train: &str, times: &[(&str, &str, &str)]) -> Vec<AvlRecord> {
        times
            .iter()
            .map(|(station, event, time)| AvlRecord {
                train_id: train.to_string(),
                service_id: train.to_string(),
                station: StationId::new(*station),
                line: LineId::new("L1"),
                direction: Direction::Up,
                event: AvlEvent::parse(event).unwrap(),
                time: ts(time),
            })
            .collect()
    }

    fn trip(card: &str, o: &str, d: &str, tap_in: &str, tap_out: &str) -> TripRecord {
        TripRecord {
            card_id: card.to_string(),
            origin: o.into(),
            dest: d.into(),
            tap_in: ts(tap_in),
            tap_out: ts(tap_out),
        }
    }

    fn full_run(train: &str, t0: &str, t1: &str, t2: &str, t3: &str) -> Vec<AvlRecord> {
        avl_run(
            train,
            &[
                ("A", "departure", t0),
                ("B", "arrival", t1),
                ("B", "departure", t2),
                ("C", "arrival", t3),
            ],
        )
    }

    #[test]
    fn single_passenger_rides_whole_path() {
        let topo = topo();
        let graph = NetworkGraph::build(&topo).unwrap();
        let avl = full_run(
            "T1",
            "2019-03-11T08:00:00",
            "2019-03-11T08:03:00",
            "2019-03-11T08:03:30",
            "2019-03-11T08:06:30",
        );
        let trips = vec![trip("c1", "A", "C", "2019-03-11T07:55:00", "2019-03-11T08:07:00")];
        let res = assign_passengers(&trips, &avl, &graph, &topo, AssignConfig::default()).unwrap();
        assert!(res.unassigned.is_empty());
        let load = &res.loads[0];
        assert_eq!(load.segments.len(), 2);
        assert!(load.segments.iter().all(|s| s.on_board == 1));
    }

    #[test]
    fn tap_in_just_after_departure_takes_next_train() {
        let topo = topo();
        let graph = NetworkGraph::build(&topo).unwrap();
        let mut avl = full_run(
            "T1",
            "2019-03-11T08:00:00",
            "2019-03-11T08:03:00",
            "2019-03-11T08:03:30",
            "2019-03-11T08:06:30",
        );
        avl.extend(full_run(
            "T2",
            "2019-03-11T08:05:00",
            "2019-03-11T08:08:00",
            "2019-03-11T08:08:30",
            "2019-03-11T08:11:30",
        ));
        let trips = vec![trip("c1", "A", "C", "2019-03-11T08:00:01", "2019-03-11T08:12:00")];
        let res = assign_passengers(&trips, &avl, &graph, &topo, AssignConfig::default()).unwrap();
        let legs = &res.assignments[0].as_ref().unwrap().legs;
        assert_eq!(legs[0].board_departure, ts("2019-03-11T08:05:00"));
    }

    #[test]
    fn boarding_exactly_at_departure_is_feasible() {
        let topo = topo();
        let graph = NetworkGraph::build(&topo).unwrap();
        let avl = full_run(
            "T1",
            "2019-03-11T08:00:00",
            "2019-03-11T08:03:00",
            "2019-03-11T08:03:30",
            "2019-03-11T08:06:30",
        );
        let trips = vec![trip("c1", "A", "C", "2019-03-11T08:00:00", "2019-03-11T08:07:00")];
        let res = assign_passengers(&trips, &avl, &graph, &topo, AssignConfig::default()).unwrap();
        assert_eq!(
            res.assignments[0].as_ref().unwrap().legs[0].board_departure,
            ts("2019-03-11T08:00:00")
        );
    }

    #[test]
    fn infeasible_trip_is_logged_and_excluded() {
        let topo = topo();
        let graph = NetworkGraph::build(&topo).unwrap();
        let avl = full_run(
            "T1",
            "2019-03-11T08:00:00",
            "2019-03-11T08:03:00",
            "2019-03-11T08:03:30",
            "2019-03-11T08:06:30",
        );
        let trips = vec![trip("c1", "A", "C", "2019-03-11T09:00:00", "2019-03-11T09:30:00")];
        let res = assign_passengers(&trips, &avl, &graph, &topo, AssignConfig::default()).unwrap();
        assert!(res.assignments[0].is_none());
        assert_eq!(res.unassigned.len(), 1);
        assert!(res.loads[0].segments.iter().all(|s| s.on_board == 0));
    }

    #[test]
    fn passenger_conservation_boardings_equal_alightings() {
        let topo = topo();
        let graph = NetworkGraph::build(&topo).unwrap();
        let avl = full_run(
            "T1",
            "2019-03-11T08:00:00",
            "2019-03-11T08:03:00",
            "2019-03-11T08:03:30",
            "2019-03-11T08:06:30",
        );
        let trips = vec![
            trip("c1", "A", "B", "2019-03-11T07:55:00", "2019-03-11T08:04:00"),
            trip("c2", "A", "C", "2019-03-11T07:56:00", "2019-03-11T08:07:00"),
            trip("c3", "B", "C", "2019-03-11T08:01:00", "2019-03-11T08:07:30"),
        ];
        let res = assign_passengers(&trips, &avl, &graph, &topo, AssignConfig::default()).unwrap();
        // After the final alighting the train must be empty again.
        let load = &res.loads[0];
        assert_eq!(load.segments[0].on_board, 2); // c1 + c2 aboard A->B
        assert_eq!(load.segments[1].on_board, 2); // c2 + c3 aboard B->C
        let boards: i64 = 2 + 1;
        let alights: i64 = 1 + 2;
        assert_eq!(boards, alights);
    }
}
