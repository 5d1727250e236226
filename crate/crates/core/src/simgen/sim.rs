use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate, NaiveDateTime, NaiveTime, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{parse_clock_sec, InjectionSpec, SimSpec};
use crate::data::{
    AbandonmentRecord, AvlEvent, AvlRecord, Calendar, Dataset, DayInfo, Direction, EventKind,
    EventRecord, EventTable, IncidentLogRecord, IncidentType, StationId, Topology, TripRecord,
    WeatherRecord, WeatherTable,
};
use crate::detect::{treatment_start_interval, DisruptionRecord, DisruptionSource, ThresholdConfig};
use crate::network::{AssignConfig, NetworkGraph};
use crate::outcomes::{build_panel_full, Outcome};
use crate::seed::mix;
use crate::{Error, Result};

/// Ground-truth record of which train carried a passenger leg.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub card_id: String,
    pub train_id: String,
    pub board: StationId,
    pub alight: StationId,
    pub board_time: NaiveDateTime,
    pub alight_time: NaiveDateTime,
}

/// Everything one simulated service day produces.
#[derive(Debug, Clone, PartialEq)]
pub struct DayOutput {
    pub date: NaiveDate,
    pub trips: Vec<TripRecord>,
    pub avl: Vec<AvlRecord>,
    pub abandonments: Vec<AbandonmentRecord>,
    pub manifests: Vec<ManifestRow>,
    pub weather: Vec<WeatherRecord>,
    pub events: Vec<EventRecord>,
    pub incident: Option<IncidentLogRecord>,
}

struct SimStop {
    station: usize,
    arrival: Option<i64>,
    departure: Option<i64>,
}

struct SimRun {
    train_id: String,
    line: usize,
    direction: Direction,
    stops: Vec<SimStop>,
}

struct DaySchedule {
    runs: Vec<SimRun>,
    /// (line, direction, station) -> (departure sec, run, stop) sorted.
    departures: BTreeMap<(usize, Direction, usize), Vec<(i64, usize, usize)>>,
}

fn to_datetime(date: NaiveDate, sec: i64) -> NaiveDateTime {
    let (date, sec) = if sec >= 86_400 {
        (date.succ_opt().expect("date range"), sec - 86_400)
    } else {
        (date, sec)
    };
    date.and_time(NaiveTime::from_num_seconds_from_midnight_opt(sec as u32, 0).unwrap())
}

fn build_schedule(
    spec: &SimSpec,
    topo: &Topology,
    injection: Option<(&InjectionSpec, usize, i64, i64)>,
) -> Result<DaySchedule> {
    let mut runs: Vec<SimRun> = Vec::new();
    for (line_idx, line) in spec.lines.iter().enumerate() {
        let station_idx: Vec<usize> = line
            .stations
            .iter()
            .map(|s| topo.station_idx(&StationId::new(s.clone())).expect("validated"))
            .collect();
        let rides: Vec<i64> = line
            .edges_km
            .iter()
            .map(|km| (km / line.speed_kmh * 3600.0).round() as i64)
            .collect();
        let headway = (line.headway_min * 60.0).round() as i64;
        let first = parse_clock_sec(&line.first_dispatch)?;
        let last = parse_clock_sec(&line.last_dispatch)?;
        for direction in [Direction::Up, Direction::Down] {
            let (order, ride_order): (Vec<usize>, Vec<i64>) = match direction {
                Direction::Up => (station_idx.clone(), rides.clone()),
                Direction::Down => (
                    station_idx.iter().rev().copied().collect(),
                    rides.iter().rev().copied().collect(),
                ),
            };
            let mut seq = 0usize;
            let mut dispatch = first;
            while dispatch <= last {
                let dir_char = match direction {
                    Direction::Up => 'U',
                    Direction::Down => 'D',
                };
                let mut stops = Vec::with_capacity(order.len());
                stops.push(SimStop {
                    station: order[0],
                    arrival: None,
                    departure: Some(dispatch),
                });
                let mut clock = dispatch;
                for (i, &station) in order.iter().enumerate().skip(1) {
                    clock += ride_order[i - 1];
                    let arrival = clock;
                    let departure = if i + 1 < order.len() {
                        clock += line.dwell_secs as i64;
                        Some(clock)
                    } else {
                        None
                    };
                    stops.push(SimStop {
                        station,
                        arrival: Some(arrival),
                        departure,
                    });
                }
                runs.push(SimRun {
                    train_id: format!("{}-{}{:03}", line.id, dir_char, seq),
                    line: line_idx,
                    direction,
                    stops,
                });
                seq += 1;
                dispatch += headway;
            }
        }
    }

    // Injected halt: the station admits no train movement during the window;
    // held trains release one per separation interval afterwards, and
    // post-window trains queue behind the released backlog.
    if let Some((inj, blocked, start_sec, end_sec)) = injection {
        let sep = inj.release_separation_secs.max(1) as i64;
        for direction in [Direction::Up, Direction::Down] {
            let mut affected: Vec<(i64, usize, usize)> = Vec::new(); // (nominal, run, stop)
            for (ri, run) in runs.iter().enumerate() {
                if run.direction != direction {
                    continue;
                }
                if let Some(si) = run.stops.iter().position(|s| s.station == blocked) {
                    let stop = &run.stops[si];
                    let nominal = stop.arrival.or(stop.departure).expect("stop has a time");
                    affected.push((nominal, ri, si));
                }
            }
            affected.sort_unstable();
            let mut next_free = end_sec;
            for (nominal, ri, si) in affected {
                if nominal < start_sec {
                    // Fully served before the halt; but a dwell reaching into
                    // the window still pins the departure.
                    let dep = runs[ri].stops[si].departure;
                    if let Some(dep) = dep {
                        if dep >= start_sec && dep < end_sec {
                            let delay = next_free - dep;
                            next_free += sep;
                            shift_from(&mut runs[ri], si, delay, true);
                        }
                    }
                    continue;
                }
                let effective = nominal.max(next_free);
                if effective > nominal {
                    shift_from(&mut runs[ri], si, effective - nominal, false);
                }
                next_free = effective + sep;
            }
        }
    }

    let mut departures: BTreeMap<(usize, Direction, usize), Vec<(i64, usize, usize)>> =
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
        v.sort_unstable();
    }
    Ok(DaySchedule { runs, departures })
}

/// Shift a run's schedule by `delay` from stop `si` onward. With
/// `departure_only`, stop `si` keeps its arrival (the train is held in the
/// platform) and only its departure and later stops move.
fn shift_from(run: &mut SimRun, si: usize, delay: i64, departure_only: bool) {
    for (i, stop) in run.stops.iter_mut().enumerate().skip(si) {
        if i > si || !departure_only {
            if let Some(a) = stop.arrival.as_mut() {
                *a += delay;
            }
        }
        if let Some(d) = stop.departure.as_mut() {
            *d += delay;
        }
    }
}

struct DayContext {
    weekday_mult: f64,
    temp_base: f64,
    wind: f64,
    rain: f64,
    event_flags: [bool; 3],
}

fn draw_day_context(spec: &SimSpec, date: NaiveDate) -> DayContext {
    let day_num = date.num_days_from_ce() as u64;
    let mut weather_rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, day_num, 1, 0));
    let w = &spec.weather;
    let temp_base = weather_rng.random_range(w.temp_range_c.0..w.temp_range_c.1);
    let wind = weather_rng.random_range(w.wind_range_kmh.0..w.wind_range_kmh.1);
    let dry: f64 = weather_rng.random();
    let rain = if dry < w.dry_probability {
        0.0
    } else {
        weather_rng.random_range(0.0..w.rain_max_mmh)
    };
    let mut event_rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, day_num, 2, 0));
    let mut event_flags = [false; 3];
    for (i, flag) in event_flags.iter_mut().enumerate() {
        *flag = event_rng.random::<f64>() < spec.demand.event_prob[i];
    }
    let weekday_mult = match date.weekday() {
        Weekday::Mon => spec.demand.weekday_mult[0],
        Weekday::Tue => spec.demand.weekday_mult[1],
        Weekday::Wed => spec.demand.weekday_mult[2],
        Weekday::Thu => spec.demand.weekday_mult[3],
        Weekday::Fri => spec.demand.weekday_mult[4],
        _ => 1.0,
    };
    DayContext {
        weekday_mult,
        temp_base,
        wind,
        rain,
        event_flags,
    }
}

fn day_multiplier(spec: &SimSpec, ctx: &DayContext) -> f64 {
    let d = &spec.demand;
    let mut mult = ctx.weekday_mult
        * (1.0 + d.temp_coeff * (ctx.temp_base - d.temp_ref_c))
        * (1.0 + d.rain_coeff * ctx.rain)
        * (1.0 + d.wind_coeff * ctx.wind);
    for (i, &flag) in ctx.event_flags.iter().enumerate() {
        if flag {
            mult *= 1.0 + d.event_mult[i];
        }
    }
    mult.max(0.2)
}

struct Passenger {
    card_id: String,
    origin: usize,
    dest: usize,
    tap_in: i64,
}

fn share_line(topo: &Topology, a: usize, b: usize) -> bool {
    let ida = &topo.stations[a].id;
    let idb = &topo.stations[b].id;
    topo.lines
        .iter()
        .any(|l| l.stations.contains(ida) && l.stations.contains(idb))
}

fn od_weight(spec: &SimSpec, topo: &Topology, o: usize, d: usize) -> f64 {
    if o == d {
        return 0.0;
    }
    let demand = &spec.demand;
    let o_id = topo.stations[o].id.as_str();
    let d_id = topo.stations[d].id.as_str();
    if let Some(allowed) = demand.dest_origin_whitelist.get(d_id) {
        if !allowed.iter().any(|s| s == o_id) {
            return 0.0;
        }
    }
    let same = share_line(topo, o, d);
    if !same
        && (demand.isolated_stations.iter().any(|s| s == o_id)
            || demand.isolated_stations.iter().any(|s| s == d_id))
    {
        return 0.0;
    }
    let w = demand.origin_weights.get(o_id).copied().unwrap_or(0.0)
        * demand.dest_weights.get(d_id).copied().unwrap_or(0.0);
    if same {
        w
    } else {
        w * demand.cross_line_factor
    }
}

fn generate_passengers(
    spec: &SimSpec,
    topo: &Topology,
    date: NaiveDate,
    ctx: &DayContext,
) -> Result<Vec<Passenger>> {
    let day_num = date.num_days_from_ce() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, day_num, 3, 0));
    let grid = &topo.grid;
    let demand_end = parse_clock_sec(&spec.demand.demand_end)?;
    let day_mult = day_multiplier(spec, ctx);
    let n = topo.n_stations();

    let mut windows: Vec<(i64, i64, f64)> = Vec::new();
    for w in &spec.demand.profile {
        windows.push((parse_clock_sec(&w.from)?, parse_clock_sec(&w.to)?, w.mult));
    }
    let profile = |sec: i64| -> f64 {
        if sec >= demand_end {
            return 0.0;
        }
        for &(a, b, m) in &windows {
            if sec >= a && sec < b {
                return m;
            }
        }
        spec.demand.base_profile
    };

    let mut passengers = Vec::new();
    let mut counter = 0usize;
    let datestr = date.format("%Y%m%d").to_string();
    for t in 1..=grid.len() {
        let (span_a, span_b) = grid.span_sec(t);
        let p = profile(span_a as i64);
        for o in 0..n {
            for d in 0..n {
                let w = od_weight(spec, topo, o, d);
                if w <= 0.0 || p <= 0.0 {
                    continue;
                }
                let mut lambda = spec.demand.scale * w * p * day_mult;
                if spec.demand.noise_scale > 0.0 {
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    lambda *= (1.0 + spec.demand.noise_scale * eps).max(0.0);
                }
                let count = lambda.floor() as usize
                    + (rng.random::<f64>() < lambda.fract()) as usize;
                for _ in 0..count {
                    let sec = rng.random_range(span_a..span_b) as i64;
                    passengers.push(Passenger {
                        card_id: format!("c{datestr}{counter:06}"),
                        origin: o,
                        dest: d,
                        tap_in: sec,
                    });
                    counter += 1;
                }
            }
        }
    }
    Ok(passengers)
}

/// Simulate one service day.
///
/// Passenger arrivals depend only on (spec, date, seed), never on the
/// disruption flag, so a disrupted/undisrupted pair from the same seed
/// shares every arrival and differs only through train service.
pub fn simulate_day(spec: &SimSpec, date: NaiveDate, with_disruption: bool) -> Result<DayOutput> {
    spec.validate()?;
    let topo = spec.topology()?;
    let graph = NetworkGraph::build(&topo)?;
    simulate_day_inner(spec, &topo, &graph, date, with_disruption)
}

fn simulate_day_inner(
    spec: &SimSpec,
    topo: &Topology,
    graph: &NetworkGraph,
    date: NaiveDate,
    with_disruption: bool,
) -> Result<DayOutput> {
    let ctx = draw_day_context(spec, date);

    let injection = match (&spec.disruption, with_disruption) {
        (Some(inj), true) if inj.day == date => {
            let start = parse_clock_sec(&inj.start)?;
            let end = start + (inj.duration_min * 60.0).round() as i64;
            let blocked = topo
                .station_idx(&StationId::new(inj.station.clone()))
                .ok_or_else(|| Error::Simulation(format!("unknown station {}", inj.station)))?;
            Some((inj, blocked, start, end))
        }
        _ => None,
    };
    let schedule = build_schedule(spec, topo, injection)?;
    let passengers = generate_passengers(spec, topo, date, &ctx)?;

    let patience = (spec.patience_min * 60.0).round() as i64;
    let mut leg_cache: BTreeMap<(usize, usize), Vec<crate::network::PathLeg>> = BTreeMap::new();
    let mut trips = Vec::new();
    let mut abandonments = Vec::new();
    let mut manifests = Vec::new();

    for pax in &passengers {
        let legs = match leg_cache.entry((pax.origin, pax.dest)) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(graph.path_legs(topo, pax.origin, pax.dest)?)
            }
        };
        let mut ready = pax.tap_in;
        let mut rode: Vec<(usize, usize, usize, i64, i64)> = Vec::new();
        let mut gave_up_at: Option<(usize, i64)> = None;
        for leg in legs.iter() {
            let key = (leg.line, leg.direction, leg.board());
            let boarding = schedule.departures.get(&key).and_then(|deps| {
                let at = deps.partition_point(|&(dep, _, _)| dep < ready);
                deps[at..].iter().find_map(|&(dep, ri, si)| {
                    let run = &schedule.runs[ri];
                    let ai = run.stops.iter().skip(si + 1).position(|s| s.station == leg.alight());
                    ai.map(|off| (dep, ri, si, si + 1 + off))
                })
            });
            match boarding {
                Some((dep, ri, si, ai)) if dep - ready <= patience => {
                    let arr = schedule.runs[ri].stops[ai].arrival.expect("alight has arrival");
                    rode.push((ri, si, ai, dep, arr));
                    ready = arr;
                }
                _ => {
                    gave_up_at = Some((leg.board(), ready + patience));
                    break;
                }
            }
        }
        match gave_up_at {
            Some((station, time)) => abandonments.push(AbandonmentRecord {
                card_id: pax.card_id.clone(),
                origin: topo.stations[pax.origin].id.clone(),
                tap_in: to_datetime(date, pax.tap_in),
                station: topo.stations[station].id.clone(),
                time: to_datetime(date, time),
            }),
            None => {
                trips.push(TripRecord {
                    card_id: pax.card_id.clone(),
                    origin: topo.stations[pax.origin].id.clone(),
                    dest: topo.stations[pax.dest].id.clone(),
                    tap_in: to_datetime(date, pax.tap_in),
                    tap_out: to_datetime(date, ready),
                });
                for (ri, si, ai, dep, arr) in rode {
                    let run = &schedule.runs[ri];
                    manifests.push(ManifestRow {
                        card_id: pax.card_id.clone(),
                        train_id: run.train_id.clone(),
                        board: topo.stations[run.stops[si].station].id.clone(),
                        alight: topo.stations[run.stops[ai].station].id.clone(),
                        board_time: to_datetime(date, dep),
                        alight_time: to_datetime(date, arr),
                    });
                }
            }
        }
    }

    let mut avl = Vec::new();
    for run in &schedule.runs {
        let line_id = &topo.lines[run.line].id;
        for stop in &run.stops {
            for (time, event) in [
                (stop.arrival, AvlEvent::Arrival),
                (stop.departure, AvlEvent::Departure),
            ] {
                if let Some(sec) = time {
                    avl.push(AvlRecord {
                        train_id: run.train_id.clone(),
                        service_id: run.train_id.clone(),
                        station: topo.stations[stop.station].id.clone(),
                        line: line_id.clone(),
                        direction: run.direction,
                        event,
                        time: to_datetime(date, sec),
                    });
                }
            }
        }
    }

    let weather = (6..24)
        .map(|h| {
            let swing = spec.weather.diurnal_amplitude_c
                * (std::f64::consts::PI * (h as f64 - 6.0) / 18.0).sin();
            WeatherRecord {
                hour: date.and_time(NaiveTime::from_hms_opt(h, 0, 0).unwrap()),
                temperature_c: ctx.temp_base + swing,
                wind_kmh: ctx.wind,
                rain_mmh: ctx.rain,
            }
        })
        .collect();

    let events = EventKind::ALL
        .iter()
        .enumerate()
        .filter(|(i, _)| ctx.event_flags[*i])
        .map(|(_, kind)| EventRecord { date, kind: *kind })
        .collect();

    let incident = injection.map(|(inj, _, start, end)| IncidentLogRecord {
        start: to_datetime(date, start),
        end: to_datetime(date, end),
        station: StationId::new(inj.station.clone()),
        line: topo
            .lines
            .iter()
            .find(|l| l.stations.iter().any(|s| s.as_str() == inj.station))
            .map(|l| l.id.clone())
            .expect("validated station on a line"),
        cause: "injected halt".into(),
        incident_type: IncidentType::Primary,
    });

    Ok(DayOutput {
        date,
        trips,
        avl,
        abandonments,
        manifests,
        weather,
        events,
        incident,
    })
}

/// Simulate the full calendar, applying the injection on its day.
pub fn simulate_all(spec: &SimSpec) -> Result<super::SimOutput> {
    spec.validate()?;
    let topo = spec.topology()?;
    let graph = NetworkGraph::build(&topo)?;
    let days = spec
        .service_days()
        .into_iter()
        .map(|date| simulate_day_inner(spec, &topo, &graph, date, true))
        .collect::<Result<Vec<_>>>()?;
    let calendar = spec
        .service_days()
        .into_iter()
        .map(|date| DayInfo {
            date,
            weekday: date.weekday(),
            holiday: spec.calendar.holidays.contains(&date),
            complete: true,
        })
        .collect();
    Ok(super::SimOutput {
        topology: topo,
        calendar,
        days,
    })
}

impl super::SimOutput {
    /// Assemble the in-memory dataset the estimator would load from disk.
    pub fn to_dataset(&self) -> Dataset {
        let mut trips = Vec::new();
        let mut avl = Vec::new();
        let mut incidents = Vec::new();
        let mut weather_rows = Vec::new();
        let mut event_rows = Vec::new();
        let mut abandonments = Vec::new();
        for day in &self.days {
            trips.extend(day.trips.iter().cloned());
            avl.extend(day.avl.iter().cloned());
            weather_rows.extend(day.weather.iter().cloned());
            event_rows.extend(day.events.iter().cloned());
            abandonments.extend(day.abandonments.iter().cloned());
            if let Some(inc) = &day.incident {
                incidents.push(inc.clone());
            }
        }
        Dataset {
            trips,
            avl,
            incidents,
            weather: WeatherTable::new(&weather_rows),
            events: EventTable::new(&event_rows),
            topology: self.topology.clone(),
            calendar: Calendar::new(self.calendar.clone()),
            abandonments,
        }
    }

    /// Headway thresholds matching the simulated timetable.
    pub fn threshold_config(&self, spec: &SimSpec) -> ThresholdConfig {
        let headways = spec
            .lines
            .iter()
            .map(|l| (l.id.as_str().into(), l.headway_min))
            .collect();
        ThresholdConfig::new(headways)
    }
}

/// True effects per (station, interval, outcome) on the disrupted day.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub day: NaiveDate,
    /// Treatment start interval; `None` when nothing was injected.
    pub t_start: Option<usize>,
    pub stations: Vec<StationId>,
    pub t_len: usize,
    values: Vec<f64>,
}

impl GroundTruth {
    fn offset(&self, a: usize, m: Outcome, t: usize) -> usize {
        (m.index() * self.stations.len() + a) * self.t_len + (t - 1)
    }

    pub fn effect(&self, a: usize, m: Outcome, t: usize) -> Option<f64> {
        let v = self.values[self.offset(a, m, t)];
        (!v.is_nan()).then_some(v)
    }

    /// Full-day effect series (NaN-coded) for one station and outcome.
    pub fn series(&self, a: usize, m: Outcome) -> Vec<f64> {
        (1..=self.t_len)
            .map(|t| self.values[self.offset(a, m, t)])
            .collect()
    }
}

/// Run the disrupted and undisrupted simulations from the same seed, build
/// both outcome panels, and return the elementwise difference on the
/// disrupted day.
pub fn ground_truth(spec: &SimSpec) -> Result<(super::SimOutput, GroundTruth)> {
    let disrupted = simulate_all(spec)?;
    let target_day = spec
        .disruption
        .as_ref()
        .map(|inj| inj.day)
        .unwrap_or_else(|| spec.service_days()[0]);

    let mut clean = super::SimOutput {
        topology: disrupted.topology.clone(),
        calendar: disrupted.calendar.clone(),
        days: disrupted.days.clone(),
    };
    let day_pos = spec
        .service_days()
        .iter()
        .position(|d| *d == target_day)
        .expect("validated day");
    let topo = spec.topology()?;
    let graph = NetworkGraph::build(&topo)?;
    clean.days[day_pos] = simulate_day_inner(spec, &topo, &graph, target_day, false)?;

    let ds_disrupted = disrupted.to_dataset();
    let ds_clean = clean.to_dataset();
    let (panel_d, _) = build_panel_full(&ds_disrupted, &graph, AssignConfig::default())?;
    let (panel_c, _) = build_panel_full(&ds_clean, &graph, AssignConfig::default())?;

    let d_idx = panel_d.day_idx(target_day).expect("day in panel");
    let stations = panel_d.stations.clone();
    let t_len = panel_d.t_len;
    let mut values = vec![f64::NAN; 5 * stations.len() * t_len];
    for m in Outcome::ALL {
        for a in 0..stations.len() {
            for t in 1..=t_len {
                let off = (m.index() * stations.len() + a) * t_len + (t - 1);
                if let (Some(x), Some(y)) = (panel_d.get(a, d_idx, t, m), panel_c.get(a, d_idx, t, m))
                {
                    values[off] = x - y;
                }
            }
        }
    }

    let t_start = match &spec.disruption {
        Some(inj) => {
            let start = to_datetime(target_day, parse_clock_sec(&inj.start)?);
            let record = DisruptionRecord {
                station: StationId::new(inj.station.clone()),
                line: "".into(),
                start,
                end: start + chrono::TimeDelta::seconds((inj.duration_min * 60.0).round() as i64),
                source: DisruptionSource::IncidentLog,
            };
            Some(treatment_start_interval(&record, &topo.grid)?)
        }
        None => None,
    };

    Ok((
        disrupted,
        GroundTruth {
            day: target_day,
            t_start,
            stations,
            t_len,
            values,
        },
    ))
}
