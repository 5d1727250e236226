use chrono::{Datelike, NaiveDate};

use super::linalg::Mat;
use crate::data::Dataset;
use crate::outcomes::{Outcome, OutcomePanel};
use crate::{Error, Result};

/// The predictor set: pre-intervention outcomes, a weekday dummy, weather,
/// and mega-event dummies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorKind {
    EntryRidership,
    ExitRidership,
    AvgJourneyTime,
    AvgSpeed,
    DayOfWeek,
    Temperature,
    WindSpeed,
    Rain,
    Concert,
    Sports,
    Exhibition,
    MegaEvent,
}

impl PredictorKind {
    pub const ALL: [PredictorKind; 12] = [
        PredictorKind::EntryRidership,
        PredictorKind::ExitRidership,
        PredictorKind::AvgJourneyTime,
        PredictorKind::AvgSpeed,
        PredictorKind::DayOfWeek,
        PredictorKind::Temperature,
        PredictorKind::WindSpeed,
        PredictorKind::Rain,
        PredictorKind::Concert,
        PredictorKind::Sports,
        PredictorKind::Exhibition,
        PredictorKind::MegaEvent,
    ];

    pub fn is_dummy(&self) -> bool {
        matches!(
            self,
            PredictorKind::DayOfWeek
                | PredictorKind::Concert
                | PredictorKind::Sports
                | PredictorKind::Exhibition
                | PredictorKind::MegaEvent
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            PredictorKind::EntryRidership => "entry_ridership",
            PredictorKind::ExitRidership => "exit_ridership",
            PredictorKind::AvgJourneyTime => "avg_journey_time",
            PredictorKind::AvgSpeed => "avg_speed",
            PredictorKind::DayOfWeek => "day_of_week",
            PredictorKind::Temperature => "temperature",
            PredictorKind::WindSpeed => "wind_speed",
            PredictorKind::Rain => "rain",
            PredictorKind::Concert => "concert",
            PredictorKind::Sports => "sports",
            PredictorKind::Exhibition => "exhibition",
            PredictorKind::MegaEvent => "mega_event",
        }
    }

    /// Row label used by the predictor report.
    pub fn label(&self) -> &'static str {
        match self {
            PredictorKind::EntryRidership => "Entry ridership",
            PredictorKind::ExitRidership => "Exit ridership",
            PredictorKind::AvgJourneyTime => "Ave journey time (min)",
            PredictorKind::AvgSpeed => "Ave speed (km/h)",
            PredictorKind::DayOfWeek => "Day of week (dummy)",
            PredictorKind::Temperature => "Temperature (C)",
            PredictorKind::WindSpeed => "Wind (km/h)",
            PredictorKind::Rain => "Rain (mm)",
            PredictorKind::Concert => "Concert (dummy)",
            PredictorKind::Sports => "Sports (dummy)",
            PredictorKind::Exhibition => "Exhibition (dummy)",
            PredictorKind::MegaEvent => "Mega-event (dummy)",
        }
    }
}

/// Ordered predictor list used for one estimation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictorSpec {
    pub kinds: Vec<PredictorKind>,
}

impl Default for PredictorSpec {
    fn default() -> Self {
        PredictorSpec {
            kinds: PredictorKind::ALL.to_vec(),
        }
    }
}

impl PredictorSpec {
    pub fn k(&self) -> usize {
        self.kinds.len()
    }
}

/// Predictor matrices for one (station, period): raw values, standardized
/// values, and the scale factors linking them.
#[derive(Debug, Clone)]
pub struct PredictorMatrices {
    pub kinds: Vec<PredictorKind>,
    /// Treated-day predictor means, raw units.
    pub x1_raw: Vec<f64>,
    /// k x J donor predictor means, raw units; column j is donor day j.
    pub x0_raw: Mat,
    /// Standardized treated vector (continuous rows divided by `scale`).
    pub x1: Vec<f64>,
    /// Standardized donor matrix.
    pub x0: Mat,
    /// Per-predictor scale factor (1 for dummies and constant predictors).
    pub scale: Vec<f64>,
}

impl PredictorMatrices {
    pub fn k(&self) -> usize {
        self.kinds.len()
    }

    pub fn j(&self) -> usize {
        self.x0.cols()
    }
}

fn raw_value(
    kind: PredictorKind,
    panel: &OutcomePanel,
    dataset: &Dataset,
    station: usize,
    treated_day: NaiveDate,
    day: NaiveDate,
    period: &[usize],
) -> Option<f64> {
    let outcome_mean = |m: Outcome| {
        let d = panel.day_idx(day)?;
        panel.mean_over(station, d, m, period)
    };
    let weather_mean = |component: usize| {
        let grid = dataset.grid();
        let mut sum = 0.0;
        let mut n = 0usize;
        for &t in period {
            if let Some(v) = dataset.weather.value_at(day, t, grid) {
                sum += v[component];
                n += 1;
            }
        }
        if n == 0 {
            None
        } else {
            Some(sum / n as f64)
        }
    };
    let flags = dataset.events.flags(day);
    match kind {
        PredictorKind::EntryRidership => outcome_mean(Outcome::EntryRidership),
        PredictorKind::ExitRidership => outcome_mean(Outcome::ExitRidership),
        PredictorKind::AvgJourneyTime => outcome_mean(Outcome::AvgJourneyTime),
        PredictorKind::AvgSpeed => outcome_mean(Outcome::AvgSpeed),
        PredictorKind::DayOfWeek => Some((day.weekday() == treated_day.weekday()) as u8 as f64),
        PredictorKind::Temperature => weather_mean(0),
        PredictorKind::WindSpeed => weather_mean(1),
        PredictorKind::Rain => weather_mean(2),
        PredictorKind::Concert => Some(flags[0] as u8 as f64),
        PredictorKind::Sports => Some(flags[1] as u8 as f64),
        PredictorKind::Exhibition => Some(flags[2] as u8 as f64),
        PredictorKind::MegaEvent => Some(flags.iter().any(|&f| f) as u8 as f64),
    }
}

/// Collect predictor means over a pre-intervention period for the treated
/// day and every donor day.
///
/// Continuous predictors are standardized by their standard deviation across
/// donor columns so the importance weights are not unit-dependent; dummies
/// are left unscaled. Scale factors are retained for reporting in raw units.
pub fn build_predictors(
    panel: &OutcomePanel,
    dataset: &Dataset,
    station: usize,
    treated_day: NaiveDate,
    pool: &[NaiveDate],
    period: &[usize],
    spec: &PredictorSpec,
) -> Result<PredictorMatrices> {
    if spec.kinds.is_empty() {
        return Err(Error::Config("empty predictor list".into()));
    }
    let k = spec.k();
    let j = pool.len();
    let mut x1_raw = Vec::with_capacity(k);
    let mut x0_raw = Mat::zeros(k, j);
    for (h, &kind) in spec.kinds.iter().enumerate() {
        let v1 = raw_value(kind, panel, dataset, station, treated_day, treated_day, period)
            .ok_or_else(|| Error::PredictorMissing {
                predictor: kind.name().to_string(),
                day: treated_day,
            })?;
        x1_raw.push(v1);
        for (jj, &day) in pool.iter().enumerate() {
            let v = raw_value(kind, panel, dataset, station, treated_day, day, period)
                .ok_or_else(|| Error::PredictorMissing {
                    predictor: kind.name().to_string(),
                    day,
                })?;
            x0_raw.set(h, jj, v);
        }
    }

    let mut scale = vec![1.0; k];
    for (h, &kind) in spec.kinds.iter().enumerate() {
        if kind.is_dummy() || j < 2 {
            continue;
        }
        let row = x0_raw.row(h);
        let mean = row.iter().sum::<f64>() / j as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (j as f64 - 1.0);
        let sd = var.sqrt();
        if sd > 1e-12 {
            scale[h] = sd;
        }
    }

    let x1: Vec<f64> = x1_raw.iter().zip(&scale).map(|(v, s)| v / s).collect();
    let mut x0 = Mat::zeros(k, j);
    for h in 0..k {
        for jj in 0..j {
            x0.set(h, jj, x0_raw.at(h, jj) / scale[h]);
        }
    }

    Ok(PredictorMatrices {
        kinds: spec.kinds.clone(),
        x1_raw,
        x0_raw,
        x1,
        x0,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Calendar, EventRecord, EventTable, WeatherTable};
    use crate::outcomes::OutcomePanel;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    /// Panel with one station and the given per-day constant outcome levels.
    fn panel_with_levels(days: &[(NaiveDate, f64)]) -> OutcomePanel {
        let mut panel = OutcomePanel::new(
            vec!["A1".into()],
            days.iter().map(|(d, _)| *d).collect(),
            72,
        );
        for (di, (_, level)) in days.iter().enumerate() {
            for t in 1..=72 {
                for m in Outcome::ALL {
                    panel.set(0, di, t, m, Some(level + m.index() as f64));
                }
            }
        }
        panel
    }

    fn dataset_shell(days: &[NaiveDate], events: Vec<EventRecord>) -> Dataset {
        use crate::data::{IntervalGrid, LineSpec, RollingStock, StationSpec, Topology};
        let topo = Topology::new(
            vec![
                StationSpec {
                    id: "A1".into(),
                    name: "A1".into(),
                    lat: 0.0,
                    lon: 0.0,
                },
                StationSpec {
                    id: "A2".into(),
                    name: "A2".into(),
                    lat: 0.0,
                    lon: 0.0,
                },
            ],
            vec![crate::data::EdgeSpec {
                from: "A1".into(),
                to: "A2".into(),
                line: "L1".into(),
                km: 1.0,
            }],
            vec![LineSpec {
                id: "L1".into(),
                stations: vec!["A1".into(), "A2".into()],
            }],
            vec![RollingStock {
                line: "L1".into(),
                seats: 40,
                floor_area_m2: 60.0,
            }],
            IntervalGrid::standard(),
        )
        .unwrap();
        Dataset {
            trips: vec![],
            avl: vec![],
            incidents: vec![],
            weather: WeatherTable::new(&[]),
            events: EventTable::new(&events),
            topology: topo,
            calendar: Calendar::derive(days.to_vec()),
            abandonments: vec![],
        }
    }

    fn outcome_spec() -> PredictorSpec {
        PredictorSpec {
            kinds: vec![
                PredictorKind::EntryRidership,
                PredictorKind::ExitRidership,
                PredictorKind::AvgJourneyTime,
                PredictorKind::AvgSpeed,
            ],
        }
    }

    #[test]
    fn identical_donor_matches_treated_column() {
        let treated = date("2019-03-11");
        let donor = date("2019-03-18"); // same weekday as treated
        let panel = panel_with_levels(&[(treated, 5.0), (donor, 5.0)]);
        let ds = dataset_shell(&[treated, donor], vec![]);
        let mut spec = outcome_spec();
        spec.kinds.push(PredictorKind::DayOfWeek);
        let m = build_predictors(&panel, &ds, 0, treated, &[donor], &(1..=23).collect::<Vec<_>>(), &spec)
            .unwrap();
        assert_eq!(m.x1_raw, m.x0_raw.col(0));
        assert_eq!(m.x1, m.x0.col(0));
    }

    #[test]
    fn day_of_week_dummy_marks_same_weekday_donors() {
        let treated = date("2019-03-11"); // Monday
        let monday = date("2019-03-18");
        let tuesday = date("2019-03-12");
        let panel = panel_with_levels(&[(treated, 5.0), (monday, 4.0), (tuesday, 6.0)]);
        let ds = dataset_shell(&[treated, monday, tuesday], vec![]);
        let spec = PredictorSpec {
            kinds: vec![PredictorKind::DayOfWeek],
        };
        let m = build_predictors(
            &panel,
            &ds,
            0,
            treated,
            &[monday, tuesday],
            &(1..=23).collect::<Vec<_>>(),
            &spec,
        )
        .unwrap();
        assert_eq!(m.x1_raw, vec![1.0]);
        assert_eq!(m.x0_raw.row(0), &[1.0, 0.0]);
        // Dummies stay unscaled.
        assert_eq!(m.scale, vec![1.0]);
    }

    #[test]
    fn means_match_hand_computation_and_scales_are_stored() {
        let treated = date("2019-03-11");
        let d1 = date("2019-03-12");
        let d2 = date("2019-03-13");
        let mut panel = OutcomePanel::new(vec!["A1".into()], vec![treated, d1, d2], 72);
        // Treated entries: 10, 20 over the period; donors constant 12 and 18.
        for (di, vals) in [(0usize, [10.0, 20.0]), (1, [12.0, 12.0]), (2, [18.0, 18.0])] {
            panel.set(0, di, 1, Outcome::EntryRidership, Some(vals[0]));
            panel.set(0, di, 2, Outcome::EntryRidership, Some(vals[1]));
        }
        let ds = dataset_shell(&[treated, d1, d2], vec![]);
        let spec = PredictorSpec {
            kinds: vec![PredictorKind::EntryRidership],
        };
        let m = build_predictors(&panel, &ds, 0, treated, &[d1, d2], &[1, 2], &spec).unwrap();
        assert_eq!(m.x1_raw, vec![15.0]);
        assert_eq!(m.x0_raw.row(0), &[12.0, 18.0]);
        // Donor sd = sqrt(((12-15)^2 + (18-15)^2) / 1) = sqrt(18).
        let sd = 18.0f64.sqrt();
        assert!((m.scale[0] - sd).abs() < 1e-12);
        assert!((m.x1[0] - 15.0 / sd).abs() < 1e-12);
    }

    #[test]
    fn entirely_missing_predictor_errors() {
        let treated = date("2019-03-11");
        let d1 = date("2019-03-12");
        let panel = OutcomePanel::new(vec!["A1".into()], vec![treated, d1], 72);
        let ds = dataset_shell(&[treated, d1], vec![]);
        let spec = PredictorSpec {
            kinds: vec![PredictorKind::AvgJourneyTime],
        };
        let err = build_predictors(&panel, &ds, 0, treated, &[d1], &[1, 2, 3], &spec);
        assert!(matches!(err, Err(Error::PredictorMissing { .. })));
    }
}
