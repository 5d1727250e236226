//! Network-wide estimation: the direct effect at the disrupted station plus
//! spillover effects at every other station, with propagation summaries and
//! geographic exports.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde_json::json;

use crate::config::ScmConfig;
use crate::data::{Dataset, StationId, Topology};
use crate::detect::{treatment_start_interval, DisruptionRecord, DonorPool};
use crate::network::NetworkGraph;
use crate::outcomes::{Outcome, OutcomePanel};
use crate::scm::{
    estimate_station_outcome, EstimationProblem, PredictorSpec, SplitConfig,
    StationOutcomeEstimate,
};
use crate::{Error, Result};

/// Whether a station received the disruption or only its spillover.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectRole {
    Direct,
    Spillover,
}

impl EffectRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            EffectRole::Direct => "direct",
            EffectRole::Spillover => "spillover",
        }
    }
}

/// Estimates for every (station, outcome); failures are isolated per cell.
#[derive(Debug)]
pub struct EffectPanel {
    pub stations: Vec<StationId>,
    pub treated_day: NaiveDate,
    pub t_start: usize,
    pub direct_station: usize,
    pub pool_days: Vec<NaiveDate>,
    pub warning: Option<String>,
    /// `results[station][outcome.index()]`.
    pub results: Vec<Vec<std::result::Result<StationOutcomeEstimate, String>>>,
}

impl EffectPanel {
    pub fn role(&self, station: usize) -> EffectRole {
        if station == self.direct_station {
            EffectRole::Direct
        } else {
            EffectRole::Spillover
        }
    }

    pub fn get(&self, station: usize, outcome: Outcome) -> Option<&StationOutcomeEstimate> {
        self.results[station][outcome.index()].as_ref().ok()
    }

    pub fn failures(&self) -> Vec<(usize, Outcome, &str)> {
        let mut out = Vec::new();
        for (a, row) in self.results.iter().enumerate() {
            for m in Outcome::ALL {
                if let Err(e) = &row[m.index()] {
                    out.push((a, m, e.as_str()));
                }
            }
        }
        out
    }
}

/// Run the full pipeline independently per (station, outcome).
///
/// Effects are reported only from the treatment start interval onward at
/// every station; per-station failures are recorded without aborting the
/// run. Jobs run concurrently with seeds derived from the master seed, so
/// the result is identical at any worker count.
pub fn estimate_network(
    disruption: &DisruptionRecord,
    panel: &OutcomePanel,
    dataset: &Dataset,
    pool: &DonorPool,
    config: &ScmConfig,
) -> Result<EffectPanel> {
    let t_start = treatment_start_interval(disruption, dataset.grid())?;
    let split = SplitConfig::from_fraction(t_start, config.split_fraction)?;
    let direct_station = panel
        .station_idx(&disruption.station)
        .ok_or_else(|| Error::UnknownStation(disruption.station.to_string()))?;
    let treated_day = disruption.day();
    let predictor_spec = PredictorSpec::default();

    let jobs: Vec<(usize, Outcome)> = (0..panel.n_stations())
        .flat_map(|a| Outcome::ALL.into_iter().map(move |m| (a, m)))
        .collect();
    let results_flat: Vec<std::result::Result<StationOutcomeEstimate, String>> = jobs
        .par_iter()
        .map(|&(a, m)| {
            let problem = EstimationProblem {
                panel,
                dataset,
                station: a,
                outcome: m,
                treated_day,
                pool: &pool.days,
                split: &split,
                predictor_spec: &predictor_spec,
            };
            estimate_station_outcome(&problem, config).map_err(|e| e.to_string())
        })
        .collect();

    let mut results: Vec<Vec<std::result::Result<StationOutcomeEstimate, String>>> = Vec::new();
    let mut it = results_flat.into_iter();
    for _ in 0..panel.n_stations() {
        results.push((0..Outcome::ALL.len()).map(|_| it.next().unwrap()).collect());
    }

    Ok(EffectPanel {
        stations: panel.stations.clone(),
        treated_day,
        t_start,
        direct_station,
        pool_days: pool.days.clone(),
        warning: pool.warning.clone(),
        results,
    })
}

/// Onset / peak / recovery of one station's effect series.
#[derive(Debug, Clone)]
pub struct StationPropagation {
    pub station: StationId,
    pub hop_distance: Option<u32>,
    pub interchange: bool,
    pub onset: Option<usize>,
    pub peak: Option<usize>,
    pub peak_magnitude: Option<f64>,
    pub recovery: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct PropagationSummary {
    pub outcome: Outcome,
    pub rows: Vec<StationPropagation>,
}

/// Thresholds for the onset/recovery rules.
#[derive(Debug, Clone, Copy)]
pub struct PropagationThresholds {
    pub se_multiplier: f64,
    pub absolute_floor: f64,
    pub consecutive: usize,
}

impl From<&ScmConfig> for PropagationThresholds {
    fn from(cfg: &ScmConfig) -> Self {
        PropagationThresholds {
            se_multiplier: cfg.onset_se_multiplier,
            absolute_floor: cfg.onset_absolute_floor,
            consecutive: cfg.onset_consecutive,
        }
    }
}

fn exceeds(effect: f64, se: f64, thr: &PropagationThresholds) -> bool {
    if effect.is_nan() {
        return false;
    }
    let bound = if se.is_nan() {
        thr.absolute_floor
    } else {
        (thr.se_multiplier * se).max(thr.absolute_floor)
    };
    effect.abs() > bound
}

/// Summarize when each station's effect emerges, peaks, and recedes.
///
/// Onset is the first interval from the treatment start where |effect|
/// exceeds max(se_multiplier * SE, absolute_floor) for `consecutive`
/// intervals; recovery is the first interval after the peak where it stays
/// below the threshold for as long. Stations never exceeding the threshold
/// get a null onset.
pub fn summarize_propagation(
    effects: &EffectPanel,
    graph: &NetworkGraph,
    topo: &Topology,
    outcome: Outcome,
    thresholds: &PropagationThresholds,
) -> PropagationSummary {
    let consec = thresholds.consecutive.max(1);
    let mut rows = Vec::with_capacity(effects.stations.len());
    for (a, station) in effects.stations.iter().enumerate() {
        let hop_distance = graph.hop_distance(effects.direct_station, a);
        let interchange = topo.is_interchange(station);
        let mut onset = None;
        let mut peak = None;
        let mut peak_magnitude = None;
        let mut recovery = None;
        if let Some(est) = effects.get(a, outcome) {
            let t_len = est.effect.len();
            let exceed: Vec<bool> = (1..=t_len)
                .map(|t| exceeds(est.effect[t - 1], est.se[t - 1], thresholds))
                .collect();
            'onset: for t in effects.t_start..=t_len.saturating_sub(consec - 1) {
                if (0..consec).all(|i| exceed[t - 1 + i]) {
                    onset = Some(t);
                    break 'onset;
                }
            }
            if let Some(on) = onset {
                let mut best_t = on;
                let mut best_mag = f64::NEG_INFINITY;
                for t in on..=t_len {
                    let e = est.effect[t - 1];
                    if !e.is_nan() && e.abs() > best_mag {
                        best_mag = e.abs();
                        best_t = t;
                    }
                }
                peak = Some(best_t);
                peak_magnitude = Some(est.effect[best_t - 1]);
                'recovery: for t in best_t + 1..=t_len.saturating_sub(consec - 1) {
                    if (0..consec).all(|i| {
                        let idx = t - 1 + i;
                        !est.effect[idx].is_nan() && !exceed[idx]
                    }) {
                        recovery = Some(t);
                        break 'recovery;
                    }
                }
            }
        }
        rows.push(StationPropagation {
            station: station.clone(),
            hop_distance,
            interchange,
            onset,
            peak,
            peak_magnitude,
            recovery,
        });
    }
    PropagationSummary { outcome, rows }
}

/// One GeoJSON FeatureCollection of per-station effects for one interval.
pub fn export_geo(
    effects: &EffectPanel,
    topo: &Topology,
    outcome: Outcome,
    t: usize,
) -> Result<serde_json::Value> {
    let mut features = Vec::with_capacity(effects.stations.len());
    for (a, station) in effects.stations.iter().enumerate() {
        let spec = topo
            .stations
            .iter()
            .find(|s| &s.id == station)
            .ok_or_else(|| Error::UnknownStation(station.to_string()))?;
        let (effect, se) = match effects.get(a, outcome) {
            Some(est) => {
                let e = est.effect[t - 1];
                let s = est.se[t - 1];
                (
                    (!e.is_nan()).then_some(e),
                    (!s.is_nan()).then_some(s),
                )
            }
            None => (None, None),
        };
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "Point", "coordinates": [spec.lon, spec.lat] },
            "properties": {
                "station": station.as_str(),
                "name": spec.name,
                "outcome": outcome.name(),
                "interval": t,
                "effect": effect,
                "se": se,
                "role": effects.role(a).as_str(),
            }
        }));
    }
    Ok(json!({ "type": "FeatureCollection", "features": features }))
}

/// Crowding heat-map bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrowdingBin {
    Blue,
    Green,
    Yellow,
    Orange,
    Red,
    Overflow,
}

impl CrowdingBin {
    pub fn label(&self) -> &'static str {
        match self {
            CrowdingBin::Blue => "blue",
            CrowdingBin::Green => "green",
            CrowdingBin::Yellow => "yellow",
            CrowdingBin::Orange => "orange",
            CrowdingBin::Red => "red",
            CrowdingBin::Overflow => "overflow",
        }
    }
}

/// Half-open density bins [0,0.5) [0.5,1) [1,2) [2,3) [3,6), with an
/// overflow label at 6 passengers per square metre and above.
pub fn crowding_bin(density: f64) -> Result<CrowdingBin> {
    if density.is_nan() || density < 0.0 {
        return Err(Error::Config(format!("negative crowding density {density}")));
    }
    Ok(match density {
        d if d < 0.5 => CrowdingBin::Blue,
        d if d < 1.0 => CrowdingBin::Green,
        d if d < 2.0 => CrowdingBin::Yellow,
        d if d < 3.0 => CrowdingBin::Orange,
        d if d < 6.0 => CrowdingBin::Red,
        _ => CrowdingBin::Overflow,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_edges_are_exact() {
        assert_eq!(crowding_bin(0.0).unwrap(), CrowdingBin::Blue);
        assert_eq!(crowding_bin(0.499999).unwrap(), CrowdingBin::Blue);
        assert_eq!(crowding_bin(0.5).unwrap(), CrowdingBin::Green);
        assert_eq!(crowding_bin(0.635).unwrap(), CrowdingBin::Green);
        assert_eq!(crowding_bin(1.0).unwrap(), CrowdingBin::Yellow);
        assert_eq!(crowding_bin(2.0).unwrap(), CrowdingBin::Orange);
        assert_eq!(crowding_bin(3.0).unwrap(), CrowdingBin::Red);
        assert_eq!(crowding_bin(5.999999).unwrap(), CrowdingBin::Red);
        assert_eq!(crowding_bin(6.0).unwrap(), CrowdingBin::Overflow);
        assert_eq!(crowding_bin(6.2).unwrap(), CrowdingBin::Overflow);
        assert!(crowding_bin(-0.1).is_err());
    }

    #[test]
    fn bins_are_total_and_monotone() {
        let order = |b: CrowdingBin| match b {
            CrowdingBin::Blue => 0,
            CrowdingBin::Green => 1,
            CrowdingBin::Yellow => 2,
            CrowdingBin::Orange => 3,
            CrowdingBin::Red => 4,
            CrowdingBin::Overflow => 5,
        };
        let mut prev = 0;
        for i in 0..1000 {
            let d = i as f64 * 0.01;
            let b = order(crowding_bin(d).unwrap());
            assert!(b >= prev);
            prev = b;
        }
    }

    fn fake_estimate(effect: Vec<f64>, se: Vec<f64>, t_start: usize) -> StationOutcomeEstimate {
        use crate::scm::{Mat, PredictorImportance, PredictorMatrices, WeightVector};
        let t_len = effect.len();
        StationOutcomeEstimate {
            station: 0,
            outcome: Outcome::AvgSpeed,
            t_start,
            importance: PredictorImportance::uniform(2),
            weights: WeightVector::uniform(2),
            validation_mspe: 0.0,
            uniform_mspe: 0.0,
            fell_back_to_uniform: false,
            observed: vec![0.0; t_len],
            counterfactual: vec![0.0; t_len],
            effect,
            se,
            renormalized_cells: 0,
            missing_cells: 0,
            pretreatment: crate::scm::PretreatmentReport {
                synthetic: 0.0,
                average: 0.0,
                single: 0.0,
                synthetic_se: 0.0,
                average_se: 0.0,
                single_se: 0.0,
                single_donor: 0,
            },
            bootstrap_resamples: 0,
            bootstrap_failures: 0,
            x_pre: PredictorMatrices {
                kinds: vec![],
                x1_raw: vec![],
                x0_raw: Mat::zeros(0, 0),
                x1: vec![],
                x0: Mat::zeros(0, 0),
                scale: vec![],
            },
        }
    }

    fn panel_with(effects: Vec<StationOutcomeEstimate>, t_start: usize) -> EffectPanel {
        let stations: Vec<StationId> = (0..effects.len())
            .map(|i| StationId::new(format!("S{i}")))
            .collect();
        EffectPanel {
            stations,
            treated_day: NaiveDate::from_ymd_opt(2019, 3, 11).unwrap(),
            t_start,
            direct_station: 0,
            pool_days: vec![],
            warning: None,
            results: effects
                .into_iter()
                .map(|e| {
                    let mut row: Vec<std::result::Result<StationOutcomeEstimate, String>> =
                        Outcome::ALL.iter().map(|_| Err("unset".to_string())).collect();
                    row[Outcome::AvgSpeed.index()] = Ok(e);
                    row
                })
                .collect(),
        }
    }

    fn toy_graph() -> (NetworkGraph, Topology) {
        use crate::data::{EdgeSpec, IntervalGrid, LineSpec, RollingStock, StationSpec};
        let stations = (0..2)
            .map(|i| StationSpec {
                id: StationId::new(format!("S{i}")),
                name: format!("S{i}"),
                lat: 22.0 + i as f64,
                lon: 114.0,
            })
            .collect();
        let topo = Topology::new(
            stations,
            vec![EdgeSpec {
                from: "S0".into(),
                to: "S1".into(),
                line: "L1".into(),
                km: 1.0,
            }],
            vec![LineSpec {
                id: "L1".into(),
                stations: vec!["S0".into(), "S1".into()],
            }],
            vec![RollingStock {
                line: "L1".into(),
                seats: 40,
                floor_area_m2: 60.0,
            }],
            IntervalGrid::standard(),
        )
        .unwrap();
        (NetworkGraph::build(&topo).unwrap(), topo)
    }

    #[test]
    fn all_zero_effects_summarize_to_nulls() {
        let t_len = 72;
        let est = fake_estimate(vec![0.0; t_len], vec![0.1; t_len], 47);
        let other = fake_estimate(vec![0.0; t_len], vec![0.1; t_len], 47);
        let panel = panel_with(vec![est, other], 47);
        let (graph, topo) = toy_graph();
        let thr = PropagationThresholds {
            se_multiplier: 2.0,
            absolute_floor: 1e-9,
            consecutive: 2,
        };
        let summary = summarize_propagation(&panel, &graph, &topo, Outcome::AvgSpeed, &thr);
        for row in &summary.rows {
            assert!(row.onset.is_none());
            assert!(row.peak.is_none());
            assert!(row.recovery.is_none());
        }
        assert_eq!(summary.rows[1].hop_distance, Some(1));
    }

    #[test]
    fn triangular_effect_has_known_onset_peak_recovery() {
        let t_len = 72;
        let t_start = 47;
        let mut effect = vec![f64::NAN; t_len];
        for t in t_start..=t_len {
            effect[t - 1] = 0.0;
        }
        // Rise over 48..=52, peak at 52, fall back to zero by 56.
        let shape = [1.0, 2.0, 3.0, 4.0, 5.0, 4.0, 3.0, 2.0];
        for (i, v) in shape.iter().enumerate() {
            effect[48 - 1 + i] = *v;
        }
        let se = vec![0.2; t_len];
        let panel = panel_with(
            vec![fake_estimate(effect, se, t_start)],
            t_start,
        );
        let (graph, topo) = toy_graph();
        let thr = PropagationThresholds {
            se_multiplier: 2.0,
            absolute_floor: 0.5,
            consecutive: 2,
        };
        let summary = summarize_propagation(&panel, &graph, &topo, Outcome::AvgSpeed, &thr);
        let row = &summary.rows[0];
        assert_eq!(row.onset, Some(48));
        assert_eq!(row.peak, Some(52));
        assert_eq!(row.peak_magnitude, Some(5.0));
        // First interval after the peak where |effect| stays below 2*SE=0.4
        // for two consecutive intervals: 56 (0.0, 0.0).
        assert_eq!(row.recovery, Some(56));
        assert!(row.onset.unwrap() <= row.peak.unwrap());
        assert!(row.peak.unwrap() <= row.recovery.unwrap());
    }

    #[test]
    fn geo_export_round_trips() {
        let t_len = 72;
        let mut eff = vec![f64::NAN; t_len];
        eff[47 - 1] = -3.5;
        let panel = panel_with(
            vec![
                fake_estimate(eff, vec![0.1; t_len], 47),
                fake_estimate(vec![f64::NAN; t_len], vec![f64::NAN; t_len], 47),
            ],
            47,
        );
        let (_, topo) = toy_graph();
        let value = export_geo(&panel, &topo, Outcome::AvgSpeed, 47).unwrap();
        let text = serde_json::to_string_pretty(&value).unwrap();
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back, value);
        let features = back["features"].as_array().unwrap();
        assert_eq!(features.len(), 2);
        assert_eq!(features[0]["properties"]["role"], "direct");
        assert_eq!(features[1]["properties"]["role"], "spillover");
        assert_eq!(features[0]["properties"]["effect"], -3.5);
        assert_eq!(features[1]["properties"]["effect"], serde_json::Value::Null);
        assert_eq!(features[0]["geometry"]["coordinates"][1], 22.0);
    }
}
