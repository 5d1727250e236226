//! Report files: donor weights, predictor balance, pre-treatment fit,
//! effect series, propagation summary, and the reproducibility manifest.

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::ScmConfig;
use crate::data::{IntervalGrid, Manifest};
use crate::detect::{treatment_start_interval, DisruptionRecord};
use crate::network::NetworkGraph;
use crate::outcomes::{Outcome, OutcomePanel};
use crate::spillover::{EffectPanel, PropagationSummary};
use crate::{Error, Result};

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::schema(path.display().to_string(), e.to_string()))
}

fn write_row(w: &mut csv::Writer<std::fs::File>, path: &Path, row: &[String]) -> Result<()> {
    w.write_record(row)
        .map_err(|e| Error::schema(path.display().to_string(), e.to_string()))
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Donor weights per station and outcome. Weights under the display
/// threshold render as "-"; they are retained at full precision internally.
pub fn write_weights(effects: &EffectPanel, config: &ScmConfig, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(
        &mut w,
        path,
        &["station", "outcome", "donor_day", "weight"].map(String::from),
    )?;
    for (a, station) in effects.stations.iter().enumerate() {
        for m in Outcome::ALL {
            let Some(est) = effects.get(a, m) else { continue };
            for (day, &weight) in effects.pool_days.iter().zip(est.weights.values()) {
                let shown = if weight < config.weight_display_threshold {
                    "-".to_string()
                } else {
                    format!("{weight:.3}")
                };
                write_row(
                    &mut w,
                    path,
                    &[
                        station.to_string(),
                        m.name().to_string(),
                        day.format("%Y-%m-%d").to_string(),
                        shown,
                    ],
                )?;
            }
        }
    }
    finish(w, path)
}

/// Mean predictor values over the pre-period for the report outcome:
/// disrupted station, synthetic control, unweighted average, single control.
pub fn write_predictors_report(
    effects: &EffectPanel,
    config: &ScmConfig,
    path: &Path,
) -> Result<()> {
    let est = effects
        .get(effects.direct_station, config.report_outcome)
        .ok_or_else(|| Error::Estimation("no estimate for the report outcome".into()))?;
    let x = &est.x_pre;
    let j = x.j();
    let synthetic = x.x0_raw.mul_vec(est.weights.values());
    let average = x.x0_raw.mul_vec(&vec![1.0 / j as f64; j]);
    let single = x.x0_raw.col(est.pretreatment.single_donor);
    let mut w = csv_writer(path)?;
    write_row(
        &mut w,
        path,
        &["predictor", "disrupted", "synthetic", "average", "single"].map(String::from),
    )?;
    for (h, kind) in x.kinds.iter().enumerate() {
        write_row(
            &mut w,
            path,
            &[
                kind.label().to_string(),
                format!("{:.3}", x.x1_raw[h]),
                format!("{:.3}", synthetic[h]),
                format!("{:.3}", average[h]),
                format!("{:.3}", single[h]),
            ],
        )?;
    }
    finish(w, path)
}

/// Pre-treatment MSPE of the synthetic control against the two baselines,
/// with bootstrap standard errors, for the disrupted station.
pub fn write_mspe_report(effects: &EffectPanel, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(
        &mut w,
        path,
        &[
            "outcome",
            "synthetic",
            "synthetic_se",
            "average",
            "average_se",
            "single",
            "single_se",
        ]
        .map(String::from),
    )?;
    for m in Outcome::ALL {
        let Some(est) = effects.get(effects.direct_station, m) else { continue };
        let p = &est.pretreatment;
        write_row(
            &mut w,
            path,
            &[
                m.label().to_string(),
                opt(p.synthetic),
                opt(p.synthetic_se),
                opt(p.average),
                opt(p.average_se),
                opt(p.single),
                opt(p.single_se),
            ],
        )?;
    }
    finish(w, path)
}

/// Post-treatment effect series for every station and outcome.
pub fn write_effects(effects: &EffectPanel, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(
        &mut w,
        path,
        &["station", "outcome", "interval", "observed", "counterfactual", "effect", "se"]
            .map(String::from),
    )?;
    for (a, station) in effects.stations.iter().enumerate() {
        for m in Outcome::ALL {
            let Some(est) = effects.get(a, m) else { continue };
            for t in effects.t_start..=est.observed.len() {
                write_row(
                    &mut w,
                    path,
                    &[
                        station.to_string(),
                        m.name().to_string(),
                        t.to_string(),
                        opt(est.observed[t - 1]),
                        opt(est.counterfactual[t - 1]),
                        opt(est.effect[t - 1]),
                        opt(est.se[t - 1]),
                    ],
                )?;
            }
        }
    }
    finish(w, path)
}

pub fn write_propagation_summary(summary: &PropagationSummary, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(
        &mut w,
        path,
        &["station", "hop_distance", "interchange", "onset", "peak", "peak_magnitude", "recovery"]
            .map(String::from),
    )?;
    let fmt_idx = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in &summary.rows {
        write_row(
            &mut w,
            path,
            &[
                row.station.to_string(),
                row.hop_distance.map(|h| h.to_string()).unwrap_or_default(),
                row.interchange.to_string(),
                fmt_idx(row.onset),
                fmt_idx(row.peak),
                row.peak_magnitude.map(|v| format!("{v}")).unwrap_or_default(),
                fmt_idx(row.recovery),
            ],
        )?;
    }
    finish(w, path)
}

/// The merged disruption log.
pub fn write_disruptions(
    records: &[DisruptionRecord],
    grid: &IntervalGrid,
    path: &Path,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(
        &mut w,
        path,
        &["station", "line", "day", "start", "end", "duration_min", "t_start", "source"]
            .map(String::from),
    )?;
    for r in records {
        let t_start = treatment_start_interval(r, grid)
            .map(|t| t.to_string())
            .unwrap_or_default();
        write_row(
            &mut w,
            path,
            &[
                r.station.to_string(),
                r.line.to_string(),
                r.day().format("%Y-%m-%d").to_string(),
                r.start.format("%Y-%m-%dT%H:%M:%S").to_string(),
                r.end.format("%Y-%m-%dT%H:%M:%S").to_string(),
                format!("{}", r.duration_min()),
                t_start,
                r.source.as_str().to_string(),
            ],
        )?;
    }
    finish(w, path)
}

/// Full outcome panel export; missing cells are empty fields.
pub fn write_panel(panel: &OutcomePanel, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(
        &mut w,
        path,
        &["station", "day", "interval", "entry", "exit", "jt_min", "speed_kmh", "density"]
            .map(String::from),
    )?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for (a, station) in panel.stations.iter().enumerate() {
        for (d, day) in panel.days.iter().enumerate() {
            for t in 1..=panel.t_len {
                write_row(
                    &mut w,
                    path,
                    &[
                        station.to_string(),
                        day.format("%Y-%m-%d").to_string(),
                        t.to_string(),
                        fmt(panel.get(a, d, t, Outcome::EntryRidership)),
                        fmt(panel.get(a, d, t, Outcome::ExitRidership)),
                        fmt(panel.get(a, d, t, Outcome::AvgJourneyTime)),
                        fmt(panel.get(a, d, t, Outcome::AvgSpeed)),
                        fmt(panel.get(a, d, t, Outcome::CrowdingDensity)),
                    ],
                )?;
            }
        }
    }
    finish(w, path)
}

/// Station-pair shortest track distances, for audit.
pub fn write_distances(
    graph: &NetworkGraph,
    stations: &[crate::data::StationId],
    path: &Path,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(&mut w, path, &["origin", "dest", "km"].map(String::from))?;
    for (o, o_id) in stations.iter().enumerate() {
        for (d, d_id) in stations.iter().enumerate() {
            if o == d {
                continue;
            }
            if let Ok(km) = graph.shortest_distance(o, d) {
                write_row(
                    &mut w,
                    path,
                    &[o_id.to_string(), d_id.to_string(), format!("{km}")],
                )?;
            }
        }
    }
    finish(w, path)
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    Ok(out)
}

/// Machine-readable run manifest: the seed, the configuration, the selected
/// disruption, the donor pool, and digests of every input file. Rerunning
/// with the same manifest reproduces the outputs byte for byte.
pub fn write_run_manifest(
    manifest: &Manifest,
    disruption: &DisruptionRecord,
    effects: &EffectPanel,
    config: &ScmConfig,
    path: &Path,
) -> Result<()> {
    let mut inputs = serde_json::Map::new();
    let mut named: Vec<(&str, &std::path::PathBuf)> = vec![
        ("trips", &manifest.trips),
        ("avl", &manifest.avl),
        ("incidents", &manifest.incidents),
        ("weather", &manifest.weather),
        ("events", &manifest.events),
        ("topology", &manifest.topology),
    ];
    if let Some(p) = &manifest.calendar {
        named.push(("calendar", p));
    }
    if let Some(p) = &manifest.abandonments {
        named.push(("abandonments", p));
    }
    for (name, p) in named {
        inputs.insert(name.to_string(), serde_json::json!(sha256_hex(p)?));
    }
    let value = serde_json::json!({
        "seed": config.seed,
        "config": {
            "split_fraction": config.split_fraction,
            "starts": config.starts,
            "eval_budget_per_start": config.eval_budget_per_start,
            "bootstrap_resamples": config.bootstrap_resamples,
            "bootstrap_starts": config.bootstrap_starts,
            "importance_floor": config.importance_floor,
            "inner_tolerance": config.inner_tolerance,
            "weight_display_threshold": config.weight_display_threshold,
            "report_outcome": config.report_outcome.name(),
            "onset_se_multiplier": config.onset_se_multiplier,
            "onset_absolute_floor": config.onset_absolute_floor,
            "onset_consecutive": config.onset_consecutive,
            "geo_snapshots": config.geo_snapshots,
        },
        "disruption": {
            "station": disruption.station.as_str(),
            "line": disruption.line.as_str(),
            "start": disruption.start.format("%Y-%m-%dT%H:%M:%S").to_string(),
            "end": disruption.end.format("%Y-%m-%dT%H:%M:%S").to_string(),
            "t_start": effects.t_start,
        },
        "donor_days": effects
            .pool_days
            .iter()
            .map(|d| d.format("%Y-%m-%d").to_string())
            .collect::<Vec<_>>(),
        "warning": effects.warning,
        "inputs": inputs,
    });
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(&mut file, &value)
        .map_err(|e| Error::schema(path.display().to_string(), e.to_string()))?;
    file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    Ok(())
}
