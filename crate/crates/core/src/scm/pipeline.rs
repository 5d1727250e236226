//! Full estimation for one (station, outcome): predictor construction, the
//! nested weight optimization, counterfactual, effect, naive baselines, and
//! bootstrap standard errors.

use chrono::NaiveDate;

use super::bootstrap::{bootstrap_runs, mix_seed, sd_with_exact_zero};
use super::estimate::{counterfactual, equal_weight_counterfactual, pretreatment_mspe};
use super::outer::{solve_outer, OuterContext, OuterOptions, OuterSolution};
use super::predictors::{build_predictors, PredictorMatrices, PredictorSpec};
use super::simplex::{PredictorImportance, WeightVector};
use super::SplitConfig;
use crate::config::ScmConfig;
use crate::data::Dataset;
use crate::outcomes::{Outcome, OutcomePanel};
use crate::{Error, Result};

/// Everything one (station, outcome) estimation needs.
#[derive(Clone, Copy)]
pub struct EstimationProblem<'a> {
    pub panel: &'a OutcomePanel,
    pub dataset: &'a Dataset,
    pub station: usize,
    pub outcome: Outcome,
    pub treated_day: NaiveDate,
    pub pool: &'a [NaiveDate],
    pub split: &'a SplitConfig,
    pub predictor_spec: &'a PredictorSpec,
}

/// Pre-treatment fit of the synthetic control and the two naive baselines.
#[derive(Debug, Clone)]
pub struct PretreatmentReport {
    pub synthetic: f64,
    pub average: f64,
    pub single: f64,
    pub synthetic_se: f64,
    pub average_se: f64,
    pub single_se: f64,
    /// Donor index (into the pool) used as the single control.
    pub single_donor: usize,
}

/// Result of one (station, outcome) estimation.
#[derive(Debug, Clone)]
pub struct StationOutcomeEstimate {
    pub station: usize,
    pub outcome: Outcome,
    pub t_start: usize,
    pub importance: PredictorImportance,
    pub weights: WeightVector,
    pub validation_mspe: f64,
    pub uniform_mspe: f64,
    pub fell_back_to_uniform: bool,
    /// Treated-day series over the full day (NaN = missing).
    pub observed: Vec<f64>,
    /// Synthetic series over the full day; the pre-treatment part is the
    /// diagnostic fit.
    pub counterfactual: Vec<f64>,
    /// Effects from the treatment start onward; NaN before it.
    pub effect: Vec<f64>,
    /// Bootstrap standard errors, aligned with `effect`.
    pub se: Vec<f64>,
    pub renormalized_cells: usize,
    pub missing_cells: usize,
    pub pretreatment: PretreatmentReport,
    pub bootstrap_resamples: usize,
    pub bootstrap_failures: usize,
    /// Predictor means over the whole pre-period, for reporting.
    pub x_pre: PredictorMatrices,
}

struct CoreFit {
    outer: OuterSolution,
    counterfactual: Vec<f64>,
    effect: Vec<f64>,
    renormalized: usize,
    missing: usize,
    mspe_synthetic: f64,
    mspe_average: f64,
    mspe_single: f64,
    single_donor: usize,
}

fn donor_series<'p>(
    problem: &EstimationProblem<'p>,
    pool: &[NaiveDate],
) -> Result<Vec<&'p [f64]>> {
    pool.iter()
        .map(|day| {
            let d = problem
                .panel
                .day_idx(*day)
                .ok_or_else(|| Error::Estimation(format!("donor day {day} not in panel")))?;
            Ok(problem.panel.series(problem.station, d, problem.outcome))
        })
        .collect()
}

/// The donor carrying the largest final weight (earliest on ties) serves as
/// the single-control benchmark.
fn single_control(weights: &[f64]) -> usize {
    let mut best = 0usize;
    for (j, &w) in weights.iter().enumerate() {
        if w > weights[best] + 1e-15 {
            best = j;
        }
    }
    best
}

fn estimate_once(
    problem: &EstimationProblem,
    pool: &[NaiveDate],
    outer_opts: &OuterOptions,
) -> Result<CoreFit> {
    let split = problem.split;
    let training = split.training();
    let validation = split.validation();
    let pre_period = split.pre_period();

    let x_train = build_predictors(
        problem.panel,
        problem.dataset,
        problem.station,
        problem.treated_day,
        pool,
        &training,
        problem.predictor_spec,
    )?;
    let x_val = build_predictors(
        problem.panel,
        problem.dataset,
        problem.station,
        problem.treated_day,
        pool,
        &validation,
        problem.predictor_spec,
    )?;

    let treated_dayidx = problem
        .panel
        .day_idx(problem.treated_day)
        .ok_or_else(|| Error::Estimation(format!("day {} not in panel", problem.treated_day)))?;
    let observed = problem
        .panel
        .series(problem.station, treated_dayidx, problem.outcome);
    let donors = donor_series(problem, pool)?;

    let treated_val: Vec<f64> = validation.iter().map(|&t| observed[t - 1]).collect();
    let donors_val: Vec<Vec<f64>> = donors
        .iter()
        .map(|s| validation.iter().map(|&t| s[t - 1]).collect())
        .collect();
    let ctx = OuterContext {
        x_train: &x_train,
        x_val: &x_val,
        treated_val: &treated_val,
        donors_val: donors_val.iter().map(|d| d.as_slice()).collect(),
    };
    let outer = solve_outer(&ctx, outer_opts)?;

    let cf = counterfactual(outer.weights.values(), &donors);
    let t_len = observed.len();
    let t_start = split.t_start;
    let mut effect = vec![f64::NAN; t_len];
    for t in t_start..=t_len {
        effect[t - 1] = observed[t - 1] - cf.values[t - 1];
    }

    let mspe_synthetic = pretreatment_mspe(observed, &cf.values, &pre_period)?;
    let average = equal_weight_counterfactual(&donors);
    let mspe_average = pretreatment_mspe(observed, &average.values, &pre_period)?;
    let single_donor = single_control(outer.weights.values());
    let mspe_single = pretreatment_mspe(observed, donors[single_donor], &pre_period)?;

    Ok(CoreFit {
        outer,
        counterfactual: cf.values,
        effect,
        renormalized: cf.renormalized,
        missing: cf.missing,
        mspe_synthetic,
        mspe_average,
        mspe_single,
        single_donor,
    })
}

/// Run the full pipeline for one (station, outcome), including bootstrap
/// standard errors when `config.bootstrap_resamples >= 2`.
pub fn estimate_station_outcome(
    problem: &EstimationProblem,
    config: &ScmConfig,
) -> Result<StationOutcomeEstimate> {
    let outer_opts = OuterOptions {
        starts: config.starts,
        eval_budget_per_start: config.eval_budget_per_start,
        seed: mix_seed(config.seed, problem.station as u64, problem.outcome.index() as u64, 1),
        importance_floor: config.importance_floor,
        inner: super::inner::InnerOptions {
            tolerance: config.inner_tolerance,
            ..Default::default()
        },
        ..Default::default()
    };
    let fit = estimate_once(problem, problem.pool, &outer_opts)?;

    let treated_dayidx = problem.panel.day_idx(problem.treated_day).expect("checked");
    let observed = problem
        .panel
        .series(problem.station, treated_dayidx, problem.outcome)
        .to_vec();

    let j = problem.pool.len();
    let t_len = observed.len();
    let mut se = vec![f64::NAN; t_len];
    let mut mspe_ses = [f64::NAN; 3];
    let mut failures = 0usize;
    if config.bootstrap_resamples >= 2 {
        let boot_opts = OuterOptions {
            starts: config.bootstrap_starts,
            ..outer_opts
        };
        let boot_seed = mix_seed(
            config.seed,
            problem.station as u64,
            problem.outcome.index() as u64,
            2,
        );
        let (outputs, failed) =
            bootstrap_runs(j, config.bootstrap_resamples, boot_seed, |indices, seed| {
                let pool: Vec<NaiveDate> = indices.iter().map(|&i| problem.pool[i]).collect();
                let opts = OuterOptions {
                    seed,
                    ..boot_opts
                };
                let fit = estimate_once(problem, &pool, &opts)?;
                Ok((fit.effect, fit.mspe_synthetic, fit.mspe_average, fit.mspe_single))
            })?;
        failures = failed;
        let runs: Vec<_> = outputs.into_iter().flatten().collect();
        let mut buf = Vec::with_capacity(runs.len());
        for (t, slot) in se.iter_mut().enumerate() {
            buf.clear();
            for (eff, _, _, _) in &runs {
                if !eff[t].is_nan() {
                    buf.push(eff[t]);
                }
            }
            if buf.len() >= 2 {
                *slot = sd_with_exact_zero(&buf);
            }
        }
        for (i, pick) in [1usize, 2, 3].into_iter().enumerate() {
            let vals: Vec<f64> = runs
                .iter()
                .map(|r| match pick {
                    1 => r.1,
                    2 => r.2,
                    _ => r.3,
                })
                .filter(|v| !v.is_nan())
                .collect();
            if vals.len() >= 2 {
                mspe_ses[i] = sd_with_exact_zero(&vals);
            }
        }
    }

    let x_pre = build_predictors(
        problem.panel,
        problem.dataset,
        problem.station,
        problem.treated_day,
        problem.pool,
        &problem.split.pre_period(),
        problem.predictor_spec,
    )?;

    Ok(StationOutcomeEstimate {
        station: problem.station,
        outcome: problem.outcome,
        t_start: problem.split.t_start,
        importance: fit.outer.importance,
        weights: fit.outer.weights,
        validation_mspe: fit.outer.validation_mspe,
        uniform_mspe: fit.outer.uniform_mspe,
        fell_back_to_uniform: fit.outer.fell_back_to_uniform,
        observed,
        counterfactual: fit.counterfactual,
        effect: fit.effect,
        se,
        renormalized_cells: fit.renormalized,
        missing_cells: fit.missing,
        pretreatment: PretreatmentReport {
            synthetic: fit.mspe_synthetic,
            average: fit.mspe_average,
            single: fit.mspe_single,
            synthetic_se: mspe_ses[0],
            average_se: mspe_ses[1],
            single_se: mspe_ses[2],
            single_donor: fit.single_donor,
        },
        bootstrap_resamples: config.bootstrap_resamples,
        bootstrap_failures: failures,
        x_pre,
    })
}
