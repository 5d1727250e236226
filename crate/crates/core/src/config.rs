//! Numeric defaults for the estimation pipeline, centralized.

use crate::outcomes::Outcome;

/// Tunable parameters of the synthetic-control pipeline.
#[derive(Debug, Clone)]
pub struct ScmConfig {
    /// Master seed; every stochastic component derives its stream from it.
    pub seed: u64,
    /// Fraction of the pre-intervention period used for training (step i).
    pub split_fraction: f64,
    /// Multi-start count for the outer importance search (uniform + draws).
    pub starts: usize,
    /// Evaluation budget per start of the outer local search.
    pub eval_budget_per_start: usize,
    /// Bootstrap resamples for standard errors.
    pub bootstrap_resamples: usize,
    /// Multi-start count used inside each bootstrap resample.
    pub bootstrap_starts: usize,
    /// Lower bound kept on every predictor importance.
    pub importance_floor: f64,
    /// Relative optimality gap demanded of the inner weight solver.
    pub inner_tolerance: f64,
    /// Donor weights below this render as "-" in the weight report.
    pub weight_display_threshold: f64,
    /// Outcome used for the predictor report table.
    pub report_outcome: Outcome,
    /// Propagation summary: |effect| must exceed max(se_multiplier * SE,
    /// absolute_floor) for `consecutive` intervals.
    pub onset_se_multiplier: f64,
    pub onset_absolute_floor: f64,
    pub onset_consecutive: usize,
    /// Number of post-disruption geo snapshots exported.
    pub geo_snapshots: usize,
}

impl Default for ScmConfig {
    fn default() -> Self {
        ScmConfig {
            seed: 20190311,
            split_fraction: 0.5,
            starts: 20,
            eval_budget_per_start: 400,
            bootstrap_resamples: 1000,
            bootstrap_starts: 4,
            importance_floor: 1e-6,
            inner_tolerance: 1e-10,
            weight_display_threshold: 1e-4,
            report_outcome: Outcome::AvgSpeed,
            onset_se_multiplier: 2.0,
            onset_absolute_floor: 1e-9,
            onset_consecutive: 2,
            geo_snapshots: 5,
        }
    }
}
