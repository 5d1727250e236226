//! The synthetic-control core.
//!
//! Donor weights solve a simplex-constrained least-squares fit of the
//! treated unit's pre-disruption predictors (inner problem); predictor
//! importances are chosen to minimize the validation-period prediction error
//! of the outcome (outer problem). Effects are observed minus counterfactual
//! from the treatment start onward, with donor-resampling bootstrap standard
//! errors.

mod bootstrap;
mod estimate;
mod inner;
mod linalg;
mod outer;
mod pipeline;
mod predictors;
mod simplex;

pub use bootstrap::{bootstrap_se, sd_with_exact_zero};
pub use estimate::{
    before_after_effect, counterfactual, effect, equal_weight_counterfactual, equal_weight_effect,
    pretreatment_mspe, CounterfactualSeries,
};
pub use inner::{solve_inner, InnerOptions, InnerSolution};
pub use linalg::Mat;
pub use outer::{solve_outer, OuterContext, OuterOptions, OuterSolution};
pub use pipeline::{
    estimate_station_outcome, EstimationProblem, PretreatmentReport, StationOutcomeEstimate,
};
pub use predictors::{build_predictors, PredictorKind, PredictorMatrices, PredictorSpec};
pub use simplex::{project_to_simplex, PredictorImportance, WeightVector, SIMPLEX_TOL};

use crate::{Error, Result};

/// Pre-intervention split into training and validation intervals (step i).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitConfig {
    /// Treatment start interval; the pre-period is 1..t_start-1.
    pub t_start: usize,
    /// Last training interval t0; validation is t0+1..t_start-1.
    pub t0: usize,
}

impl SplitConfig {
    pub fn new(t_start: usize, t0: usize) -> Result<Self> {
        if t0 < 1 || t0 + 1 > t_start - 1 {
            return Err(Error::Config(format!(
                "split t0={t0} leaves an empty training or validation period before t_start={t_start}"
            )));
        }
        Ok(SplitConfig { t_start, t0 })
    }

    /// Split the pre-period at the given fraction (default one half).
    pub fn from_fraction(t_start: usize, fraction: f64) -> Result<Self> {
        if t_start < 3 {
            return Err(Error::Config(format!(
                "treatment start {t_start} leaves fewer than two pre-intervention intervals"
            )));
        }
        let n_pre = t_start - 1;
        let t0 = ((n_pre as f64 * fraction).floor() as usize).clamp(1, n_pre - 1);
        SplitConfig::new(t_start, t0)
    }

    /// Training intervals 1..=t0.
    pub fn training(&self) -> Vec<usize> {
        (1..=self.t0).collect()
    }

    /// Validation intervals t0+1..=t_start-1.
    pub fn validation(&self) -> Vec<usize> {
        (self.t0 + 1..self.t_start).collect()
    }

    /// The whole pre-intervention period 1..=t_start-1.
    pub fn pre_period(&self) -> Vec<usize> {
        (1..self.t_start).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_split_halves_the_pre_period() {
        // Treatment at 47 leaves 46 pre-intervention intervals: 23 + 23.
        let split = SplitConfig::from_fraction(47, 0.5).unwrap();
        assert_eq!(split.training(), (1..=23).collect::<Vec<_>>());
        assert_eq!(split.validation(), (24..=46).collect::<Vec<_>>());
    }

    #[test]
    fn training_and_validation_are_disjoint_and_nonempty() {
        for t_start in 3..=72 {
            let split = SplitConfig::from_fraction(t_start, 0.5).unwrap();
            let train = split.training();
            let val = split.validation();
            assert!(!train.is_empty() && !val.is_empty());
            assert!(train.iter().all(|t| !val.contains(t)));
            assert!(train.iter().chain(val.iter()).all(|&t| t < t_start));
        }
    }

    #[test]
    fn degenerate_split_is_rejected() {
        assert!(SplitConfig::from_fraction(2, 0.5).is_err());
        assert!(SplitConfig::new(47, 46).is_err());
        assert!(SplitConfig::new(47, 0).is_err());
    }
}
