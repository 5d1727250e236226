//! Counterfactual construction, effect arithmetic, and the naive baselines.
//!
//! Series are NaN-coded: a NaN cell means the value is undefined there.

use crate::{Error, Result};

/// A counterfactual series with its missing-donor bookkeeping.
#[derive(Debug, Clone)]
pub struct CounterfactualSeries {
    pub values: Vec<f64>,
    /// Positions where weights were renormalized over the non-missing donors.
    pub renormalized: usize,
    /// Positions with no donor value at all (left missing).
    pub missing: usize,
}

/// Weighted combination of donor series.
///
/// Where a donor cell is missing, its weight is spread over the remaining
/// donors for that position; with no donors at all the cell stays missing.
pub fn counterfactual(weights: &[f64], donors: &[&[f64]]) -> CounterfactualSeries {
    assert_eq!(weights.len(), donors.len(), "one weight per donor");
    let n = donors.first().map(|d| d.len()).unwrap_or(0);
    let mut values = Vec::with_capacity(n);
    let mut renormalized = 0usize;
    let mut missing = 0usize;
    for i in 0..n {
        let mut wsum = 0.0;
        let mut available = 0usize;
        for (j, d) in donors.iter().enumerate() {
            if !d[i].is_nan() {
                wsum += weights[j];
                available += 1;
            }
        }
        if available == 0 {
            values.push(f64::NAN);
            missing += 1;
            continue;
        }
        if available < donors.len() {
            renormalized += 1;
            if wsum <= 1e-12 {
                // All weight sits on missing donors: fall back to the plain
                // average of what is observed.
                let mut acc = 0.0;
                for d in donors {
                    if !d[i].is_nan() {
                        acc += d[i] / available as f64;
                    }
                }
                values.push(acc);
                continue;
            }
            let mut acc = 0.0;
            for (j, d) in donors.iter().enumerate() {
                if !d[i].is_nan() {
                    acc += (weights[j] / wsum) * d[i];
                }
            }
            values.push(acc);
        } else {
            let mut acc = 0.0;
            for (j, d) in donors.iter().enumerate() {
                acc += weights[j] * d[i];
            }
            values.push(acc);
        }
    }
    CounterfactualSeries {
        values,
        renormalized,
        missing,
    }
}

/// The equal-weight baseline: the same combination at uniform weights, so it
/// coincides exactly with a weighted counterfactual at c = 1/J.
pub fn equal_weight_counterfactual(donors: &[&[f64]]) -> CounterfactualSeries {
    let j = donors.len();
    counterfactual(&vec![1.0 / j as f64; j], donors)
}

/// Elementwise effect: observed minus counterfactual. Missing cells on
/// either side stay missing.
pub fn effect(observed: &[f64], counterfactual: &[f64]) -> Vec<f64> {
    observed
        .iter()
        .zip(counterfactual)
        .map(|(y, c)| y - c)
        .collect()
}

/// Equal-weight effect over the given positions of the series.
pub fn equal_weight_effect(observed: &[f64], donors: &[&[f64]]) -> Vec<f64> {
    effect(observed, &equal_weight_counterfactual(donors).values)
}

/// Before-after baseline: the counterfactual is the constant mean of the
/// treated day's own pre-intervention values (1-based intervals below
/// `t_start`).
pub fn before_after_effect(observed: &[f64], t_start: usize) -> Result<Vec<f64>> {
    let pre: Vec<f64> = observed[..t_start - 1]
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .collect();
    if pre.is_empty() {
        return Err(Error::Estimation(
            "no defined pre-intervention interval for the before-after baseline".into(),
        ));
    }
    let mean = pre.iter().sum::<f64>() / pre.len() as f64;
    Ok(observed.iter().map(|y| y - mean).collect())
}

/// Mean squared prediction error over the given 1-based intervals, skipping
/// positions where either side is missing.
pub fn pretreatment_mspe(
    observed: &[f64],
    counterfactual: &[f64],
    eval_intervals: &[usize],
) -> Result<f64> {
    if eval_intervals.is_empty() {
        return Err(Error::Estimation("empty evaluation interval set".into()));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for &t in eval_intervals {
        let y = observed[t - 1];
        let c = counterfactual[t - 1];
        if !y.is_nan() && !c.is_nan() {
            let r = y - c;
            sum += r * r;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Estimation(
            "no defined cells in the evaluation intervals".into(),
        ));
    }
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_weight_reproduces_single_donor() {
        let d1 = [1.0, 2.0, 3.0];
        let d2 = [9.0, 9.0, 9.0];
        let cf = counterfactual(&[1.0, 0.0], &[&d1, &d2]);
        assert_eq!(cf.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(cf.renormalized, 0);
    }

    #[test]
    fn uniform_weights_equal_the_equal_weight_baseline_exactly() {
        let d1 = [1.0, 2.0, f64::NAN];
        let d2 = [3.0, 6.0, 5.0];
        let d3 = [5.0, 1.0, 7.0];
        let donors: Vec<&[f64]> = vec![&d1, &d2, &d3];
        let a = counterfactual(&[1.0 / 3.0; 3], &donors);
        let b = equal_weight_counterfactual(&donors);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn random_weights_match_hand_dot_product() {
        let d1 = [1.0, 2.0];
        let d2 = [4.0, 8.0];
        let d3 = [10.0, 0.5];
        let w = [0.2, 0.5, 0.3];
        let cf = counterfactual(&w, &[&d1, &d2, &d3]);
        assert!((cf.values[0] - (0.2 + 2.0 + 3.0)).abs() < 1e-12);
        assert!((cf.values[1] - (0.4 + 4.0 + 0.15)).abs() < 1e-12);
    }

    #[test]
    fn missing_donor_cells_renormalize() {
        let d1 = [f64::NAN, 2.0];
        let d2 = [4.0, 4.0];
        let cf = counterfactual(&[0.5, 0.5], &[&d1, &d2]);
        assert_eq!(cf.values[0], 4.0);
        assert_eq!(cf.renormalized, 1);
        let all_gone = counterfactual(&[0.5, 0.5], &[&[f64::NAN][..], &[f64::NAN][..]]);
        assert!(all_gone.values[0].is_nan());
        assert_eq!(all_gone.missing, 1);
    }

    #[test]
    fn identical_series_give_zero_effect() {
        let y = [5.0, 6.0, 7.0];
        let eff = effect(&y, &y);
        assert!(eff.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn constant_shift_gives_constant_effect() {
        let cf = [5.0, 6.0, 7.0];
        let y: Vec<f64> = cf.iter().map(|v| v + 5.0).collect();
        let eff = effect(&y, &cf);
        assert!(eff.iter().all(|&e| (e - 5.0).abs() < 1e-12));
    }

    #[test]
    fn effect_is_linear_in_constant_shifts() {
        let y = [4.0, 1.0, 9.0];
        let cf = [2.0, 2.0, 2.0];
        let base = effect(&y, &cf);
        let shifted: Vec<f64> = y.iter().map(|v| v + 3.5).collect();
        let eff = effect(&shifted, &cf);
        for (a, b) in base.iter().zip(&eff) {
            assert!((b - (a + 3.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_donor_equal_weight_is_plain_difference() {
        let y = [5.0, 6.0];
        let d = [3.0, 9.0];
        let eff = equal_weight_effect(&y, &[&d[..]]);
        assert_eq!(eff, vec![2.0, -3.0]);
    }

    #[test]
    fn symmetric_donors_cancel() {
        let y = [5.0, 5.0];
        let d1 = [4.0, 6.0];
        let d2 = [6.0, 4.0];
        let eff = equal_weight_effect(&y, &[&d1[..], &d2[..]]);
        assert!(eff.iter().all(|&e| e.abs() < 1e-12));
    }

    #[test]
    fn before_after_uses_pre_mean() {
        let mut series = vec![10.0; 5];
        series.extend([4.0, 4.0]);
        // t_start = 6 (1-based): pre-mean over the first five cells is 10.
        let eff = before_after_effect(&series, 6).unwrap();
        assert_eq!(eff[5], -6.0);
        let constant = vec![3.0; 7];
        let eff = before_after_effect(&constant, 6).unwrap();
        assert!(eff.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn mspe_fixtures() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let eval: Vec<usize> = (1..=4).collect();
        assert_eq!(pretreatment_mspe(&y, &y, &eval).unwrap(), 0.0);
        let off: Vec<f64> = y.iter().map(|v| v + 2.0).collect();
        assert_eq!(pretreatment_mspe(&off, &y, &eval).unwrap(), 4.0);
        assert!(pretreatment_mspe(&y, &y, &[]).is_err());
    }
}
