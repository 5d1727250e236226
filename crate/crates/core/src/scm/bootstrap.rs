//! Donor-resampling bootstrap.
//!
//! Each resample redraws the J donor days with replacement, reruns the full
//! estimation on the resampled pool, and the per-interval standard deviation
//! of the effect across resamples is reported as its standard error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{Error, Result};

pub(crate) use crate::seed::mix as mix_seed;

/// Sample-standard deviation (denominator n-1) that returns an exact zero
/// when every value is bitwise identical, so identical donors yield SE = 0
/// rather than float-summation dust.
pub fn sd_with_exact_zero(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let first = values[0];
    if values.iter().all(|v| v.to_bits() == first.to_bits()) {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (ss / (n - 1.0)).sqrt()
}

/// Run `resamples` bootstrap replications in parallel with per-replication
/// seeds derived from the master seed, so results do not depend on thread
/// scheduling or worker count.
///
/// Returns one output per replication (None where the replication failed)
/// plus the failure count.
pub fn bootstrap_runs<T: Send>(
    j: usize,
    resamples: usize,
    seed: u64,
    run: impl Fn(&[usize], u64) -> Result<T> + Sync,
) -> Result<(Vec<Option<T>>, usize)> {
    if resamples < 2 {
        return Err(Error::Config(format!(
            "bootstrap needs at least 2 resamples, got {resamples}"
        )));
    }
    if j == 0 {
        return Err(Error::Config("bootstrap over an empty donor pool".into()));
    }
    let outputs: Vec<Option<T>> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let draw_seed = mix_seed(seed, b as u64, 0x626f_6f74, 0);
            let mut rng = ChaCha8Rng::seed_from_u64(draw_seed);
            let indices: Vec<usize> = (0..j).map(|_| rng.random_range(0..j)).collect();
            run(&indices, draw_seed).ok()
        })
        .collect();
    let failures = outputs.iter().filter(|o| o.is_none()).count();
    if resamples - failures < 2 {
        return Err(Error::Estimation(format!(
            "bootstrap failed in {failures} of {resamples} resamples"
        )));
    }
    Ok((outputs, failures))
}

/// Per-interval bootstrap standard errors of an effect series.
///
/// `estimate` maps a resampled donor-index multiset to a full effect series
/// (NaN-coded); the SE at each position is the standard deviation of the
/// defined values across resamples.
pub fn bootstrap_se(
    j: usize,
    resamples: usize,
    seed: u64,
    estimate: impl Fn(&[usize], u64) -> Result<Vec<f64>> + Sync,
) -> Result<Vec<f64>> {
    let (outputs, _) = bootstrap_runs(j, resamples, seed, estimate)?;
    let series: Vec<&Vec<f64>> = outputs.iter().flatten().collect();
    let n = series.first().map(|s| s.len()).unwrap_or(0);
    let mut se = vec![f64::NAN; n];
    let mut buf = Vec::with_capacity(series.len());
    for (t, slot) in se.iter_mut().enumerate() {
        buf.clear();
        for s in &series {
            if !s[t].is_nan() {
                buf.push(s[t]);
            }
        }
        if buf.len() >= 2 {
            *slot = sd_with_exact_zero(&buf);
        }
    }
    Ok(se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_donors_give_exactly_zero_se() {
        // The estimate ignores which donors are drawn: every resample is
        // identical, so the SE must be exactly zero.
        let series = vec![0.1, 0.7, -0.3];
        let se = bootstrap_se(3, 200, 42, |_idx, _seed| Ok(series.clone())).unwrap();
        assert_eq!(se, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn fixed_seed_reproduces_identical_ses() {
        let est = |idx: &[usize], _seed: u64| {
            let m = idx.iter().map(|&i| i as f64).sum::<f64>() / idx.len() as f64;
            Ok(vec![m, 2.0 * m])
        };
        let a = bootstrap_se(5, 100, 7, est).unwrap();
        let b = bootstrap_se(5, 100, 7, est).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_se(5, 100, 8, est).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn resample_distribution_matches_known_variance() {
        // Estimate = mean of drawn donor values {0, 3, 6}: the resampling
        // distribution has variance Var(X)/3 with Var(X) = 6 (population of
        // three equally likely values), so SD = sqrt(2).
        let donor_values = [0.0, 3.0, 6.0];
        let est = |idx: &[usize], _seed: u64| {
            Ok(vec![
                idx.iter().map(|&i| donor_values[i]).sum::<f64>() / idx.len() as f64,
            ])
        };
        let se = bootstrap_se(3, 4000, 11, est).unwrap();
        assert!((se[0] - 2.0f64.sqrt()).abs() < 0.05, "se {}", se[0]);
    }

    #[test]
    fn too_few_resamples_error() {
        assert!(bootstrap_se(3, 1, 0, |_, _| Ok(vec![0.0])).is_err());
    }

    #[test]
    fn sd_helper_handles_degenerate_inputs() {
        assert!(sd_with_exact_zero(&[1.0]).is_nan());
        assert_eq!(sd_with_exact_zero(&[0.1; 200]), 0.0);
        assert!((sd_with_exact_zero(&[1.0, 3.0]) - 2.0f64.sqrt()).abs() < 1e-12);
    }
}
