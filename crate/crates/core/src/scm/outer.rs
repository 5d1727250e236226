//! Outer optimization of predictor importances (steps i-iv).
//!
//! For a candidate importance vector v, donor weights are fit on
//! training-period predictors; v is scored by the validation-period
//! prediction error of the outcome under those weights. The search is a
//! seeded multi-start pattern search on the simplex: mass is shifted toward
//! or away from one predictor at a time, with the step halved when no move
//! improves. The final weights are recomputed from validation-period
//! predictors at the chosen v.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::estimate::counterfactual;
use super::inner::{solve_inner, InnerOptions};
use super::predictors::PredictorMatrices;
use super::simplex::{PredictorImportance, WeightVector};
use crate::{Error, Result};

/// Inputs of one outer optimization.
pub struct OuterContext<'a> {
    pub x_train: &'a PredictorMatrices,
    pub x_val: &'a PredictorMatrices,
    /// Treated-day outcome over the validation intervals (NaN = missing).
    pub treated_val: &'a [f64],
    /// Donor outcome series over the validation intervals, one per donor.
    pub donors_val: Vec<&'a [f64]>,
}

/// Outer search controls.
#[derive(Debug, Clone, Copy)]
pub struct OuterOptions {
    pub starts: usize,
    pub eval_budget_per_start: usize,
    pub seed: u64,
    pub importance_floor: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub inner: InnerOptions,
}

impl Default for OuterOptions {
    fn default() -> Self {
        OuterOptions {
            starts: 20,
            eval_budget_per_start: 400,
            seed: 0,
            importance_floor: 1e-6,
            initial_step: 0.25,
            min_step: 1e-3,
            inner: InnerOptions::default(),
        }
    }
}

/// Result of the nested optimization.
#[derive(Debug, Clone)]
pub struct OuterSolution {
    /// Chosen predictor importances v*.
    pub importance: PredictorImportance,
    /// Final donor weights from validation-period predictors at v* (step iv).
    pub weights: WeightVector,
    /// Donor weights from training-period predictors at v* (steps ii-iii).
    pub training_weights: WeightVector,
    /// Validation MSPE at v* (the minimized objective).
    pub validation_mspe: f64,
    /// Validation MSPE at uniform importances (always a candidate start).
    pub uniform_mspe: f64,
    /// True when no start improved on uniform importances.
    pub fell_back_to_uniform: bool,
    pub starts: usize,
    pub evaluations: usize,
}

fn validation_mspe(ctx: &OuterContext, weights: &[f64]) -> Result<f64> {
    let cf = counterfactual(weights, &ctx.donors_val);
    let mut sum = 0.0;
    let mut n = 0usize;
    for (y, c) in ctx.treated_val.iter().zip(&cf.values) {
        if !y.is_nan() && !c.is_nan() {
            let r = y - c;
            sum += r * r;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Estimation(
            "no defined validation cells for the outer objective".into(),
        ));
    }
    Ok(sum / n as f64)
}

struct Evaluator<'a, 'b> {
    ctx: &'b OuterContext<'a>,
    inner: InnerOptions,
    evaluations: usize,
}

impl Evaluator<'_, '_> {
    fn eval(&mut self, v: &PredictorImportance) -> Result<(f64, WeightVector)> {
        self.evaluations += 1;
        let sol = solve_inner(&self.ctx.x_train.x1, &self.ctx.x_train.x0, v.values(), &self.inner)?;
        let mspe = validation_mspe(self.ctx, sol.weights.values())?;
        Ok((mspe, sol.weights))
    }
}

/// Steps i-iv for one (station, outcome): returns the chosen importances,
/// the final weights, and the minimized validation MSPE.
pub fn solve_outer(ctx: &OuterContext, opts: &OuterOptions) -> Result<OuterSolution> {
    let k = ctx.x_train.k();
    if ctx.donors_val.len() != ctx.x_train.j() {
        return Err(Error::Config(format!(
            "{} donor series vs {} donor predictor columns",
            ctx.donors_val.len(),
            ctx.x_train.j()
        )));
    }
    let mut evaluator = Evaluator {
        ctx,
        inner: opts.inner,
        evaluations: 0,
    };

    let uniform = PredictorImportance::uniform(k);
    let (uniform_mspe, uniform_weights) = evaluator.eval(&uniform)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts: Vec<PredictorImportance> = vec![uniform.clone()];
    for _ in 1..opts.starts.max(1) {
        // Dirichlet(1) via normalized exponentials.
        let draws: Vec<f64> = (0..k)
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        starts.push(PredictorImportance::floored(&draws, opts.importance_floor));
    }

    let mut best_v = uniform.clone();
    let mut best_mspe = uniform_mspe;
    let mut best_weights = uniform_weights;

    for start in starts {
        let mut v = start;
        let (mut f_v, mut w_v) = match evaluator.eval(&v) {
            Ok(r) => r,
            Err(_) => continue,
        };
        let mut budget = opts.eval_budget_per_start.saturating_sub(1);
        let mut step = opts.initial_step;
        while step >= opts.min_step && budget > 0 {
            let mut improved = false;
            let mut best_move: Option<(f64, PredictorImportance, WeightVector)> = None;
            for h in 0..k {
                if budget == 0 {
                    break;
                }
                // Shift mass toward predictor h...
                let toward: Vec<f64> = v
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| if i == h { x + step } else { x * (1.0 - step) })
                    .collect();
                // ...or away from it, spreading over the rest.
                let away: Vec<f64> = v
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| if i == h { x * (1.0 - step).max(0.0) } else { x })
                    .collect();
                for cand_raw in [toward, away] {
                    if budget == 0 {
                        break;
                    }
                    let cand = PredictorImportance::floored(&cand_raw, opts.importance_floor);
                    budget -= 1;
                    if let Ok((f_c, w_c)) = evaluator.eval(&cand) {
                        if f_c < f_v - 1e-15
                            && best_move.as_ref().map(|(bf, _, _)| f_c < *bf).unwrap_or(true)
                        {
                            best_move = Some((f_c, cand, w_c));
                        }
                    }
                }
            }
            if let Some((f_c, cand, w_c)) = best_move {
                v = cand;
                f_v = f_c;
                w_v = w_c;
                improved = true;
            }
            if !improved {
                step *= 0.5;
            }
        }
        if f_v < best_mspe {
            best_mspe = f_v;
            best_v = v;
            best_weights = w_v;
        }
    }

    let fell_back_to_uniform = best_mspe >= uniform_mspe;
    if fell_back_to_uniform {
        best_v = uniform;
        best_mspe = uniform_mspe;
    }

    // Step iv: recompute the weights with validation-period predictors.
    let final_sol = solve_inner(&ctx.x_val.x1, &ctx.x_val.x0, best_v.values(), &opts.inner)?;

    Ok(OuterSolution {
        importance: best_v,
        weights: final_sol.weights,
        training_weights: best_weights,
        validation_mspe: best_mspe,
        uniform_mspe,
        fell_back_to_uniform,
        starts: opts.starts.max(1),
        evaluations: evaluator.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::linalg::Mat;
    use crate::scm::predictors::PredictorKind;

    fn matrices(x1: Vec<f64>, rows: Vec<Vec<f64>>, kinds: Vec<PredictorKind>) -> PredictorMatrices {
        let x0 = Mat::from_rows(rows);
        PredictorMatrices {
            kinds,
            x1_raw: x1.clone(),
            x0_raw: x0.clone(),
            scale: vec![1.0; x1.len()],
            x1,
            x0,
        }
    }

    #[test]
    fn identical_donor_drives_validation_mspe_to_zero() {
        // Donor 1 matches the treated day in predictors and outcome.
        let x = matrices(
            vec![1.0, 2.0],
            vec![vec![1.0, 4.0], vec![2.0, 8.0]],
            vec![PredictorKind::EntryRidership, PredictorKind::ExitRidership],
        );
        let treated = [5.0, 6.0, 7.0];
        let d1 = [5.0, 6.0, 7.0];
        let d2 = [9.0, 1.0, 3.0];
        let ctx = OuterContext {
            x_train: &x,
            x_val: &x,
            treated_val: &treated,
            donors_val: vec![&d1, &d2],
        };
        let opts = OuterOptions {
            starts: 5,
            seed: 3,
            ..OuterOptions::default()
        };
        let sol = solve_outer(&ctx, &opts).unwrap();
        assert!(sol.validation_mspe < 1e-10, "mspe {}", sol.validation_mspe);
        assert!(sol.weights.values()[0] > 0.999);
    }

    /// Predictor 1 is pure noise; predictor 2 predicts the outcome. The
    /// chosen importances must favour predictor 2, and the searched optimum
    /// must at least match a 1-d grid scan over v = (a, 1-a).
    #[test]
    fn noise_predictor_gets_less_importance_than_signal() {
        let day_levels = [4.0, -2.0, 1.0, 3.0, -3.0];
        let noise = [0.3, -0.8, 0.9, -0.2, 0.5];
        let treated_level = 2.0;
        let x = matrices(
            vec![0.11, treated_level],
            vec![noise.to_vec(), day_levels.to_vec()],
            vec![PredictorKind::WindSpeed, PredictorKind::EntryRidership],
        );
        let treated: Vec<f64> = (0..12).map(|t| treated_level + (t as f64) * 0.01).collect();
        let donors: Vec<Vec<f64>> = day_levels
            .iter()
            .map(|l| (0..12).map(|t| l + (t as f64) * 0.01).collect())
            .collect();
        let donor_refs: Vec<&[f64]> = donors.iter().map(|d| d.as_slice()).collect();
        let ctx = OuterContext {
            x_train: &x,
            x_val: &x,
            treated_val: &treated,
            donors_val: donor_refs,
        };
        let opts = OuterOptions {
            starts: 8,
            seed: 17,
            ..OuterOptions::default()
        };
        let sol = solve_outer(&ctx, &opts).unwrap();
        let v = sol.importance.values();
        assert!(v[0] < v[1], "noise importance {} vs signal {}", v[0], v[1]);

        // Independent 1-d scan.
        let mut grid_best = f64::INFINITY;
        let mut evaluator = Evaluator {
            ctx: &ctx,
            inner: InnerOptions::default(),
            evaluations: 0,
        };
        for i in 1..100 {
            let a = i as f64 / 100.0;
            let cand = PredictorImportance::new(vec![a, 1.0 - a]).unwrap();
            let (f, _) = evaluator.eval(&cand).unwrap();
            if f < grid_best {
                grid_best = f;
            }
        }
        assert!(
            sol.validation_mspe <= grid_best + 1e-9,
            "search {} vs grid {}",
            sol.validation_mspe,
            grid_best
        );
    }

    #[test]
    fn returned_mspe_never_exceeds_uniform() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for case in 0..15 {
            let k = rng.random_range(2..=5);
            let j = rng.random_range(2..=6);
            let n = 10;
            let x1: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rows: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..j).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let x = matrices(x1, rows, PredictorKind::ALL[..k].to_vec());
            let treated: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let donors: Vec<Vec<f64>> = (0..j)
                .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let donor_refs: Vec<&[f64]> = donors.iter().map(|d| d.as_slice()).collect();
            let ctx = OuterContext {
                x_train: &x,
                x_val: &x,
                treated_val: &treated,
                donors_val: donor_refs,
            };
            let opts = OuterOptions {
                starts: 6,
                seed: case,
                eval_budget_per_start: 150,
                ..OuterOptions::default()
            };
            let sol = solve_outer(&ctx, &opts).unwrap();
            assert!(
                sol.validation_mspe <= sol.uniform_mspe + 1e-15,
                "case {case}: {} > {}",
                sol.validation_mspe,
                sol.uniform_mspe
            );
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let x = matrices(
            vec![0.5, 1.5, -0.5],
            vec![
                vec![0.2, 0.9, -0.3],
                vec![1.0, 2.0, 1.2],
                vec![-0.4, 0.1, -0.9],
            ],
            PredictorKind::ALL[..3].to_vec(),
        );
        let treated = [1.0, 2.0, 1.5, 0.5];
        let d1 = [0.9, 2.1, 1.4, 0.6];
        let d2 = [1.5, 1.0, 0.5, 1.5];
        let d3 = [0.1, 3.0, 2.5, -0.5];
        let ctx = OuterContext {
            x_train: &x,
            x_val: &x,
            treated_val: &treated,
            donors_val: vec![&d1, &d2, &d3],
        };
        let opts = OuterOptions {
            starts: 10,
            seed: 99,
            ..OuterOptions::default()
        };
        let a = solve_outer(&ctx, &opts).unwrap();
        let b = solve_outer(&ctx, &opts).unwrap();
        assert_eq!(a.importance.values(), b.importance.values());
        assert_eq!(a.weights.values(), b.weights.values());
        assert_eq!(a.validation_mspe, b.validation_mspe);
    }
}
