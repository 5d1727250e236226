use crate::{Error, Result};

/// Feasibility tolerance on simplex constraints.
pub const SIMPLEX_TOL: f64 = 1e-10;

/// Euclidean projection of `v` onto the probability simplex
/// (Duchi et al. 2008).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    debug_assert!(n > 0);
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cssv = 0.0;
    let mut rho = 0usize;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cssv += ui;
        let t = (cssv - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            rho = i + 1;
            theta = t;
        }
    }
    if rho == 0 {
        // All mass collapses onto the largest coordinate.
        let (idx, _) = v
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
            .unwrap();
        let mut out = vec![0.0; n];
        out[idx] = 1.0;
        return out;
    }
    v.iter().map(|&vi| (vi - theta).max(0.0)).collect()
}

/// Donor weights: non-negative, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("empty weight vector".into()));
        }
        let sum: f64 = values.iter().sum();
        if values.iter().any(|&v| v < -SIMPLEX_TOL) || (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Config(format!(
                "weights violate the simplex constraints (sum {sum:.12})"
            )));
        }
        Ok(WeightVector(values))
    }

    pub fn uniform(j: usize) -> Self {
        WeightVector(vec![1.0 / j as f64; j])
    }

    pub fn vertex(j: usize, at: usize) -> Self {
        let mut v = vec![0.0; j];
        v[at] = 1.0;
        WeightVector(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Predictor importances: strictly positive, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorImportance(Vec<f64>);

impl PredictorImportance {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("empty importance vector".into()));
        }
        let sum: f64 = values.iter().sum();
        if values.iter().any(|&v| v <= 0.0) || (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Config(format!(
                "importances violate the simplex constraints (sum {sum:.12})"
            )));
        }
        Ok(PredictorImportance(values))
    }

    pub fn uniform(k: usize) -> Self {
        PredictorImportance(vec![1.0 / k as f64; k])
    }

    /// Clamp to the floor and renormalize, keeping every predictor in play.
    pub fn floored(raw: &[f64], floor: f64) -> Self {
        let clamped: Vec<f64> = raw.iter().map(|&v| v.max(floor)).collect();
        let sum: f64 = clamped.iter().sum();
        PredictorImportance(clamped.into_iter().map(|v| v / sum).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
