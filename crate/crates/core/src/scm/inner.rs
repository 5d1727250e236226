use super::linalg::Mat;
use super::simplex::{project_to_simplex, WeightVector};
use crate::{Error, Result};

/// Inner solver controls.
#[derive(Debug, Clone, Copy)]
pub struct InnerOptions {
    pub max_iterations: usize,
    /// Target relative optimality gap; the hard contract is 1e-8.
    pub tolerance: f64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        InnerOptions {
            max_iterations: 200_000,
            tolerance: 1e-10,
        }
    }
}

/// Solution of the donor-weight problem.
#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub weights: WeightVector,
    /// Importance-weighted sum of squared predictor residuals at the
    /// returned weights.
    pub objective: f64,
    /// Certified optimality gap (upper bound on objective minus optimum).
    pub gap: f64,
    pub iterations: usize,
}

/// The inner objective: sum_h v_h * (x1_h - (X0 c)_h)^2.
pub fn weighted_ssr(x1: &[f64], x0: &Mat, v: &[f64], c: &[f64]) -> f64 {
    let fitted = x0.mul_vec(c);
    x1.iter()
        .zip(&fitted)
        .zip(v)
        .map(|((a, f), w)| w * (a - f) * (a - f))
        .sum()
}

/// Minimize the importance-weighted quadratic fit of the treated unit's
/// predictors over donor weights on the probability simplex.
///
/// Accelerated projected gradient from uniform weights, certified by the
/// Frank-Wolfe gap; the result is safeguarded against the uniform and every
/// single-donor vertex so it never loses to either.
pub fn solve_inner(x1: &[f64], x0: &Mat, v: &[f64], opts: &InnerOptions) -> Result<InnerSolution> {
    let k = x1.len();
    let j = x0.cols();
    if x0.rows() != k || v.len() != k {
        return Err(Error::Config(format!(
            "shape mismatch: x1 has {k} predictors, X0 is {}x{}, v has {}",
            x0.rows(),
            x0.cols(),
            v.len()
        )));
    }
    if j == 0 {
        return Err(Error::Config("empty donor pool".into()));
    }
    if j == 1 {
        let weights = WeightVector::vertex(1, 0);
        let objective = weighted_ssr(x1, x0, v, weights.values());
        return Ok(InnerSolution {
            weights,
            objective,
            gap: 0.0,
            iterations: 0,
        });
    }

    // Normal-equation pieces: Q = X0' diag(v) X0, b = X0' diag(v) x1.
    let mut q = Mat::zeros(j, j);
    let mut b = vec![0.0; j];
    for h in 0..k {
        let row = x0.row(h);
        let w = v[h];
        for a in 0..j {
            b[a] += w * row[a] * x1[h];
            for c in a..j {
                let val = q.at(a, c) + w * row[a] * row[c];
                q.set(a, c, val);
            }
        }
    }
    for a in 0..j {
        for c in 0..a {
            q.set(a, c, q.at(c, a));
        }
    }

    let grad = |c: &[f64], out: &mut Vec<f64>| {
        *out = q.mul_vec(c);
        for a in 0..j {
            out[a] = 2.0 * (out[a] - b[a]);
        }
    };
    // Frank-Wolfe gap: grad . c - min_a grad_a upper-bounds f(c) - f*.
    let fw_gap = |c: &[f64], g: &[f64]| {
        let at_c: f64 = g.iter().zip(c).map(|(a, b)| a * b).sum();
        let best = g.iter().cloned().fold(f64::INFINITY, f64::min);
        (at_c - best).max(0.0)
    };

    // Lipschitz constant via power iteration on Q.
    let mut pv = vec![1.0 / (j as f64).sqrt(); j];
    let mut lambda = 0.0;
    for _ in 0..80 {
        let next = q.mul_vec(&pv);
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            break;
        }
        lambda = norm;
        pv = next.into_iter().map(|x| x / norm).collect();
    }
    let step = 1.0 / (2.0 * lambda * 1.0001).max(1e-12);

    let objective = |c: &[f64]| weighted_ssr(x1, x0, v, c);

    let mut c = vec![1.0 / j as f64; j];
    let mut c_prev = c.clone();
    let mut f_c = objective(&c);
    let mut momentum = 0.0f64;
    let mut g = Vec::with_capacity(j);
    let mut iterations = 0usize;
    let mut gap = f64::INFINITY;
    for it in 0..opts.max_iterations {
        iterations = it + 1;
        // Nesterov extrapolation with restart on objective increase.
        let y: Vec<f64> = c
            .iter()
            .zip(&c_prev)
            .map(|(a, p)| a + momentum * (a - p))
            .collect();
        grad(&y, &mut g);
        let trial: Vec<f64> = y.iter().zip(&g).map(|(a, gr)| a - step * gr).collect();
        let next = project_to_simplex(&trial);
        let f_next = objective(&next);
        if f_next > f_c {
            momentum = 0.0;
            c_prev = c.clone();
            // Plain projected-gradient fallback step from c.
            grad(&c, &mut g);
            let trial: Vec<f64> = c.iter().zip(&g).map(|(a, gr)| a - step * gr).collect();
            let fallback = project_to_simplex(&trial);
            let f_fb = objective(&fallback);
            if f_fb <= f_c {
                c = fallback;
                f_c = f_fb;
            }
        } else {
            momentum = (it as f64) / (it as f64 + 3.0);
            c_prev = std::mem::replace(&mut c, next);
            f_c = f_next;
        }
        grad(&c, &mut g);
        gap = fw_gap(&c, &g);
        if gap <= opts.tolerance * f_c.abs().max(1.0) {
            break;
        }
    }

    // Safeguard: never worse than uniform weights or any single donor.
    let mut best = (c.clone(), f_c);
    let uniform = vec![1.0 / j as f64; j];
    let f_uniform = objective(&uniform);
    if f_uniform < best.1 {
        best = (uniform, f_uniform);
    }
    for a in 0..j {
        let mut vertex = vec![0.0; j];
        vertex[a] = 1.0;
        let f_v = objective(&vertex);
        if f_v < best.1 {
            best = (vertex, f_v);
        }
    }
    let (c, f_c) = best;
    grad(&c, &mut g);
    gap = fw_gap(&c, &g);

    if gap > 1e-8 * f_c.abs().max(1.0) {
        return Err(Error::NoConvergence { gap, iterations });
    }
    Ok(InnerSolution {
        weights: WeightVector::new(c)?,
        objective: f_c,
        gap,
        iterations,
    })
}
