//! Spectral norm of the random sign matrix
//! `M_ij = sum_k (xi_ijk eps_ijk - xi_ikj eps_ikj)`.
//!
//! `p` is the observation rate per user-item pair: each ordered triple
//! `(i, j, k)`, `j != k`, is present with probability `p / (d2 - 1)`, so
//! every row pair `(i, j)` expects `p` comparisons where it is preferred.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{mean_and_stderr, power_fit, ScalingPoint, ScalingReport, ScalingSeries};
use crate::altsvm::mix_seed;
use crate::error::{Error, Result};

const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITERS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignMatrixExperiment {
    pub d1: usize,
    pub d2: usize,
    pub p: f64,
    pub trials: usize,
    pub seed: u64,
}

impl SignMatrixExperiment {
    pub fn validate(&self) -> Result<()> {
        if self.d1 == 0 || self.d2 < 2 {
            return Err(Error::InvalidConfig(format!(
                "need d1 >= 1 and d2 >= 2, got {}x{}",
                self.d1, self.d2
            )));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidConfig(format!(
                "observation rate {} outside [0, 1]",
                self.p
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("need at least one trial".into()));
        }
        Ok(())
    }
}

/// One draw of `M`.
pub fn sign_matrix(d1: usize, d2: usize, p: f64, seed: u64) -> Array2<f64> {
    let mut m = Array2::zeros((d1, d2));
    let q = p / (d2 - 1) as f64;
    if q <= 0.0 {
        return m;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_user = d2 * (d2 - 1);
    let total = (d1 * per_user) as u64;
    let skip = Geometric::new(q.min(1.0)).expect("q in (0, 1]");
    let mut idx = skip.sample(&mut rng);
    while idx < total {
        let at = idx as usize;
        let (i, rest) = (at / per_user, at % per_user);
        let (j, kk) = (rest / (d2 - 1), rest % (d2 - 1));
        let k = kk + usize::from(kk >= j);
        let eps = if rng.random::<bool>() { 1.0 } else { -1.0 };
        m[[i, j]] += eps;
        m[[i, k]] -= eps;
        idx = idx.saturating_add(1).saturating_add(skip.sample(&mut rng));
    }
    m
}

fn power_iteration(m: &Array2<f64>, seed: u64) -> Option<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Array1<f64> = Array1::from_shape_simple_fn(m.ncols(), || rng.sample(StandardNormal));
    x /= x.dot(&x).sqrt();
    let mut sigma = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let y = m.dot(&x);
        let next = y.dot(&y).sqrt();
        if next == 0.0 {
            return Some(0.0);
        }
        let z = m.t().dot(&y);
        let norm = z.dot(&z).sqrt();
        if norm == 0.0 {
            return Some(next);
        }
        x = z / norm;
        if (next - sigma).abs() <= POWER_TOL * next {
            // one more Rayleigh evaluation at the refined vector
            let y = m.dot(&x);
            return Some(y.dot(&y).sqrt().max(next));
        }
        sigma = next;
    }
    None
}

/// Largest singular value by power iteration on `M^T M`, restarted once
/// from a fresh random vector before giving up.
pub fn spectral_norm(m: &Array2<f64>, seed: u64) -> Result<f64> {
    if m.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    power_iteration(m, seed)
        .or_else(|| power_iteration(m, mix_seed(&[seed, 1])))
        .ok_or(Error::NoConvergence {
            iterations: POWER_MAX_ITERS,
        })
}

/// `|M|` for every trial, in trial order.
pub fn sign_matrix_norms(spec: &SignMatrixExperiment) -> Result<Vec<f64>> {
    spec.validate()?;
    (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let seed = mix_seed(&[spec.seed, t as u64]);
            spectral_norm(&sign_matrix(spec.d1, spec.d2, spec.p, seed), seed ^ 0xA11CE)
        })
        .collect()
}

pub fn m_norm_point(spec: &SignMatrixExperiment, x: f64) -> Result<ScalingPoint> {
    let norms = sign_matrix_norms(spec)?;
    let (mean, stderr) = mean_and_stderr(&norms);
    Ok(ScalingPoint {
        x,
        mean,
        stderr,
        n: norms.len(),
    })
}

/// Two sweeps with square `d x d` matrices: `d` over `d_grid` at rate
/// `p_fixed`, and `p` over `p_grid` at size `d_fixed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MNormParams {
    pub d_grid: Vec<usize>,
    pub p_fixed: f64,
    pub p_grid: Vec<f64>,
    pub d_fixed: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for MNormParams {
    fn default() -> Self {
        Self {
            d_grid: vec![64, 128, 256],
            p_fixed: 0.05,
            p_grid: vec![0.05, 0.1, 0.2, 0.5],
            d_fixed: 256,
            trials: 20,
            seed: 0,
        }
    }
}

pub fn m_norm_experiment(params: &MNormParams) -> Result<ScalingReport> {
    let spec = |d: usize, p: f64, series: u64, g: usize| SignMatrixExperiment {
        d1: d,
        d2: d,
        p,
        trials: params.trials,
        seed: mix_seed(&[params.seed, series, g as u64]),
    };
    let mut by_d = Vec::new();
    for (g, &d) in params.d_grid.iter().enumerate() {
        by_d.push(m_norm_point(&spec(d, params.p_fixed, 0, g), d as f64)?);
    }
    let mut by_p = Vec::new();
    for (g, &p) in params.p_grid.iter().enumerate() {
        by_p.push(m_norm_point(&spec(params.d_fixed, p, 1, g), p)?);
    }
    let series = |name: &str, x_label: &str, points: Vec<ScalingPoint>| ScalingSeries {
        name: name.into(),
        x_label: x_label.into(),
        y_label: "mean spectral norm".into(),
        fit: power_fit(&points),
        points,
    };
    Ok(ScalingReport {
        experiment: "m-norm".into(),
        params: serde_json::to_value(params).expect("params serialize"),
        series: vec![
            series("norm_vs_d", "d", by_d),
            series("norm_vs_p", "p", by_p),
        ],
    })
}
